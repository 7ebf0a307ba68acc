"""Frequency points, point classification and the reduced boundary-value symbol.

Array kernels (``symbol_arrays``, ``mode_arrays``, ``boundary_arrays``) broadcast over
arrays of (gamma, delta, eta); the scalar API wraps them for single points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .state import BasicState, derive_constants

POLE_TOL = 1e-6
BRANCH_STEP = 1e-7


def boundary_matrix(state: BasicState) -> np.ndarray:
    """Constant 3x4 matrix acting on (q, v1, Hc2, E) in the boundary conditions."""
    return np.array([[0.0, -1.0, 0.0, 0.0], [1.0, 0.0, -state.Hc, 0.0], [0.0, 0.0, 0.0, 1.0]])


class PoleError(ValueError):
    def __init__(self, pole: str, distance: float):
        super().__init__(f"point lies on pole {pole} (distance {distance:.3e})")
        self.pole = pole
        self.distance = distance


class SingularElimination(ValueError):
    pass


class BranchAmbiguityError(ValueError):
    pass


@dataclass(frozen=True)
class FrequencyPoint:
    gamma: float
    delta: float
    eta: float

    def __post_init__(self):
        for name in ("gamma", "delta", "eta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.k == 0:
            raise ValueError("the origin is not a frequency point")

    @property
    def tau(self) -> complex:
        return complex(self.gamma, self.delta)

    @property
    def k(self) -> float:
        return math.sqrt(self.gamma**2 + self.delta**2 + self.eta**2)

    def mu(self, state: BasicState) -> complex:
        return complex(self.gamma, self.delta + state.v * self.eta)

    def on_sigma(self, tol: float = 1e-12) -> bool:
        return abs(self.k - 1.0) <= tol

    def as_array(self) -> np.ndarray:
        return np.array([self.gamma, self.delta, self.eta])

    def scaled(self, r: float) -> "FrequencyPoint":
        return FrequencyPoint(r * self.gamma, r * self.delta, r * self.eta)


def normalize_to_sigma(raw) -> FrequencyPoint:
    g, d, e = (float(x) for x in raw)
    norm = math.sqrt(g * g + d * d + e * e)
    if norm == 0:
        raise ValueError("cannot normalize the zero vector")
    if g < 0:
        raise ValueError("gamma must be nonnegative")
    return FrequencyPoint(g / norm, d / norm, e / norm)


def _split(pts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pts = np.asarray(pts, dtype=float)
    return pts[..., 0], pts[..., 1], pts[..., 2]


# ---------------------------------------------------------------------------
# critical sets on the boundary circle


class PointTag(str, Enum):
    INTERIOR = "Interior"
    BOUNDARY_LOP_OK = "BoundaryLopOK"
    BOUNDARY_LOP_ROOT = "BoundaryLopRoot"
    OMEGA1_ZERO_A = "Omega1ZeroA"
    OMEGA1_ZERO_B = "Omega1ZeroB"
    OMEGA2_ZERO = "Omega2Zero"
    POLE_P1 = "PoleP1"
    POLE_P2 = "PoleP2"
    POLE_P3 = "PoleP3"


POLE_TAGS = (PointTag.POLE_P1, PointTag.POLE_P2, PointTag.POLE_P3)
ZERO_TAGS = (PointTag.OMEGA1_ZERO_A, PointTag.OMEGA1_ZERO_B, PointTag.OMEGA2_ZERO)


def _speed_points(speeds, v: float) -> np.ndarray:
    """Points of the boundary circle where delta + v eta = c eta, both antipodes."""
    out = []
    for c in speeds:
        d, e = c - v, 1.0
        n = math.hypot(d, e)
        out.append((0.0, d / n, e / n))
        out.append((0.0, -d / n, -e / n))
    return np.array(out)


def critical_points(state: BasicState) -> dict[PointTag, np.ndarray]:
    dc = derive_constants(state)
    eps = state.eps
    n3 = math.hypot(1.0, eps)
    return {
        PointTag.POLE_P1: _speed_points([0.0], state.v),
        PointTag.POLE_P2: _speed_points([dc.fast_interface_speed, -dc.fast_interface_speed], state.v),
        PointTag.POLE_P3: np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]),
        PointTag.OMEGA1_ZERO_A: _speed_points([dc.alfven_speed, -dc.alfven_speed], state.v),
        PointTag.OMEGA1_ZERO_B: _speed_points(
            [1.0 / math.sqrt(dc.alpha * state.rho), -1.0 / math.sqrt(dc.alpha * state.rho)], state.v
        ),
        PointTag.OMEGA2_ZERO: np.array(
            [[0.0, 1 / n3, eps / n3], [0.0, -1 / n3, -eps / n3], [0.0, -1 / n3, eps / n3], [0.0, 1 / n3, -eps / n3]]
        ),
    }


def critical_distances(state: BasicState, pts) -> dict[PointTag, np.ndarray]:
    """Chord distance from each point (on Sigma) to each critical set."""
    pts = np.asarray(pts, dtype=float)
    return {
        tag: np.min(np.linalg.norm(pts[..., None, :] - cps, axis=-1), axis=-1)
        for tag, cps in critical_points(state).items()
    }


def nearest_critical(state: BasicState, pts) -> tuple[np.ndarray, np.ndarray]:
    """Distance to, and tag index of, the nearest pole or omega-zero point."""
    dists = critical_distances(state, pts)
    tags = list(dists)
    stack = np.stack([dists[t] for t in tags], axis=-1)
    return stack.min(axis=-1), stack.argmin(axis=-1)


# ---------------------------------------------------------------------------
# array kernels


@dataclass
class SymbolArrays:
    gamma: np.ndarray
    delta: np.ndarray
    eta: np.ndarray
    tau: np.ndarray
    mu: np.ndarray
    k: np.ndarray
    num: np.ndarray  # mu^2 rho + eta^2 H^2
    den: np.ndarray  # (mu^2 rho alpha + eta^2) H^2 + mu^2 rho
    a12: np.ndarray
    a21: np.ndarray
    a34: np.ndarray
    a43: np.ndarray
    w1sq: np.ndarray
    w2sq: np.ndarray


def _plasma_parts(state: BasicState, mu, eta):
    rho, h2, a = state.rho, state.H**2, state.alpha
    num = mu**2 * rho + eta**2 * h2
    sq = a * rho * mu**2 + eta**2
    den = sq * h2 + mu**2 * rho
    return num, sq, den


def symbol_arrays(state: BasicState, gamma, delta, eta) -> SymbolArrays:
    g, d, e = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (gamma, delta, eta)))
    tau = g + 1j * d
    mu = tau + 1j * state.v * e
    k = np.sqrt(g**2 + d**2 + e**2)
    eps = state.eps
    num, sq, den = _plasma_parts(state, mu, e)
    with np.errstate(divide="ignore", invalid="ignore"):
        a12 = -num / mu
        a21 = -mu * sq / den
        a34 = -(eps**2 * tau**2 + e**2) / (eps * tau)
        w1sq = num * sq / den
    a43 = -eps * tau
    w2sq = eps**2 * tau**2 + e**2
    return SymbolArrays(g, d, e, tau, mu, k, num, den, a12, a21, a34, a43, w1sq, w2sq)


def _w1sq(state, g, d, e):
    mu = g + 1j * (d + state.v * e)
    num, sq, den = _plasma_parts(state, mu, e)
    with np.errstate(divide="ignore", invalid="ignore"):
        return num * sq / den


def _w2sq(state, g, d, e):
    tau = g + 1j * d
    return state.eps**2 * tau**2 + e**2


def _align(z, ref):
    """Flip the sign of z where -z is closer to ref."""
    return np.where(np.abs(z - ref) <= np.abs(z + ref), z, -z)


def _continuous_sqrt(sqfn, state, g, d, e, k):
    """Square root with Re >= 0, the sign at gamma = 0 inherited from gamma + h."""
    with np.errstate(invalid="ignore"):
        w0 = np.sqrt(sqfn(state, g, d, e) + 0j)
        h = BRANCH_STEP * k
        w1 = np.sqrt(sqfn(state, g + h, d, e) + 0j)
        w2 = np.sqrt(sqfn(state, g + 2 * h, d, e) + 0j)
        s1 = _align(w0, w1)
        s2 = _align(w0, w2)
        ambiguous = (np.abs(s1 - s2) > 1e-9 * np.abs(w0)) & (np.abs(w0) > 1e-6 * k)
    return s1, ambiguous


def _chi_rule(chisq):
    """Root with Re > 0, or Im > 0 when the real part vanishes."""
    with np.errstate(invalid="ignore"):
        chi = np.sqrt(chisq + 0j)
    re_zero = np.abs(chi.real) <= 1e-13 * np.abs(chi)
    flip = (chi.real < 0) & ~re_zero | (re_zero & (chi.imag < 0))
    return np.where(flip, -chi, chi)


@dataclass
class ModeArrays:
    sym: SymbolArrays
    omega1: np.ndarray
    omega2: np.ndarray
    chi: np.ndarray
    chi_num: np.ndarray  # chi * (mu^2 rho + eta^2 H^2) = -mu chi a12
    chi_omega1: np.ndarray
    ambiguous: np.ndarray
    chi_matches_continuity: np.ndarray
    eps: float

    @property
    def mu_chi_a12(self):
        return -self.chi_num

    @property
    def mu_chi_omega1(self):
        return self.sym.mu * self.chi_omega1

    def vectors(self):
        """e1, e2, e3, e4 stacked on the last axis, shape (..., 4)."""
        s = self.sym
        z = np.zeros_like(s.tau)
        p = self.mu_chi_a12
        q = self.mu_chi_omega1
        et = self.eps * s.tau
        e1 = np.stack([p, -q, z, z], axis=-1)
        e2 = np.stack([z, z, self.omega2, et], axis=-1)
        e3 = np.stack([p, q, z, z], axis=-1)
        e4 = np.stack([z, z, self.omega2, -et], axis=-1)
        return e1, e2, e3, e4


def _chi_and_products(state, g, d, e, omega1):
    s_mu = g + 1j * (d + state.v * e)
    num, sq, den = _plasma_parts(state, s_mu, e)
    with np.errstate(divide="ignore", invalid="ignore"):
        chi = _chi_rule(den / num)
        chi_num = np.where(num == 0, 0.0, chi * num)
        direct = chi * omega1
        root = np.sqrt(sq + 0j)
    return chi, chi_num, direct, root, num, den


def mode_arrays(state: BasicState, gamma, delta, eta) -> ModeArrays:
    sym = symbol_arrays(state, gamma, delta, eta)
    g, d, e, k = sym.gamma, sym.delta, sym.eta, sym.k
    omega1, amb1 = _continuous_sqrt(_w1sq, state, g, d, e, k)
    omega2, amb2 = _continuous_sqrt(_w2sq, state, g, d, e, k)
    chi, chi_num, direct, root, num, den = _chi_and_products(state, g, d, e, omega1)

    # chi*omega1 = +-sqrt(alpha rho mu^2 + eta^2); the sign comes from the direct
    # product where it is well conditioned, else from gamma + h
    k2 = k**2
    good = np.isfinite(direct) & (np.abs(num) > 1e-8 * k2) & (np.abs(den) > 1e-8 * k2)
    h = 10 * BRANCH_STEP * k
    w1h = np.sqrt(_w1sq(state, g + h, d, e) + 0j)
    chih, _, direct_h, _, _, _ = _chi_and_products(state, g + h, d, e, w1h)
    ref = np.where(good, direct, direct_h)
    chi_omega1 = _align(root, ref)

    # record whether the chi rule agrees with the gamma-limit of chi
    with np.errstate(invalid="ignore"):
        chi_cont = _align(chi, chih)
        matches = np.abs(chi_cont - chi) <= 1e-6 * np.maximum(np.abs(chi), 1e-300)

    return ModeArrays(sym, omega1, omega2, chi, chi_num, chi_omega1, amb1 | amb2, matches, state.eps)


def lopatinskii_arrays(state: BasicState, modes: ModeArrays) -> np.ndarray:
    s = modes.sym
    return s.mu * state.eps * s.tau * (modes.mu_chi_a12 - modes.chi_omega1 * modes.omega2 * state.Hc**2)


def reduced_root_arrays(state: BasicState, modes: ModeArrays) -> np.ndarray:
    return -modes.sym.num - modes.omega1 * modes.omega2 * state.Hc**2


def spurious_factor_arrays(state: BasicState, modes: ModeArrays) -> np.ndarray:
    return -modes.sym.num + modes.omega1 * modes.omega2 * state.Hc**2


def system_matrix_arrays(sym: SymbolArrays) -> np.ndarray:
    shape = sym.tau.shape
    A = np.zeros(shape + (4, 4), dtype=complex)
    A[..., 0, 1] = sym.a12
    A[..., 1, 0] = sym.a21
    A[..., 2, 3] = sym.a34
    A[..., 3, 2] = sym.a43
    return A


@dataclass
class BoundaryArrays:
    b: np.ndarray  # (..., 3)
    Q: np.ndarray  # (..., 3, 3)
    theta: np.ndarray
    beta: np.ndarray  # (..., 2, 4)
    ell: np.ndarray  # (..., 4)


def boundary_arrays(state: BasicState, gamma, delta, eta) -> BoundaryArrays:
    g, d, e = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (gamma, delta, eta)))
    tau = g + 1j * d
    mu = tau + 1j * state.v * e
    k = np.sqrt(g**2 + d**2 + e**2)
    ehc = state.eps * state.Hc
    z = np.zeros_like(tau)
    b = np.stack([mu, z, ehc * tau], axis=-1)
    Q = np.stack(
        [
            np.stack([z, k + z, z], axis=-1),
            np.stack([-ehc * tau, z, mu], axis=-1),
            np.stack([np.conj(mu), z, ehc * np.conj(tau)], axis=-1),
        ],
        axis=-2,
    ) / k[..., None, None]
    QM = Q @ boundary_matrix(state)
    theta = (np.abs(mu) ** 2 + ehc**2 * np.abs(tau) ** 2) / k
    return BoundaryArrays(b, Q, theta, QM[..., :2, :], QM[..., 2, :])


# ---------------------------------------------------------------------------
# scalar API


@dataclass(frozen=True)
class PointClass:
    tag: PointTag
    distance: float


def classify_point(state: BasicState, pt: FrequencyPoint, tol: float = POLE_TOL) -> PointClass:
    """Assign exactly one tag; poles take precedence over omega-zero sets."""
    dists = critical_distances(state, pt.as_array())
    for group in (POLE_TAGS, ZERO_TAGS):
        best = min(group, key=lambda t: float(dists[t]))
        if float(dists[best]) <= tol:
            return PointClass(best, float(dists[best]))
    if pt.gamma > tol:
        return PointClass(PointTag.INTERIOR, pt.gamma)
    modes = mode_arrays(state, pt.gamma, pt.delta, pt.eta)
    delta_abs = float(abs(lopatinskii_arrays(state, modes)))
    tag = PointTag.BOUNDARY_LOP_ROOT if delta_abs <= tol else PointTag.BOUNDARY_LOP_OK
    return PointClass(tag, delta_abs)


def _check_poles(state: BasicState, pt: FrequencyPoint, tol: float = POLE_TOL, poles=POLE_TAGS):
    dists = critical_distances(state, normalize_to_sigma(pt.as_array()).as_array())
    for tag in poles:
        if float(dists[tag]) <= tol:
            raise PoleError(tag.value[-2:], float(dists[tag]))


@dataclass(frozen=True)
class SymbolCoefficients:
    a12: complex
    a21: complex
    a34: complex
    a43: complex

    def as_tuple(self):
        return (self.a12, self.a21, self.a34, self.a43)


def symbol_coefficients(state: BasicState, pt: FrequencyPoint) -> SymbolCoefficients:
    _check_poles(state, pt)
    s = symbol_arrays(state, pt.gamma, pt.delta, pt.eta)
    return SymbolCoefficients(complex(s.a12), complex(s.a21), complex(s.a34), complex(s.a43))


def _solve_reduction(L: np.ndarray, diff_rows, diff_cols, alg_rows, alg_cols, what: str) -> np.ndarray:
    Lyy = L[np.ix_(alg_rows, alg_cols)]
    scale = max(np.abs(Lyy).max(), 1e-300)
    s = np.linalg.svd(Lyy, compute_uv=False)
    if s[-1] <= 1e-12 * scale:
        raise SingularElimination(f"{what} algebraic block is singular")
    Lyx = L[np.ix_(alg_rows, diff_cols)]
    Ldx = L[np.ix_(diff_rows, diff_cols)]
    Ldy = L[np.ix_(diff_rows, alg_cols)]
    return -(Ldx - Ldy @ np.linalg.solve(Lyy, Lyx))


def plasma_symbol_matrix(state: BasicState, pt: FrequencyPoint) -> np.ndarray:
    """Zero-order part of the transformed plasma equations in unknowns (q, v1, v2, H1, H2).

    Rows: three algebraic equations, then the v1' and q' equations.
    """
    tau = pt.tau
    ie = 1j * pt.eta
    rho, v, H, a = state.rho, state.v, state.H, state.alpha
    return np.array(
        [
            [ie, 0, tau * rho + ie * rho * v, 0, -ie * H],
            [0, -ie * H, 0, tau + ie * v, 0],
            [-tau * a * H - ie * a * v * H, 0, -ie * H, 0, (tau + ie * v) * (1 + a * H**2)],
            [tau * a + ie * a * v, 0, ie, 0, -tau * a * H - ie * a * v * H],
            [0, tau * rho + ie * rho * v, 0, -ie * H, 0],
        ],
        dtype=complex,
    )


def vacuum_symbol_matrix(state: BasicState, pt: FrequencyPoint) -> np.ndarray:
    """Zero-order part of the transformed vacuum equations in unknowns (Hc2, E, Hc1).

    Rows: the algebraic equation, then the Hc2' and E' equations.
    """
    et = state.eps * pt.tau
    ie = 1j * pt.eta
    return np.array([[0, ie, et], [0, et, ie], [et, 0, 0]], dtype=complex)


def reduce_full_symbol(state: BasicState, pt: FrequencyPoint) -> SymbolCoefficients:
    """Re-derive the ODE coefficients by eliminating the algebraic unknowns numerically."""
    P = plasma_symbol_matrix(state, pt)
    # rows 3, 4 give v1' and q'; differential unknowns (q, v1)
    Rp = _solve_reduction(P, [3, 4], [0, 1], [0, 1, 2], [2, 3, 4], "plasma")
    # Rp[0] is v1' in terms of (q, v1); Rp[1] is q'
    Vm = vacuum_symbol_matrix(state, pt)
    Rv = _solve_reduction(Vm, [1, 2], [0, 1], [0], [2], "vacuum")
    # Rv[0] is Hc2' in terms of (Hc2, E); Rv[1] is E'
    return SymbolCoefficients(complex(Rp[1, 1]), complex(Rp[0, 0]), complex(Rv[0, 1]), complex(Rv[1, 0]))


def plasma_elimination_ratios(state: BasicState, pt: FrequencyPoint) -> dict[str, complex]:
    """Ratios H2/q, v2/q (at v1 = 0) and H1/v1 (at q = 0) from the algebraic plasma rows."""
    P = plasma_symbol_matrix(state, pt)
    Lyy = P[np.ix_([0, 1, 2], [2, 3, 4])]
    Lyx = P[np.ix_([0, 1, 2], [0, 1])]
    y = -np.linalg.solve(Lyy, Lyx)
    return {"H2/q": complex(y[2, 0]), "v2/q": complex(y[0, 0]), "H1/v1": complex(y[1, 1])}


def assemble_A(state: BasicState, pt: FrequencyPoint) -> np.ndarray:
    _check_poles(state, pt)
    return system_matrix_arrays(symbol_arrays(state, pt.gamma, pt.delta, pt.eta))


@dataclass(frozen=True)
class ModeDecomposition:
    omega1: complex
    omega2: complex
    chi: complex
    mu_chi_a12: complex
    chi_omega1: complex
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    e4: np.ndarray
    branch_certificate: dict


def eigen_modes(state: BasicState, pt: FrequencyPoint) -> ModeDecomposition:
    _check_poles(state, pt, poles=(PointTag.POLE_P1, PointTag.POLE_P3))
    m = mode_arrays(state, pt.gamma, pt.delta, pt.eta)
    if bool(m.ambiguous):
        raise BranchAmbiguityError(f"square-root branch is ambiguous at {pt}")
    e1, e2, e3, e4 = m.vectors()
    chi = complex(m.chi)
    if not np.isfinite(chi) or abs(m.sym.den) <= 1e-8 * pt.k**2:
        chi = 0j if abs(m.sym.den) <= abs(m.sym.num) else chi
    cert = {
        "omega_rule": "principal root, sign inherited from gamma + 1e-7 k" if pt.gamma == 0 else "principal root",
        "chi_rule": "Re > 0, else Im > 0",
        "chi_matches_gamma_limit": bool(m.chi_matches_continuity),
        "chi_omega1_sign": "direct product" if abs(m.sym.num) > 1e-8 and abs(m.sym.den) > 1e-8 else "gamma-limit",
    }
    return ModeDecomposition(
        complex(m.omega1),
        complex(m.omega2),
        chi,
        complex(m.mu_chi_a12),
        complex(m.chi_omega1),
        e1,
        e2,
        e3,
        e4,
        cert,
    )


@dataclass(frozen=True)
class BoundarySymbols:
    b: np.ndarray
    Q: np.ndarray
    theta: float
    beta: np.ndarray
    ell: np.ndarray
    M_matrix: np.ndarray


def boundary_symbols(state: BasicState, pt: FrequencyPoint) -> BoundarySymbols:
    ba = boundary_arrays(state, pt.gamma, pt.delta, pt.eta)
    return BoundarySymbols(ba.b, ba.Q, float(ba.theta), ba.beta, ba.ell, boundary_matrix(state))
