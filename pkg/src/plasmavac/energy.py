"""Exact decaying solutions of the frequency-domain boundary value problem and empirical energy bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .state import BasicState
from .symbol import FrequencyPoint, boundary_arrays, boundary_matrix, mode_arrays, system_matrix_arrays
from .symmetrizer import LAMBDA_MU, LAMBDA_TAU, POLE_MU, POLE_TAU, SymmetrizerBundle

DET_TOL = 1e-12


class NearSingular(ValueError):
    """The 2x2 boundary system is (numerically) singular: a root or a pole is close."""

    def __init__(self, det: float, point: FrequencyPoint):
        super().__init__(f"|det beta(e1 e2)| = {det:.3e} at {point}")
        self.det = det
        self.point = point


class DivergentNorm(ValueError):
    pass


@dataclass(frozen=True)
class StableSystem:
    """Everything linear in g_hat at one frequency point."""

    point: FrequencyPoint
    omega: np.ndarray  # (omega1, omega2)
    E: np.ndarray  # 4x2, columns e1, e2
    beta: np.ndarray  # 2x4
    Q: np.ndarray  # 3x3
    ell: np.ndarray  # 4
    theta: float
    b: np.ndarray  # 3
    A: np.ndarray  # 4x4

    @property
    def boundary_block(self) -> np.ndarray:
        return self.beta @ self.E

    def coefficient_map(self) -> np.ndarray:
        """2x3 matrix taking g_hat to (c1, c2)."""
        return np.linalg.solve(self.boundary_block, self.Q[:2])


def stable_system(state: BasicState, pt: FrequencyPoint) -> StableSystem:
    m = mode_arrays(state, pt.gamma, pt.delta, pt.eta)
    e1, e2, _, _ = m.vectors()
    ba = boundary_arrays(state, pt.gamma, pt.delta, pt.eta)
    return StableSystem(
        pt,
        np.array([complex(m.omega1), complex(m.omega2)]),
        np.stack([e1, e2], axis=-1).astype(complex),
        ba.beta,
        ba.Q,
        ba.ell,
        float(ba.theta),
        ba.b,
        system_matrix_arrays(m.sym),
    )


def solve_stable_bvp(state: BasicState, pt: FrequencyPoint, g_hat, tol: float = DET_TOL) -> tuple[complex, complex]:
    """Coefficients of the decaying modes e1, e2 matching the boundary data."""
    sys = stable_system(state, pt)
    blk = sys.boundary_block
    det = abs(np.linalg.det(blk))
    if not math.isfinite(det) or det <= tol * max(np.linalg.norm(blk) ** 2, 1e-300):
        raise NearSingular(det, pt)
    c = np.linalg.solve(blk, sys.Q[:2] @ np.asarray(g_hat, dtype=complex))
    return complex(c[0]), complex(c[1])


def evaluate_solution(state: BasicState, pt: FrequencyPoint, c1: complex, c2: complex, x1) -> np.ndarray:
    """c1 e1 exp(-omega1 x1) + c2 e2 exp(-omega2 x1), shape (len(x1), 4) or (4,) for scalar x1."""
    sys = stable_system(state, pt)
    x = np.asarray(x1, dtype=float)
    w = np.exp(-np.multiply.outer(x, sys.omega)) * np.array([c1, c2])
    return w @ sys.E.T


def ode_residual(state: BasicState, pt: FrequencyPoint, c1: complex, c2: complex, x1, h: float = 1e-5) -> float:
    """max |dV/dx1 - A V| / max |A V| with a fourth-order central difference."""
    x = np.asarray(x1, dtype=float)
    sys = stable_system(state, pt)
    V = lambda s: evaluate_solution(state, pt, c1, c2, s)  # noqa: E731
    dV = (-V(x + 2 * h) + 8 * V(x + h) - 8 * V(x - h) + V(x - 2 * h)) / (12 * h)
    AV = V(x) @ sys.A.T
    return float(np.abs(dV - AV).max() / max(np.abs(AV).max(), 1e-300))


def _gram(sys: StableSystem) -> np.ndarray:
    w = sys.omega
    if np.any(w.real <= 0):
        raise DivergentNorm(f"Re omega = {w.real} is not positive")
    EE = sys.E.conj().T @ sys.E
    return EE / (np.conj(w)[:, None] + w[None, :])


def interior_norm(state: BasicState, pt: FrequencyPoint, c1: complex, c2: complex) -> float:
    """L2 norm over x1 > 0 in closed form from the Gram matrix e_i^* e_j / (conj(omega_i) + omega_j)."""
    c = np.array([c1, c2])
    val = (c.conj() @ _gram(stable_system(state, pt)) @ c).real
    return math.sqrt(max(val, 0.0))


def reconstruct_front(state: BasicState, pt: FrequencyPoint, g_hat, trace) -> complex:
    """Front amplitude from the third transformed boundary row: theta phi + ell V(0) = (Q g)_3."""
    ba = boundary_arrays(state, pt.gamma, pt.delta, pt.eta)
    g = np.asarray(g_hat, dtype=complex)
    return complex(((ba.Q[2] @ g) - ba.ell @ np.asarray(trace, dtype=complex)) / ba.theta)


def boundary_residual(state: BasicState, pt: FrequencyPoint, g_hat, trace, phi: complex) -> float:
    """|M V(0) + b phi - g| for the untransformed boundary operator."""
    ba = boundary_arrays(state, pt.gamma, pt.delta, pt.eta)
    r = boundary_matrix(state) @ np.asarray(trace, dtype=complex) + ba.b * phi - np.asarray(g_hat, dtype=complex)
    return float(np.abs(r).max())


@dataclass(frozen=True)
class EnergyProbeResult:
    point: FrequencyPoint
    c1: complex
    c2: complex
    trace_norm: float
    interior_norm: float
    front_abs: float
    amplification: float

    def row(self) -> list:
        p = self.point
        return [p.gamma, p.delta, p.eta, self.amplification, self.interior_norm, self.front_abs]


def probe(state: BasicState, pt: FrequencyPoint, g_hat) -> EnergyProbeResult:
    g = np.asarray(g_hat, dtype=complex)
    c1, c2 = solve_stable_bvp(state, pt, g)
    trace = evaluate_solution(state, pt, c1, c2, 0.0)
    tn = float(np.linalg.norm(trace))
    try:
        inn = interior_norm(state, pt, c1, c2)
    except DivergentNorm:
        inn = math.inf
    phi = reconstruct_front(state, pt, g, trace)
    gn = float(np.linalg.norm(g))
    return EnergyProbeResult(pt, c1, c2, tn, inn, abs(phi), tn / gn if gn > 0 else 0.0)


def lift_off_boundary(pt: FrequencyPoint, gamma: float) -> FrequencyPoint:
    """Raise gamma at fixed (delta, eta) and renormalize to Sigma."""
    v = np.array([gamma, pt.delta, pt.eta])
    return FrequencyPoint(*(v / np.linalg.norm(v)))


@dataclass(frozen=True)
class GammaSweep:
    results: list
    slope: float

    @property
    def gammas(self) -> list[float]:
        return [r.point.gamma for r in self.results]

    @property
    def amplifications(self) -> list[float]:
        return [r.amplification for r in self.results]


def fit_slope(x, y, n_last: int = 3) -> float:
    """Least-squares slope of log y against log x on the ``n_last`` smallest x."""
    order = np.argsort(x)[:n_last]
    lx, ly = np.log(np.asarray(x)[order]), np.log(np.asarray(y)[order])
    return float(np.polyfit(lx, ly, 1)[0])


def gamma_sweep(state: BasicState, root_pt: FrequencyPoint, gammas, g_hat) -> GammaSweep:
    """Trace amplification along gamma above a boundary point, with its log-log slope."""
    results = [probe(state, lift_off_boundary(root_pt, g), g_hat) for g in gammas]
    slope = fit_slope([r.point.gamma for r in results], [r.amplification for r in results])
    return GammaSweep(results, slope)


@dataclass(frozen=True)
class KreissCheck:
    constant: float  # sup of (gamma |V|^2 + |V(0)|^2) / |g|^2
    draws: list
    holds: bool


def kreiss_constant(state: BasicState, pt: FrequencyPoint) -> float:
    """Operator norm of g -> (sqrt(gamma) V, V(0)), from a 3x3 Hermitian eigenproblem."""
    sys = stable_system(state, pt)
    L = sys.coefficient_map()
    H = L.conj().T @ (pt.gamma * _gram(sys) + sys.E.conj().T @ sys.E) @ L
    return float(np.linalg.eigvalsh(0.5 * (H + H.conj().T))[-1])


def kreiss_quadrature_check(state: BasicState, pt: FrequencyPoint, g_hat=None, draws: int = 20, seed: int = 0) -> KreissCheck:
    """gamma |V|^2 + |V(0)|^2 <= C |g|^2 over random data, with C the exact operator norm."""
    rng = np.random.default_rng(seed)
    gs = [rng.standard_normal(3) + 1j * rng.standard_normal(3) for _ in range(draws)]
    if g_hat is not None:
        gs.insert(0, np.asarray(g_hat, dtype=complex))
    C = kreiss_constant(state, pt)
    ratios = []
    for g in gs:
        n2 = float(np.linalg.norm(g)) ** 2
        if n2 == 0:
            ratios.append(0.0)
            continue
        r = probe(state, pt, g)
        ratios.append((pt.gamma * r.interior_norm**2 + r.trace_norm**2) / n2)
    return KreissCheck(C, ratios, bool(max(ratios) <= C * (1 + 1e-9)))


def front_constant(state: BasicState, pts, draws: int = 20, seed: int = 0) -> float:
    """Fitted C in k^2 |phi|^2 <= C (|V(0)|^2 + |g|^2) over random data at the given points."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for pt in pts:
        for _ in range(draws):
            g = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            r = probe(state, pt, g)
            worst = max(worst, pt.k**2 * r.front_abs**2 / (r.trace_norm**2 + np.linalg.norm(g) ** 2))
    return worst


def pole_decoupling(state: BasicState, bundle: SymmetrizerBundle, pt: FrequencyPoint) -> float:
    """Relative size of the growing-mode components of a decaying solution in the triangular pole frame.

    Returns max over the two decaying modes of (|U2| + |U4|) / |U| with U = T Lambda e_j.
    """
    if bundle.case not in (POLE_MU, POLE_TAU):
        raise ValueError("decoupling applies to the mu = 0 and tau = 0 poles")
    fr = bundle.frames(pt.as_array()[None, :])
    Lam = LAMBDA_MU if bundle.case == POLE_MU else LAMBDA_TAU
    sys = stable_system(state, pt)
    U = fr.T[0] @ Lam @ sys.E
    return float(max((abs(U[1, j]) + abs(U[3, j])) / np.linalg.norm(U[:, j]) for j in range(2)))
