"""Case-by-case transforms, Kreiss symmetrizers and their sampled certification.

Every bundle is evaluated on sample points of Sigma near its center. For a sample
p = (gamma, delta, eta) the bundle supplies

* ``T``, ``Tinv`` and the closed-form target for T Lambda A Lambda^-1 T^-1,
* the Hermitian symmetrizer ``r``,
* the boundary matrix beta Lambda^-1 T^-1.

Certification checks the dissipativity Re(r A_t) >= kappa W and the coercivity
r + C beta_t^* beta_t >= rhs with case-specific weights W and right sides rhs.
The mu = 0 and tau = 0 poles carry no symmetrizer and are certified on the
decaying subspace of their triangular form instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.stats import qmc

from .lopatinskii import lopatinskii_det
from .state import BasicState, derive_constants
from .symbol import (
    FrequencyPoint,
    PointTag,
    boundary_arrays,
    critical_points,
    mode_arrays,
    system_matrix_arrays,
)

CERT_TOL = 1e-10
C_CAP = 1e12
MIN_RADIUS = 1e-4
N_SAMPLES = 500
EPS1_FLOOR = 100.0
POLE_PUNCTURE = 1e-2  # fraction of the radius excluded around a pole

INTERIOR = "interior"
BOUNDARY_LOP_OK = "boundary_lop_ok"
BOUNDARY_ROOT = "boundary_root"
NONDIAG = "nondiag"
POLE_MU = "pole_mu"
POLE_P2 = "pole_p2"
POLE_TAU = "pole_tau"
CASES = (INTERIOR, BOUNDARY_LOP_OK, BOUNDARY_ROOT, NONDIAG, POLE_MU, POLE_P2, POLE_TAU)

LAMBDA_MU = np.array([[1.0, 1, 0, 0], [-1, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
LAMBDA_TAU = np.array([[1.0, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1], [0, 0, -1, 1]])
SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


class SymmetrizerError(ValueError):
    pass


# ---------------------------------------------------------------------------
# sampling


def _tangent_basis(c: np.ndarray):
    a = np.array([1.0, 0, 0]) if abs(c[0]) < 0.9 else np.array([0, 1.0, 0])
    u = a - c * (a @ c)
    u /= np.linalg.norm(u)
    return u, np.cross(c, u)


def sample_ball(center: FrequencyPoint, radius: float, n: int = N_SAMPLES, puncture: float = 0.0) -> np.ndarray:
    """Deterministic low-discrepancy samples of Sigma within chord ``radius`` of ``center``.

    Balls that reach the boundary circle are sampled in (arc, gamma) coordinates with
    gamma concentrated near 0; every tenth sample sits exactly on gamma = 0 and a
    ladder gamma = radius * 10^-j (j = 1..5) is added above the center.
    """
    c = center.as_array()
    h = qmc.Halton(d=2, scramble=False).random(n + 1)[1:]
    if center.gamma > radius:
        u, w = _tangent_basis(c)
        rr = radius * np.sqrt(h[:, 0])
        phi = 2 * np.pi * h[:, 1]
        pts = c + rr[:, None] * (np.cos(phi)[:, None] * u + np.sin(phi)[:, None] * w)
        pts[:, 0] = np.abs(pts[:, 0])
    else:
        theta_c = math.atan2(center.eta, center.delta)
        s = radius * (2 * h[:, 0] - 1)
        g = (center.gamma + radius) * h[:, 1] ** 2
        g[::10] = 0.0
        ladder_s = np.zeros(5)
        ladder_g = radius * 10.0 ** -np.arange(1, 6)
        s = np.concatenate([s, ladder_s])
        g = np.concatenate([g, ladder_g])
        pts = np.stack([g, np.cos(theta_c + s), np.sin(theta_c + s)], axis=-1)
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    d = np.linalg.norm(pts - c, axis=1)
    keep = (d <= radius) & (d >= puncture)
    return pts[keep]


def gamma_ladder(center: FrequencyPoint, gammas, arc: float = 0.0) -> np.ndarray:
    """Points above the boundary point at angular offset ``arc`` from ``center``, one per gamma."""
    theta_c = math.atan2(center.eta, center.delta) + arc
    g = np.asarray(gammas, dtype=float)
    pts = np.stack([g, np.full_like(g, math.cos(theta_c)), np.full_like(g, math.sin(theta_c))], axis=-1)
    return pts / np.linalg.norm(pts, axis=1)[:, None]


# ---------------------------------------------------------------------------
# frames


@dataclass
class Frames:
    gamma: np.ndarray
    k: np.ndarray
    T: np.ndarray
    Tinv: np.ndarray
    At: np.ndarray  # numerically transformed symbol
    target: np.ndarray  # closed-form transformed symbol
    r: np.ndarray
    beta_t: np.ndarray
    extra: dict = field(default_factory=dict)

    def similarity_residual(self) -> np.ndarray:
        scale = np.maximum(1.0, np.abs(self.target).max(axis=(-1, -2)))
        return np.abs(self.At - self.target).max(axis=(-1, -2)) / scale

    def inverse_residual(self) -> np.ndarray:
        return np.abs(self.T @ self.Tinv - np.eye(4)).max(axis=(-1, -2))


def _blockdiag(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = np.zeros(p.shape[:-2] + (4, 4), dtype=complex)
    out[..., :2, :2] = p
    out[..., 2:, 2:] = q
    return out


def _mat2(a, b, c, d) -> np.ndarray:
    return np.stack([np.stack([a, b], axis=-1), np.stack([c, d], axis=-1)], axis=-2)


def _diag(*entries) -> np.ndarray:
    n = np.broadcast_shapes(*(np.shape(e) for e in entries))
    out = np.zeros(n + (len(entries), len(entries)), dtype=complex)
    for i, e in enumerate(entries):
        out[..., i, i] = e
    return out


def _herm(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + np.conj(np.swapaxes(M, -1, -2)))


def _vacuum_diag_inv(m):
    s = m.sym
    et = m.eps * s.tau
    return _mat2(m.omega2, m.omega2, et, -et)


def _plasma_diag_inv(m):
    p, q = m.mu_chi_a12, m.mu_chi_omega1
    return _mat2(p, p, -q, q)


@dataclass
class SymmetrizerBundle:
    """A transform/symmetrizer pair attached to a ball on Sigma."""

    state: BasicState
    case: str
    tag: PointTag
    center: FrequencyPoint
    neighborhood_radius: float
    Lambda: np.ndarray
    constants: dict
    certification: "CertificationResult | None" = None

    # -- evaluation ---------------------------------------------------------

    def frames(self, pts) -> Frames:
        """Evaluate the transform and symmetrizer at arbitrary (not necessarily unit) points.

        T and the boundary matrix are extended with degree 0, r with degree ``r_degree``;
        the symbol itself is evaluated at the given points.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        k = np.linalg.norm(pts, axis=1)
        unit = pts / k[:, None]
        g1, d1, e1 = unit[:, 0], unit[:, 1], unit[:, 2]
        m = mode_arrays(self.state, g1, d1, e1)
        T, Tinv, target, extra = _BUILDERS[self.case](self, m)
        A = system_matrix_arrays(mode_arrays(self.state, pts[:, 0], pts[:, 1], pts[:, 2]).sym)
        Lam = self.Lambda
        Laminv = np.linalg.inv(Lam)
        At = T @ Lam @ A @ Laminv @ Tinv
        target = target * k[:, None, None]
        beta = boundary_arrays(self.state, g1, d1, e1).beta
        beta_t = beta @ Laminv @ Tinv
        extra = dict(extra, unit=unit, modes=m)
        fr = Frames(pts[:, 0], k, T, Tinv, At, target, None, beta_t, extra)
        self.refresh_r(fr)
        return fr

    def refresh_r(self, fr: Frames) -> None:
        """Recompute r after a change of constants; the transform does not depend on them."""
        r = _SYMMETRIZERS[self.case](self, fr.extra["modes"], fr.extra["unit"])
        fr.r = r * (fr.k**self.r_degree)[:, None, None]

    @property
    def r_degree(self) -> int:
        return 2 if self.case == BOUNDARY_ROOT else 0

    @property
    def reduced(self) -> bool:
        return self.case in (POLE_MU, POLE_TAU)

    def weights(self, fr: Frames) -> np.ndarray:
        g, k = fr.gamma, fr.k
        one = np.ones_like(g)
        if self.case == INTERIOR:
            w = k
        elif self.case in (BOUNDARY_LOP_OK, NONDIAG, POLE_TAU):
            w = g
        elif self.case == BOUNDARY_ROOT:
            w = g**3
        elif self.case == POLE_MU:
            w = k
        elif self.case == POLE_P2:
            tt = np.abs(fr.extra["tau_tilde"]) * k  # tau_tilde is evaluated at the unit point
            return np.stack([g * k**2 / tt**2, g, g, g], axis=-1)
        else:  # pragma: no cover
            raise ValueError(self.case)
        dim = 2 if self.reduced else 4
        return (w * one)[:, None] * np.ones((1, dim))

    def rhs(self, fr: Frames) -> np.ndarray:
        if self.case in (BOUNDARY_ROOT, POLE_MU, POLE_TAU):
            return fr.gamma**2
        return np.ones_like(fr.gamma)

    def dissipation(self, fr: Frames) -> np.ndarray:
        # closed-form transformed symbol; its distance to T A T^-1 is checked separately
        if self.reduced:
            return _herm(-fr.target[:, [0, 2]][:, :, [0, 2]])
        return _herm(fr.r @ fr.target)

    def coercion(self, fr: Frames, C: float) -> np.ndarray:
        bb = np.conj(np.swapaxes(fr.beta_t, -1, -2)) @ fr.beta_t
        if self.reduced:
            bb = bb[:, [0, 2]][:, :, [0, 2]]
            return C * fr.k[:, None, None] ** 2 * bb
        return fr.r + C * (fr.k ** self.r_degree)[:, None, None] * bb

    def to_json(self) -> dict:
        out = {
            "case": self.case,
            "tag": self.tag.value,
            "center": [self.center.gamma, self.center.delta, self.center.eta],
            "radius": self.neighborhood_radius,
        }
        for key in ("kappa", "C", "Kprime"):
            out[key] = self.constants.get(key)
        if self.certification is not None:
            out["min_eigs"] = [self.certification.min_eig_dissipativity, self.certification.min_eig_coercivity]
            out["certified"] = self.certification.certified
        return out


# transform builders: return T, Tinv, target (on Sigma), extra


def _frames_diag(b: SymmetrizerBundle, m):
    Tinv = _blockdiag(_plasma_diag_inv(m), _vacuum_diag_inv(m))
    # column order e1 e3 e2 e4
    T = np.linalg.inv(Tinv)
    target = _diag(-m.omega1, m.omega1, -m.omega2, m.omega2)
    return T, Tinv, target, {}


def _jordan_target(w):
    return _mat2(-1j * w, 1j + 0 * w, -1j * (w**2 + w), 1j * w)


def _frames_nondiag(b: SymmetrizerBundle, m):
    s = m.sym
    variant = b.constants["variant"]
    if variant == "null2":
        w = m.omega1**2
        Pinv = _mat2(s.a12, 0 * w, -1j * w, 1j + 0 * w)
        P = _mat2(1 / s.a12, 0 * w, s.a21, -1j + 0 * w)
        Vinv = _vacuum_diag_inv(m)
        Tinv = _blockdiag(Pinv, Vinv)
        T = _blockdiag(P, np.linalg.inv(Vinv))
        target = _blockdiag(_jordan_target(w), _diag(-m.omega2, m.omega2))
    elif variant == "null1":
        w = m.omega1**2
        lam = b.constants.get("col_scale", 1.0)
        Pinv = _mat2(1j + 0 * w, -1j * lam * w, 0 * w, lam * s.a21)
        P = _mat2(-1j + 0 * w, s.a12, 0 * w, 1 / (lam * s.a21))
        Vinv = _vacuum_diag_inv(m)
        Tinv = _blockdiag(Pinv, Vinv)
        T = _blockdiag(P, np.linalg.inv(Vinv))
        D, Dinv = np.diag([1.0, lam]), np.diag([1.0, 1 / lam])
        target = _blockdiag(Dinv @ SWAP @ _jordan_target(w) @ SWAP @ D, _diag(-m.omega2, m.omega2))
    else:  # null3
        w = m.omega2**2
        Vinv = _mat2(1j + 0 * w, -1j * w, 0 * w, s.a43)
        V = _mat2(-1j + 0 * w, w / s.a43, 0 * w, 1 / s.a43)
        Pinv = _plasma_diag_inv(m)
        Tinv = _blockdiag(Pinv, Vinv)
        T = _blockdiag(np.linalg.inv(Pinv), V)
        target = _blockdiag(_diag(-m.omega1, m.omega1), SWAP @ _jordan_target(w) @ SWAP)
    return T, Tinv, target, {}


def _mu_products(m):
    """mu*m1 and mu*m2 computed without dividing by mu."""
    s = m.sym
    mu_a12 = -s.num
    mu_a21 = s.mu * s.a21
    return 0.5 * (mu_a21 + mu_a12), 0.5 * (mu_a21 - mu_a12)


def _frames_pole_mu(b: SymmetrizerBundle, m):
    s = m.sym
    mm1, mm2 = _mu_products(m)
    mw = s.mu * m.omega1
    Pinv = _mat2(mm1 - mw, -mm2, mm2, mm1 - mw)
    Vinv = _vacuum_diag_inv(m)
    Tinv = _blockdiag(Pinv, Vinv)
    T = np.linalg.inv(Tinv)
    with np.errstate(divide="ignore", invalid="ignore"):
        m2 = mm2 / s.mu
    target = _blockdiag(_mat2(-m.omega1, -2 * m2, 0 * m2, m.omega1), _diag(-m.omega2, m.omega2))
    det = 2 * mm1 * (mm1 - mw)  # = 2 m1 mu^2 (m1 - omega1)
    return T, Tinv, target, {"det_Tinv_block": det, "m1": mm1 / s.mu, "m2": m2}


def _frames_pole_p2(b: SymmetrizerBundle, m):
    s = m.sym
    ia = 1j * b.constants.get("col_scale", 1.0) / s.a12
    Pinv = _mat2(1 + 0 * ia, ia, -1 + 0 * ia, ia)
    Vinv = _vacuum_diag_inv(m)
    Tinv = _blockdiag(Pinv, Vinv)
    T = np.linalg.inv(Tinv)
    sigma, cf = b.constants["sigma"], b.constants["cf"]
    tau_tilde = s.mu - 1j * sigma * cf * s.eta
    omega0 = omega0_arrays(b.state, sigma, s.gamma, s.delta, s.eta)
    w = -omega0 / tau_tilde  # omega1^2 without the 0/0 near the pole
    lam = b.constants.get("col_scale", 1.0)
    target = _blockdiag(_mat2(0 * w, 1j * lam + 0 * w, -1j * w / lam, 0 * w), _diag(-m.omega2, m.omega2))
    return T, Tinv, target, {"tau_tilde": tau_tilde, "omega0": omega0}


def _frames_pole_tau(b: SymmetrizerBundle, m):
    s = m.sym
    tau_a34 = -(m.eps**2 * s.tau**2 + s.eta**2) / m.eps
    tau_a43 = s.tau * s.a43
    tn1 = 0.5 * (tau_a43 + tau_a34)
    tn2 = 0.5 * (tau_a43 - tau_a34)
    tw = s.tau * m.omega2
    Vinv = _mat2(tn1 - tw, -tn2, tn2, tn1 - tw)
    Pinv = _plasma_diag_inv(m)
    Tinv = _blockdiag(Pinv, Vinv)
    T = np.linalg.inv(Tinv)
    with np.errstate(divide="ignore", invalid="ignore"):
        n2 = tn2 / s.tau
    target = _blockdiag(_diag(-m.omega1, m.omega1), _mat2(-m.omega2, -2 * n2, 0 * n2, m.omega2))
    det = 2 * tn1 * (tn1 - tw)  # = 2 tau^2 n1 (n1 - omega2)
    return T, Tinv, target, {"det_Tinv_block": det, "n1": tn1 / s.tau, "n2": n2}


_BUILDERS = {
    INTERIOR: _frames_diag,
    BOUNDARY_LOP_OK: _frames_diag,
    BOUNDARY_ROOT: _frames_diag,
    NONDIAG: _frames_nondiag,
    POLE_MU: _frames_pole_mu,
    POLE_P2: _frames_pole_p2,
    POLE_TAU: _frames_pole_tau,
}


# symmetrizers r on Sigma


def _r_diag(b: SymmetrizerBundle, m, unit):
    K = b.constants["Kprime"]
    n = len(unit)
    return _diag(-np.ones(n), K * np.ones(n), -np.ones(n), K * np.ones(n))


def _r_root(b: SymmetrizerBundle, m, unit):
    K = b.constants["Kprime"]
    g2 = unit[:, 0] ** 2
    return _diag(-g2, K + 0 * g2, -g2, K + 0 * g2)


def jordan_block_s(consts: dict, gamma, w_boundary) -> np.ndarray:
    """s = E + F - i gamma G for the null2 form; f uses omega^2 at gamma = 0."""
    e1, e2, g = consts["eps1"], consts["eps2"], consts["g_const"]
    f = -2 * e1 * w_boundary - e2 * (w_boundary**2 + w_boundary)
    return _mat2(f + 0j, e1 + 1j * gamma * g, e1 - 1j * gamma * g, e2 + 0 * f)


def _r_nondiag(b: SymmetrizerBundle, m, unit):
    c = b.constants
    variant = c["variant"]
    n = len(unit)
    zero = np.zeros(n)
    bm = mode_arrays(b.state, zero, unit[:, 1], unit[:, 2])
    w_b = (bm.omega2**2 if variant == "null3" else bm.omega1**2).real
    s = jordan_block_s(c, unit[:, 0], w_b)
    if variant != "null2":
        s = SWAP @ s @ SWAP
    if variant == "null1":
        D = np.diag([1.0, c.get("col_scale", 1.0)])
        s = D @ s @ D
    other = _diag(-np.ones(n), c["Kprime"] * np.ones(n))
    return _blockdiag(other, s) if variant == "null3" else _blockdiag(s, other)


def omega0_arrays(state: BasicState, sigma: float, gamma, delta, eta) -> np.ndarray:
    """omega0 = -omega1^2 tau_tilde with the vanishing factor of the denominator cancelled."""
    dc = derive_constants(state)
    mu = gamma + 1j * (delta + state.v * eta)
    num = mu**2 * state.rho + eta**2 * state.H**2
    sq = state.alpha * state.rho * mu**2 + eta**2
    return -num * sq / (state.rho * (1 + dc.alpha * state.H**2) * (mu + 1j * sigma * dc.fast_interface_speed * eta))


def _e0_boundary(b: SymmetrizerBundle, unit):
    """Im omega0 and Im tau_tilde at the boundary projection (0, delta, eta)."""
    d, e = unit[:, 1], unit[:, 2]
    sigma, cf = b.constants["sigma"], b.constants["cf"]
    e0 = omega0_arrays(b.state, sigma, 0.0, d, e).imag
    return e0, d + b.state.v * e - sigma * cf * e


def _r_pole_p2(b: SymmetrizerBundle, m, unit):
    c = b.constants
    g = unit[:, 0]
    e0, dtilde = _e0_boundary(b, unit)
    d1, d2, s = c["d1"], c["d2"], c["s_const"]
    rt = _mat2(d1 + 0j * g, d2 + 1j * g * s, d2 - 1j * g * s, d1 * dtilde / e0 + 0j)
    D = np.diag([1.0, c.get("col_scale", 1.0)])
    rt = D @ rt @ D
    n = len(unit)
    return _blockdiag(rt, _diag(-np.ones(n), c["Kprime"] * np.ones(n)))


_SYMMETRIZERS = {
    INTERIOR: _r_diag,
    BOUNDARY_LOP_OK: _r_diag,
    BOUNDARY_ROOT: _r_root,
    NONDIAG: _r_nondiag,
    POLE_MU: _r_diag,
    POLE_P2: _r_pole_p2,
    POLE_TAU: _r_diag,
}


# ---------------------------------------------------------------------------
# certification


@dataclass
class CertificationResult:
    min_eig_dissipativity: float
    min_eig_coercivity: float
    samples: int
    failures: list = field(default_factory=list)
    max_similarity_residual: float = 0.0
    max_inverse_residual: float = 0.0

    @property
    def certified(self) -> bool:
        return self.min_eig_dissipativity >= -CERT_TOL and self.min_eig_coercivity >= -CERT_TOL

    def to_json(self) -> dict:
        return {
            "min_eig_dissipativity": self.min_eig_dissipativity,
            "min_eig_coercivity": self.min_eig_coercivity,
            "samples": self.samples,
            "certified": self.certified,
            "failures": len(self.failures),
        }


def _min_eigs(H: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(H)[..., 0]


def _weighted_ratio(D: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Largest kappa with D - kappa diag(W) >= 0, per sample with W > 0 (else inf/-inf)."""
    out = np.full(len(D), np.inf)
    pos = np.all(W > 0, axis=1)
    if np.any(pos):
        s = 1 / np.sqrt(W[pos])
        out[pos] = _min_eigs(D[pos] * s[:, :, None] * s[:, None, :])
    zero = ~pos
    if np.any(zero):
        lam = _min_eigs(D[zero])
        out[zero] = np.where(lam >= -CERT_TOL, np.inf, -np.inf)
    return out


def certify(
    bundle: SymmetrizerBundle,
    samples,
    weight=None,
    rhs=None,
    kappa: float | None = None,
    C: float | None = None,
    scale: float = 1.0,
) -> CertificationResult:
    """Check dissipativity and coercivity at the samples with the bundle's constants.

    ``weight`` and ``rhs`` override the case weights (callables of Frames), which is how
    sharpness probes are run. ``scale`` evaluates at scale * samples, exercising the
    homogeneous extensions.
    """
    kappa = bundle.constants["kappa"] if kappa is None else kappa
    C = bundle.constants["C"] if C is None else C
    fr = bundle.frames(np.asarray(samples) * scale)
    W = bundle.weights(fr) if weight is None else weight(fr)
    R = bundle.rhs(fr) if rhs is None else rhs(fr)
    D = bundle.dissipation(fr)
    dim = D.shape[-1]
    lam_d = _min_eigs(D - kappa * W[:, :, None] * np.eye(dim))
    K = bundle.coercion(fr, C) - R[:, None, None] * np.eye(dim)
    lam_c = _min_eigs(_herm(K))
    failures = [
        {"sample": [float(x) for x in p], "dissipativity": float(a), "coercivity": float(b)}
        for p, a, b in zip(fr.extra["unit"], lam_d, lam_c)
        if a < -CERT_TOL or b < -CERT_TOL
    ]
    return CertificationResult(
        float(lam_d.min()),
        float(lam_c.min()),
        len(lam_d),
        failures,
        float(fr.similarity_residual().max()),
        float(fr.inverse_residual().max()),
    )


def _fit_kappa(bundle: SymmetrizerBundle, fr: Frames) -> float:
    ratio = _weighted_ratio(bundle.dissipation(fr), bundle.weights(fr))
    if np.any(ratio == -np.inf):
        return -1.0
    finite = ratio[np.isfinite(ratio)]
    if finite.size == 0:
        return 1.0
    return 0.9 * float(finite.min())


def _coercive(bundle: SymmetrizerBundle, fr: Frames, C: float) -> bool:
    dim = 2 if bundle.reduced else 4
    K = bundle.coercion(fr, C) - bundle.rhs(fr)[:, None, None] * np.eye(dim)
    return bool(_min_eigs(_herm(K)).min() >= -CERT_TOL)


def _fit_coercivity(bundle: SymmetrizerBundle, samples, C0: float = 1.0) -> bool:
    """Double C (with K' = C + 1) until coercivity holds at every sample."""
    C = C0
    fr = bundle.frames(samples)
    while C <= C_CAP:
        bundle.constants["C"] = C
        bundle.constants["Kprime"] = max(bundle.constants.get("Kprime_min", 1.0), C + 1.0)
        bundle.refresh_r(fr)
        if _coercive(bundle, fr, C):
            return True
        C *= 2
    return False


def _lop_constant(beta_t: np.ndarray, stable, unstable, boundary_weight: float = 1e8) -> float:
    """Smallest C0 with |Z_stable|^2 <= C0 (|Z_unstable|^2 + w |beta_t Z|^2).

    A large w makes C0 the normalization-free constant on ker beta_t; the
    coercivity constant C absorbs w.
    """
    B = boundary_weight * (np.conj(beta_t.T) @ beta_t)
    P = np.zeros((4, 4))
    P[stable, stable] = 1
    Dm = B + np.diag([1.0 if i in unstable else 0.0 for i in range(4)])
    return float(eigh(P, Dm + 1e-300 * np.eye(4), eigvals_only=True)[-1])


def _finish(bundle: SymmetrizerBundle, samples) -> SymmetrizerBundle:
    if bundle.constants.get("C") is None:
        if not _fit_coercivity(bundle, samples, bundle.constants.get("C_start", 1.0)):
            bundle.certification = CertificationResult(-np.inf, -np.inf, len(samples), ["coercivity fit failed"])
            return bundle
    fr = bundle.frames(samples)
    bundle.constants["kappa"] = _fit_kappa(bundle, fr)
    if bundle.constants["kappa"] <= 0:
        bundle.certification = CertificationResult(-np.inf, 0.0, len(samples), ["no positive kappa"])
        return bundle
    bundle.certification = certify(bundle, samples)
    return bundle


def _new(state, case, tag, center, radius, Lambda=None, **consts) -> SymmetrizerBundle:
    c = {"kappa": None, "C": None, "Kprime": 1.0}
    c.update(consts)
    return SymmetrizerBundle(state, case, tag, center, radius, np.eye(4) if Lambda is None else Lambda, c)


def _check_diagonalizable(state, samples):
    m = mode_arrays(state, samples[:, 0], samples[:, 1], samples[:, 2])
    small = min(np.abs(m.omega1).min(), np.abs(m.omega2).min())
    if small < 1e-8 or not np.all(np.isfinite(m.omega1)):
        raise SymmetrizerError(f"symbol not diagonalizable on the ball (min |omega| = {small:.2e})")


def build_interior(state: BasicState, center: FrequencyPoint, samples=None, radius: float = 0.1) -> SymmetrizerBundle:
    """Diagonal frame T^-1 = (e1 e3 e2 e4), r = diag(-1, K', -1, K')."""
    samples = sample_ball(center, radius) if samples is None else np.asarray(samples)
    _check_diagonalizable(state, samples)
    on_boundary = bool(np.any(samples[:, 0] <= 1e-12)) or center.gamma <= radius
    case = BOUNDARY_LOP_OK if on_boundary else INTERIOR
    tag = PointTag.BOUNDARY_LOP_OK if on_boundary else PointTag.INTERIOR
    return _finish(_new(state, case, tag, center, radius), samples)


def build_boundary_root(state: BasicState, center: FrequencyPoint, samples=None, radius: float = 0.1) -> SymmetrizerBundle:
    """r = diag(-gamma^2, K', -gamma^2, K') with weight gamma^3 and coercivity gamma^2 I."""
    slope = arc_derivative(state, center)
    if slope < 1e-6:
        raise SymmetrizerError(f"root is not simple: |d Delta/d arc| = {slope:.2e}")
    samples = sample_ball(center, radius) if samples is None else np.asarray(samples)
    _check_diagonalizable(state, samples)
    b = _new(state, BOUNDARY_ROOT, PointTag.BOUNDARY_LOP_ROOT, center, radius, root_slope=slope)
    return _finish(b, samples)


def arc_derivative(state: BasicState, center: FrequencyPoint, h: float = 1e-6) -> float:
    th = math.atan2(center.eta, center.delta)
    vals = [lopatinskii_det(state, FrequencyPoint(0.0, math.cos(th + s), math.sin(th + s))) for s in (-h, h)]
    return abs(vals[1] - vals[0]) / (2 * h)


def gamma_derivative(fn, center: FrequencyPoint, h: float = 1e-4) -> complex:
    """One-sided derivative in gamma at fixed (delta, eta), Richardson-extrapolated."""

    def d(step):
        return (fn(center.gamma + step) - fn(center.gamma)) / step

    return 2 * d(h / 2) - d(h)


def _nondiag_variant(tag: PointTag) -> str:
    return {PointTag.OMEGA1_ZERO_A: "null1", PointTag.OMEGA1_ZERO_B: "null2", PointTag.OMEGA2_ZERO: "null3"}[tag]


def build_nondiag(
    state: BasicState, center: FrequencyPoint, tag: PointTag, samples=None, radius: float = 0.1
) -> SymmetrizerBundle:
    """Jordan-block frame at an omega = 0 point with s = E + F - i gamma G."""
    variant = _nondiag_variant(tag)
    cps = critical_points(state)
    others = [t for t in cps if t is not tag]
    if any(np.min(np.linalg.norm(cps[t] - center.as_array(), axis=1)) < 2 * radius for t in others):
        if variant == "null3":
            raise SymmetrizerError("the omega_2 = 0 point is too close to another critical set for this eps")

    def wsq(g):
        m = mode_arrays(state, g, center.delta, center.eta)
        return complex((m.omega2**2) if variant == "null3" else (m.omega1**2))

    dw = gamma_derivative(wsq, center)
    eps1 = (1j / dw).real
    # a positive multiple keeps the sign argument intact; a large |eps1| brings eps2/eps1 down to about 1 + C0
    eps1 *= max(1.0, EPS1_FLOOR / abs(eps1))
    samples = sample_ball(center, radius) if samples is None else np.asarray(samples)
    # the null1 frame column carries a factor a21; rescaling it to unit length keeps C0 moderate when |a21| is small
    col_scale = 1.0
    if variant == "null1":
        col_scale = 1.0 / abs(mode_arrays(state, center.gamma, center.delta, center.eta).sym.a21)
    b = _new(
        state, NONDIAG, tag, center, radius,
        variant=variant, eps1=eps1, eps2=1.0, g_const=1.0, d_gamma_wsq=dw, col_scale=col_scale,
    )

    # Lopatinskii constant at the center fixes eps2, C and K'
    b.constants.update(Kprime=1.0, C=1.0)
    frc = b.frames(center.as_array()[None, :])
    stable, unstable = {"null2": ([0, 2], [1, 3]), "null1": ([1, 2], [0, 3]), "null3": ([0, 3], [1, 2])}[variant]
    C0 = _lop_constant(frc.beta_t[0], stable, unstable)
    Cp = max(abs(eps1), 1.0) + 2
    b.constants.update(eps2=abs(eps1) + Cp * C0 + 2, Kprime_min=2 * Cp * C0 + 2, C=None, C_start=Cp * C0, C0=C0)
    jb = [0, 1] if variant != "null3" else [2, 3]

    # g: grow until the Jordan block is dissipative with margin gamma/4 (on gamma > 0)
    b.constants["Kprime"] = b.constants["Kprime_min"]
    pos = samples[:, 0] > 0
    g_ok = False
    fr = b.frames(samples)
    for _ in range(60):
        b.refresh_r(fr)
        blk = _herm(fr.r[:, jb][:, :, jb] @ fr.target[:, jb][:, :, jb])
        lam = _min_eigs(blk)
        if np.all(lam[pos] >= 0.25 * fr.gamma[pos]) and np.all(lam[~pos] >= -CERT_TOL):
            g_ok = True
            break
        b.constants["g_const"] *= 2
    if not g_ok:
        b.certification = CertificationResult(-np.inf, -np.inf, len(samples), ["g fit failed"])
        return b
    return _finish(b, samples)


def build_pole_mu(state: BasicState, center: FrequencyPoint, samples=None, radius: float = 0.1) -> SymmetrizerBundle:
    """mu = 0 pole: Lambda mixing (q, v1), upper-triangular plasma block."""
    samples = sample_ball(center, radius, puncture=POLE_PUNCTURE * radius) if samples is None else np.asarray(samples)
    if np.any(np.linalg.norm(samples - center.as_array(), axis=1) == 0):
        raise SymmetrizerError("the exact pole is not a valid sample")
    b = _new(state, POLE_MU, PointTag.POLE_P1, center, radius, Lambda=LAMBDA_MU)
    return _finish(b, samples)


def build_pole_tau(state: BasicState, center: FrequencyPoint, samples=None, radius: float = 0.1) -> SymmetrizerBundle:
    """tau = 0 pole: Lambda' mixing (Hc2, E), upper-triangular vacuum block."""
    samples = sample_ball(center, radius, puncture=POLE_PUNCTURE * radius) if samples is None else np.asarray(samples)
    if np.any(np.linalg.norm(samples - center.as_array(), axis=1) == 0):
        raise SymmetrizerError("the exact pole is not a valid sample")
    b = _new(state, POLE_TAU, PointTag.POLE_P3, center, radius, Lambda=LAMBDA_TAU)
    return _finish(b, samples)


def p2_omega0_closed_form(state: BasicState, eta0: float) -> complex:
    dc = derive_constants(state)
    h = abs(state.H)
    return 1j * h / math.sqrt(state.rho) * dc.alpha * state.H**2 / (2 * (1 + dc.alpha * state.H**2) ** 2.5) * eta0**3


def build_pole_p2(
    state: BasicState, center: FrequencyPoint, samples=None, radius: float = 0.1, col_scale: float | None = None
) -> SymmetrizerBundle:
    """Pole of a21: anisotropic symmetrizer with parameters d1, d2, s.

    The second frame column i/a12 is rescaled by ``col_scale`` (default 10|a12| at the center),
    a constant congruence that keeps the Lopatinskii constant C0 of order one.
    """
    dc = derive_constants(state)
    cf = dc.fast_interface_speed
    sigma = 1.0 if abs(center.delta + state.v * center.eta - cf * center.eta) <= abs(
        center.delta + state.v * center.eta + cf * center.eta
    ) else -1.0
    samples = sample_ball(center, radius, puncture=POLE_PUNCTURE * radius) if samples is None else np.asarray(samples)
    if np.any(np.linalg.norm(samples - center.as_array(), axis=1) == 0):
        raise SymmetrizerError("the exact pole is not a valid sample")
    if col_scale is None:
        col_scale = 10 * abs(mode_arrays(state, center.gamma, center.delta, center.eta).sym.a12)
    b = _new(
        state, POLE_P2, PointTag.POLE_P2, center, radius, Lambda=LAMBDA_MU, sigma=sigma, cf=cf, col_scale=col_scale
    )

    # e0 at the center from the limit of -omega1^2 tau_tilde along gamma
    e0_c = float(_e0_boundary(b, center.as_array()[None, :])[0][0])
    if e0_c == 0 or not math.isfinite(e0_c):
        raise SymmetrizerError("e0 vanishes at the center")
    d2 = -3.0 * math.copysign(1.0, e0_c)
    b.constants.update(e0=e0_c, d2=d2, d1=1.0, s_const=1.0, Kprime=1.0, C=1.0)
    frc = b.frames(samples[np.argmin(np.linalg.norm(samples - center.as_array(), axis=1))][None, :])
    C0 = _lop_constant(frc.beta_t[0], [1, 2], [0, 3])
    d1 = 2 * (1 + C0) * abs(d2) + 1
    small_eps = abs(e0_c) * abs(d2) / 4
    s_recipe = 2 * d1**2 / small_eps
    b.constants.update(d1=d1, s_recipe=s_recipe, C=None, C_start=2 * abs(d2) * C0, C0=C0, Kprime_min=1.0)
    # the recipe value is sufficient at the center only; the largest usable ball shrinks like 1/s
    s_val = 1.0
    fr = b.frames(samples)
    while s_val <= 1e3 * s_recipe:
        b.constants["s_const"] = s_val
        b.refresh_r(fr)
        if np.all(_weighted_ratio(b.dissipation(fr), b.weights(fr)) > 0):
            break
        s_val *= 2
    else:
        b.constants["s_const"] = s_recipe
    return _finish(b, samples)


def build_for_tag(state: BasicState, center: FrequencyPoint, tag: PointTag, radius: float = 0.1, samples=None):
    if tag in (PointTag.INTERIOR, PointTag.BOUNDARY_LOP_OK):
        return build_interior(state, center, samples, radius)
    if tag is PointTag.BOUNDARY_LOP_ROOT:
        return build_boundary_root(state, center, samples, radius)
    if tag in (PointTag.OMEGA1_ZERO_A, PointTag.OMEGA1_ZERO_B, PointTag.OMEGA2_ZERO):
        return build_nondiag(state, center, tag, samples, radius)
    if tag is PointTag.POLE_P1:
        return build_pole_mu(state, center, samples, radius)
    if tag is PointTag.POLE_P2:
        return build_pole_p2(state, center, samples, radius)
    if tag is PointTag.POLE_P3:
        return build_pole_tau(state, center, samples, radius)
    raise ValueError(tag)


def build_certified(
    state: BasicState, center: FrequencyPoint, tag: PointTag, radius: float = 0.1, min_radius: float = MIN_RADIUS
) -> SymmetrizerBundle:
    """Build and certify, halving the radius on failure down to ``min_radius``."""
    last = None
    while radius >= min_radius:
        try:
            b = build_for_tag(state, center, tag, radius)
        except SymmetrizerError as exc:
            last = exc
            radius /= 2
            continue
        if b.certification is not None and b.certification.certified:
            return b
        last = b
        radius /= 2
    if isinstance(last, SymmetrizerBundle):
        return last
    raise SymmetrizerError(f"no certified neighbourhood at {center}: {last}")


# ---------------------------------------------------------------------------
# covering


@dataclass
class Covering:
    bundles: list
    covered: np.ndarray
    failures: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return bool(self.covered.all())

    def certified_bundles(self) -> list:
        return [b for b in self.bundles if b.certification is not None and b.certification.certified]


def special_points(state: BasicState, roots=()) -> list:
    """(center, tag) pairs for every critical point and boundary root."""
    out = [(FrequencyPoint(*map(float, p)), tag) for tag, pts in critical_points(state).items() for p in pts]
    out += [(r.point, PointTag.BOUNDARY_LOP_ROOT) for r in roots]
    return out


def cover_hemisphere(state: BasicState, grid: np.ndarray, roots=(), radius: float = 0.1) -> Covering:
    """Greedy covering of ``grid`` by certified balls.

    Critical points and roots get their own bundles first; every uncovered grid
    point then becomes the center of a diagonal-frame ball that stays clear of them.
    """
    grid = np.asarray(grid, dtype=float)
    specials = special_points(state, roots)
    centers = np.array([c.as_array() for c, _ in specials])
    covered = np.zeros(len(grid), dtype=bool)
    bundles, failures = [], []

    def add(b):
        bundles.append(b)
        if b.certification is not None and b.certification.certified:
            covered[np.linalg.norm(grid - b.center.as_array(), axis=1) <= b.neighborhood_radius] = True
        else:
            failures.append(b.center)

    for i, (c, tag) in enumerate(specials):
        others = np.delete(centers, i, axis=0)
        sep = np.min(np.linalg.norm(others - c.as_array(), axis=1))
        try:
            add(build_certified(state, c, tag, radius=min(radius, 0.45 * sep)))
        except SymmetrizerError:
            failures.append(c)
    for i in range(len(grid)):
        if covered[i]:
            continue
        c = FrequencyPoint(*grid[i])
        gap = float(np.min(np.linalg.norm(centers - grid[i], axis=1)))
        try:
            add(build_certified(state, c, PointTag.INTERIOR, radius=min(radius, 0.9 * gap)))
        except SymmetrizerError:
            failures.append(c)
    return Covering(bundles, covered, failures)


# ---------------------------------------------------------------------------
# sharpness probes


def uniform_weight_probe(
    bundle: SymmetrizerBundle, weight, gammas=(1e-2, 1e-3, 1e-4, 1e-5), arcs=(0.0,)
) -> dict:
    """Best constant kappa(gamma) with dissipation >= kappa * weight along gamma ladders.

    The weight is uniform when kappa does not degrade as gamma -> 0.
    """
    kap = []
    for g in gammas:
        pts = np.concatenate([gamma_ladder(bundle.center, [g], a) for a in arcs])
        fr = bundle.frames(pts)
        ratio = _weighted_ratio(bundle.dissipation(fr), weight(fr))
        kap.append(float(ratio.min()))
    kap = np.array(kap)
    uniform = bool(kap[-1] > 0 and kap[-1] >= 0.5 * kap[0])
    return {"gammas": list(gammas), "kappa": kap.tolist(), "uniform": uniform}


def coercivity_probe(bundle: SymmetrizerBundle, rhs, gammas=(1e-2, 1e-3, 1e-4, 1e-5), arcs=(0.0,)) -> dict:
    """Smallest C making the coercivity hold with right side ``rhs`` at each gamma level."""
    needed = []
    for g in gammas:
        pts = np.concatenate([gamma_ladder(bundle.center, [g], a) for a in arcs])
        fr = bundle.frames(pts)
        dim = 2 if bundle.reduced else 4

        def ok(C):
            K = bundle.coercion(fr, C) - rhs(fr)[:, None, None] * np.eye(dim)
            return _min_eigs(_herm(K)).min() >= -CERT_TOL

        C = 1e-3
        while C < 1e30 and not ok(C):
            C *= 2
        needed.append(C)
    needed = np.array(needed)
    return {"gammas": list(gammas), "C": needed.tolist(), "uniform": bool(needed[-1] <= 4 * needed[0])}


def power_weight(p: float):
    """Weight gamma^p on every component (callable of Frames)."""

    def w(fr: Frames):
        return (fr.gamma**p)[:, None] * np.ones((1, fr.At.shape[-1] if fr.At.ndim == 3 else 4))

    return w


def with_reduced_dim(bundle: SymmetrizerBundle, weight):
    if not bundle.reduced:
        return weight

    def w(fr):
        return weight(fr)[:, :2]

    return w


__all__ = [
    "CASES",
    "CertificationResult",
    "Covering",
    "cover_hemisphere",
    "SymmetrizerBundle",
    "SymmetrizerError",
    "build_boundary_root",
    "build_certified",
    "build_for_tag",
    "build_interior",
    "build_nondiag",
    "build_pole_mu",
    "build_pole_p2",
    "build_pole_tau",
    "certify",
    "coercivity_probe",
    "gamma_ladder",
    "power_weight",
    "sample_ball",
    "uniform_weight_probe",
]
