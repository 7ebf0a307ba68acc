"""Lopatinskii determinant, boundary-root scan and the quartic cross-check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .state import BasicState, StabilityClass, check_hypotheses, stability_class
from .symbol import (
    POLE_TOL,
    FrequencyPoint,
    PointTag,
    PoleError,
    critical_points,
    lopatinskii_arrays,
    mode_arrays,
    normalize_to_sigma,
    reduced_root_arrays,
    spurious_factor_arrays,
)

REFINE_TOL = 1e-8


def lopatinskii_det(state: BasicState, pt: FrequencyPoint) -> complex:
    return complex(lopatinskii_arrays(state, mode_arrays(state, pt.gamma, pt.delta, pt.eta)))


def reduced_root_equation(state: BasicState, pt: FrequencyPoint) -> complex:
    m = mode_arrays(state, pt.gamma, pt.delta, pt.eta)
    if not np.isfinite(m.omega1) or abs(m.sym.den) <= POLE_TOL * pt.k**2:
        raise PoleError("P2", float(abs(m.sym.den)))
    return complex(reduced_root_arrays(state, m))


def spurious_factor(state: BasicState, pt: FrequencyPoint) -> complex:
    m = mode_arrays(state, pt.gamma, pt.delta, pt.eta)
    return complex(spurious_factor_arrays(state, m))


# ---------------------------------------------------------------------------
# quartic in V = tau/(i eta) + v


@dataclass(frozen=True)
class QuarticCoefficients:
    c4: float
    c3: float
    c2: float
    c1: float
    c0: float

    def as_array(self) -> np.ndarray:
        return np.array([self.c4, self.c3, self.c2, self.c1, self.c0])

    @property
    def discriminant(self) -> float:
        a, b, c, d, e = self.as_array()
        return (
            256 * a**3 * e**3
            - 192 * a**2 * b * d * e**2
            - 128 * a**2 * c**2 * e**2
            + 144 * a**2 * c * d**2 * e
            - 27 * a**2 * d**4
            + 144 * a * b**2 * c * e**2
            - 6 * a * b**2 * d**2 * e
            - 80 * a * b * c**2 * d * e
            + 18 * a * b * c * d**3
            + 16 * a * c**4 * e
            - 4 * a * c**3 * d**2
            - 27 * b**4 * e**2
            + 18 * b**3 * c * d * e
            - 4 * b**3 * d**3
            - 4 * b**2 * c**3 * e
            + b**2 * c**2 * d**2
        )

    @property
    def P(self) -> float:
        a, b, c, _, _ = self.as_array()
        return 8 * a * c - 3 * b**2

    @property
    def Q_quartic(self) -> float:
        a, b, c, d, e = self.as_array()
        return 64 * a**3 * e - 16 * a**2 * c**2 + 16 * a * b**2 * c - 16 * a**2 * b * d - 3 * b**4


def quartic_coefficients(state: BasicState, eps: float | None = None) -> QuarticCoefficients:
    """Coefficients of the quartic in V; ``eps`` overrides the state's value (e.g. 0)."""
    e2 = state.eps**2 if eps is None else eps**2
    rho, a, v = state.rho, state.alpha, state.v
    h2, hc4 = state.H**2, state.Hc**4
    return QuarticCoefficients(
        c4=rho**2 * (1 + a * h2) - e2 * rho * a * hc4,
        c3=2 * e2 * rho * a * v * hc4,
        c2=(e2 + rho * a - e2 * rho * a * v**2) * hc4 - rho * h2 * (2 + a * h2),
        c1=-2 * e2 * v * hc4,
        c0=h2**2 - (1 - e2 * v**2) * hc4,
    )


def solve_quartic(coeffs: QuarticCoefficients | np.ndarray, max_newton: int = 50) -> np.ndarray:
    """Companion-matrix roots, each polished by Newton iteration."""
    c = coeffs.as_array() if isinstance(coeffs, QuarticCoefficients) else np.asarray(coeffs, dtype=float)
    scale = np.abs(c).max()
    if abs(c[0]) <= 1e-14 * scale:
        raise ValueError("leading coefficient vanishes")
    roots = np.roots(c).astype(complex)
    dc = np.polyder(c)
    polished = []
    for r in roots:
        res = abs(np.polyval(c, r))
        for _ in range(max_newton):
            d = np.polyval(dc, r)
            if d == 0:
                break
            cand = r - np.polyval(c, r) / d
            cres = abs(np.polyval(c, cand))
            if cres >= res:
                break
            r, res = cand, cres
        polished.append(r)
    return np.array(sorted(polished, key=lambda z: (z.real, z.imag)))


def map_V_to_sigma(state: BasicState, V: float) -> FrequencyPoint:
    """Boundary point with eta > 0 and delta = eta (V - v)."""
    return normalize_to_sigma((0.0, V - state.v, 1.0))


@dataclass(frozen=True)
class CandidateRoot:
    V: complex
    is_real: bool
    supersonic: bool  # rho V^2 > H^2
    solves_unsquared: bool
    point: FrequencyPoint | None
    residual: float | None

    @property
    def admissible(self) -> bool:
        return self.is_real and self.supersonic and self.solves_unsquared


def classify_quartic_roots(state: BasicState, roots=None) -> list[CandidateRoot]:
    if roots is None:
        roots = solve_quartic(quartic_coefficients(state))
    out = []
    for V in roots:
        is_real = abs(V.imag) <= 1e-8 * max(1.0, abs(V))
        if not is_real:
            out.append(CandidateRoot(complex(V), False, False, False, None, None))
            continue
        Vr = float(V.real)
        pt = map_V_to_sigma(state, Vr)
        m = mode_arrays(state, pt.gamma, pt.delta, pt.eta)
        f = complex(reduced_root_arrays(state, m))
        spur = complex(spurious_factor_arrays(state, m))
        scale = abs(m.sym.num) + abs(m.omega1 * m.omega2) * state.Hc**2
        ok = bool(abs(f) <= 1e-8 * scale and abs(f) < abs(spur))
        out.append(CandidateRoot(complex(V), True, state.rho * Vr**2 > state.H**2, ok, pt, abs(f)))
    return out


def admissible_roots(state: BasicState) -> list[CandidateRoot]:
    return [c for c in classify_quartic_roots(state) if c.admissible]


# ---------------------------------------------------------------------------
# boundary scan


@dataclass(frozen=True)
class BoundaryRoot:
    point: FrequencyPoint
    residual: float  # |reduced root equation|
    det_abs: float  # |Delta|
    V: float  # delta/eta + v


@dataclass
class LopatinskiiReport:
    boundary_roots: list[BoundaryRoot]
    predicted_count: int
    observed_count: int
    quartic_roots: np.ndarray
    candidates: list[CandidateRoot]
    consistency: bool
    exclusion_radius: float
    n_grid: int
    failures: list[str] = field(default_factory=list)

    @property
    def admissible_V(self) -> list[float]:
        return [c.V.real for c in self.candidates if c.admissible]

    def to_json(self) -> dict:
        return {
            "predicted_count": self.predicted_count,
            "observed_count": self.observed_count,
            "consistency": self.consistency,
            "exclusion_radius": self.exclusion_radius,
            "n_grid": self.n_grid,
            "roots": [
                {"gamma": r.point.gamma, "delta": r.point.delta, "eta": r.point.eta, "residual": r.residual}
                for r in self.boundary_roots
            ],
            "quartic_roots": [[z.real, z.imag] for z in self.quartic_roots],
            "admissible_V": self.admissible_V,
            "failures": list(self.failures),
        }


def _circle_f(state: BasicState, theta):
    theta = np.asarray(theta, dtype=float)
    m = mode_arrays(state, np.zeros_like(theta), np.cos(theta), np.sin(theta))
    return reduced_root_arrays(state, m), m


def _angles(pts: np.ndarray) -> np.ndarray:
    return np.mod(np.arctan2(pts[:, 2], pts[:, 1]), 2 * np.pi)


def _pole_angles(state: BasicState) -> np.ndarray:
    cps = critical_points(state)
    return _angles(np.concatenate([cps[t] for t in (PointTag.POLE_P1, PointTag.POLE_P2, PointTag.POLE_P3)]))


def _scan_angles(n_grid: int, critical: np.ndarray) -> np.ndarray:
    """Uniform circle grid plus geometric refinement on both sides of each critical angle.

    A root can sit closer to an Alfven-type point than the uniform spacing, and the
    reduced equation turns complex on one side of such a point, so a uniform cell
    straddling both would show no sign change.
    """
    offsets = np.geomspace(1e-9, 20 * np.pi / n_grid, 80)
    local = (critical[:, None] + np.concatenate([-offsets, offsets])[None, :]).ravel()
    theta = np.concatenate([2 * np.pi * np.arange(n_grid) / n_grid, np.mod(local, 2 * np.pi)])
    return np.unique(theta)


def _canonical(theta: float) -> FrequencyPoint:
    d, e = math.cos(theta), math.sin(theta)
    if e < 0 or (e == 0 and d < 0):
        d, e = -d, -e
    return FrequencyPoint(0.0, d, e)


def scan_boundary_roots(state: BasicState, n_grid: int = 20000, tol: float = POLE_TOL) -> LopatinskiiReport:
    """Locate zeros of the reduced root equation on the gamma = 0 circle.

    Pole neighbourhoods of chord radius 10*tol are skipped. Sign changes of the real
    part (where the equation is real) are refined with Brent's method; remaining local
    minima of |f| are refined with a bounded scalar minimisation.
    """
    if n_grid < 10_000:
        raise ValueError("n_grid must be at least 1e4")
    report = check_hypotheses(state)
    if not report.all_pass:
        raise ValueError(f"state fails {', '.join(report.failed())}")

    radius = 10 * tol
    critical = np.concatenate(list(critical_points(state).values()))
    theta = _scan_angles(n_grid, _angles(critical))
    n_pts = len(theta)
    f, m = _circle_f(state, theta)
    scale = np.abs(m.sym.num) + np.abs(m.omega1 * m.omega2) * state.Hc**2
    poles = _pole_angles(state)
    ang_gap = np.abs((theta[:, None] - poles[None, :] + np.pi) % (2 * np.pi) - np.pi)
    valid = np.all(ang_gap > radius, axis=1) & np.isfinite(f)

    def fr(t):
        return float(_circle_f(state, np.array([t]))[0][0].real)

    def fabs(t):
        return float(np.abs(_circle_f(state, np.array([t]))[0][0]))

    nxt = np.roll(np.arange(n_pts), -1)
    t_next = np.where(nxt == 0, 2 * np.pi, theta[nxt])
    realish = np.abs(f.imag) <= 1e-6 * np.maximum(scale, 1e-300)
    pole_inside = np.zeros(n_pts, dtype=bool)
    for p in poles:
        for shift in (0.0, 2 * np.pi):
            pole_inside |= (theta - radius <= p + shift) & (p + shift <= t_next + radius)
    found: list[float] = []
    failures: list[str] = []

    sign_change = valid & valid[nxt] & realish & realish[nxt] & (np.sign(f.real) != np.sign(f.real[nxt])) & ~pole_inside
    for i in np.flatnonzero(sign_change):
        a, b = theta[i], t_next[i]
        try:
            t = brentq(fr, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        except (ValueError, RuntimeError) as exc:
            failures.append(f"bracket [{a:.6f}, {b:.6f}]: {exc}")
            continue
        if fabs(t) <= REFINE_TOL:
            found.append(t)
        else:
            failures.append(f"bracket [{a:.6f}, {b:.6f}]: residual {fabs(t):.2e}")

    absf = np.where(valid, np.abs(f), np.inf)
    prev = np.roll(np.arange(n_pts), 1)
    local_min = valid & valid[prev] & valid[nxt] & (absf <= absf[prev]) & (absf <= absf[nxt])
    local_min &= absf <= 1e-3 * np.maximum(scale, 1e-300)
    for i in np.flatnonzero(local_min):
        a, b = theta[prev[i]], theta[nxt[i]]
        if b < a:
            b += 2 * np.pi
        res = minimize_scalar(fabs, bounds=(a, b), method="bounded", options={"xatol": 1e-14})
        if res.fun <= REFINE_TOL:
            found.append(float(res.x))

    roots: list[BoundaryRoot] = []
    for t in sorted(np.mod(found, 2 * np.pi)):
        pt = _canonical(t)
        if any(np.linalg.norm(pt.as_array() - r.point.as_array()) < 1e-7 for r in roots):
            continue
        # the reduced equation also vanishes on the omega_j = 0 sets, which are not roots
        if np.linalg.norm(critical - pt.as_array(), axis=1).min() < 1e-10:
            continue
        mm = mode_arrays(state, pt.gamma, pt.delta, pt.eta)
        res = float(np.abs(reduced_root_arrays(state, mm)))
        det = float(np.abs(lopatinskii_arrays(state, mm)))
        roots.append(BoundaryRoot(pt, res, det, pt.delta / pt.eta + state.v))
    roots.sort(key=lambda r: r.point.delta)

    predicted = 2 if stability_class(state) is StabilityClass.TWO_BOUNDARY_ROOTS else 0
    candidates = classify_quartic_roots(state)
    n_adm = sum(c.admissible for c in candidates)
    observed = len(roots)
    matched = all(
        any(abs(c.V.real - r.V) <= 1e-6 for r in roots) for c in candidates if c.admissible
    ) and all(any(abs(c.V.real - r.V) <= 1e-6 for c in candidates if c.admissible) for r in roots)
    consistency = predicted == observed == n_adm and matched and not failures
    return LopatinskiiReport(
        roots,
        predicted,
        observed,
        np.array([c.V for c in candidates]),
        candidates,
        consistency,
        radius,
        n_grid,
        failures,
    )


def interior_min_det(state: BasicState, pts) -> tuple[float, np.ndarray]:
    """Minimum of |Delta| over the given points and the point attaining it."""
    pts = np.asarray(pts, dtype=float)
    m = mode_arrays(state, pts[:, 0], pts[:, 1], pts[:, 2])
    d = np.abs(lopatinskii_arrays(state, m))
    i = int(np.argmin(d))
    return float(d[i]), pts[i]
