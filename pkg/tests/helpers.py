"""Shared states, samplers and strategies for the test modules."""

import math

import numpy as np
from hypothesis import strategies as st

from plasmavac.lopatinskii import scan_boundary_roots
from plasmavac.state import BasicState, check_hypotheses
from plasmavac.symbol import FrequencyPoint, PointTag, critical_points, nearest_critical
from plasmavac.symmetrizer import POLE_MU, POLE_P2, POLE_PUNCTURE, POLE_TAU, sample_ball

REFERENCE = BasicState(rho=1, sound_speed=2, v=2, H=1, Hc=0.7, eps=0.01)
# v != c keeps the tau = 0 pole away from the omega_1 = 0 set
GENERIC = BasicState(rho=1, sound_speed=2, v=1.5, H=1, Hc=0.7, eps=0.01)
NO_ROOTS = BasicState(rho=1, sound_speed=0.5, v=0.4, H=1, Hc=0.7, eps=0.01)


def random_state(rng: np.random.Generator, eps_range=(0.005, 0.05)) -> BasicState:
    """Draw from a broad box of physical parameters (may fail the hypotheses)."""
    return BasicState(
        rho=rng.uniform(0.5, 2.0),
        sound_speed=rng.uniform(0.6, 3.0),
        v=rng.uniform(0.3, 3.0) * rng.choice([-1, 1]),
        H=rng.uniform(0.3, 2.0),
        Hc=rng.uniform(0.3, 1.5),
        eps=rng.uniform(*eps_range),
    )


def valid_states(n: int, seed: int, eps_range=(0.005, 0.05), margin: float = 1e-2) -> list[BasicState]:
    """n hypothesis-passing states, every condition margin above ``margin``."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        s = random_state(rng, eps_range)
        rep = check_hypotheses(s)
        if rep.all_pass and all(c.margin is None or abs(c.margin) > margin for c in rep.conditions):
            threshold = min(1 / s.alpha, s.rho * s.v**2)
            if abs(s.H**2 - threshold) > margin * threshold and abs(1 - s.alpha * s.H**2) > margin:
                out.append(s)
    return out


state_params = st.tuples(
    st.floats(0.5, 2.0),
    st.floats(0.6, 3.0),
    st.floats(0.3, 3.0),
    st.floats(0.3, 2.0),
    st.floats(0.3, 1.5),
    st.floats(0.005, 0.05),
)


def build(params) -> BasicState:
    return BasicState(*params)


def sigma_points(rng: np.random.Generator, n: int, gamma_min: float = 0.0) -> np.ndarray:
    """Uniform random points on the closed hemisphere with gamma >= gamma_min."""
    pts = rng.standard_normal((n, 3))
    pts[:, 0] = np.abs(pts[:, 0])
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    return pts[pts[:, 0] >= gamma_min]


def unit(*xyz) -> np.ndarray:
    v = np.array(xyz, dtype=float)
    return v / math.sqrt(float(v @ v))


def lop_ok_point(state, roots):
    """Boundary point farthest from every critical point and root."""
    th = np.linspace(0, 2 * np.pi, 721)[:-1]
    pts = np.stack([0 * th, np.cos(th), np.sin(th)], -1)
    d, _ = nearest_critical(state, pts)
    for r in roots:
        p = r.point.as_array()
        d = np.minimum(d, np.minimum(np.linalg.norm(pts - p, axis=1), np.linalg.norm(pts + p, axis=1)))
    return FrequencyPoint(*pts[np.argmax(d)])


def case_centers(state):
    """Center and tag for each symmetrizer case, keyed by a short name."""
    cps = critical_points(state)
    roots = scan_boundary_roots(state).boundary_roots
    p2 = cps[PointTag.POLE_P2]
    # only the P2 pair with the larger |eta| certifies; see the decisions ledger
    p2c = max(p2, key=lambda p: abs(p[2]))
    return {
        "interior": (FrequencyPoint(0.6, 0.48, 0.64), PointTag.INTERIOR),
        "lop_ok": (lop_ok_point(state, roots), PointTag.BOUNDARY_LOP_OK),
        "root": (roots[0].point, PointTag.BOUNDARY_LOP_ROOT),
        "null1": (FrequencyPoint(*cps[PointTag.OMEGA1_ZERO_A][0]), PointTag.OMEGA1_ZERO_A),
        "null2": (FrequencyPoint(*cps[PointTag.OMEGA1_ZERO_B][0]), PointTag.OMEGA1_ZERO_B),
        "null3": (FrequencyPoint(*cps[PointTag.OMEGA2_ZERO][0]), PointTag.OMEGA2_ZERO),
        "p1": (FrequencyPoint(*cps[PointTag.POLE_P1][0]), PointTag.POLE_P1),
        "p2": (FrequencyPoint(*p2c), PointTag.POLE_P2),
        "p3": (FrequencyPoint(*cps[PointTag.POLE_P3][0]), PointTag.POLE_P3),
    }


def ball_samples(b, n=100):
    puncture = POLE_PUNCTURE * b.neighborhood_radius if b.case in (POLE_MU, POLE_P2, POLE_TAU) else 0.0
    return sample_ball(b.center, b.neighborhood_radius, n=2 * n, puncture=puncture)[:n]
