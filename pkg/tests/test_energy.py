import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import GENERIC, case_centers, sigma_points
from oracles import quadrature_norm
from plasmavac.energy import (
    DivergentNorm,
    NearSingular,
    boundary_residual,
    evaluate_solution,
    fit_slope,
    front_constant,
    gamma_sweep,
    interior_norm,
    kreiss_constant,
    kreiss_quadrature_check,
    lift_off_boundary,
    ode_residual,
    pole_decoupling,
    probe,
    reconstruct_front,
    solve_stable_bvp,
    stable_system,
)
from plasmavac.symbol import FrequencyPoint, boundary_arrays, nearest_critical
from plasmavac.symmetrizer import build_certified

GAMMAS = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
G = np.array([1.0, 0.5j, -0.3])


@pytest.fixture(scope="module")
def centers():
    return case_centers(GENERIC)


def random_g(rng):
    return rng.standard_normal(3) + 1j * rng.standard_normal(3)


def interior_points(n, seed=0):
    pts = sigma_points(np.random.default_rng(seed), 4 * n, gamma_min=0.05)
    d, _ = nearest_critical(GENERIC, pts)
    return [FrequencyPoint(*p) for p in pts[d > 0.05][:n]]


def test_zero_data_gives_zero_coefficients(centers):
    assert solve_stable_bvp(GENERIC, centers["interior"][0], np.zeros(3)) == (0, 0)


def test_near_singular_at_root(centers):
    with pytest.raises(NearSingular) as err:
        solve_stable_bvp(GENERIC, centers["root"][0], G)
    assert err.value.det >= 0


def test_bvp_residual_at_random_interior_points():
    rng = np.random.default_rng(1)
    for pt in interior_points(30):
        g = random_g(rng)
        c = np.array(solve_stable_bvp(GENERIC, pt, g))
        sys = stable_system(GENERIC, pt)
        assert np.abs(sys.boundary_block @ c - sys.Q[:2] @ g).max() <= 1e-10 * np.linalg.norm(g)


def test_solution_at_wall_is_mode_sum(centers):
    pt = centers["interior"][0]
    c1, c2 = solve_stable_bvp(GENERIC, pt, G)
    E = stable_system(GENERIC, pt).E
    np.testing.assert_allclose(evaluate_solution(GENERIC, pt, c1, c2, 0.0), c1 * E[:, 0] + c2 * E[:, 1], atol=1e-15)


def test_ode_residual_at_twenty_points():
    rng = np.random.default_rng(2)
    x = np.linspace(0.05, 3.0, 20)
    for pt in interior_points(20, seed=3):
        c1, c2 = solve_stable_bvp(GENERIC, pt, random_g(rng))
        assert ode_residual(GENERIC, pt, c1, c2, x) <= 1e-8


def test_solution_decays(centers):
    pt = centers["interior"][0]
    c1, c2 = solve_stable_bvp(GENERIC, pt, G)
    v = np.linalg.norm(evaluate_solution(GENERIC, pt, c1, c2, [0.0, 10.0, 100.0]), axis=1)
    assert v[0] > v[1] > v[2] and v[2] < 1e-10 * v[0]


def test_interior_norm_matches_quadrature():
    rng = np.random.default_rng(4)
    for pt in interior_points(8, seed=5):
        c1, c2 = solve_stable_bvp(GENERIC, pt, random_g(rng))
        exact = interior_norm(GENERIC, pt, c1, c2)
        oracle = quadrature_norm(lambda x: evaluate_solution(GENERIC, pt, c1, c2, x), 1.0)
        assert exact == pytest.approx(oracle, rel=1e-8)


def test_single_mode_norm(centers):
    pt = centers["interior"][0]
    sys = stable_system(GENERIC, pt)
    c1 = 0.7 - 0.2j
    expected = abs(c1) * np.linalg.norm(sys.E[:, 0]) / math.sqrt(2 * sys.omega[0].real)
    assert interior_norm(GENERIC, pt, c1, 0) == pytest.approx(expected, rel=1e-13)


def test_divergent_norm_on_boundary_with_imaginary_mode():
    # on gamma = 0 the hyperbolic region has a purely imaginary omega
    for p in sigma_points(np.random.default_rng(6), 400):
        pt = FrequencyPoint(0.0, *(p[1:] / np.linalg.norm(p[1:])))
        w = stable_system(GENERIC, pt).omega
        if np.any(w.real <= 0):
            with pytest.raises(DivergentNorm):
                interior_norm(GENERIC, pt, 1, 1)
            return
    pytest.fail("no boundary point with an imaginary exponent found")


def test_lop_ok_norm_bounded_as_gamma_vanishes():
    # the boundary point off the critical set where both exponents keep the largest real part
    th = np.linspace(0, 2 * np.pi, 361)[:-1]
    pts = [FrequencyPoint(0.0, math.cos(t), math.sin(t)) for t in th]
    d, _ = nearest_critical(GENERIC, np.array([p.as_array() for p in pts]))
    base = max((p for p, di in zip(pts, d) if di > 0.1), key=lambda p: stable_system(GENERIC, p).omega.real.min())
    assert stable_system(GENERIC, base).omega.real.min() > 0.3
    norms = [probe(GENERIC, lift_off_boundary(base, g), G).interior_norm for g in GAMMAS]
    assert max(norms) <= 2 * min(norms)


def test_front_reconstruction_and_boundary_consistency():
    rng = np.random.default_rng(7)
    for pt in interior_points(15, seed=8):
        g = random_g(rng)
        c1, c2 = solve_stable_bvp(GENERIC, pt, g)
        trace = evaluate_solution(GENERIC, pt, c1, c2, 0.0)
        phi = reconstruct_front(GENERIC, pt, g, trace)
        ba = boundary_arrays(GENERIC, pt.gamma, pt.delta, pt.eta)
        assert abs(ba.theta * phi + ba.ell @ trace - ba.Q[2] @ g) <= 1e-10 * np.linalg.norm(g)
        assert boundary_residual(GENERIC, pt, g, trace, phi) <= 1e-10 * max(1.0, np.linalg.norm(g))


def test_zero_front(centers):
    assert reconstruct_front(GENERIC, centers["interior"][0], np.zeros(3), np.zeros(4)) == 0


def test_front_constant_is_finite():
    C = front_constant(GENERIC, interior_points(10, seed=9))
    assert 0 < C < math.inf


def test_root_sweep_slope_is_minus_one(centers):
    sw = gamma_sweep(GENERIC, centers["root"][0], GAMMAS, G)
    assert sw.slope == pytest.approx(-1, abs=0.1)
    assert sw.gammas == pytest.approx(sorted(sw.gammas, reverse=True))


def test_lop_ok_sweep_slope_is_zero(centers):
    assert gamma_sweep(GENERIC, centers["lop_ok"][0], GAMMAS, G).slope == pytest.approx(0, abs=0.1)


@pytest.mark.parametrize("name", ["root", "lop_ok"])
def test_amplification_is_linear_in_data(centers, name):
    a = gamma_sweep(GENERIC, centers[name][0], GAMMAS[:3], G).amplifications
    b = gamma_sweep(GENERIC, centers[name][0], GAMMAS[:3], 3.5 * G).amplifications
    np.testing.assert_allclose(a, b, rtol=1e-12)


@settings(max_examples=20)
@given(st.integers(0, 10**6), st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_superposition(seed, lam):
    rng = np.random.default_rng(seed)
    pt = interior_points(1, seed=seed)[0]
    g1, g2 = random_g(rng), random_g(rng)
    c = np.array(solve_stable_bvp(GENERIC, pt, g1 + lam * g2))
    c12 = np.array(solve_stable_bvp(GENERIC, pt, g1)) + lam * np.array(solve_stable_bvp(GENERIC, pt, g2))
    assert np.abs(c - c12).max() <= 1e-10 * max(np.abs(c).max(), np.abs(c12).max(), 1e-300)
    t = evaluate_solution(GENERIC, pt, *c, 0.0)
    phi = reconstruct_front(GENERIC, pt, g1 + lam * g2, t)
    t1 = evaluate_solution(GENERIC, pt, *solve_stable_bvp(GENERIC, pt, g1), 0.0)
    t2 = evaluate_solution(GENERIC, pt, *solve_stable_bvp(GENERIC, pt, g2), 0.0)
    phi12 = reconstruct_front(GENERIC, pt, g1, t1) + lam * reconstruct_front(GENERIC, pt, g2, t2)
    assert abs(phi - phi12) <= 1e-10 * max(abs(phi), abs(phi12), 1e-300)


def test_kreiss_estimate_interior(centers):
    chk = kreiss_quadrature_check(GENERIC, centers["interior"][0], G)
    assert chk.holds
    assert max(chk.draws) <= chk.constant * (1 + 1e-9)
    assert max(chk.draws) >= 0.1 * chk.constant


def test_kreiss_zero_data(centers):
    chk = kreiss_quadrature_check(GENERIC, centers["interior"][0], np.zeros(3), draws=2)
    assert chk.draws[0] == 0 and chk.holds


def test_kreiss_constant_grows_like_inverse_gamma_squared(centers):
    root = centers["root"][0]
    C = [kreiss_constant(GENERIC, lift_off_boundary(root, g)) for g in GAMMAS]
    assert fit_slope(GAMMAS, C) == pytest.approx(-2, abs=0.1)
    lop = [kreiss_constant(GENERIC, lift_off_boundary(centers["lop_ok"][0], g)) for g in GAMMAS]
    assert fit_slope(GAMMAS, lop) == pytest.approx(0, abs=0.1)


def test_trace_bound_with_gamma_squared():
    """amplification^2 gamma^2 stays bounded under gamma -> 0 at every boundary point off the critical set."""
    th = np.linspace(0, 2 * np.pi, 49)[:-1]
    pts = np.stack([0 * th, np.cos(th), np.sin(th)], -1)
    d, _ = nearest_critical(GENERIC, pts)
    for p in pts[d > 0.05]:
        base = FrequencyPoint(*p)
        vals = [(probe(GENERIC, lift_off_boundary(base, g), G).amplification * g) ** 2 for g in GAMMAS[1:]]
        assert max(vals) <= 1.1 * vals[0]


@pytest.mark.parametrize("name", ["p1", "p3"])
def test_pole_decoupling(centers, name):
    c, tag = centers[name]
    b = build_certified(GENERIC, c, tag)
    for shift in (0.003, -0.002):
        for g in (1e-2, 1e-3):
            pt = lift_off_boundary(FrequencyPoint(*(c.as_array() + [0, shift, 0])), g)
            assert pole_decoupling(GENERIC, b, pt) <= 1e-10


def test_pole_decoupling_rejects_other_cases(centers):
    c, tag = centers["lop_ok"]
    with pytest.raises(ValueError):
        pole_decoupling(GENERIC, build_certified(GENERIC, c, tag), c)
