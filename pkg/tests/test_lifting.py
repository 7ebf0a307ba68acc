import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from oracles import naive_multiplier
from plasmavac.lifting import (
    FrontSample,
    batch_lift,
    diffeo_check,
    h2_norm,
    lift,
    lift_dx1,
    lifted_sobolev_ratio,
    linf_decay_check,
    make_cutoff,
    sobolev_norm,
    verify_flatness,
)

L = 2 * math.pi


def broadband(N=1024, seed=0, decay=3.0, complex_values=False):
    rng = np.random.default_rng(seed)
    k = np.fft.fftfreq(N, 1 / N)
    spec = (rng.standard_normal(N) + 1j * rng.standard_normal(N)) / (1 + np.abs(k)) ** decay
    vals = np.fft.ifft(spec) * N
    return FrontSample(vals if complex_values else vals.real, L)


def unit_h2(front):
    return FrontSample(front.values / h2_norm(front), front.L)


def mode(k0, N=64):
    return FrontSample.from_function(lambda x: np.exp(1j * k0 * x), N, L)


@pytest.mark.parametrize("M", [2.5, 4, 16, 256])
def test_cutoff_properties(M):
    chi = make_cutoff(M)
    s = np.linspace(-M - 1, M + 1, 200_001)
    assert chi(0.5) == 1 and chi(-1) == 1 and chi(0) == 1
    assert chi(M) == 0 and chi(-M) == 0 and np.all(chi(s[np.abs(s) >= M]) == 0)
    np.testing.assert_array_equal(chi(s), chi(-s))
    assert np.abs(chi.derivative(s)).max() <= 2 / M
    assert np.all(np.diff(chi(s[s >= 0])) <= 0)


@pytest.mark.parametrize("M", [3, 8])
def test_cutoff_is_twice_continuously_differentiable(M):
    chi = make_cutoff(M)
    h = 1e-5
    s = np.linspace(0.5, M + 0.5, 40_001)
    fd = (chi(s + h) - chi(s - h)) / (2 * h)
    np.testing.assert_allclose(fd, chi.derivative(s), atol=1e-8)
    # chi'' bounded means chi' is Lipschitz with the smoothstep bound 1.5 / (a (M - 1))
    lip = chi.max_slope * 1.5 / (chi.a * (M - 1))
    assert np.abs(np.diff(chi.derivative(s))).max() <= lip * (s[1] - s[0]) * (1 + 1e-9)


@pytest.mark.parametrize("M", [0.5, 1.0, 1.5, 2.0])
def test_cutoff_rejects_small_support(M):
    with pytest.raises(ValueError):
        make_cutoff(M)


@pytest.mark.parametrize("values", [np.zeros(8), np.zeros(48), np.r_[np.zeros(15), np.nan]])
def test_front_sample_validation(values):
    with pytest.raises(ValueError):
        FrontSample(values, L)


def test_front_sample_rejects_nonpositive_length():
    with pytest.raises(ValueError):
        FrontSample(np.zeros(16), 0.0)


def test_zero_front_lifts_to_zero():
    f = FrontSample(np.zeros(64), L)
    assert np.all(lift(f, make_cutoff(4), np.linspace(0, 5, 11)) == 0)


@settings(max_examples=25)
@given(st.integers(0, 10**6), st.booleans(), st.sampled_from([16, 64, 512]))
def test_trace_identity(seed, cplx, N):
    f = broadband(N, seed, complex_values=cplx)
    psi = lift(f, make_cutoff(4), [0.0])[0]
    assert np.abs(psi - f.values).max() <= 1e-12 * max(1.0, np.abs(f.values).max())


@pytest.mark.parametrize("k0", [0, 3, -7, 20])
def test_single_mode(k0):
    f = mode(k0)
    chi = make_cutoff(4)
    x1 = np.linspace(0, 1.2, 13)
    expected = np.outer(chi(x1 * math.sqrt(1 + k0**2)), f.values)
    np.testing.assert_allclose(lift(f, chi, x1), expected, atol=1e-13)


def test_lift_matches_naive_dft():
    f = broadband(64, seed=3, complex_values=True)
    chi = make_cutoff(5)
    for x1 in (0.0, 0.1, 0.3, 1.0):
        oracle = naive_multiplier(f.values, L, lambda xi: chi(x1 * np.sqrt(1 + xi**2)))
        np.testing.assert_allclose(lift(f, chi, [x1])[0], oracle, atol=1e-12)


def test_dx1_matches_finite_difference():
    f = broadband(256, seed=4)
    chi = make_cutoff(6)
    x1, h = np.array([0.2, 0.7, 2.5]), 1e-6
    fd = (lift(f, chi, x1 + h) - lift(f, chi, x1 - h)) / (2 * h)
    np.testing.assert_allclose(lift_dx1(f, chi, x1), fd, atol=1e-6 * np.abs(fd).max())


@pytest.mark.parametrize("M", [4, 16])
def test_multiplier_locality(M):
    f = broadband(256, seed=5)
    psi = lift(f, make_cutoff(M), np.array([M, M + 0.1, 2 * M]))
    assert np.all(psi == 0)


@pytest.mark.parametrize("k0", [0, 5])
def test_flatness_single_mode_is_exact(k0):
    f = mode(k0)
    h = 0.01
    psi = lift(f, make_cutoff(4), [0, h, 2 * h])
    assert verify_flatness(psi, h) <= 1e-12  # FFT round-off only
    assert np.all(lift_dx1(f, make_cutoff(4), [0.0]) == 0)


def test_flatness_first_order_for_broadband_front():
    f = broadband(1024, seed=0)
    chi = make_cutoff(4)
    hs = [0.08 / 2**j for j in range(6)]
    fd = [verify_flatness(lift(f, chi, [0, h, 2 * h]), h) for h in hs]
    C = fd[0] / hs[0]
    assert all(d <= C * h * (1 + 1e-12) for d, h in zip(fd, hs))
    assert all(b < a for a, b in zip(fd, fd[1:]))


def test_linf_decay_bounded():
    res = linf_decay_check(unit_h2(broadband(1024, seed=1)), [4, 16, 64, 256])
    assert res.bounded
    assert res.ratios[0] > 0
    assert all(s > 0 for s in res.sup_dx1)
    assert res.exponent < 0


def test_linf_decay_zero_front():
    res = linf_decay_check(FrontSample(np.zeros(64), L), [4, 16])
    assert res.ratios == [0.0, 0.0] and res.bounded


def test_diffeo_small_front():
    f = unit_h2(broadband(1024, seed=2))
    assert h2_norm(f) == pytest.approx(1)
    for M in (4, 16, 64):
        res = diffeo_check(f, make_cutoff(M))
        assert res.ok and res.M == M


def test_diffeo_zero_front():
    res = diffeo_check(FrontSample(np.zeros(64), L), make_cutoff(4))
    assert res.min_jacobian == 1 and res.ok


def test_diffeo_fails_for_large_front_with_small_support():
    f = FrontSample(40 * unit_h2(broadband(1024, seed=2)).values, L)
    assert not diffeo_check(f, make_cutoff(3)).ok


def test_sobolev_norm_of_single_mode():
    f = FrontSample.from_function(lambda x: np.cos(3 * x), 64, L)
    # |cos|^2 averages to 1/2 over a period of length 2 pi
    assert sobolev_norm(f, 2) == pytest.approx(10 * math.sqrt(math.pi), rel=1e-12)


@pytest.mark.parametrize("seed", [0, 1])
def test_lifted_sobolev_ratio_is_cutoff_square_integral(seed):
    # every mode contributes int_0^inf chi(s)^2 ds, so the ratio is that constant
    M = 4
    chi = make_cutoff(M)
    f = broadband(128, seed=seed, decay=4.0)
    x1 = np.linspace(0, M, 400_001)
    expected = quad(lambda s: float(chi(s)) ** 2, 0, M, points=[1.0], limit=200)[0]
    assert lifted_sobolev_ratio(f, chi, 3, x1) == pytest.approx(expected, rel=1e-6)


def test_batch_lift_matches_individual_lifts():
    fronts = [broadband(64, seed=s) for s in range(3)]
    chi = make_cutoff(4)
    x1 = np.linspace(0, 2, 5)
    out = batch_lift(fronts, chi, x1)
    assert out.shape == (3, 5, 64)
    for f, row in zip(fronts, out):
        np.testing.assert_array_equal(row, lift(f, chi, x1))
