import json

import numpy as np
import pytest

from helpers import GENERIC, ball_samples, case_centers
from plasmavac.grids import hemisphere_grid_array
from plasmavac.lopatinskii import lopatinskii_det, scan_boundary_roots
from plasmavac.symbol import FrequencyPoint, PointTag, critical_points, mode_arrays
from plasmavac.symmetrizer import (
    BOUNDARY_LOP_OK,
    BOUNDARY_ROOT,
    INTERIOR,
    NONDIAG,
    POLE_MU,
    POLE_P2,
    POLE_TAU,
    SymmetrizerError,
    build_certified,
    build_pole_mu,
    certify,
    coercivity_probe,
    cover_hemisphere,
    omega0_arrays,
    p2_omega0_closed_form,
    power_weight,
    uniform_weight_probe,
    with_reduced_dim,
)


EXPECTED_CASE = {
    "interior": INTERIOR,
    "lop_ok": BOUNDARY_LOP_OK,
    "root": BOUNDARY_ROOT,
    "null1": NONDIAG,
    "null2": NONDIAG,
    "null3": NONDIAG,
    "p1": POLE_MU,
    "p2": POLE_P2,
    "p3": POLE_TAU,
}


@pytest.fixture(scope="module")
def bundles():
    return {name: build_certified(GENERIC, c, tag) for name, (c, tag) in case_centers(GENERIC).items()}


@pytest.mark.parametrize("name", list(EXPECTED_CASE))
def test_bundle_certifies_with_exact_frames(bundles, name):
    b = bundles[name]
    assert b.case == EXPECTED_CASE[name]
    assert b.certification.certified
    assert b.constants["kappa"] > 0 and b.constants["C"] > 0 and b.constants["Kprime"] >= 1
    fr = b.frames(ball_samples(b))
    assert len(fr.gamma) == 100
    assert fr.similarity_residual().max() <= 1e-10
    assert fr.inverse_residual().max() <= 1e-10
    assert np.abs(fr.r - np.conj(np.swapaxes(fr.r, -1, -2))).max() <= 1e-12
    D = b.dissipation(fr)
    assert np.abs(np.linalg.eigvals(D).imag).max() <= 1e-12 * max(1.0, np.abs(D).max())


@pytest.mark.parametrize("name", list(EXPECTED_CASE))
@pytest.mark.parametrize("scale", [0.5, 2.0])
def test_homogeneous_extension_preserves_certificate(bundles, name, scale):
    b = bundles[name]
    assert certify(b, ball_samples(b), scale=scale).certified


def test_certification_json(bundles):
    out = bundles["root"].to_json()
    json.dumps(out, allow_nan=False)
    assert {"case", "center", "radius", "kappa", "C", "Kprime", "min_eigs", "certified"} <= set(out)


def _certifies_dissipativity(b, weight):
    return certify(b, ball_samples(b), weight=with_reduced_dim(b, weight)).min_eig_dissipativity >= -1e-10


def _certifies_coercivity(b, rhs):
    return certify(b, ball_samples(b), rhs=rhs).min_eig_coercivity >= -1e-10


def test_root_weight_is_sharp(bundles):
    b = bundles["root"]
    assert _certifies_dissipativity(b, power_weight(3))
    assert not _certifies_dissipativity(b, power_weight(2))
    assert not _certifies_dissipativity(b, power_weight(1))


def test_root_coercivity_needs_gamma_squared(bundles):
    b = bundles["root"]
    assert _certifies_coercivity(b, lambda fr: fr.gamma**2)
    assert not _certifies_coercivity(b, lambda fr: np.ones_like(fr.gamma))


@pytest.mark.parametrize("name", ["lop_ok", "null2", "p3"])
def test_constant_weight_fails_where_gamma_weight_is_needed(bundles, name):
    b = bundles[name]
    assert _certifies_dissipativity(b, power_weight(1))
    assert not _certifies_dissipativity(b, power_weight(0))


@pytest.mark.parametrize("name", ["p1", "p3"])
def test_pole_coercivity_needs_gamma_squared(bundles, name):
    assert not _certifies_coercivity(bundles[name], lambda fr: np.ones_like(fr.gamma))


def test_p2_weight_is_anisotropic(bundles):
    b = bundles["p2"]

    def isotropic(fr):
        w = fr.gamma / np.abs(fr.extra["tau_tilde"]) ** 2
        return np.stack([w] * 4, axis=-1)

    assert not _certifies_dissipativity(b, isotropic)
    assert not _certifies_dissipativity(b, power_weight(0))


def test_root_gamma_ladder_probes(bundles):
    b = bundles["root"]
    assert uniform_weight_probe(b, power_weight(2))["uniform"]
    assert not uniform_weight_probe(b, power_weight(1))["uniform"]
    assert not coercivity_probe(b, lambda fr: np.ones_like(fr.gamma))["uniform"]


def test_interior_constant_weight(bundles):
    b = bundles["interior"]
    assert b.center.gamma > b.neighborhood_radius
    assert _certifies_dissipativity(b, power_weight(0))


def test_diagonal_target(bundles):
    b = bundles["interior"]
    fr = b.frames(b.center.as_array()[None, :])
    m = mode_arrays(GENERIC, *b.center.as_array())
    np.testing.assert_allclose(
        np.diag(fr.At[0]), [-complex(m.omega1), complex(m.omega1), -complex(m.omega2), complex(m.omega2)], atol=1e-12
    )


def test_jordan_block_at_null2_center(bundles):
    b = bundles["null2"]
    fr = b.frames(b.center.as_array()[None, :])
    np.testing.assert_allclose(fr.At[0, :2, :2], [[0, 1j], [0, 0]], atol=1e-7)
    eps1 = b.constants["eps1"]
    assert isinstance(eps1, float) and eps1 != 0


def test_pole_mu_identities(bundles):
    b = bundles["p1"]
    smp = ball_samples(b)
    fr = b.frames(smp)
    m1, m2 = fr.extra["m1"], fr.extra["m2"]
    w1 = fr.extra["modes"].omega1
    np.testing.assert_allclose(w1**2, m1**2 - m2**2, rtol=1e-12)
    assert np.abs(fr.extra["det_Tinv_block"]).min() > 0
    mu = fr.extra["modes"].sym.mu
    np.testing.assert_allclose(fr.extra["det_Tinv_block"], 2 * m1 * mu**2 * (m1 - w1), rtol=1e-10)


def test_pole_tau_identities(bundles):
    b = bundles["p3"]
    fr = b.frames(ball_samples(b))
    n1, n2 = fr.extra["n1"], fr.extra["n2"]
    w2 = fr.extra["modes"].omega2
    tau = fr.extra["modes"].sym.tau
    # n1, n2 are at least of size 1/eps and grow like 1/tau, so the check is relative to their squares
    assert np.all(np.abs(w2**2 - (n1**2 - n2**2)) <= 1e-12 * (np.abs(n1) ** 2 + np.abs(n2) ** 2))
    sym = fr.extra["modes"].sym
    np.testing.assert_allclose(w2**2, sym.a34 * sym.a43, rtol=1e-12)
    np.testing.assert_allclose(fr.extra["det_Tinv_block"], 2 * tau**2 * n1 * (n1 - w2), rtol=1e-10)
    assert np.abs(fr.extra["det_Tinv_block"]).min() > 0


def test_exact_pole_sample_rejected():
    p1 = FrequencyPoint(*critical_points(GENERIC)[PointTag.POLE_P1][0])
    with pytest.raises(SymmetrizerError):
        build_pole_mu(GENERIC, p1, samples=p1.as_array()[None, :])


def test_p2_omega0_closed_form(bundles):
    b = bundles["p2"]
    c = b.center
    sign = 1.0 if c.eta > 0 else -1.0
    w0 = complex(omega0_arrays(GENERIC, b.constants["sigma"], 0.0, sign * c.delta, sign * c.eta))
    expected = p2_omega0_closed_form(GENERIC, abs(c.eta))
    assert abs(w0.real) <= 1e-12
    assert abs(w0.imag) == pytest.approx(abs(expected.imag), rel=1e-10)
    assert abs(lopatinskii_det(GENERIC, c)) > 0
    assert -b.constants["e0"] * b.constants["d2"] > 0


def test_full_covering_of_dense_grid():
    grid = hemisphere_grid_array(63)
    assert len(grid) >= 10_000
    cov = cover_hemisphere(GENERIC, grid, scan_boundary_roots(GENERIC).boundary_roots)
    assert cov.complete
    assert all(b.certification.certified for b in cov.certified_bundles())
