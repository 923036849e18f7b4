import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from conftest import random_shell
from dscharge import models
from dscharge.errors import DomainError, NotFoundError, ParameterError
from dscharge.initial_data import (
    EndChart,
    HyperbolicConformal,
    InitialDataSet,
    PlanarConformal,
    Sphere,
    angular_density,
    angular_density_arrays,
    conformal_decompose,
    decay_fit,
    find_horizon_spherical,
    flat_field,
    horizon_residual,
    hyperbolic_metric,
    integrability_diagnostics,
    null_expansions,
    rotate_data_set,
)
from dscharge.models import KerrDSParams, McVittieParams
from dscharge.quadrature import QuadratureSpec
from dscharge.tensor_kernel import TensorField, scale_field, zero_field

LAM = 10.0


def power_law_data(c, s):
    """Planar data with ``gbar - delta = c r^{-s} delta`` and ``K = g / lambda``."""
    def dev(x):
        r = np.linalg.norm(x, axis=-1)
        return (c * r**-s)[..., None, None] * np.eye(3)

    def g(x):
        return np.eye(3) + dev(x)

    gf = TensorField(g, 3)
    return InitialDataSet(gf, scale_field(gf, 1 / LAM), 3 / LAM**2, PlanarConformal(1.0),
                          h=zero_field(), gbar_dev=TensorField(dev, 3))


# ---------------------------------------------------------------------------
# data sets and decomposition


def test_conformal_types_validate():
    with pytest.raises(ParameterError):
        PlanarConformal(0.0)
    with pytest.raises(DomainError):
        HyperbolicConformal(0.0, LAM)
    with pytest.raises(ParameterError):
        EndChart("cylindrical")
    with pytest.raises(ParameterError):
        InitialDataSet(flat_field(), zero_field(), 0.03, HyperbolicConformal(1.0, LAM))
    with pytest.raises(ParameterError):
        InitialDataSet(flat_field(), zero_field(), 0.0, PlanarConformal(1.0))


def test_planar_de_sitter_decomposes_to_flat(rng):
    d = models.de_sitter_planar(LAM, 4.0)
    dec = conformal_decompose(d)
    x = random_shell(rng, 10, 1, 50)
    assert np.allclose(dec.gbar(x), np.eye(3), rtol=1e-15)
    assert np.all(dec.hbar(x) == 0)
    assert dec.htilde is None


def test_mcvittie_decomposition(mcvittie, rng):
    dec = conformal_decompose(mcvittie)
    x = random_shell(rng, 10, 0.6, 50)
    r = np.linalg.norm(x, axis=1)
    assert np.allclose(dec.gbar(x), ((1 + 1 / (2 * r)) ** 4)[:, None, None] * np.eye(3), rtol=1e-14)
    assert np.all(dec.hbar(x) == 0)


def test_hyperbolic_de_sitter_decomposition(rng):
    d = models.de_sitter_hyperbolic(LAM, 5.0)
    dec = conformal_decompose(d)
    x = np.column_stack([rng.uniform(1, 30, 10), rng.uniform(0.3, 2.8, 10), rng.uniform(0, 6, 10)])
    gH = hyperbolic_metric(LAM)(x)
    assert np.allclose(dec.gbar(x), gH, rtol=1e-13)
    assert np.max(np.abs(dec.hbar(x))) < 1e-13 * np.max(np.abs(gH))
    assert np.allclose(dec.htilde(x), gH / LAM, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("t", [0.0, 5.0])
def test_decomposition_reassembles_data(t, rng):
    d = models.kerr_planar_slice(KerrDSParams(1.0, 0.5, LAM, t))
    dec = conformal_decompose(d)
    P = d.conformal.P
    x = random_shell(rng, 10, 30, 100)
    assert np.allclose(P**2 * dec.gbar(x), d.g(x), rtol=1e-14, atol=0)
    K = P * dec.hbar(x) + P**2 * dec.gbar(x) / LAM
    assert np.max(np.abs(K - d.K(x))) < 1e-14 * np.max(np.abs(d.K(x)))


# ---------------------------------------------------------------------------
# decay


def test_mcvittie_metric_decays_like_one_over_r(mcvittie):
    fit = decay_fit(mcvittie, [1e2, 2e2, 4e2, 8e2])
    assert fit.tau_hat == pytest.approx(1.0, abs=0.02)
    assert fit.clears_threshold and not fit.exact


def test_exact_background_is_flagged():
    fit = decay_fit(models.de_sitter_planar(LAM, 0.0), [10, 20, 40])
    assert fit.exact and math.isinf(fit.tau_hat)


@pytest.mark.parametrize("s", [0.6, 1.0, 2.0, 3.0])
def test_power_law_decay_is_recovered(s):
    fit = decay_fit(power_law_data(0.7, s), [10, 20, 40, 80, 160])
    assert fit.tau_hat == pytest.approx(s, abs=1e-3)
    assert fit.clears_threshold == (s > 0.5)


def test_growing_field_flags_a_failed_fit():
    fit = decay_fit(power_law_data(0.1, -1.0), [10, 20, 40])
    assert fit.failed and not fit.clears_threshold


def test_kerr_momentum_tensor_decay(kerr):
    # every Cartesian component of hbar falls like r^-3 (frame components of
    # the leading hbar_rr, hbar_rpsi and hbar_thetatheta terms)
    fit = decay_fit(kerr, [1e2, 1e3, 1e4], which="hbar", n_dirs=64)
    assert fit.tau_hat == pytest.approx(3.0, abs=0.1)


def test_hyperbolic_decay_uses_exponential_scale():
    def a(x):
        out = np.zeros(x.shape[:-1] + (3, 3))
        out[..., 0, 0] = 1e-3 * np.exp(-3 * x[..., 0] / LAM)
        return out

    d = models.hyperbolic_perturbation(LAM, 5.0, a_frame=a)
    fit = decay_fit(d, [20, 40, 60, 80], n_dirs=32)
    assert fit.tau_hat == pytest.approx(3.0, abs=1e-6)
    assert fit.clears_threshold


def test_decay_fit_needs_two_radii(mcvittie):
    with pytest.raises(ParameterError):
        decay_fit(mcvittie, [10])


# ---------------------------------------------------------------------------
# horizons


def test_mcvittie_minimal_sphere_residual(mcvittie):
    assert abs(horizon_residual(mcvittie, Sphere(0.5))) < 1e-12
    assert abs(horizon_residual(mcvittie, Sphere(0.5), "past")) < 1e-12


def test_planar_de_sitter_has_no_horizon(rng):
    d = models.de_sitter_planar(LAM, 2.0)
    for _ in range(20):
        s = Sphere(rng.uniform(0.1, 50), tuple(rng.uniform(-5, 5, 3)))
        A = math.exp(0.2)
        assert horizon_residual(d, s) == pytest.approx(-2 / (A * s.radius), rel=1e-12)
        assert horizon_residual(d, s) < 0
    with pytest.raises(NotFoundError):
        find_horizon_spherical(d)


def test_hyperbolic_residual_closed_form():
    T, R = 5.0, 5.0
    d = models.de_sitter_hyperbolic(LAM, T)
    H = 2 / (LAM * math.sinh(T / LAM) * math.tanh(R / LAM))
    trK = 2 / (LAM * math.tanh(T / LAM))
    rhs = trK - 2 * math.tanh(T / (2 * LAM)) / LAM
    assert horizon_residual(d, Sphere(R)) == pytest.approx(rhs - H, rel=1e-12)
    assert horizon_residual(d, Sphere(R), "past") == pytest.approx(rhs + H, rel=1e-12)


def test_null_expansions_of_planar_de_sitter():
    t, r = 3.0, 4.0
    ne = null_expansions(models.de_sitter_planar(LAM, t), Sphere(r))
    H = 2 / (r * math.exp(t / LAM))
    assert ne.theta_plus == pytest.approx(H + 2 / LAM, rel=1e-13)
    assert ne.theta_minus == pytest.approx(H - 2 / LAM, rel=1e-13)
    assert not ne.marginal


def test_null_expansions_of_time_symmetric_data():
    d = InitialDataSet(flat_field(), zero_field(), 3 / LAM**2, PlanarConformal(1.0))
    ne = null_expansions(d, Sphere(2.0))
    assert ne.theta_plus == ne.theta_minus == pytest.approx(1.0, rel=1e-14)


def test_null_expansions_on_mcvittie_minimal_sphere(mcvittie):
    ne = null_expansions(mcvittie, Sphere(0.5))
    assert ne.theta_plus == pytest.approx(2 / LAM, rel=1e-12)
    assert ne.theta_minus == pytest.approx(-2 / LAM, rel=1e-12)
    assert ne.theta_plus == pytest.approx(ne.theta_minus + 4 / LAM, rel=1e-12)


@pytest.mark.parametrize("m,t", [(1.0, 0.0), (2.0, LAM * math.log(2))])
def test_mcvittie_horizon_is_found(m, t):
    d = models.mcvittie_slice(McVittieParams(m, LAM, t))
    res = find_horizon_spherical(d, bracket=(0.3, 0.8))
    assert res.radius == pytest.approx(m / (2 * math.exp(t / LAM)), rel=1e-9)
    assert abs(res.residual) < 1e-10


def test_horizon_is_stable_under_quadrature_doubling(mcvittie):
    q = QuadratureSpec(8, 16)
    r1 = find_horizon_spherical(mcvittie, q=q).radius
    r2 = find_horizon_spherical(mcvittie, q=q.doubled()).radius
    assert abs(r1 - r2) < 1e-9


def test_bad_bracket_and_sign(mcvittie):
    with pytest.raises(ParameterError):
        find_horizon_spherical(mcvittie, bracket=(0.8, 0.3))
    with pytest.raises(ParameterError):
        horizon_residual(mcvittie, Sphere(1.0), "sideways")
    with pytest.raises(ParameterError):
        Sphere(0.0)


def _bar_data(d):
    dec = conformal_decompose(d)
    return InitialDataSet(dec.gbar, scale_field(dec.gbar, 1 / LAM), d.Lambda, PlanarConformal(1.0), h=dec.hbar)


@pytest.mark.parametrize("which", ["mcvittie", "kerr"])
def test_horizon_residual_scales_with_the_conformal_factor(which, rng):
    if which == "mcvittie":
        d = models.mcvittie_slice(McVittieParams(1.0, LAM, LAM * math.log(2)))
        centers, radii = rng.uniform(-0.5, 0.5, (100, 3)), rng.uniform(1.0, 20.0, 100)
    else:
        d = models.kerr_planar_slice(KerrDSParams(1.0, 0.5, LAM, 5.0))
        centers, radii = rng.uniform(-3, 3, (100, 3)), rng.uniform(20.0, 60.0, 100)
    P = d.conformal.P
    assert P > 1
    dbar = _bar_data(d)
    for c, r in zip(centers, radii):
        s = Sphere(float(r), tuple(c))
        assert horizon_residual(d, s) == pytest.approx(horizon_residual(dbar, s) / P, rel=1e-9, abs=1e-14)


# ---------------------------------------------------------------------------
# angular momentum density


def test_zero_momentum_tensor_gives_zero_density(rng):
    x = random_shell(rng, 5, 1, 10)
    assert np.all(angular_density_arrays(np.broadcast_to(np.eye(3), (5, 3, 3)), np.zeros((5, 3, 3)), x) == 0)


def test_radial_momentum_tensor_density():
    x = np.array([[1.0, -2.0, 0.5], [3.0, 0.2, -1.0]])
    r = np.linalg.norm(x, axis=1)
    n = x / r[:, None]
    f = 1 / r**2
    hbar = f[:, None, None] * np.einsum("ni,nj->nij", n, n)
    ht = angular_density_arrays(np.broadcast_to(np.eye(3), (2, 3, 3)), hbar, x)
    # direct contraction: the radial leg drops out, the trace term gives -f eps_iuj x_u
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k], eps[i, k, j] = 1, -1
    ref = -f[:, None, None] * np.einsum("iuj,nu->nij", eps, x)
    assert np.allclose(ht, ref, atol=1e-15)
    # the flux through round spheres about z vanishes
    assert np.allclose(np.einsum("nij,nj->ni", ht, n), 0, atol=1e-15)


def test_density_is_trace_free(kerr, rng):
    x = random_shell(rng, 20, 30, 300)
    dec = conformal_decompose(kerr)
    gbar = dec.gbar(x)
    ht = angular_density(kerr, x)
    tr = np.einsum("nij,nij->n", np.linalg.inv(gbar), ht)
    assert np.max(np.abs(tr)) < 1e-8 * np.max(np.abs(ht))


def test_density_undefined_at_reference_point():
    with pytest.raises(DomainError):
        angular_density_arrays(np.eye(3)[None], np.zeros((1, 3, 3)), np.zeros((1, 3)))


def test_density_rejects_hyperbolic_data():
    with pytest.raises(ParameterError):
        angular_density(models.de_sitter_hyperbolic(LAM, 5.0), np.ones((1, 3)))


def test_density_e3e2_of_kerr_at_large_radius(kerr_params):
    comp = models.kerr_planar_components(kerr_params, 1e3, np.array(np.pi / 2), np.array(0.0))
    ref = LAM / (1.0025**1.5 * 1e6)
    assert abs(float(comp["htilde_e3e2"]) / ref - 1) < 10 / 1e3


def test_volume_weighted_epsilon_is_a_small_correction(kerr, rng):
    x = random_shell(rng, 5, 100, 200)
    flat = angular_density(kerr, x)
    vol = angular_density(kerr, x, epsilon="gbar")
    assert np.max(np.abs(vol - flat)) < 1e-2 * np.max(np.abs(flat))
    with pytest.raises(ParameterError):
        angular_density(kerr, x, epsilon="other")


# ---------------------------------------------------------------------------
# rotations and integrability


def test_rotated_fields_transform_as_tensors(kerr, rng):
    R = Rotation.random(random_state=3).as_matrix()
    dr = rotate_data_set(kerr, R)
    x = random_shell(rng, 5, 30, 100)
    y = x @ R.T
    assert np.allclose(dr.g(y), np.einsum("ia,jb,nab->nij", R, R, kerr.g(x)), rtol=1e-13, atol=1e-15)
    # K and h carry finite-difference noise taken along rotated axes
    for a, b in ((kerr.K, dr.K), (kerr.h, dr.h)):
        ref = np.einsum("ia,jb,nab->nij", R, R, a(x))
        assert np.max(np.abs(b(y) - ref)) < 1e-9 * np.max(np.abs(kerr.h(x)))
    dg = np.einsum("kc,ia,jb,ncab->nkij", R, R, R, kerr.g.grad(x))
    assert np.allclose(dr.g.grad(y), dg, atol=1e-12)


def test_rotation_must_be_proper(kerr):
    with pytest.raises(ParameterError):
        rotate_data_set(kerr, -np.eye(3))
    with pytest.raises(ParameterError):
        rotate_data_set(models.de_sitter_hyperbolic(LAM, 5.0), np.eye(3))


def test_integrability_surrogate(mcvittie):
    out = integrability_diagnostics(mcvittie, [2, 4, 8, 16])
    assert out["scalar_curvature"]["cauchy"] and out["momentum_density"]["cauchy"]
    assert max(out["scalar_curvature"]["annuli"]) < 1e-9
