import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from dscharge import charges, models
from dscharge.charges import (
    ChargeReport,
    ExtrapolationSpec,
    charge_report,
    extrapolate,
    hyperbolic_charges,
    hyperbolic_samples,
    mass_inequalities,
    planar_samples,
    rescale_charges,
)
from dscharge.errors import IncompleteReportError, ParameterError
from dscharge.initial_data import InitialDataSet, PlanarConformal, flat_field, rotate_data_set
from dscharge.quadrature import QuadratureSpec, surface_integral
from dscharge.tensor_kernel import TensorField, scale_field, zero_field
from oracles import hyperbolic_energy_oracle

LAM = 10.0


def schwarzschild_conformal(mu):
    """``gbar = (1 + mu/2r)^4 delta``, ``hbar = 0`` with the deviation and its
    gradient written out by hand."""
    def dev(x):
        r = np.linalg.norm(x, axis=-1)
        return ((1 + mu / (2 * r)) ** 4 - 1)[..., None, None] * np.eye(3)

    def ddev(x):
        r = np.linalg.norm(x, axis=-1)
        dpsi4 = 4 * (1 + mu / (2 * r)) ** 3 * (-mu / (2 * r**2))
        grad = (dpsi4 / r)[..., None] * x
        return grad[..., :, None, None] * np.eye(3)

    devf = TensorField(dev, 3, ddev)
    g = TensorField(lambda x: np.eye(3) + dev(x), 3, ddev)
    return InitialDataSet(g, scale_field(g, 1 / LAM), 3 / LAM**2, PlanarConformal(1.0),
                          h=zero_field(), gbar_dev=devf)


# ---------------------------------------------------------------------------
# quadrature


def test_sphere_area():
    assert surface_integral(lambda x, n: np.ones(len(x)), 2.0) == pytest.approx(16 * np.pi, rel=1e-14)
    assert 16 * np.pi == pytest.approx(50.26548, abs=5e-6)


def test_odd_moment_vanishes():
    assert abs(surface_integral(lambda x, n: n[:, 0] * n[:, 1], 1.0)) < 1e-15


def test_second_moment():
    v = surface_integral(lambda x, n: n[:, 2] ** 2, 1.0)
    assert v == pytest.approx(4 * np.pi / 3, rel=1e-14)
    assert v == pytest.approx(4.18879, abs=5e-6)


def test_quadrature_exact_for_high_degree():
    q = QuadratureSpec(8, 16)
    # degree 14 in cos(theta) and band 7 in psi are integrated exactly
    v = surface_integral(lambda x, n: n[:, 2] ** 14 + n[:, 0] ** 6, 1.0, q)
    assert v == pytest.approx(4 * np.pi / 15 + 4 * np.pi / 7, rel=1e-13)


def test_quadrature_validation():
    with pytest.raises(ParameterError):
        QuadratureSpec(4, 128)
    with pytest.raises(ParameterError):
        QuadratureSpec(64, 8)
    with pytest.raises(ParameterError):
        surface_integral(lambda x, n: 1, 0.0)


# ---------------------------------------------------------------------------
# extrapolation


@pytest.mark.parametrize("s", [0.6, 1.0, 2.0, 3.0])
def test_extrapolation_recovers_limit_and_exponent(s):
    r = 1e3 * 2.0 ** np.arange(5)
    fit = extrapolate(r, 1.5 + 4.0 * r**-s)
    assert fit.value == pytest.approx(1.5, rel=1e-9)
    assert fit.s == pytest.approx(s, rel=1e-4)
    assert fit.method == "free" and fit.warning is None


def test_pinned_extrapolation():
    r = 1e3 * 2.0 ** np.arange(5)
    fit = extrapolate(r, -0.3 + 2e3 / r, s=1.0)
    assert fit.value == pytest.approx(-0.3, rel=1e-13)
    assert fit.c == pytest.approx(2e3, rel=1e-10)
    assert fit.method == "pinned"


def test_hyperbolic_extrapolation():
    R = LAM * (5 + np.arange(5.0))
    fit = extrapolate(R, 0.2 + 3 * np.exp(-2 * R / LAM), hyperbolic=True, lam=LAM)
    assert fit.value == pytest.approx(0.2, rel=1e-10)
    assert fit.s == pytest.approx(2.0, rel=1e-5)


def test_exact_and_noise_floor_sequences():
    r = np.array([1.0, 2.0, 4.0])
    assert extrapolate(r, np.zeros(3)).method == "exact"
    fit = extrapolate(r, np.array([1e-13, -2e-13, 5e-14]))
    assert fit.method == "noise-floor" and abs(fit.value) < 1e-12


def test_bad_tail_is_flagged():
    r = 1e2 * 2.0 ** np.arange(5)
    fit = extrapolate(r, np.array([1.0, 1.3, 0.8, 1.2, 0.9]))
    assert "not monotone" in fit.warning


def test_extrapolation_input_validation():
    with pytest.raises(ParameterError):
        extrapolate([1, 2], [1, 2])
    with pytest.raises(ParameterError):
        extrapolate([1, 3, 2], [1, 2, 3])
    with pytest.raises(ParameterError):
        ExtrapolationSpec(count=2)
    with pytest.raises(ParameterError):
        ExtrapolationSpec(ratio=1.0)


def test_default_radii():
    assert np.allclose(ExtrapolationSpec().radii(LAM), [1e3, 2e3, 4e3, 8e3, 1.6e4])
    assert np.allclose(ExtrapolationSpec().radii(LAM, hyperbolic=True), [50, 60, 70, 80, 90])


# ---------------------------------------------------------------------------
# planar charges


def test_schwarzschild_conformal_energy():
    d = schwarzschild_conformal(2.0)
    raw = planar_samples(d, 1e4)[0]
    assert raw == pytest.approx(2.0, rel=1e-3)
    bc = charges.adm_charges_bar(d)
    Eb, Pb, Jb = bc.values
    assert Eb == pytest.approx(2.0, abs=1e-6)
    assert np.all(np.abs(Pb) < 1e-10) and np.all(np.abs(Jb) < 1e-10)


def test_flat_data_has_no_charges():
    d = InitialDataSet(flat_field(), scale_field(flat_field(), 1 / LAM), 3 / LAM**2, PlanarConformal(1.0),
                       h=zero_field(), gbar_dev=zero_field())
    Eb, Pb, Jb = charges.adm_charges_bar(d).values
    assert Eb == 0 and np.all(Pb == 0) and np.all(Jb == 0)


def test_mcvittie_at_later_time_rescales():
    d = models.mcvittie_slice(models.McVittieParams(1.0, LAM, LAM * math.log(2)))
    r = charge_report(d)
    assert r.charges["conformal"] == pytest.approx(2.0, rel=1e-15)
    assert r.charges["Ebar"] == pytest.approx(0.5, abs=1e-6)
    assert r.charges["E"] == pytest.approx(1.0, abs=1e-6)


def test_rescale_examples():
    E, P, J = rescale_charges(0.7, [1, 2, 3], [4, 5, 6], 1.0)
    assert E == 0.7 and np.array_equal(P, [1, 2, 3]) and np.array_equal(J, [4, 5, 6])
    E, P, J = rescale_charges(0.5, [3, 0, 0], [0, 0, 0], 2.0)
    assert E == 1.0 and np.array_equal(P, [12, 0, 0])
    with pytest.raises(ParameterError):
        rescale_charges(1, [0, 0, 0], [0, 0, 0], 0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10), st.floats(0, 5), st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_margin_consistency(Pc, Eb, Pb):
    E, P, J = rescale_charges(Eb, Pb, [0, 0, 0], Pc)
    m = mass_inequalities({"E": E, "P": P, "J": J, "conformal": Pc})
    assert m["energy"] == pytest.approx(Pc * (Eb - np.linalg.norm(Pb)), rel=1e-12, abs=1e-12)


def test_planar_samples_reject_hyperbolic_data():
    with pytest.raises(ParameterError):
        planar_samples(models.de_sitter_hyperbolic(LAM, 5.0), 100.0)


def test_mcvittie_charges(mcvittie_report):
    ch = mcvittie_report.charges
    assert ch["E"] == pytest.approx(1.0, abs=1e-6)
    assert np.linalg.norm(ch["P"]) < 1e-8 and np.linalg.norm(ch["J"]) < 1e-8


def test_quadrature_doubling_mcvittie(mcvittie):
    q = QuadratureSpec()
    e1 = charges.adm_charges_bar(mcvittie, q).values[0]
    e2 = charges.adm_charges_bar(mcvittie, q.doubled()).values[0]
    assert abs(e2 - e1) < 1e-8 * abs(e1)


def test_quadrature_doubling_kerr(kerr):
    q = QuadratureSpec()
    j1 = charges.adm_charges_bar(kerr, q).values[2][2]
    j2 = charges.adm_charges_bar(kerr, q.doubled()).values[2][2]
    assert abs(j2 - j1) < 1e-8 * abs(j1)


def test_kerr_shifted_over_standard_ratio(kerr_report, kerr_shifted_report, kerr_params):
    ratio = kerr_shifted_report.charges["J"][2] / kerr_report.charges["J"][2]
    assert ratio == pytest.approx(kerr_params.xi, abs=1e-6)


def test_kerr_angular_momentum_magnitude(kerr_report, kerr_shifted_report):
    # |J3| against m a / xi^2 and m a / xi, independent of the sign convention
    assert abs(kerr_report.charges["J"][2]) == pytest.approx(0.5 / 1.0025**2, rel=5e-3)
    assert abs(kerr_shifted_report.charges["J"][2]) == pytest.approx(0.5 / 1.0025, rel=5e-3)


def test_kerr_energy_and_momentum_vanish(kerr_report):
    ch = kerr_report.charges
    assert abs(ch["E"]) < 1e-3 and np.linalg.norm(ch["P"]) < 1e-3
    assert abs(ch["J"][0]) < 1e-4 and abs(ch["J"][1]) < 1e-4


def test_spinless_kerr_has_no_angular_momentum():
    d = models.build({"model": "kerr-ds", "m": 1.0, "a": 0.0, "lambda": LAM})
    J, _ = charges.angular_momentum(d)
    assert np.linalg.norm(J) < 1e-8


def test_raw_sequences_follow_the_tail_model(mcvittie_report, kerr_report):
    for rep in (mcvittie_report, kerr_report):
        fits = rep.diagnostics["fit"]
        for f in [fits["E"], *fits["P"], *fits["J"]]:
            if f["method"] in ("exact", "noise-floor"):
                continue
            assert f["residual"] < max(1e-3 * abs(f["value"]), 1e-8)


def test_rotation_equivariance(kerr):
    R = Rotation.from_euler("zyx", [0.3, 0.7, -0.4]).as_matrix()
    base = charges.adm_charges_bar(kerr).values
    rot = charges.adm_charges_bar(rotate_data_set(kerr, R)).values
    assert rot[0] == pytest.approx(base[0], abs=1e-8)
    assert np.allclose(rot[1], R @ base[1], atol=1e-8)
    assert np.allclose(rot[2], R @ base[2], atol=1e-8)
    assert abs(rot[2][2]) < 0.9 * abs(base[2][2])  # the spin axis is tilted


# ---------------------------------------------------------------------------
# hyperbolic charges


def _radial(f):
    def a(x):
        out = np.zeros(x.shape[:-1] + (3, 3))
        out[..., 0, 0] = f(x[..., 0])
        return out
    return a


def _angular(f):
    def h(x):
        out = np.zeros(x.shape[:-1] + (3, 3))
        out[..., 1, 1] = out[..., 2, 2] = f(x[..., 0])
        return out
    return h


def test_hyperbolic_de_sitter_has_no_charges():
    hc = hyperbolic_charges(models.de_sitter_hyperbolic(LAM, 5.0))
    assert np.all(np.abs(hc.values) < 1e-8)


def test_hyperbolic_slice_needs_hyperbolic_data(mcvittie):
    with pytest.raises(ParameterError):
        hyperbolic_samples(mcvittie, 50.0)


@pytest.mark.parametrize("which", ["a11", "hbar"])
def test_hyperbolic_energy_matches_linearized_oracle(which):
    import sympy as sp

    eps, T = 1e-3, 5.0
    if which == "a11":
        d = models.hyperbolic_perturbation(LAM, T, a_frame=_radial(lambda R: eps * np.exp(-2 * R / LAM)))
        oracle, _ = hyperbolic_energy_oracle(f_RR=lambda R: sp.Rational(1, 1000) * sp.exp(-2 * R / 10), T=5, lam=10)
    else:
        d = models.hyperbolic_perturbation(LAM, T, hbar_frame=_angular(lambda R: eps * np.exp(-2 * R / LAM)))
        oracle, _ = hyperbolic_energy_oracle(f_ang=lambda R: sp.Rational(1, 1000) * sp.exp(-2 * R / 10), T=5, lam=10)
    for R in ExtrapolationSpec().radii(LAM, hyperbolic=True):
        EH = hyperbolic_samples(d, R)
        assert EH[0] == pytest.approx(oracle(R), rel=1e-2)
        assert np.all(np.abs(EH[1:]) < 1e-10 * abs(EH[0]))


def test_convergent_hyperbolic_perturbation_limit():
    import sympy as sp

    eps, T = 1e-3, 5.0
    d = models.hyperbolic_perturbation(LAM, T, a_frame=_radial(lambda R: eps * np.exp(-3 * R / LAM)))
    _, expr = hyperbolic_energy_oracle(f_RR=lambda R: sp.Rational(1, 1000) * sp.exp(-3 * R / 10), T=5, lam=10)
    limit = float(sp.limit(expr, sp.Symbol("R"), sp.oo))
    H2 = math.sinh(T / LAM) ** 2
    assert limit == pytest.approx(H2 * eps * LAM / 8, rel=1e-12)
    hc = hyperbolic_charges(d)
    assert hc.values[0] == pytest.approx(limit, rel=1e-2)
    assert np.all(np.abs(hc.values[1:]) < 1e-8)


# ---------------------------------------------------------------------------
# inequalities and reports


def test_mcvittie_energy_margin(mcvittie_report):
    assert mcvittie_report.inequalities["energy"] == pytest.approx(1.0, abs=1e-6)


def test_de_sitter_margins_vanish():
    rep = charge_report(models.de_sitter_planar(LAM, 0.0))
    assert all(abs(v) < 1e-8 for v in rep.inequalities.values())
    rep = charge_report(models.de_sitter_hyperbolic(LAM, 5.0))
    assert abs(rep.inequalities["hyperbolic"]) < 1e-8


def test_kerr_angular_margin_is_negative(kerr_report):
    m = mass_inequalities(kerr_report, C1=1.0, C2=1.0)
    assert m["energy_angular"] < 0
    assert m["energy_angular"] == pytest.approx(-0.4975, abs=5e-3)


def test_incomplete_report():
    with pytest.raises(IncompleteReportError):
        mass_inequalities({"E": 1.0})
    with pytest.raises(IncompleteReportError):
        mass_inequalities({})


def test_report_serialization_is_deterministic(mcvittie):
    a = charge_report(mcvittie)
    b = charge_report(mcvittie)
    assert a.to_json() == b.to_json()
    assert a.to_csv() == b.to_csv()
    doc = json.loads(a.to_json())
    assert set(doc) == {"model", "convention", "charges", "diagnostics", "inequalities"}
    assert doc["convention"]["epsilon"] == "flat"
    assert set(doc["diagnostics"]["fit"]["E"]) >= {"s", "c", "residual"}
    lines = a.to_csv().splitlines()
    assert lines[0] == "charge,radius,value"
    assert len(lines) == 1 + 7 * 5
    assert isinstance(a, ChargeReport)
