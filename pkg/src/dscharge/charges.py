"""Charges at spatial infinity.

Planar ends: energy, linear and angular momentum of the rescaled data as
flat-sphere surface integrals, extrapolated in radius, then rescaled by the
conformal constant.  Hyperbolic ends: the energy-momentum 4-vector built
from the orthonormal frame of the hyperbolic background.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .errors import IncompleteReportError, ParameterError, SingularSliceError
from .initial_data import (
    InitialDataSet,
    angular_density_arrays,
    conformal_decompose,
    decay_fit,
    hyperbolic_frame_scale,
    hyperbolic_metric,
)
from .quadrature import QuadratureSpec, fsum_weighted, sphere_nodes, surface_integral
from .tensor_kernel import christoffel

__all__ = [
    "QuadratureSpec",
    "ExtrapolationSpec",
    "LimitFit",
    "extrapolate",
    "surface_integral",
    "planar_samples",
    "adm_charges_bar",
    "rescale_charges",
    "angular_momentum",
    "hyperbolic_samples",
    "hyperbolic_charges",
    "mass_inequalities",
    "ChargeReport",
    "charge_report",
]

FOUR_PI = 4 * np.pi
NOISE_FLOOR = 1e-10


@dataclass(frozen=True)
class ExtrapolationSpec:
    """Radii for the limit and the tail model ``Q(r) = Q_inf + c r^-s``.

    Planar radii are ``r0 * 2^k`` with ``r0 = r0_factor * lambda``; hyperbolic
    radii are ``R0 + k dR`` (in units of lambda) with tail ``c exp(-s R / lambda)``.
    ``s`` fixes the exponent; otherwise it is pinned from the decay fit when
    that fit is confident, or fitted freely within ``s_bounds``.
    """

    count: int = 5
    r0_factor: float = 100.0
    ratio: float = 2.0
    R0_factor: float = 5.0
    dR_factor: float = 1.0
    s: float | None = None
    s_bounds: tuple = (0.25, 8.0)
    pin_from_decay: bool = True

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 3:
            raise ParameterError("need at least 3 radii", field="count", value=self.count)
        for name in ("r0_factor", "R0_factor", "dR_factor"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive", field=name, value=getattr(self, name))
        if not self.ratio > 1:
            raise ParameterError("ratio must exceed 1", field="ratio", value=self.ratio)
        if self.s is not None and not self.s > 0:
            raise ParameterError("pinned exponent must be positive", field="s", value=self.s)

    def radii(self, lam, hyperbolic=False):
        k = np.arange(self.count)
        if hyperbolic:
            return lam * (self.R0_factor + self.dR_factor * k)
        return self.r0_factor * lam * self.ratio**k


class LimitFit(NamedTuple):
    value: float
    error: float  # change of the limit when the innermost radius is dropped
    s: float
    c: float
    residual: float  # max abs misfit over the radii
    cond: float  # condition number of the linear design
    method: str  # "exact", "noise-floor", "pinned", "free"
    warning: str | None

    def as_dict(self):
        return {k: _plain(v) for k, v in self._asdict().items()}


def _plain(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    return v


def _tail(x, s, hyperbolic):
    return np.exp(-s * x) if hyperbolic else x ** (-s)


def _linear_fit(x, y, s, hyperbolic):
    M = np.vstack([np.ones_like(x), _tail(x, s, hyperbolic)]).T
    # column scaling keeps the condition number meaningful
    scale = np.max(np.abs(M), axis=0)
    Ms = M / scale
    coef, *_ = np.linalg.lstsq(Ms, y, rcond=None)
    coef = coef / scale
    res = y - M @ coef
    return coef, float(np.max(np.abs(res))), float(np.linalg.cond(Ms))


def _fit(x, y, s, hyperbolic, bounds):
    if s is not None:
        coef, res, cond = _linear_fit(x, y, s, hyperbolic)
        return coef, s, res, cond
    lo, hi = bounds

    def cost(sv):
        return _linear_fit(x, y, sv, hyperbolic)[1]

    grid = np.linspace(lo, hi, 64)
    costs = [cost(v) for v in grid]
    k = int(np.argmin(costs))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    sv = optimize.minimize_scalar(cost, bounds=(a, b), method="bounded", options={"xatol": 1e-10}).x
    coef, res, cond = _linear_fit(x, y, sv, hyperbolic)
    return coef, float(sv), res, cond


def extrapolate(radii, values, s=None, hyperbolic=False, lam=1.0, bounds=(0.25, 8.0)) -> LimitFit:
    """Limit of ``values`` as the radius grows, by fitting ``Q_inf + c r^-s``
    (or ``Q_inf + c exp(-s R/lambda)``) with the linear coefficients projected
    out for each trial ``s``."""
    radii = np.asarray(radii, float)
    y = np.asarray(values, float)
    if radii.shape != y.shape or radii.size < 3:
        raise ParameterError("need matching radii and values, at least 3", field="radii")
    if np.any(np.diff(radii) <= 0):
        raise ParameterError("radii must increase strictly", field="radii")
    x = radii / lam if hyperbolic else radii
    if np.all(y == 0):
        return LimitFit(0.0, 0.0, math.nan, 0.0, 0.0, 1.0, "exact", None)
    if np.max(np.abs(y)) < NOISE_FLOOR:
        spread = float(np.max(y) - np.min(y))
        return LimitFit(float(np.mean(y)), spread, math.nan, 0.0, spread, 1.0, "noise-floor", None)
    coef, sv, res, cond = _fit(x, y, s, hyperbolic, bounds)
    coef2, *_ = _fit(x[1:], y[1:], s if s is not None else sv, hyperbolic, bounds)
    value = float(coef[0])
    err = abs(float(coef2[0]) - value)
    warn = None
    if res > max(1e-3 * abs(value), 1e-8):
        warn = "fit residual above threshold"
    d = np.diff(y)
    if not (np.all(d >= 0) or np.all(d <= 0)) and np.max(np.abs(d)) > max(1e-9 * abs(value), 1e-12):
        warn = (warn + "; " if warn else "") + "raw sequence not monotone"
    return LimitFit(value, err, sv, float(coef[1]), res, cond, "pinned" if s is not None else "free", warn)


def _snap(tau):
    r = round(tau)
    return float(r) if r > 0 and abs(tau - r) < 0.02 else float(tau)


def _limits(radii, raw, e: ExtrapolationSpec, pin, hyperbolic, lam):
    """Fit every component of ``raw`` (shape ``(n_radii, k)``)."""
    fits = []
    for col in np.asarray(raw, float).T:
        s = e.s if e.s is not None else pin
        fit = extrapolate(radii, col, s, hyperbolic, lam, e.s_bounds)
        if fit.method == "pinned" and e.s is None:
            free = extrapolate(radii, col, None, hyperbolic, lam, e.s_bounds)
            # a pinned exponent that clearly misdescribes the tail is dropped
            if free.residual < 0.1 * fit.residual and fit.residual > max(1e-9 * abs(fit.value), 1e-12):
                fit = free
        fits.append(fit)
    return fits


# ---------------------------------------------------------------------------
# planar ends


def _planar_integrands(dec, x, n, z):
    gb = dec.gbar(x)
    hb = dec.hbar(x)
    dg = dec.gbar_dev.grad(x)  # [..., k, i, j]
    divg = np.einsum("...jij->...i", dg) - np.einsum("...ijj->...i", dg)
    E = np.einsum("...i,...i->...", divg, n)
    ginv = np.linalg.inv(gb)
    tr = np.einsum("...ij,...ij->...", ginv, hb)
    W = hb - gb * tr[..., None, None]
    P = np.einsum("...ki,...i->...k", W, n)
    return E, P, gb, hb


def planar_samples(d: InitialDataSet, radius, q: QuadratureSpec = QuadratureSpec(), epsilon="flat"):
    """Finite-radius ``(Ebar, Pbar, Jbar)`` on the flat sphere of the given
    radius about the end's origin; angular momentum is taken about ``d.z``
    over the data set's angular range."""
    if d.hyperbolic:
        raise ParameterError("planar charges need planar-type data", field="end")
    dec = conformal_decompose(d)
    qE = QuadratureSpec(q.n_theta, q.n_psi, None)
    nodes = sphere_nodes(qE, radius)
    x = radius * nodes.n
    w = nodes.weight * radius**2
    E, P, gb, hb = _planar_integrands(dec, x, nodes.n, d.z)
    qJ = QuadratureSpec(q.n_theta, q.n_psi, d.psi_interval if q.psi_interval is None else q.psi_interval)
    if qJ.interval(radius) != qE.interval(radius):
        nodes = sphere_nodes(qJ, radius)
        x = radius * nodes.n
        w_j = nodes.weight * radius**2
        gb, hb = dec.gbar(x), dec.hbar(x)
    else:
        w_j = w
    ht = angular_density_arrays(gb, hb, x, d.z, epsilon)
    J = np.einsum("...ki,...i->...k", ht, nodes.n)
    Ebar = fsum_weighted(E, w, x) / (4 * FOUR_PI)
    Pbar = fsum_weighted(P, w, x) / (2 * FOUR_PI)
    Jbar = fsum_weighted(J, w_j, x) / (2 * FOUR_PI)
    return float(Ebar), np.asarray(Pbar), np.asarray(Jbar)


class BarCharges(NamedTuple):
    Ebar: LimitFit
    Pbar: list
    Jbar: list
    radii: np.ndarray
    raw: dict  # name -> (n_radii,) or (n_radii, 3)
    pinned_s: float | None
    decay: object

    @property
    def values(self):
        return (self.Ebar.value, np.array([f.value for f in self.Pbar]), np.array([f.value for f in self.Jbar]))


def _decay_pin(d, radii, e):
    if e.s is not None or not e.pin_from_decay:
        return None, None
    fit = decay_fit(d, radii, "gbar")
    if fit.failed or fit.exact or fit.residual >= 1e-2:
        return None, fit
    return _snap(fit.tau_hat), fit


def adm_charges_bar(d: InitialDataSet, q: QuadratureSpec = QuadratureSpec(), e: ExtrapolationSpec = ExtrapolationSpec(),
                    epsilon="flat") -> BarCharges:
    radii = e.radii(d.lam)
    rows = [planar_samples(d, r, q, epsilon) for r in radii]
    rawE = np.array([r[0] for r in rows])
    rawP = np.array([r[1] for r in rows])
    rawJ = np.array([r[2] for r in rows])
    pin, dfit = _decay_pin(d, radii, e)
    fE = _limits(radii, rawE[:, None], e, pin, False, d.lam)[0]
    fP = _limits(radii, rawP, e, pin, False, d.lam)
    fJ = _limits(radii, rawJ, e, pin, False, d.lam)
    return BarCharges(fE, fP, fJ, radii, {"E": rawE, "P": rawP, "J": rawJ}, pin, dfit)


def rescale_charges(Ebar, Pbar, Jbar, P):
    """``E = P Ebar``, ``P_k = P^2 Pbar_k``, ``J_k = P^2 Jbar_k``."""
    if not P > 0:
        raise ParameterError("conformal constant must be positive", field="P", value=P)
    return P * Ebar, P**2 * np.asarray(Pbar, float), P**2 * np.asarray(Jbar, float)


def angular_momentum(d: InitialDataSet, q: QuadratureSpec = QuadratureSpec(), e: ExtrapolationSpec = ExtrapolationSpec(),
                     epsilon="flat"):
    """``J = P^2 Jbar`` over the angular range configured on ``q`` or, when
    unset there, on the data set."""
    bc = adm_charges_bar(d, q, e, epsilon)
    P = d.conformal.factor()
    return P**2 * np.array([f.value for f in bc.Jbar]), bc


# ---------------------------------------------------------------------------
# hyperbolic ends


def _hyperbolic_density(dec, pts, lam):
    """Energy density ``div a (e_1) - d_1 tr a + (a_22 + a_33)/lambda +
    2 (hbar_22 + hbar_33)`` with ``a = gbar - g_H`` in the background frame."""
    gH = hyperbolic_metric(lam)
    G = gH(pts)
    Ginv = np.linalg.inv(G)
    gam = christoffel(G, gH.grad(pts), Ginv)
    a = dec.gbar_dev(pts)
    da = dec.gbar_dev.grad(pts)  # [k, i, j]
    # nabla_k a_ij
    Da = da - np.einsum("...lki,...lj->...kij", gam, a) - np.einsum("...lkj,...il->...kij", gam, a)
    div_R = np.einsum("...jk,...kj->...", Ginv, Da[..., :, 0, :])
    dtr = np.einsum("...ij,...ij->...", Ginv, Da[..., 0, :, :])
    s = hyperbolic_frame_scale(pts, lam)
    af = a / (s[..., :, None] * s[..., None, :])
    hb = dec.hbar(pts)
    hf = hb / (s[..., :, None] * s[..., None, :])
    return div_R - dtr + (af[..., 1, 1] + af[..., 2, 2]) / lam + 2 * (hf[..., 1, 1] + hf[..., 2, 2])


def hyperbolic_samples(d: InitialDataSet, R, q: QuadratureSpec = QuadratureSpec()):
    """Finite-radius ``E^H_nu`` on the geodesic sphere of radius ``R``."""
    if not d.hyperbolic:
        raise ParameterError("hyperbolic charges need hyperbolic-type data", field="end")
    if d.conformal.T == 0:
        raise SingularSliceError("hyperbolic slice at T = 0 is degenerate", T=0.0)
    lam = d.lam
    dec = conformal_decompose(d)
    nodes = sphere_nodes(QuadratureSpec(q.n_theta, q.n_psi, None), R)
    pts = np.stack([np.full_like(nodes.theta, R), nodes.theta, nodes.psi], axis=-1)
    dens = _hyperbolic_density(dec, pts, lam)
    nu = np.concatenate([np.ones((len(dens), 1)), nodes.n], axis=1)
    area = lam**2 * np.sinh(R / lam) ** 2 * np.exp(R / lam)
    H = d.conformal.factor()
    return H**2 * fsum_weighted(dens[:, None] * nu, nodes.weight * area, pts) / (4 * FOUR_PI)


class HyperbolicCharges(NamedTuple):
    EH: list
    radii: np.ndarray
    raw: np.ndarray

    @property
    def values(self):
        return np.array([f.value for f in self.EH])


def hyperbolic_charges(d: InitialDataSet, q: QuadratureSpec = QuadratureSpec(), e: ExtrapolationSpec = ExtrapolationSpec()):
    radii = e.radii(d.lam, hyperbolic=True)
    raw = np.array([hyperbolic_samples(d, R, q) for R in radii])
    fits = _limits(radii, raw, e, e.s, True, d.lam)
    return HyperbolicCharges(fits, radii, raw)


# ---------------------------------------------------------------------------
# inequalities and reports


def mass_inequalities(report, C1=1.0, C2=1.0):
    """Margins of the positive-mass inequalities present in ``report``.

    ``energy``: ``E - |P|`` with ``|P|`` in the rescaled metric, which equals
    ``P (Ebar - |Pbar|)``.  ``energy_angular``: ``E - |C1 P + C2 J|`` in the
    same norm.  ``hyperbolic``: ``E^H_0 - |(E^H_1, E^H_2, E^H_3)|``.
    """
    ch = report.charges if isinstance(report, ChargeReport) else report
    out = {}
    if ch.get("EH") is not None:
        EH = np.asarray(ch["EH"], float)
        out["hyperbolic"] = float(EH[0] - np.linalg.norm(EH[1:]))
    if ch.get("E") is not None or ch.get("P") is not None:
        missing = [k for k in ("E", "P", "J", "conformal") if ch.get(k) is None]
        if missing:
            raise IncompleteReportError(f"report lacks {', '.join(missing)}", missing=missing)
        E, P, J = float(ch["E"]), np.asarray(ch["P"], float), np.asarray(ch["J"], float)
        c = float(ch["conformal"])
        out["energy"] = E - np.linalg.norm(P) / c
        out["energy_angular"] = E - np.linalg.norm(C1 * P + C2 * J) / c
    if not out:
        raise IncompleteReportError("report carries no charges", missing=["E", "EH"])
    return out


@dataclass
class ChargeReport:
    model: dict
    convention: dict
    charges: dict
    diagnostics: dict
    inequalities: dict = field(default_factory=dict)

    def to_dict(self):
        return _plain({
            "model": self.model,
            "convention": self.convention,
            "charges": self.charges,
            "diagnostics": self.diagnostics,
            "inequalities": self.inequalities,
        })

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["charge", "radius", "value"])
        radii = self.diagnostics["radii"]
        for name in sorted(self.diagnostics["raw"]):
            col = np.asarray(self.diagnostics["raw"][name], float)
            col = col.reshape(len(radii), -1)
            for k in range(col.shape[1]):
                label = name if col.shape[1] == 1 else f"{name}{k}" if name == "EH" else f"{name}{k + 1}"
                for r, v in zip(radii, col[:, k]):
                    w.writerow([label, repr(float(r)), repr(float(v))])
        return buf.getvalue()


def charge_report(d: InitialDataSet, q: QuadratureSpec = QuadratureSpec(), e: ExtrapolationSpec = ExtrapolationSpec(),
                  epsilon="flat", C1=1.0, C2=1.0) -> ChargeReport:
    conv = {
        "psi_range": d.descriptor.get("psi_range", "standard"),
        "epsilon": epsilon,
        "z": list(d.z),
        "n_theta": q.n_theta,
        "n_psi": q.n_psi,
    }
    if d.hyperbolic:
        hc = hyperbolic_charges(d, q, e)
        charges = {"E": None, "P": None, "J": None, "EH": hc.values, "conformal": d.conformal.factor(),
                   "errors": {"EH": [f.error for f in hc.EH]}}
        diag = {"radii": hc.radii, "raw": {"EH": hc.raw}, "fit": {"EH": [f.as_dict() for f in hc.EH]}}
    else:
        bc = adm_charges_bar(d, q, e, epsilon)
        Pc = d.conformal.factor()
        Eb, Pb, Jb = bc.values
        E, P, J = rescale_charges(Eb, Pb, Jb, Pc)
        charges = {
            "E": E, "P": P, "J": J, "EH": None, "conformal": Pc,
            "Ebar": Eb, "Pbar": Pb, "Jbar": Jb,
            "errors": {
                "E": Pc * bc.Ebar.error,
                "P": [Pc**2 * f.error for f in bc.Pbar],
                "J": [Pc**2 * f.error for f in bc.Jbar],
            },
        }
        diag = {
            "radii": bc.radii,
            "raw": bc.raw,
            "pinned_s": bc.pinned_s,
            "fit": {
                "E": bc.Ebar.as_dict(),
                "P": [f.as_dict() for f in bc.Pbar],
                "J": [f.as_dict() for f in bc.Jbar],
            },
        }
        if bc.decay is not None:
            diag["decay"] = {"tau_hat": bc.decay.tau_hat, "residual": bc.decay.residual}
    warnings = sorted({f["warning"] for group in diag["fit"].values()
                       for f in (group if isinstance(group, list) else [group]) if f["warning"]})
    diag["warnings"] = warnings
    rep = ChargeReport(d.descriptor, conv, charges, diag)
    rep.inequalities = mass_inequalities(rep, C1, C2)
    return rep
