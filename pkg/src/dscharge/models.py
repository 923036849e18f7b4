"""Exact solutions: de Sitter slices, Schwarzschild-de Sitter in McVittie
form, and Kerr-de Sitter carried from Boyer-Lindquist to planar coordinates.

Kerr-de Sitter is evaluated as planar de Sitter plus a perturbation.  The
Boyer-Lindquist metric minus its ``m = 0`` counterpart is a short list of
components; pulling those back through the coordinate maps with analytic
Jacobians gives the perturbation in planar coordinates without ever
subtracting two O(1) metrics.  Only the perturbation is differentiated
numerically.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from . import chart_atlas
from .errors import DomainError, HorizonError, InversionError, ParameterError, SingularChartError
from .initial_data import (
    EndChart,
    HyperbolicConformal,
    InitialDataSet,
    PlanarConformal,
    angular_density_arrays,
    hyperbolic_metric,
)
from .symbolic import compile_tensor, slice_expressions
from .tensor_kernel import EPS, MetricField3, TensorField, christoffel, fd_grad, scale_field, zero_field

TWO_PI = 2 * np.pi

_t, _x, _y, _z = sp.symbols("t x y z", real=True)
_m = sp.Symbol("m", nonnegative=True)
_a = sp.Symbol("a", real=True)
_lam = sp.Symbol("lambda", positive=True)


def _positive(name, v):
    v = float(v)
    if not (np.isfinite(v) and v > 0):
        raise ParameterError(f"{name} must be positive", field=name, value=v)
    return v


# ---------------------------------------------------------------------------
# de Sitter


def de_sitter_planar(lam, t=0.0) -> InitialDataSet:
    """Upper planar slice: ``g = e^{2t/lambda} delta``, ``K = g / lambda``."""
    lam = _positive("lambda", lam)
    g, K = chart_atlas.slice_data(chart_atlas.ChartId.PLANAR_UPPER, t, lam)
    return InitialDataSet(
        g, K, 3 / lam**2, PlanarConformal(float(np.exp(t / lam))), EndChart("planar"),
        h=zero_field(name="h"), gbar_dev=zero_field(name="gbar_dev"),
        descriptor={"model": "de-sitter", "slicing": "planar", "lambda": lam, "t": float(t)},
        name="de Sitter (planar)",
    )


def de_sitter_hyperbolic(lam, T) -> InitialDataSet:
    """Hyperbolic slice: ``g = sinh^2(T/lambda) g_H``, ``K = coth(T/lambda) g / lambda``."""
    lam = _positive("lambda", lam)
    g, K = chart_atlas.slice_data(chart_atlas.ChartId.HYPERBOLIC, T, lam)
    return InitialDataSet(
        g, K, 3 / lam**2, HyperbolicConformal(float(T), lam), EndChart("hyperbolic"),
        h=zero_field(name="h", coords="polar"), gbar_dev=zero_field(name="gbar_dev", coords="polar"),
        descriptor={"model": "de-sitter", "slicing": "hyperbolic", "lambda": lam, "t": float(T)},
        name="de Sitter (hyperbolic)",
    )


def hyperbolic_perturbation(lam, T, a_frame=None, hbar_frame=None) -> InitialDataSet:
    """Hyperbolic-type data with ``gbar = g_H + a`` and rescaled momentum
    ``hbar``, both given by their components in the orthonormal frame of
    ``g_H`` as functions of ``(R, theta, psi)`` points.
    """
    lam = _positive("lambda", lam)
    H = float(np.sinh(T / lam))
    gH = hyperbolic_metric(lam)

    def coord(frame_fn):
        if frame_fn is None:
            return zero_field(coords="polar")

        def f(x):
            x = np.asarray(x, float)
            s = lam * np.sinh(x[..., 0] / lam)
            scale = np.stack([np.ones_like(s), s, s * np.sin(x[..., 1])], axis=-1)
            return np.asarray(frame_fn(x)) * scale[..., :, None] * scale[..., None, :]

        return TensorField(f, 3, name="frame", coords="polar")

    dev = coord(a_frame)
    hb = coord(hbar_frame)
    g = TensorField(lambda x: H**2 * (gH(x) + dev(x)), 3,
                    lambda x: H**2 * (gH.grad(x) + dev.grad(x)), None, "g", "polar")
    c = 1 / (np.tanh(T / lam) * lam)
    h = TensorField(lambda x: H * hb(x), 3, None, None, "h", "polar")
    K = TensorField(lambda x: c * g(x) + h(x), 3, None, None, "K", "polar")
    return InitialDataSet(
        g, K, 3 / lam**2, HyperbolicConformal(float(T), lam), EndChart("hyperbolic"),
        h=h, gbar_dev=dev,
        descriptor={"model": "hyperbolic-perturbation", "lambda": lam, "t": float(T)},
        name="perturbed hyperbolic slice",
    )


# ---------------------------------------------------------------------------
# McVittie


@dataclass(frozen=True)
class McVittieParams:
    m: float
    lam: float
    t: float = 0.0

    def __post_init__(self):
        _positive("lambda", self.lam)
        if not (np.isfinite(self.m) and self.m >= 0):
            raise ParameterError("m must be non-negative", field="m", value=self.m)

    @property
    def A(self):
        return float(np.exp(self.t / self.lam))

    @property
    def horizon_radius(self):
        return self.m / (2 * self.A)


def _mcvittie_4metric():
    r = sp.sqrt(_x**2 + _y**2 + _z**2)
    A = sp.exp(_t / _lam)
    u = _m / (2 * A * r)
    N = (1 - u) / (1 + u)
    w = A**2 * (1 + u) ** 4
    return sp.diag(-(N**2), w, w, w), N, u


@lru_cache(maxsize=None)
def _compiled_mcvittie():
    G4, N, u = _mcvittie_4metric()
    g, K, _ = slice_expressions(G4, (_t, _x, _y, _z), lapse=N)
    h = (K - g / _lam).applyfunc(lambda e: sp.cancel(sp.together(e)))
    dev = sp.eye(3) * sp.expand((1 + u) ** 4 - 1)
    xs, ps = (_x, _y, _z), (_t, _m, _lam)
    exact = h.is_zero_matrix
    return {
        "g": compile_tensor(sp.ImmutableMatrix(g), xs, ps),
        # K = g / lambda identically, so it is not compiled separately
        "K": None if exact else compile_tensor(sp.ImmutableMatrix(K), xs, ps),
        "h": None if exact else compile_tensor(sp.ImmutableMatrix(h), xs, ps),
        "dev": compile_tensor(sp.ImmutableMatrix(dev), xs, ps),
    }


@lru_cache(maxsize=None)
def _compiled_mcvittie4():
    G4, _, _ = _mcvittie_4metric()
    return compile_tensor(sp.ImmutableMatrix(G4), (_t, _x, _y, _z), (_m, _lam))


def _outside_puncture(f):
    def wrapped(x):
        x = np.asarray(x, float)
        if np.any(np.sum(x**2, axis=-1) == 0):
            raise DomainError("McVittie slice is singular at the puncture r = 0")
        return f(x)

    return wrapped


def mcvittie_slice(p: McVittieParams) -> InitialDataSet:
    """``g = A^2 (1 + m/2Ar)^4 delta``, ``K = g/lambda`` on ``{t = const}``.

    The spatial fields cover the whole two-ended slice ``r > 0``; the minimal
    sphere sits at ``r = m/(2A)``.  Conformal factor ``A = e^{t/lambda}``.
    """
    c = _compiled_mcvittie()
    vals = (p.t, p.m, p.lam)
    g = c["g"].field(vals, "g", metric=True)
    if c["h"] is None:
        K = scale_field(g, 1 / p.lam, "K")
        h = zero_field(name="h")
    else:
        K = c["K"].field(vals, "K")
        h = c["h"].field(vals, "h")
    dev = c["dev"].field(vals, "gbar_dev")
    guard = lambda f: MetricField3(_outside_puncture(f.func), 3, f.d1, f.d2, f.name)  # noqa: E731
    return InitialDataSet(
        guard(g), K, 3 / p.lam**2, PlanarConformal(p.A), EndChart("planar"),
        h=h, gbar_dev=dev,
        descriptor={"model": "mcvittie", "m": p.m, "lambda": p.lam, "t": p.t},
        name="Schwarzschild-de Sitter (McVittie)",
    )


def mcvittie_lapse(p: McVittieParams, x):
    """``N = (1 - m/2Ar) / (1 + m/2Ar)``; positive only outside the minimal
    sphere, which is where the 4-metric chart applies."""
    r = np.linalg.norm(np.asarray(x, float), axis=-1)
    if np.any(r <= p.horizon_radius * (1 - 1e-8)):
        raise DomainError("McVittie chart requires r > m/(2A)", field="r", bound=p.horizon_radius)
    u = p.m / (2 * p.A * r)
    return (1 - u) / (1 + u)


def mcvittie_metric4(p: McVittieParams) -> TensorField:
    """The McVittie 4-metric over ``(t, x, y, z)``; points inside the minimal
    sphere are rejected."""
    f = _compiled_mcvittie4().field((p.m, p.lam), "g4")

    def check(x):
        x = np.asarray(x, float)
        A = np.exp(x[..., 0] / p.lam)
        r = np.linalg.norm(x[..., 1:], axis=-1)
        if np.any(r <= p.m / (2 * A) * (1 - 1e-8)):
            raise DomainError("McVittie chart requires r > m/(2A)", field="r")
        return x

    return TensorField(lambda x: f(check(x)), 4, lambda x: f.grad(check(x)), lambda x: f.hess(check(x)), "g4")


# ---------------------------------------------------------------------------
# Kerr-de Sitter


@dataclass(frozen=True)
class KerrDSParams:
    m: float
    a: float
    lam: float
    t: float = 0.0
    psi_range: str = "standard"

    def __post_init__(self):
        _positive("lambda", self.lam)
        if not (np.isfinite(self.m) and self.m >= 0):
            raise ParameterError("m must be non-negative", field="m", value=self.m)
        if not (np.isfinite(self.a) and abs(self.a) < self.lam):
            raise ParameterError("spin must satisfy |a| < lambda", field="a", value=self.a)
        if self.psi_range not in ("standard", "shifted"):
            raise ParameterError("psi_range must be 'standard' or 'shifted'", field="psi_range", value=self.psi_range)

    @property
    def xi(self):
        return 1 + self.a**2 / self.lam**2

    @property
    def A(self):
        return float(np.exp(self.t / self.lam))

    def delta_r(self, rb):
        return (rb**2 + self.a**2) * (1 - rb**2 / self.lam**2) - 2 * self.m * rb

    def delta_theta(self, thb):
        return 1 + self.a**2 * np.cos(thb) ** 2 / self.lam**2

    def U(self, rb, thb):
        return rb**2 + self.a**2 * np.cos(thb) ** 2

    def B(self, theta):
        return 1 + self.a**2 * np.sin(theta) ** 2 / self.lam**2


_tb, _rb, _thb, _pb = sp.symbols("tbar rbar thetabar psibar", real=True)


def kerr_bl_expression():
    xi = 1 + _a**2 / _lam**2
    Dr = (_rb**2 + _a**2) * (1 - _rb**2 / _lam**2) - 2 * _m * _rb
    Dth = 1 + _a**2 * sp.cos(_thb) ** 2 / _lam**2
    U = _rb**2 + _a**2 * sp.cos(_thb) ** 2
    s2 = sp.sin(_thb) ** 2
    v1 = [1, 0, 0, -_a / xi * s2]
    v2 = [_a, 0, 0, -(_rb**2 + _a**2) / xi]
    G = sp.zeros(4, 4)
    for i in range(4):
        for j in range(4):
            G[i, j] = -Dr / U * v1[i] * v1[j] + Dth * s2 / U * v2[i] * v2[j]
    G[1, 1] += U / Dr
    G[2, 2] += U / Dth
    return G


@lru_cache(maxsize=None)
def _compiled_kerr_bl():
    return compile_tensor(sp.ImmutableMatrix(kerr_bl_expression()), (_tb, _rb, _thb, _pb), (_m, _a, _lam))


def kerr_bl_field(p: KerrDSParams) -> TensorField:
    """Boyer-Lindquist Kerr-de Sitter metric over ``(tbar, rbar, thetabar, psibar)``."""
    return _compiled_kerr_bl().field((p.m, p.a, p.lam), "g_KdS")


def kerr_bl_metric(p: KerrDSParams, xbar):
    xbar = np.asarray(xbar, float)
    rb, thb = xbar[..., 1], xbar[..., 2]
    if np.any(np.abs(p.delta_r(rb)) < 1e-12 * max(p.lam, 1) ** 2):
        raise SingularChartError("Boyer-Lindquist chart is singular where Delta_r = 0", rbar=rb)
    if np.any(p.U(rb, thb) == 0):
        raise SingularChartError("ring singularity U = 0")
    return kerr_bl_field(p)(xbar)


def kerr_bl_to_static(p: KerrDSParams, xbar):
    """``(tbar, rbar, thetabar, psibar) -> (that, rhat, thetahat, psihat)``.

    The angle shift is ``psihat = psibar - a tbar / lambda^2``; with it the
    ``m = 0`` metric is exactly static de Sitter in hat coordinates.
    """
    xbar = np.asarray(xbar, float)
    tb, rb, thb, pb = np.moveaxis(xbar, -1, 0)
    k = p.a**2 / p.lam**2
    zb = np.cos(thb)
    rh2 = (rb**2 + p.a**2 * np.sin(thb) ** 2 + k * rb**2 * zb**2) / p.xi
    rh = np.sqrt(rh2)
    with np.errstate(invalid="ignore", divide="ignore"):
        zh = np.where(rh > 0, rb * zb / rh, 1.0)
    return np.stack([tb, rh, np.arccos(np.clip(zh, -1, 1)), pb - p.a * tb / p.lam**2], axis=-1)


def _newton_bl(p: KerrDSParams, rh, zh, tol=1e-12, maxiter=50):
    """Solve ``rbar zbar = rhat zhat`` and
    ``rbar^2 + a^2 (1 - zbar^2) + (a/lambda)^2 rbar^2 zbar^2 = xi rhat^2``
    for ``(rbar, zbar = cos thetabar)`` by damped Newton."""
    a2 = p.a**2
    k = a2 / p.lam**2
    xi = p.xi
    rh = np.asarray(rh, float)
    zh = np.asarray(zh, float)
    rb = np.sqrt(xi) * rh
    zb = zh.copy()
    sr = np.maximum(rh, 1.0)

    def resid(rb, zb):
        F1 = rb * zb - rh * zh
        F2 = rb**2 + a2 * (1 - zb) * (1 + zb) + k * rb**2 * zb**2 - xi * rh**2
        return F1, F2

    def size(F1, F2):
        return np.maximum(np.abs(F1) / sr, np.abs(F2) / sr**2)

    F1, F2 = resid(rb, zb)
    err = size(F1, F2)
    for _ in range(maxiter):
        if np.all(err <= EPS * 4):
            break
        M00, M01 = zb, rb
        M10 = 2 * rb * (1 + k * zb**2)
        M11 = 2 * zb * (k * rb**2 - a2)
        det = M00 * M11 - M01 * M10
        drb = (M11 * F1 - M01 * F2) / det
        dzb = (-M10 * F1 + M00 * F2) / det
        step = np.ones_like(rb)
        for _ in range(40):
            nrb = rb - step * drb
            nzb = zb - step * dzb
            nF1, nF2 = resid(nrb, nzb)
            nerr = size(nF1, nF2)
            ok = (nrb > 0) & (np.abs(nzb) <= 1) & ((nerr < err) | (nerr <= 4 * EPS))
            if np.all(ok):
                break
            step = np.where(ok, step, step / 2)
        moved = ok & (err > 4 * EPS)
        rb = np.where(moved, nrb, rb)
        zb = np.where(moved, nzb, zb)
        F1, F2 = resid(rb, zb)
        err = size(F1, F2)
    if np.any(err > tol):
        raise InversionError("hat to Boyer-Lindquist inversion did not converge", residual=float(np.max(err)))
    return rb, zb


def kerr_static_to_bl(p: KerrDSParams, xhat):
    """Inverse of :func:`kerr_bl_to_static`."""
    xhat = np.asarray(xhat, float)
    th, rh, thh, ph = np.moveaxis(xhat, -1, 0)
    rb, zb = _newton_bl(p, rh, np.cos(thh))
    return np.stack([th, rb, np.arccos(np.clip(zb, -1, 1)), ph + p.a * th / p.lam**2], axis=-1)


class KerrDeSitter:
    """Kerr-de Sitter on upper planar coordinates ``(t, x, y, z)``."""

    def __init__(self, params: KerrDSParams):
        self.p = params

    def perturbation(self, X):
        """``g_KdS - g_dS`` in planar Cartesian components, shape ``(..., 4, 4)``."""
        p = self.p
        lam, a, m, xi = p.lam, p.a, p.m, p.xi
        X = np.asarray(X, float)
        t = X[..., 0]
        x = X[..., 1:]
        r = np.linalg.norm(x, axis=-1)
        rho2 = x[..., 0] ** 2 + x[..., 1] ** 2
        if np.any(rho2 == 0):
            raise SingularChartError("the polar chart is singular on the rotation axis")
        A = np.exp(t / lam)
        rh = A * r
        q = rh / lam
        if np.any(np.abs(q - 1) <= chart_atlas.HORIZON_GUARD):
            raise HorizonError("point within the guard band of the static horizon", rhat=rh)
        om = (1 - q) * (1 + q)
        zh = x[..., 2] / r
        rb, zb = _newton_bl(p, rh, zh)
        sb2 = (1 - zb) * (1 + zb)
        U = rb**2 + a**2 * zb**2
        Dr0 = (rb**2 + a**2) * (1 - rb / lam) * (1 + rb / lam)
        Dr = Dr0 - 2 * m * rb
        if np.any(np.abs(Dr) < 1e-12 * lam**2) or np.any(np.abs(Dr0) < 1e-12 * lam**2):
            raise SingularChartError("Boyer-Lindquist chart is singular at this radius", rbar=rb)
        c = 2 * m * rb / U
        arr = 2 * m * rb * U / (Dr * Dr0)

        shp = X.shape[:-1] + (4,)
        dt = np.empty(shp)
        dt[..., 0] = 1 / om
        dt[..., 1:] = (A**2 / (lam * om))[..., None] * x
        drh = np.empty(shp)
        drh[..., 0] = rh / lam
        drh[..., 1:] = (A / r)[..., None] * x
        dzh = np.zeros(shp)
        dzh[..., 1:] = -(zh / r**2)[..., None] * x
        dzh[..., 3] += 1 / r
        k = a**2 / lam**2
        M01 = rb
        M11 = 2 * zb * (k * rb**2 - a**2)
        det = -2 * U
        # d(rbar)/d(rhat, zhat) by implicit differentiation
        dr_drh = -(M11 * (-zh) - M01 * (-2 * xi * rh)) / det
        dr_dzh = -(M11 * (-rh)) / det
        dr = dr_drh[..., None] * drh + dr_dzh[..., None] * dzh
        dpsi = np.zeros(shp)
        dpsi[..., 1] = -x[..., 1] / rho2
        dpsi[..., 2] = x[..., 0] / rho2
        dpsib = dpsi + (a / lam**2) * dt
        v = dt - ((a / xi) * sb2)[..., None] * dpsib
        return c[..., None, None] * v[..., :, None] * v[..., None, :] + arr[..., None, None] * dr[..., :, None] * dr[..., None, :]

    def metric4(self, X):
        X = np.asarray(X, float)
        e2 = np.exp(2 * X[..., 0] / self.p.lam)
        G = np.zeros(X.shape[:-1] + (4, 4))
        G[..., 0, 0] = -1
        for i in range(1, 4):
            G[..., i, i] = e2
        return G + self.perturbation(X)

    def _X(self, x):
        x = np.asarray(x, float)
        return np.concatenate([np.full(x.shape[:-1] + (1,), self.p.t), x], axis=-1)

    def slice_parts(self, x):
        """Induced metric, momentum tensor ``h = K - g/lambda`` and spatial
        perturbation on the slice ``t = p.t``."""
        lam = self.p.lam
        X = self._X(x)
        P = self.perturbation(X)
        dP = fd_grad(self.perturbation, X)
        A2 = self.p.A ** 2
        p = P[..., 1:, 1:]
        Ni = P[..., 0, 1:]
        g = A2 * np.eye(3) + p
        ginv = np.linalg.inv(g)
        NN = np.einsum("...i,...ij,...j->...", Ni, ginv, Ni)
        N = np.sqrt(1 - P[..., 0, 0] + NN)
        one_minus_N = (P[..., 0, 0] - NN) / (1 + N)
        gam = christoffel(g, dP[..., 1:, 1:, 1:], ginv)
        DN = dP[..., 1:, 0, 1:] - np.einsum("...lkj,...l->...kj", gam, Ni)
        h = (
            (A2 / lam) * (one_minus_N / N)[..., None, None] * np.eye(3)
            + (dP[..., 0, 1:, 1:] - DN - np.swapaxes(DN, -1, -2)) / (2 * N[..., None, None])
            - p / lam
        )
        return g, h, p

    def spatial_perturbation(self, x):
        return self.perturbation(self._X(x))[..., 1:, 1:]

    def psi_interval(self, radius):
        """Angular range used for the charges at a given sphere radius."""
        p = self.p
        if p.psi_range == "standard":
            return 0.0, TWO_PI
        q = radius * p.A / p.lam
        that = p.t - 0.5 * p.lam * np.log(abs((1 - q) * (1 + q)))
        start = -p.a * that / p.lam**2
        return start, start + TWO_PI * p.xi


def kerr_planar_slice(p: KerrDSParams) -> InitialDataSet:
    """Planar ``t``-slice of Kerr-de Sitter with conformal factor ``A``."""
    kds = KerrDeSitter(p)
    lam, A2 = p.lam, p.A**2
    pert = kds.spatial_perturbation

    def gfun(x):
        return A2 * np.eye(3) + pert(x)

    def dpert(x):
        return fd_grad(pert, x)

    def hfun(x):
        return kds.slice_parts(x)[1]

    def kfun(x):
        g, h, _ = kds.slice_parts(x)
        return g / lam + h

    g = MetricField3(gfun, 3, dpert, None, "g")
    h = TensorField(hfun, 3, None, None, "h")
    K = TensorField(kfun, 3, None, None, "K")
    dev = TensorField(lambda x: pert(x) / A2, 3, lambda x: dpert(x) / A2, None, "gbar_dev")
    return InitialDataSet(
        g, K, 3 / lam**2, PlanarConformal(p.A), EndChart("planar"),
        h=h, gbar_dev=dev, psi_interval=kds.psi_interval,
        descriptor={"model": "kerr-ds", "m": p.m, "a": p.a, "lambda": lam, "t": p.t, "psi_range": p.psi_range},
        name="Kerr-de Sitter (planar)",
    )


# ---------------------------------------------------------------------------
# asymptotic reference terms


class Leading:
    """A reference asymptotic term: ``value`` (None when only the order is
    known) and the power ``p`` of its ``r^{-p}`` decay."""

    __slots__ = ("value", "power")

    def __init__(self, value, power):
        self.value = value
        self.power = power

    def __repr__(self):
        return f"Leading({self.value!r}, r^-{self.power})"


def kerr_asymptotic_oracle(p: KerrDSParams, r, theta, psi=0.0):
    """Reference leading terms of the planar Kerr-de Sitter slice in polar
    coordinates ``(t, r, theta, psi)``: the perturbation ``a_{mu nu}``,
    ``hbar_ij`` and the angular momentum density in the flat orthonormal
    frame ``(d_r, d_theta / r, d_psi / (r sin theta))`` and in mixed
    Cartesian/radial components ``htilde_{k r}``.
    """
    m, a, lam, A = p.m, p.a, p.lam, p.A
    s, c = np.sin(theta), np.cos(theta)
    B = p.B(theta)
    B32, B52 = B**-1.5, B**-2.5
    lead = {
        "a_tt": Leading(2 * m * lam**2 / (r**3 * A**3) * B32, 3),
        "a_tr": Leading(2 * m * lam**3 / (r**4 * A**3) * B32, 4),
        "a_ttheta": Leading(2 * m * a**2 * lam / (r**3 * A**4) * B52 * s * c, 3),
        "a_rr": Leading(2 * m * lam**2 / (r**3 * A) * B52, 3),
        "a_rtheta": Leading(2 * m * a**2 * lam**2 / (r**4 * A**3) * s * c * B52, 4),
        "a_rpsi": Leading(2 * m * lam * a * s**2 / (r**2 * A) * B52, 2),
        "a_thetatheta": Leading(2 * m * a**4 * s**2 * c**2 / (r**3 * A**3) * B52, 3),
        "a_psipsi": Leading(2 * m * a**2 * s**4 / (r * A) * B52, 1),
        "hbar_rr": Leading((2 * m * lam**2 - m * a**2 * s**2) / (A**2 * B**2.5 * lam * r**3), 3),
        "hbar_rtheta": Leading(None, 4),
        "hbar_rpsi": Leading(3 * m * a * s**2 / (A**2 * B**2.5 * r**2), 2),
        "hbar_thetatheta": Leading(-m * lam / (A**2 * B**1.5 * r), 1),
        "hbar_thetapsi": Leading(None, 6),
        "hbar_psipsi": Leading((-m * lam**2 + 2 * m * a**2 * s**2) * s**2 / (A**2 * B**2.5 * lam * r), 1),
        "htilde_e2e1": Leading(-3 * m * a * s / (A**2 * B**2.5 * r**2), 2),
        "htilde_e2e3": Leading((m * lam**2 - 2 * m * a**2 * s**2) / (A**2 * B**2.5 * lam * r**2), 2),
        "htilde_e3e2": Leading(m * lam / (A**2 * B**1.5 * r**2), 2),
        "htilde_1r": Leading(-3 * m * a * s * c * np.cos(psi) / (A**2 * B**2.5 * r**2), 2),
        "htilde_2r": Leading(-3 * m * a * s * c * np.sin(psi) / (A**2 * B**2.5 * r**2), 2),
        "htilde_3r": Leading(3 * m * a * s**2 / (A**2 * B**2.5 * r**2), 2),
    }
    return lead


# next-order powers of the reference expansion (r^-p of the remainder)
ORACLE_NEXT_POWER = {
    "a_tt": 4, "a_tr": 5, "a_ttheta": 4, "a_rr": 4, "a_rtheta": 5, "a_rpsi": 3,
    "a_thetatheta": 4, "a_psipsi": 2, "hbar_rr": 4, "hbar_rpsi": 4,
    "hbar_thetatheta": 3, "hbar_psipsi": 3, "htilde_e2e1": 3, "htilde_e2e3": 3,
    "htilde_e3e2": 3, "htilde_1r": 3, "htilde_2r": 3, "htilde_3r": 3,
}


def polar_frame(theta, psi):
    """Flat orthonormal ``(e_r, e_theta, e_psi)`` as Cartesian rows."""
    st, ct, sp_, cp = np.sin(theta), np.cos(theta), np.sin(psi), np.cos(psi)
    return np.stack([
        np.stack([st * cp, st * sp_, ct], axis=-1),
        np.stack([ct * cp, ct * sp_, -st], axis=-1),
        np.stack([-sp_, cp, np.zeros_like(st)], axis=-1),
    ], axis=-2)


def kerr_planar_components(p: KerrDSParams, r, theta, psi=0.0):
    """Numerical counterparts of :func:`kerr_asymptotic_oracle` keys (plus
    ``a_tpsi`` and ``a_thetapsi``, which have no reference term)."""
    kds = KerrDeSitter(p)
    E = polar_frame(np.asarray(theta, float), np.asarray(psi, float))
    x = r * E[..., 0, :]
    P4 = kds.perturbation(kds._X(x))
    # 4-vectors of the polar coordinate basis
    V = np.zeros(np.shape(x)[:-1] + (4, 4))
    V[..., 0, 0] = 1
    V[..., 1, 1:] = E[..., 0, :]
    V[..., 2, 1:] = r * E[..., 1, :]
    V[..., 3, 1:] = r * np.sin(theta)[..., None] * E[..., 2, :] if np.ndim(theta) else r * np.sin(theta) * E[..., 2, :]
    a = np.einsum("...ma,...ab,...nb->...mn", V, P4, V)
    g, h, _ = kds.slice_parts(x)
    hbar = h / p.A
    hb = np.einsum("...ma,...ab,...nb->...mn", V[..., 1:, 1:], hbar, V[..., 1:, 1:])
    gbar = g / p.A**2
    ht = angular_density_arrays(gbar, hbar, x)
    ht_frame = np.einsum("...ma,...ab,...nb->...mn", E, ht, E)
    ht_kr = np.einsum("...kb,...b->...k", ht, E[..., 0, :])
    names = ["t", "r", "theta", "psi"]
    out = {}
    for i in range(4):
        for j in range(i, 4):
            out[f"a_{names[i]}{names[j]}"] = a[..., i, j]
    for i in range(1, 4):
        for j in range(i, 4):
            out[f"hbar_{names[i]}{names[j]}"] = hb[..., i - 1, j - 1]
    for i in range(3):
        for j in range(3):
            out[f"htilde_e{i + 1}e{j + 1}"] = ht_frame[..., i, j]
    for k in range(3):
        out[f"htilde_{k + 1}r"] = ht_kr[..., k]
    return out


def asymptotic_slopes(p: KerrDSParams, radii=(1e2, 1e3, 1e4), theta=np.pi / 3, psi=0.3):
    """Log-log slope of ``|numeric - reference|`` for each reference term with
    a leading coefficient.  A term is consistent when the slope beats its
    leading power by at least 0.9."""
    radii = np.asarray(radii, float)
    diffs, lead_vals, nums = {}, {}, {}
    for r in radii:
        num = kerr_planar_components(p, r, np.array(theta), np.array(psi))
        ref = kerr_asymptotic_oracle(p, r, theta, psi)
        for k, v in ref.items():
            if v.value is None:
                continue
            diffs.setdefault(k, []).append(abs(float(num[k]) - v.value))
            lead_vals.setdefault(k, []).append(v.value)
            nums.setdefault(k, []).append(float(num[k]))
    out = {}
    ref0 = kerr_asymptotic_oracle(p, 1.0, theta, psi)
    for k, d in diffs.items():
        d = np.array(d)
        power = ref0[k].power
        slope = -float(np.polyfit(np.log(radii), np.log(np.maximum(d, 1e-300)), 1)[0])
        out[k] = {
            "power": power,
            "slope": slope,
            "ok": bool(slope >= power + 0.9),
            "ratio": (np.array(nums[k]) / np.array(lead_vals[k])).tolist(),
        }
    return out


# ---------------------------------------------------------------------------
# descriptors


MODEL_NAMES = ("de-sitter", "mcvittie", "kerr-ds")


def build(descriptor: dict) -> InitialDataSet:
    """Data set from a model descriptor such as
    ``{"model": "kerr-ds", "m": 1, "a": 0.5, "lambda": 10, "t": 0, "psi_range": "standard"}``."""
    name = descriptor.get("model")
    if name not in MODEL_NAMES:
        raise ParameterError(f"unknown model {name!r}", field="model", allowed=list(MODEL_NAMES))
    lam = descriptor.get("lambda", 10.0)
    t = descriptor.get("t", 0.0)
    if name == "de-sitter":
        slicing = descriptor.get("slicing", "planar")
        if slicing == "planar":
            return de_sitter_planar(lam, t)
        if slicing == "hyperbolic":
            return de_sitter_hyperbolic(lam, t)
        raise ParameterError(f"unknown slicing {slicing!r}", field="slicing")
    if name == "mcvittie":
        return mcvittie_slice(McVittieParams(descriptor.get("m", 1.0), lam, t))
    return kerr_planar_slice(KerrDSParams(descriptor.get("m", 1.0), descriptor.get("a", 0.5), lam, t,
                                          descriptor.get("psi_range", "standard")))
