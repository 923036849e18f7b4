"""Differential geometry on sampled tensor fields.

Fields are callables evaluated on batches of points: a point array of shape
``(..., n)`` maps to components of shape ``(..., n, n)``.  Derivative arrays
put the derivative index first: ``d1[..., k, i, j] = d_k T_ij`` and
``d2[..., k, l, i, j] = d_k d_l T_ij``.

Analytic derivative callbacks are used when a field provides them; otherwise
central finite differences are taken with step ``max(|x|, 1) * eps**(1/3)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from .errors import (
    DegenerateMetricError,
    IntegrationError,
    ParameterError,
    SignatureError,
    SingularSliceError,
)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class DerivativeConfig:
    """How derivatives are taken when a field has no analytic callback.

    ``mode="fd"`` forces finite differences even if analytic callbacks exist,
    which is how the analytic path gets checked.
    """

    mode: str = "auto"  # "auto" | "fd"
    richardson: bool = False

    def __post_init__(self):
        if self.mode not in ("auto", "fd"):
            raise ParameterError(f"unknown derivative mode {self.mode!r}", field="mode")


DEFAULT_DERIVATIVES = DerivativeConfig()


def _steps(x, power):
    # Snap the step so that x + h is exactly representable.
    h = np.maximum(np.abs(x), 1.0) * EPS**power
    return (x + h) - x


def fd_grad(func, x, richardson=False):
    """Central-difference gradient of ``func`` at points ``x``.

    ``func`` maps ``(..., n)`` to ``(..., *shape)``; the result has shape
    ``(..., n, *shape)``.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if richardson:
        h = _steps(x, 1 / 5)
        d_h = _central(func, x, h)
        h2 = (x + h / 2) - x
        d_h2 = _central(func, x, h2)
        return (4 * d_h2 - d_h) / 3
    return _central(func, x, _steps(x, 1 / 3))


def _central(func, x, h):
    n = x.shape[-1]
    shifted = np.empty((2 * n,) + x.shape)
    for k in range(n):
        shifted[2 * k] = x
        shifted[2 * k + 1] = x
        shifted[2 * k, ..., k] += h[..., k]
        shifted[2 * k + 1, ..., k] -= h[..., k]
    vals = np.asarray(func(shifted))
    extra = vals.ndim - x.ndim
    out = []
    for k in range(n):
        hk = h[..., k].reshape(h.shape[:-1] + (1,) * extra)
        out.append((vals[2 * k] - vals[2 * k + 1]) / (2 * hk))
    return np.stack(out, axis=x.ndim - 1)


def fd_hess(func, x):
    """Second derivatives by second differences, shape ``(..., n, n, *shape)``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    h = _steps(x, 1 / 4)
    f0 = np.asarray(func(x))
    extra = f0.ndim - x.ndim + 1

    def at(shift):
        y = x.copy()
        for k, s in shift:
            y[..., k] += s * h[..., k]
        return np.asarray(func(y))

    def hh(k):
        return h[..., k].reshape(h.shape[:-1] + (1,) * extra)

    rows = [[None] * n for _ in range(n)]
    for k in range(n):
        rows[k][k] = (at([(k, 1)]) - 2 * f0 + at([(k, -1)])) / hh(k) ** 2
        for l in range(k + 1, n):
            v = (
                at([(k, 1), (l, 1)])
                - at([(k, 1), (l, -1)])
                - at([(k, -1), (l, 1)])
                + at([(k, -1), (l, -1)])
            ) / (4 * hh(k) * hh(l))
            rows[k][l] = rows[l][k] = v
    axis = x.ndim - 1
    return np.stack([np.stack(r, axis=axis) for r in rows], axis=axis)


@dataclass(frozen=True)
class TensorField:
    """A rank-2 covariant tensor field sampled on demand.

    ``func`` takes points ``(..., dim)`` and returns ``(..., dim, dim)``.
    ``d1``/``d2`` are optional analytic derivative callbacks.
    """

    func: Callable
    dim: int = 3
    d1: Callable | None = None
    d2: Callable | None = None
    name: str = ""
    coords: str = "cartesian"

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)))

    def grad(self, x, config: DerivativeConfig = DEFAULT_DERIVATIVES):
        x = np.asarray(x, dtype=float)
        if self.d1 is not None and config.mode == "auto":
            return np.asarray(self.d1(x))
        return fd_grad(self.func, x, config.richardson)

    def hess(self, x, config: DerivativeConfig = DEFAULT_DERIVATIVES):
        x = np.asarray(x, dtype=float)
        if config.mode == "auto":
            if self.d2 is not None:
                return np.asarray(self.d2(x))
            if self.d1 is not None:
                dd = fd_grad(self.d1, x, config.richardson)
                return 0.5 * (dd + np.swapaxes(dd, -4, -3))
        return fd_hess(self.func, x)

    def with_name(self, name):
        return TensorField(self.func, self.dim, self.d1, self.d2, name, self.coords)


class MetricField3(TensorField):
    """Riemannian 3-metric; ``checked`` evaluates with a positivity test."""

    def checked(self, x):
        g = self(x)
        check_positive_definite(g, np.asarray(x))
        return g


SymTensorField3 = TensorField
Metric4Field = TensorField


def check_positive_definite(g, x=None):
    sym = 0.5 * (g + np.swapaxes(g, -1, -2))
    try:
        np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        bad = None
        if x is not None:
            ev = np.linalg.eigvalsh(sym)
            idx = np.unravel_index(np.argmin(ev[..., 0]), ev.shape[:-1])
            bad = np.asarray(x)[idx].tolist()
        raise DegenerateMetricError("metric is not positive definite", point=bad) from None


def scale_field(f: TensorField, c, name="") -> TensorField:
    """``c * f`` for a constant ``c``; analytic derivatives carry over."""
    return TensorField(
        lambda x: c * f(x),
        f.dim,
        None if f.d1 is None else (lambda x: c * f.d1(x)),
        None if f.d2 is None else (lambda x: c * f.d2(x)),
        name or f.name,
        f.coords,
    )


def add_fields(f: TensorField, g: TensorField, cg=1.0, name="") -> TensorField:
    """``f + cg * g``."""

    def d(which):
        a, b = getattr(f, which), getattr(g, which)
        if a is None or b is None:
            return None
        return lambda x: a(x) + cg * b(x)

    return TensorField(lambda x: f(x) + cg * g(x), f.dim, d("d1"), d("d2"), name, f.coords)


def zero_field(dim=3, name="zero", coords="cartesian") -> TensorField:
    def f(x):
        return np.zeros(np.shape(x)[:-1] + (dim, dim))

    def f1(x):
        return np.zeros(np.shape(x)[:-1] + (dim, dim, dim))

    def f2(x):
        return np.zeros(np.shape(x)[:-1] + (dim,) * 4)

    return TensorField(f, dim, f1, f2, name, coords)


# ---------------------------------------------------------------------------
# pointwise algebra on component arrays


def christoffel(g, dg, ginv=None):
    """Second-kind symbols ``G[..., l, i, j] = Gamma^l_ij``."""
    if ginv is None:
        ginv = np.linalg.inv(g)
    first = 0.5 * (
        np.einsum("...ikj->...kij", dg) + np.einsum("...jki->...kij", dg) - dg
    )
    # first[..., k, i, j] = Gamma_{k i j} (lowered on the first slot)
    return np.einsum("...lk,...kij->...lij", ginv, first)


def riemann(g, dg, d2g, gamma=None):
    """Fully covariant ``R_abcd`` with ``Ric_bd = g^ac R_abcd``."""
    if gamma is None:
        gamma = christoffel(g, dg)
    # d2g[..., k, l, i, j] = d_k d_l g_ij
    second = 0.5 * (
        np.einsum("...bcad->...abcd", d2g)
        + np.einsum("...adbc->...abcd", d2g)
        - np.einsum("...acbd->...abcd", d2g)
        - np.einsum("...bdac->...abcd", d2g)
    )
    quad = np.einsum("...ef,...ebc,...fad->...abcd", g, gamma, gamma) - np.einsum(
        "...ef,...ebd,...fac->...abcd", g, gamma, gamma
    )
    return second + quad


class Curvature(NamedTuple):
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray


def curvature_from_arrays(g, dg, d2g):
    ginv = np.linalg.inv(g)
    gam = christoffel(g, dg, ginv)
    riem = riemann(g, dg, d2g, gam)
    ric = np.einsum("...ac,...abcd->...bd", ginv, riem)
    scal = np.einsum("...bd,...bd->...", ginv, ric)
    return Curvature(gam, riem, ric, scal)


def curvature(g: TensorField, x, config: DerivativeConfig = DEFAULT_DERIVATIVES) -> Curvature:
    x = np.asarray(x, dtype=float)
    gv = g(x)
    return curvature_from_arrays(gv, g.grad(x, config), g.hess(x, config))


curvature3 = curvature


def einstein_residual(g4: TensorField, x, Lambda, config=DEFAULT_DERIVATIVES):
    """``Ric - Lambda g`` for a Lorentzian metric field."""
    x = np.asarray(x, dtype=float)
    c = curvature(g4, x, config)
    return c.ricci - Lambda * g4(x)


def _lambda_from(Lambda):
    if not Lambda > 0:
        raise ParameterError("cosmological constant must be positive", field="Lambda", value=Lambda)
    return float(np.sqrt(3.0 / Lambda))


def covariant_derivative(gamma, T, dT):
    """``(nabla_k T)_ij`` for a covariant 2-tensor, indexed ``[..., k, i, j]``."""
    return (
        dT
        - np.einsum("...mki,...mj->...kij", gamma, T)
        - np.einsum("...mkj,...im->...kij", gamma, T)
    )


class ConstraintSample(NamedTuple):
    T00: np.ndarray
    T0i: np.ndarray
    T0i_norm: np.ndarray
    trK: np.ndarray
    dec_margin: np.ndarray
    mc_margin: np.ndarray


def constraints(g: TensorField, K: TensorField, Lambda, x, config=DEFAULT_DERIVATIVES):
    """Energy and momentum densities of the data ``(g, K)``."""
    _lambda_from(Lambda)
    x = np.asarray(x, dtype=float)
    gv = g(x)
    curv = curvature_from_arrays(gv, g.grad(x, config), g.hess(x, config))
    ginv = np.linalg.inv(gv)
    Kv = K(x)
    trK = np.einsum("...ij,...ij->...", ginv, Kv)
    K_up = np.einsum("...ia,...jb,...ab->...ij", ginv, ginv, Kv)
    normK2 = np.einsum("...ij,...ij->...", K_up, Kv)
    T00 = 0.5 * (curv.scalar + trK**2 - normK2 - 2 * Lambda)
    nK = covariant_derivative(curv.christoffel, Kv, K.grad(x, config))
    # T0i = g^jk (nabla_k K_ij - nabla_i K_jk)
    T0i = np.einsum("...jk,...kij->...i", ginv, nK) - np.einsum("...jk,...ijk->...i", ginv, nK)
    norm = np.sqrt(np.abs(np.einsum("...ij,...i,...j->...", ginv, T0i, T0i)))
    return ConstraintSample(T00, T0i, norm, trK, T00 - norm, np.sqrt(3 * Lambda) - trK)


def momentum_tensor_h(g: TensorField, K: TensorField, Lambda, x, T=None):
    """``h = K - c g`` with ``c = 1/lambda`` or ``coth(T/lambda)/lambda`` when a
    hyperbolic time ``T`` is given."""
    lam = _lambda_from(Lambda)
    x = np.asarray(x, dtype=float)
    if T is None:
        c = 1.0 / lam
    else:
        if T == 0:
            raise SingularSliceError("hyperbolic slice T = 0 is singular", field="T")
        c = 1.0 / (np.tanh(T / lam) * lam)
    return K(x) - c * g(x)


def h_field(g: TensorField, K: TensorField, Lambda, T=None) -> TensorField:
    lam = _lambda_from(Lambda)
    if T is not None and T == 0:
        raise SingularSliceError("hyperbolic slice T = 0 is singular", field="T")
    c = 1.0 / lam if T is None else 1.0 / (np.tanh(T / lam) * lam)
    return add_fields(K, g, -c, name="h")


class GeneralizedDensities(NamedTuple):
    mu: np.ndarray
    omega: np.ndarray
    chi: np.ndarray
    gdec_margin: np.ndarray


def generalized_densities(gbar: TensorField, p: TensorField, x, config=DEFAULT_DERIVATIVES):
    """Densities of a metric paired with a not necessarily symmetric 2-tensor."""
    x = np.asarray(x, dtype=float)
    gv = gbar(x)
    curv = curvature_from_arrays(gv, gbar.grad(x, config), gbar.hess(x, config))
    ginv = np.linalg.inv(gv)
    pv = p(x)
    dp = p.grad(x, config)
    trp = np.einsum("...ij,...ij->...", ginv, pv)
    p2 = np.einsum("...ia,...jb,...ij,...ab->...", ginv, ginv, pv, pv)
    mu = 0.5 * (curv.scalar + trp**2 - p2)
    npv = covariant_derivative(curv.christoffel, pv, dp)
    # omega_j = nabla^i p_ji - nabla_j tr p
    omega = np.einsum("...ik,...kji->...j", ginv, npv) - np.einsum("...ab,...jab->...j", ginv, npv)
    # chi from the antisymmetric part, formed before differentiation so that a
    # symmetric p gives exactly zero
    anti = pv - np.swapaxes(pv, -1, -2)
    danti = dp - np.swapaxes(dp, -1, -2)
    nanti = covariant_derivative(curv.christoffel, anti, danti)
    chi = 2 * np.einsum("...ik,...kij->...j", ginv, nanti)

    def norm(v):
        return np.sqrt(np.abs(np.einsum("...ij,...i,...j->...", ginv, v, v)))

    margin = mu - np.maximum(norm(omega), norm(omega + chi))
    return GeneralizedDensities(mu, omega, chi, margin)


class SliceGeometry(NamedTuple):
    g: np.ndarray
    K: np.ndarray
    lapse: np.ndarray
    shift: np.ndarray  # covariant N_i


def slice_geometry(g4: TensorField, t, x, config=DEFAULT_DERIVATIVES, orientation=1):
    """Induced metric and second fundamental form of ``{time = t}``.

    ``K_ij = (d_t g_ij - D_i N_j - D_j N_i) / (2N)``, measured against the unit
    normal along increasing time.  ``orientation=-1`` flips it when the time
    coordinate runs to the past.
    """
    x = np.asarray(x, dtype=float)
    X = np.concatenate([np.broadcast_to(np.asarray(t, float), x.shape[:-1])[..., None], x], axis=-1)
    G = g4(X)
    gs = G[..., 1:, 1:]
    check_positive_definite(gs, x)
    Ni = G[..., 0, 1:]
    ginv = np.linalg.inv(gs)
    N2 = -G[..., 0, 0] + np.einsum("...i,...ij,...j->...", Ni, ginv, Ni)
    if np.any(N2 <= 0):
        raise SignatureError("time coordinate is not timelike on this slice")
    N = np.sqrt(N2)
    dG = g4.grad(X, config)
    dt_g = dG[..., 0, 1:, 1:]
    dgs = dG[..., 1:, 1:, 1:]
    dN = dG[..., 1:, 0, 1:]  # [k, j] = d_k N_j
    gam = christoffel(gs, dgs, ginv)
    DN = dN - np.einsum("...lkj,...l->...kj", gam, Ni)
    K = orientation * (dt_g - DN - np.swapaxes(DN, -1, -2)) / (2 * N[..., None, None])
    return SliceGeometry(gs, K, N, Ni)


def slice_fields(g4: TensorField, t, config=DEFAULT_DERIVATIVES, orientation=1):
    """``(g, K)`` of a slice as fields over the spatial coordinates."""

    def gfun(x):
        x = np.asarray(x, float)
        X = np.concatenate([np.full(x.shape[:-1] + (1,), float(t)), x], axis=-1)
        return g4(X)[..., 1:, 1:]

    def kfun(x):
        return slice_geometry(g4, t, x, config, orientation).K

    return MetricField3(gfun, 3, name="g"), TensorField(kfun, 3, name="K")


# ---------------------------------------------------------------------------
# mean-curvature deformation


class Deformation(NamedTuple):
    F: float
    g_lambda: np.ndarray
    trK: float
    theta: float


def _trace_k(g_of, a_of, s, x, ds=None):
    # tr_g k with k = d_s g / (2a)
    g = np.asarray(g_of(s, x), float)
    h = ds if ds is not None else max(abs(s), 1.0) * EPS ** (1 / 3)
    dg = (np.asarray(g_of(s + h, x)) - np.asarray(g_of(s - h, x))) / (2 * h)
    return float(np.einsum("ij,ij->", np.linalg.inv(g), dg) / (2 * a_of(s, x)))


def deformation_exponent(a_of, g_of, theta_of, t, x, tol=1e-12):
    """``F(t,x) = (1/3) int_0^t (Theta - tr_g k) a ds``."""

    def integrand(s):
        return (theta_of(s, x) - _trace_k(g_of, a_of, s, x)) * a_of(s, x)

    val, err, info = integrate.quad(integrand, 0.0, t, epsabs=tol, epsrel=tol, full_output=1)[:3]
    if not np.isfinite(val) or err > max(1e-8, 1e-8 * abs(val)):
        raise IntegrationError("deformation integral did not converge", t=t, x=list(x), error=err)
    return val / 3.0


def mean_curvature_deform(a_of, g_of, theta_of, t, x):
    """Conformally deform a time-dependent metric so each slice has mean
    curvature ``theta_of``.

    ``a_of(s, x)`` is the lapse, ``g_of(s, x)`` the 3-metric, ``theta_of(s, x)``
    the target mean curvature.  Returns the exponent ``F``, the deformed metric
    ``exp(2F) g`` and the mean curvature of the deformed slice computed by
    differencing the deformed metric in time.
    """
    x = np.asarray(x, float)
    F = deformation_exponent(a_of, g_of, theta_of, t, x)
    g = np.asarray(g_of(t, x), float)
    g_lam = np.exp(2 * F) * g
    h = max(abs(t), 1.0) * 1e-4

    def deformed(s):
        return np.exp(2 * deformation_exponent(a_of, g_of, theta_of, s, x)) * np.asarray(g_of(s, x))

    # 4th-order central difference; each point costs one quadrature
    dg = (-deformed(t + 2 * h) + 8 * deformed(t + h) - 8 * deformed(t - h) + deformed(t - 2 * h)) / (12 * h)
    K = dg / (2 * a_of(t, x))
    trK = float(np.einsum("ij,ij->", np.linalg.inv(g_lam), K))
    return Deformation(F, g_lam, trK, float(theta_of(t, x)))
