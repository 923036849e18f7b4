"""Coordinate charts of de Sitter space as the hyperboloid
``-(X0)^2 + (X1)^2 + ... + (X4)^2 = lambda^2`` in R^{1,4}.

Chart coordinates, in order:

==============  ==========================
global          (t, r, theta, psi), r in [0, pi]
planar-upper    (t, x1, x2, x3)
planar-lower    (t, x1, x2, x3)
static-inner    (tbar, rbar, theta, psi), rbar < lambda
static-outer    (tbar, rbar, theta, psi), rbar > lambda
hyperbolic      (T, R, theta, psi), T != 0
==============  ==========================

The lower planar chart is the upper one composed with the reflection
``(X0, Xi, X4) -> (-X0, Xi, -X4)``; the same reflection applied to the static
wedges gives their past counterparts (see :func:`reflect`).

In the static-outer wedge ``rbar`` is the timelike coordinate, so
:func:`slice_data` slices it by ``rbar = const`` with ``(tbar, theta, psi)`` as
spatial coordinates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from .errors import DomainError, HorizonError, ParameterError, SingularChartError, SingularSliceError
from .symbolic import compile_tensor, slice_expressions
from .tensor_kernel import MetricField3, TensorField

HORIZON_GUARD = 1e-8
TWO_PI = 2 * np.pi


class ChartId(str, enum.Enum):
    GLOBAL = "global"
    PLANAR_UPPER = "planar-upper"
    PLANAR_LOWER = "planar-lower"
    STATIC_INNER = "static-inner"
    STATIC_OUTER = "static-outer"
    HYPERBOLIC = "hyperbolic"

    @classmethod
    def parse(cls, name):
        try:
            return cls(name)
        except ValueError:
            raise ParameterError(f"unknown chart {name!r}", field="chart", allowed=[c.value for c in cls]) from None


COORD_NAMES = {
    ChartId.GLOBAL: ("t", "r", "theta", "psi"),
    ChartId.PLANAR_UPPER: ("t", "x1", "x2", "x3"),
    ChartId.PLANAR_LOWER: ("t", "x1", "x2", "x3"),
    ChartId.STATIC_INNER: ("tbar", "rbar", "theta", "psi"),
    ChartId.STATIC_OUTER: ("tbar", "rbar", "theta", "psi"),
    ChartId.HYPERBOLIC: ("T", "R", "theta", "psi"),
}

# index of the coordinate whose level sets are the slices of slice_data
SLICE_TIME_INDEX = {c: 0 for c in ChartId} | {ChartId.STATIC_OUTER: 1}

# +1 when increasing slice time is future directed (checked in the tests by
# pushing the time vector forward to R^{1,4})
TIME_ORIENTATION = {c: 1 for c in ChartId} | {ChartId.PLANAR_LOWER: -1}


def _check_lambda(lam):
    if not (np.isfinite(lam) and lam > 0):
        raise ParameterError("lambda must be positive", field="lambda", value=lam)
    return float(lam)


@dataclass(frozen=True)
class AmbientPoint:
    X: tuple
    lam: float

    def residual(self):
        return float(hyperboloid_residual(np.asarray(self.X), self.lam))


def hyperboloid_residual(X, lam):
    """``-(X0)^2 + sum (Xi)^2 - lambda^2``, with the null pair factored."""
    X = np.asarray(X, float)
    return (
        -(X[..., 0] - X[..., 4]) * (X[..., 0] + X[..., 4])
        + X[..., 1] ** 2
        + X[..., 2] ** 2
        + X[..., 3] ** 2
        - lam**2
    )


def reflect(X):
    """Time reflection ``(X0, Xi, X4) -> (-X0, Xi, -X4)`` of R^{1,4}."""
    Y = np.array(X, float, copy=True)
    Y[..., 0] *= -1
    Y[..., 4] *= -1
    return Y


def _angles_ok(theta, psi):
    return (theta >= 0) & (theta <= np.pi) & (psi >= 0) & (psi < TWO_PI)


def domain_violation(chart, coords, lam):
    """Name of the first violated domain predicate, or ``None``."""
    chart = ChartId(chart)
    c = np.asarray(coords, float)
    if not np.all(np.isfinite(c)):
        return "coordinates finite"
    a, b = c[..., 0], c[..., 1]
    if chart in (ChartId.PLANAR_UPPER, ChartId.PLANAR_LOWER):
        return None
    if not np.all(_angles_ok(c[..., 2], c[..., 3])):
        return "0 <= theta <= pi and 0 <= psi < 2 pi"
    if chart is ChartId.GLOBAL and not np.all((b >= 0) & (b <= np.pi)):
        return "0 <= r <= pi"
    if chart is ChartId.STATIC_INNER and not np.all((b >= 0) & (b < lam)):
        return "0 <= rbar < lambda"
    if chart is ChartId.STATIC_OUTER and not np.all(b > lam):
        return "rbar > lambda"
    if chart is ChartId.HYPERBOLIC:
        if not np.all(a != 0):
            return "T != 0"
        if not np.all(b >= 0):
            return "R >= 0"
    return None


def _require_domain(chart, coords, lam):
    bad = domain_violation(chart, coords, lam)
    if bad is not None:
        raise DomainError(f"point outside the {ChartId(chart).value} chart: requires {bad}",
                          chart=ChartId(chart).value, predicate=bad)


@dataclass(frozen=True)
class ChartPoint:
    chart: ChartId
    coords: tuple
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "chart", ChartId(self.chart))
        object.__setattr__(self, "coords", tuple(float(v) for v in self.coords))
        _check_lambda(self.lam)
        if len(self.coords) != 4:
            raise ParameterError("a chart point has four coordinates", field="coords")
        _require_domain(self.chart, self.coords, self.lam)


def _unit(theta, psi):
    st = np.sin(theta)
    return st * np.cos(psi), st * np.sin(psi), np.cos(theta)


def embed_coords(chart, coords, lam, check=True):
    """Vectorized embedding: ``coords (..., 4) -> X (..., 5)``."""
    chart = ChartId(chart)
    lam = _check_lambda(lam)
    c = np.asarray(coords, float)
    if check:
        _require_domain(chart, c, lam)
    X = np.empty(c.shape[:-1] + (5,))
    a, b = c[..., 0], c[..., 1]
    if chart in (ChartId.PLANAR_UPPER, ChartId.PLANAR_LOWER):
        e = np.exp(a / lam)
        q = (c[..., 1] ** 2 + c[..., 2] ** 2 + c[..., 3] ** 2) * e / (2 * lam)
        X[..., 0] = lam * np.sinh(a / lam) + q
        X[..., 1:4] = c[..., 1:4] * e[..., None]
        X[..., 4] = -lam * np.cosh(a / lam) + q
        return reflect(X) if chart is ChartId.PLANAR_LOWER else X
    n1, n2, n3 = _unit(c[..., 2], c[..., 3])
    if chart is ChartId.GLOBAL:
        ch = lam * np.cosh(a / lam)
        X[..., 0] = lam * np.sinh(a / lam)
        rad = ch * np.sin(b)
        X[..., 4] = ch * np.cos(b)
    elif chart is ChartId.STATIC_INNER:
        s = np.sqrt((lam - b) * (lam + b))
        X[..., 0] = s * np.sinh(a / lam)
        X[..., 4] = -s * np.cosh(a / lam)
        rad = b
    elif chart is ChartId.STATIC_OUTER:
        s = np.sqrt((b - lam) * (b + lam))
        X[..., 0] = s * np.cosh(a / lam)
        X[..., 4] = -s * np.sinh(a / lam)
        rad = b
    else:  # hyperbolic
        sT = lam * np.sinh(a / lam)
        X[..., 0] = sT * np.cosh(b / lam)
        X[..., 4] = -lam * np.cosh(a / lam)
        rad = sT * np.sinh(b / lam)
    X[..., 1] = rad * n1
    X[..., 2] = rad * n2
    X[..., 3] = rad * n3
    return X


def embed(p: ChartPoint) -> AmbientPoint:
    X = embed_coords(p.chart, np.array(p.coords), p.lam)
    return AmbientPoint(tuple(float(v) for v in X), p.lam)


def _angles_from(Y):
    rho = np.sqrt(Y[..., 0] ** 2 + Y[..., 1] ** 2 + Y[..., 2] ** 2)
    theta = np.arctan2(np.hypot(Y[..., 0], Y[..., 1]), Y[..., 2])
    psi = np.mod(np.arctan2(Y[..., 1], Y[..., 0]), TWO_PI)
    return rho, theta, psi


def chart_coords(chart, X, lam):
    """Inverse of :func:`embed_coords` on the chart's image."""
    chart = ChartId(chart)
    lam = _check_lambda(lam)
    X = np.asarray(X, float)
    if chart is ChartId.PLANAR_LOWER:
        X = reflect(X)
    u = X[..., 0] - X[..., 4]
    v = X[..., 0] + X[..., 4]
    out = np.empty(X.shape[:-1] + (4,))
    if chart in (ChartId.PLANAR_UPPER, ChartId.PLANAR_LOWER):
        if not np.all(u > 0):
            raise DomainError("point not in the planar chart", chart=chart.value, predicate="X0 - X4 > 0")
        out[..., 0] = lam * np.log(u / lam)
        out[..., 1:] = X[..., 1:4] * (lam / u)[..., None]
        return out
    Y = X[..., 1:4]
    if chart is ChartId.HYPERBOLIC:
        # X^i carries a factor sinh(T/lambda), negative on the past sheet
        Y = Y * np.where(X[..., 0] < 0, -1.0, 1.0)[..., None]
    rho, theta, psi = _angles_from(Y)
    out[..., 2], out[..., 3] = theta, psi
    if chart is ChartId.GLOBAL:
        out[..., 0] = lam * np.arcsinh(X[..., 0] / lam)
        out[..., 1] = np.arctan2(rho, X[..., 4])
    elif chart is ChartId.STATIC_INNER:
        if not np.all((u > 0) & (v < 0)):
            raise DomainError("point not in the inner static wedge", chart=chart.value, predicate="X0 + X4 < 0 < X0 - X4")
        out[..., 0] = 0.5 * lam * np.log(-u / v)
        out[..., 1] = rho
    elif chart is ChartId.STATIC_OUTER:
        if not np.all((u > 0) & (v > 0)):
            raise DomainError("point not in the outer static wedge", chart=chart.value, predicate="X0 +- X4 > 0")
        out[..., 0] = 0.5 * lam * np.log(u / v)
        out[..., 1] = rho
    else:
        if not np.all(X[..., 4] < -lam):
            raise DomainError("point not in the hyperbolic chart", chart=chart.value, predicate="X4 < -lambda")
        T = np.sign(X[..., 0]) * lam * np.arccosh(-X[..., 4] / lam)
        out[..., 0] = T
        out[..., 1] = lam * np.arcsinh(rho / (lam * np.abs(np.sinh(T / lam))))
    return out


# ---------------------------------------------------------------------------
# metrics


_SYM = sp.symbols("c0 c1 c2 c3", real=True)
_LAM = sp.Symbol("lambda", positive=True)


def metric_expression(chart):
    """Closed-form sympy metric of a chart in its own coordinates."""
    chart = ChartId(chart)
    a, b, th, ps = _SYM
    lam = _LAM
    if chart in (ChartId.PLANAR_UPPER, ChartId.PLANAR_LOWER):
        e2 = sp.exp(2 * a / lam)
        return sp.diag(-1, e2, e2, e2)
    if chart is ChartId.GLOBAL:
        w = lam**2 * sp.cosh(a / lam) ** 2
        return sp.diag(-1, w, w * sp.sin(b) ** 2, w * sp.sin(b) ** 2 * sp.sin(th) ** 2)
    if chart in (ChartId.STATIC_INNER, ChartId.STATIC_OUTER):
        f = 1 - b**2 / lam**2
        return sp.diag(-f, 1 / f, b**2, b**2 * sp.sin(th) ** 2)
    s2 = sp.sinh(a / lam) ** 2
    w = lam**2 * sp.sinh(b / lam) ** 2
    return sp.diag(-1, s2, s2 * w, s2 * w * sp.sin(th) ** 2)


@lru_cache(maxsize=None)
def _compiled_metric(chart):
    return compile_tensor(sp.ImmutableMatrix(metric_expression(chart)), _SYM, (_LAM,))


def chart_metric_field(chart, lam) -> TensorField:
    """The de Sitter metric of a chart as a field over chart coordinates."""
    chart = ChartId(chart)
    return _compiled_metric(chart).field((_check_lambda(lam),), name=f"dS[{chart.value}]", coords=chart.value)


def _check_singular(chart, c, lam):
    if chart in (ChartId.STATIC_INNER, ChartId.STATIC_OUTER):
        if np.any(np.abs(c[..., 1] - lam) <= HORIZON_GUARD * lam):
            raise SingularChartError("static chart is singular at the horizon rbar = lambda",
                                     chart=chart.value, rbar=c[..., 1])
    if chart is ChartId.HYPERBOLIC and np.any(c[..., 0] == 0):
        raise SingularChartError("hyperbolic chart is singular at T = 0", chart=chart.value)


def chart_metric(p: ChartPoint) -> np.ndarray:
    c = np.asarray(p.coords, float)
    _check_singular(p.chart, c, p.lam)
    return chart_metric_field(p.chart, p.lam)(c)


def chart_metric_coords(chart, coords, lam):
    chart = ChartId(chart)
    c = np.asarray(coords, float)
    _check_singular(chart, c, lam)
    _require_domain(chart, c, lam)
    return chart_metric_field(chart, lam)(c)


def pullback_metric(chart, coords, lam):
    """Minkowski metric of R^{1,4} pulled back through the embedding by
    central differences.  Independent of :func:`chart_metric`."""
    chart = ChartId(chart)
    c = np.asarray(coords, float)
    h = np.maximum(np.abs(c), 1.0) * 2e-4
    J = []
    for k in range(4):
        def at(s):
            y = c.copy()
            y[..., k] += s * h[..., k]
            return _embed_unchecked(chart, y, lam)

        # fourth-order central stencil
        J.append((8 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12 * h[..., k, None]))
    J = np.stack(J, axis=-2)  # [..., k, A]
    eta = np.diag([-1.0, 1, 1, 1, 1])
    return np.einsum("...ka,ab,...lb->...kl", J, eta, J)


def _embed_unchecked(chart, c, lam):
    # difference stencils may step across psi = 0 or a pole
    return embed_coords(chart, c, lam, check=False)


def time_orientation(chart, coords, lam):
    """Sign of ``dX0`` along increasing slice time, +1 for future directed."""
    chart = ChartId(chart)
    k = SLICE_TIME_INDEX[chart]
    c = np.asarray(coords, float)
    h = 1e-6 * max(1.0, float(np.max(np.abs(c[..., k]))))
    cp, cm = c.copy(), c.copy()
    cp[..., k] += h
    cm[..., k] -= h
    d = _embed_unchecked(chart, cp, lam)[..., 0] - _embed_unchecked(chart, cm, lam)[..., 0]
    return np.sign(d)


# ---------------------------------------------------------------------------
# slices


@lru_cache(maxsize=None)
def _compiled_slice(chart):
    G = metric_expression(chart)
    k = SLICE_TIME_INDEX[chart]
    order = [k] + [i for i in range(4) if i != k]
    G = G.extract(order, order)
    coords = [_SYM[i] for i in order]
    lapse = None
    if chart is ChartId.STATIC_OUTER:
        lapse = 1 / sp.sqrt(_SYM[1] ** 2 / _LAM**2 - 1)
    g, K, _ = slice_expressions(G, coords, lapse=lapse, orientation=TIME_ORIENTATION[chart])
    spatial = tuple(coords[1:])
    params = (coords[0], _LAM)
    return (
        compile_tensor(sp.ImmutableMatrix(g), spatial, params),
        compile_tensor(sp.ImmutableMatrix(K), spatial, params),
    )


def slice_data(chart, time, lam):
    """Induced metric and second fundamental form (future normal) of a
    de Sitter slice, as fields over the remaining chart coordinates."""
    chart = ChartId(chart)
    lam = _check_lambda(lam)
    time = float(time)
    if chart is ChartId.HYPERBOLIC and time == 0:
        raise SingularSliceError("hyperbolic slice T = 0 is singular", field="T")
    if chart is ChartId.STATIC_OUTER and not time > lam * (1 + HORIZON_GUARD):
        raise SingularSliceError("static-outer slices need rbar > lambda", field="rbar", value=time)
    cg, cK = _compiled_slice(chart)
    label = {ChartId.PLANAR_UPPER: "cartesian", ChartId.PLANAR_LOWER: "cartesian"}.get(chart, "polar")
    g = cg.field((time, lam), name="g", coords=label, metric=True)
    K = cK.field((time, lam), name="K", coords=label)
    return g, K


# ---------------------------------------------------------------------------
# planar <-> static


def _branch(rbar, lam):
    return np.where(rbar < lam, "inner", "outer")


def _guard(rbar, lam):
    if np.any(np.abs(np.asarray(rbar) - lam) <= HORIZON_GUARD * lam):
        raise HorizonError("query within the guard band of the horizon rbar = lambda",
                           rbar=np.asarray(rbar), band=HORIZON_GUARD * lam)


def _scalarize(x):
    x = np.asarray(x)
    return x.item() if x.ndim == 0 else x


def planar_to_static(t, r, lam):
    """Upper planar ``(t, r)`` to static ``(tbar, rbar, branch)``.

    ``tbar = t - (lambda/2) ln|1 - r^2 e^{2t/lambda} / lambda^2|``,
    ``rbar = r e^{t/lambda}``; angles are unchanged.
    """
    lam = _check_lambda(lam)
    t = np.asarray(t, float)
    r = np.asarray(r, float)
    rbar = r * np.exp(t / lam)
    _guard(rbar, lam)
    q = rbar / lam
    tbar = t - 0.5 * lam * np.log(np.abs((1 - q) * (1 + q)))
    return _scalarize(tbar), _scalarize(rbar), _scalarize(_branch(rbar, lam))


def static_to_planar(tbar, rbar, lam):
    lam = _check_lambda(lam)
    tbar = np.asarray(tbar, float)
    rbar = np.asarray(rbar, float)
    _guard(rbar, lam)
    q = rbar / lam
    t = tbar + 0.5 * lam * np.log(np.abs((1 - q) * (1 + q)))
    return _scalarize(t), _scalarize(rbar * np.exp(-t / lam))


def convert(p: ChartPoint, target) -> ChartPoint:
    """Move a point to another chart through its ambient image."""
    X = embed_coords(p.chart, np.array(p.coords), p.lam)
    c = chart_coords(target, X, p.lam)
    return ChartPoint(ChartId(target), tuple(c), p.lam)
