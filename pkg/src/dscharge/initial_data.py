"""Initial data sets, their conformal rescaling, decay checks and apparent
horizons.

A data set is either *planar type* (Cartesian end coordinates, constant
conformal factor ``P``) or *hyperbolic type* (polar ``(R, theta, psi)`` end
coordinates on a slice of hyperbolic time ``T``, factor ``sinh(T/lambda)``).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
import sympy as sp
from scipy import optimize

from .errors import DomainError, NotFoundError, ParameterError, SingularSliceError
from .quadrature import QuadratureSpec, fibonacci_directions, fsum_weighted, sphere_nodes
from .symbolic import compile_tensor
from .tensor_kernel import (
    DEFAULT_DERIVATIVES,
    TensorField,
    add_fields,
    christoffel,
    h_field,
    scale_field,
)


@dataclass(frozen=True)
class PlanarConformal:
    P: float

    def __post_init__(self):
        if not self.P > 0:
            raise ParameterError("conformal factor must be positive", field="P", value=self.P)

    def factor(self):
        return float(self.P)


@dataclass(frozen=True)
class HyperbolicConformal:
    T: float
    lam: float

    def __post_init__(self):
        if self.T == 0:
            raise SingularSliceError("hyperbolic slice T = 0 is singular", field="T")

    def factor(self):
        return float(np.sinh(self.T / self.lam))


@dataclass(frozen=True)
class EndChart:
    kind: str = "planar"  # "planar" | "hyperbolic"
    r_min: float = 0.0

    def __post_init__(self):
        if self.kind not in ("planar", "hyperbolic"):
            raise ParameterError(f"unknown end kind {self.kind!r}", field="end")


@dataclass(frozen=True)
class InitialDataSet:
    """``(g, K, Lambda)`` plus the data needed to evaluate charges.

    ``h`` and ``gbar_dev`` are optional precise evaluations of the momentum
    tensor ``K - c g`` and of the rescaled metric minus its background.  When a
    model can produce them without cancellation (a closed form, or a
    perturbation split) charges are computed from them; otherwise they are
    formed from ``g`` and ``K``.
    """

    g: TensorField
    K: TensorField
    Lambda: float
    conformal: PlanarConformal | HyperbolicConformal
    end: EndChart = EndChart()
    z: tuple = (0.0, 0.0, 0.0)
    h: TensorField | None = None
    gbar_dev: TensorField | None = None
    psi_interval: Callable | tuple | None = None
    descriptor: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if not self.Lambda > 0:
            raise ParameterError("cosmological constant must be positive", field="Lambda", value=self.Lambda)
        hyper = isinstance(self.conformal, HyperbolicConformal)
        if hyper != (self.end.kind == "hyperbolic"):
            raise ParameterError("conformal factor and end chart disagree", field="end")

    @property
    def lam(self):
        return float(np.sqrt(3.0 / self.Lambda))

    @property
    def hyperbolic(self):
        return self.end.kind == "hyperbolic"

    def momentum(self) -> TensorField:
        if self.h is not None:
            return self.h
        T = self.conformal.T if self.hyperbolic else None
        return h_field(self.g, self.K, self.Lambda, T)


# ---------------------------------------------------------------------------
# hyperbolic background


_R, _TH, _PS = sp.symbols("R theta psi", real=True)
_LAM = sp.Symbol("lambda", positive=True)


@lru_cache(maxsize=None)
def _compiled_hyperbolic():
    w = _LAM**2 * sp.sinh(_R / _LAM) ** 2
    G = sp.ImmutableMatrix(sp.diag(1, w, w * sp.sin(_TH) ** 2))
    return compile_tensor(G, (_R, _TH, _PS), (_LAM,))


def hyperbolic_metric(lam) -> TensorField:
    """``dR^2 + lambda^2 sinh^2(R/lambda) (dtheta^2 + sin^2 theta dpsi^2)``."""
    return _compiled_hyperbolic().field((lam,), name="g_H", coords="polar", metric=True)


def hyperbolic_frame_scale(x, lam):
    """Lengths of the coordinate vectors, so that ``e_i = d_i / scale_i`` is
    orthonormal for the hyperbolic background."""
    x = np.asarray(x, float)
    s = lam * np.sinh(x[..., 0] / lam)
    return np.stack([np.ones_like(s), s, s * np.sin(x[..., 1])], axis=-1)


def flat_field():
    def f(x):
        return np.broadcast_to(np.eye(3), np.shape(x)[:-1] + (3, 3)).copy()

    return TensorField(f, 3, lambda x: np.zeros(np.shape(x)[:-1] + (3, 3, 3)),
                       lambda x: np.zeros(np.shape(x)[:-1] + (3,) * 4), "delta")


# ---------------------------------------------------------------------------
# conformal decomposition


class Decomposition(NamedTuple):
    gbar: TensorField
    gbar_dev: TensorField  # gbar minus the flat or hyperbolic background
    hbar: TensorField
    htilde: TensorField | None  # hyperbolic case only: hbar + gbar / lambda


def conformal_decompose(d: InitialDataSet) -> Decomposition:
    c = d.conformal.factor()
    gbar = scale_field(d.g, c**-2, "gbar")
    background = hyperbolic_metric(d.lam) if d.hyperbolic else flat_field()
    dev = d.gbar_dev if d.gbar_dev is not None else add_fields(gbar, background, -1.0, "gbar_dev")
    hbar = scale_field(d.momentum(), 1.0 / c, "hbar")
    htilde = add_fields(hbar, gbar, 1.0 / d.lam, "htilde") if d.hyperbolic else None
    return Decomposition(gbar, dev, hbar, htilde)


# ---------------------------------------------------------------------------
# angular momentum density

LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_i, _j, _k] = 1.0
    LEVI_CIVITA[_i, _k, _j] = -1.0


def angular_density_arrays(gbar, hbar, x, z=(0.0, 0.0, 0.0), epsilon="flat"):
    """``htilde_ij = 1/2 eps_i^{uv} d_u(rho^2) (hbar_vj - gbar_vj tr hbar)``
    with ``rho`` the flat distance to ``z``.

    ``epsilon="flat"`` uses the Levi-Civita symbol with both upper indices
    raised by ``gbar``; ``"gbar"`` additionally weights it by ``sqrt(det gbar)``.
    """
    x = np.asarray(x, float)
    dz = x - np.asarray(z, float)
    if np.any(np.all(dz == 0, axis=-1)):
        raise DomainError("angular momentum density is undefined at the reference point z")
    ginv = np.linalg.inv(gbar)
    tr = np.einsum("...ij,...ij->...", ginv, hbar)
    W = hbar - gbar * tr[..., None, None]
    eps = np.einsum("ipq,...pu,...qv->...iuv", LEVI_CIVITA, ginv, ginv)
    if epsilon == "gbar":
        eps = eps * np.sqrt(np.linalg.det(gbar))[..., None, None, None]
    elif epsilon != "flat":
        raise ParameterError(f"unknown epsilon convention {epsilon!r}", field="epsilon")
    return 0.5 * np.einsum("...iuv,...u,...vj->...ij", eps, 2 * dz, W)


def angular_density(d: InitialDataSet, x, epsilon="flat"):
    if d.hyperbolic:
        raise ParameterError("angular momentum density needs planar-type data", field="end")
    dec = conformal_decompose(d)
    return angular_density_arrays(dec.gbar(x), dec.hbar(x), x, d.z, epsilon)


# ---------------------------------------------------------------------------
# decay


class DecayFit(NamedTuple):
    tau_hat: float  # fitted decay exponent of the sup-norm
    order: float  # implied asymptotic order (tau_hat, or tau_hat - 1 for hbar)
    residual: float
    samples: np.ndarray
    clears_threshold: bool
    exact: bool
    failed: bool


def _frame_components(T, x, lam):
    s = hyperbolic_frame_scale(x, lam)
    return T / (s[..., :, None] * s[..., None, :])


def decay_fit(d: InitialDataSet, radii, which="gbar", n_dirs=256):
    """Fit ``sup |Q| ~ c r^{-tau}`` (or ``c exp(-tau R / lambda)``) on the end.

    ``which="gbar"`` measures ``gbar`` minus its background, ``"hbar"`` the
    rescaled momentum tensor.  The threshold for ``gbar`` is ``tau > 1/2``
    (planar) or ``tau > 3/2`` (hyperbolic); ``hbar`` carries one extra power.
    """
    if which not in ("gbar", "hbar"):
        raise ParameterError(f"unknown field {which!r}", field="which")
    radii = np.asarray(radii, float)
    if radii.size < 2:
        raise ParameterError("need at least two radii", field="radii")
    dec = conformal_decompose(d)
    fld = dec.gbar_dev if which == "gbar" else dec.hbar
    dirs = fibonacci_directions(n_dirs)
    samples = []
    for r in radii:
        if d.hyperbolic:
            th = np.arccos(np.clip(dirs[:, 2], -1, 1))
            ps = np.mod(np.arctan2(dirs[:, 1], dirs[:, 0]), 2 * np.pi)
            pts = np.stack([np.full_like(th, r), th, ps], axis=-1)
            vals = _frame_components(fld(pts), pts, d.lam)
        else:
            vals = fld(r * dirs)
        samples.append(float(np.max(np.abs(vals))))
    samples = np.array(samples)
    if np.all(samples < 1e-14):
        return DecayFit(np.inf, np.inf, 0.0, samples, True, True, False)
    if np.any(samples <= 0) or np.any(np.diff(samples) >= 0):
        return DecayFit(np.nan, np.nan, np.inf, samples, False, False, True)
    xs = radii / d.lam if d.hyperbolic else np.log(radii)
    A = np.vstack([np.ones_like(xs), xs]).T
    coef, *_ = np.linalg.lstsq(A, np.log(samples), rcond=None)
    resid = float(np.max(np.abs(A @ coef - np.log(samples))))
    tau = -float(coef[1])
    order = tau if which == "gbar" else tau - 1
    threshold = 1.5 if d.hyperbolic else 0.5
    return DecayFit(tau, order, resid, samples, order > threshold, False, False)


# ---------------------------------------------------------------------------
# spheres and apparent horizons


@dataclass(frozen=True)
class Sphere:
    """Coordinate sphere: flat ``|x - center| = radius`` on a planar end, or
    ``R = radius`` on a hyperbolic end."""

    radius: float
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise ParameterError("sphere radius must be positive", field="radius", value=self.radius)


def _sphere_points(d, sphere, q):
    nodes = sphere_nodes(q)
    if d.hyperbolic:
        pts = np.stack([np.full_like(nodes.theta, sphere.radius), nodes.theta, nodes.psi], axis=-1)
        n = np.zeros_like(pts)
        n[:, 0] = 1.0
        dn = np.zeros(pts.shape + (3,))
    else:
        n = nodes.n
        pts = np.asarray(sphere.center, float) + sphere.radius * n
        dn = (np.eye(3) - n[:, :, None] * n[:, None, :]) / sphere.radius
    return pts, n, dn, nodes.weight


def mean_curvature_arrays(g, dg, n, dn):
    """Mean curvature (divergence of the unit normal) of the level sets of a
    function with gradient ``n`` and Hessian ``dn``."""
    ginv = np.linalg.inv(g)
    dginv = -np.einsum("...ia,...kab,...bj->...kij", ginv, dg, ginv)
    w = np.einsum("...ij,...j->...i", ginv, n)
    dw = np.einsum("...kjl,...l->...kj", dginv, n) + np.einsum("...jl,...kl->...kj", ginv, dn)
    s2 = np.einsum("...i,...i->...", n, w)
    ds2 = np.einsum("...kj,...j->...k", dn, w) + np.einsum("...j,...kj->...k", n, dw)
    s = np.sqrt(s2)
    ds = ds2 / (2 * s[..., None])
    div = np.einsum("...ii->...", dw) / s - np.einsum("...i,...i->...", w, ds) / s2
    nu = w / s[..., None]
    trace_gamma = 0.5 * np.einsum("...ij,...kij->...k", ginv, dg)
    return div + np.einsum("...k,...k->...", trace_gamma, nu), nu, ginv


class SphereGeometry(NamedTuple):
    H: np.ndarray
    trK: np.ndarray  # trace of K restricted to the sphere
    trP: np.ndarray  # trace of the momentum tensor restricted to the sphere
    weight: np.ndarray


def sphere_geometry(d: InitialDataSet, sphere: Sphere, q=QuadratureSpec(8, 16), config=DEFAULT_DERIVATIVES):
    pts, n, dn, w = _sphere_points(d, sphere, q)
    H, nu, ginv = mean_curvature_arrays(d.g(pts), d.g.grad(pts, config), n, dn)

    def restricted_trace(T):
        return np.einsum("...ij,...ij->...", ginv, T) - np.einsum("...ij,...i,...j->...", T, nu, nu)

    return SphereGeometry(H, restricted_trace(d.K(pts)), restricted_trace(d.momentum()(pts)), w)


def _mean(values, weights):
    return fsum_weighted(values, weights) / fsum_weighted(np.ones_like(values), weights)


def _sign(sign):
    if sign in ("future", +1, "+"):
        return 1.0
    if sign in ("past", -1, "-"):
        return -1.0
    raise ParameterError(f"sign must be future or past, got {sign!r}", field="sign")


def horizon_residual_samples(d, sphere, sign="future", q=QuadratureSpec(8, 16)):
    s = _sign(sign)
    geo = sphere_geometry(d, sphere, q)
    if d.hyperbolic:
        T = d.conformal.T
        rhs = geo.trK - 2 * np.tanh(T / (2 * d.lam)) / d.lam
    else:
        rhs = geo.trP
    return rhs - s * geo.H, geo.weight


def horizon_residual(d: InitialDataSet, sphere: Sphere, sign="future", q=QuadratureSpec(8, 16)):
    """Area-averaged ``tr_S(h) - (+-H)`` over a coordinate sphere.

    On a planar end ``tr_S(h)`` is the sphere trace of ``K - g/lambda``; on a
    hyperbolic end it is replaced by ``tr_S K - 2 tanh(T/2 lambda)/lambda``.
    Zero exactly on a future (past) apparent horizon.
    """
    vals, w = horizon_residual_samples(d, sphere, sign, q)
    return _mean(vals, w)


class NullExpansions(NamedTuple):
    theta_plus: float
    theta_minus: float
    marginal: bool


def null_expansions(d: InitialDataSet, sphere: Sphere, q=QuadratureSpec(8, 16), tol=1e-10):
    geo = sphere_geometry(d, sphere, q)
    tp = _mean(geo.H + geo.trK, geo.weight)
    tm = _mean(geo.H - geo.trK, geo.weight)
    return NullExpansions(tp, tm, bool(min(abs(tp), abs(tm)) < tol))


class HorizonResult(NamedTuple):
    radius: float
    residual: float
    iterations: int


def find_horizon_spherical(d: InitialDataSet, sign="future", bracket=(0.3, 0.8),
                           center=(0.0, 0.0, 0.0), q=QuadratureSpec(8, 16), tol=1e-10):
    """Radius of the coordinate sphere on which the horizon residual vanishes.

    Bracketed root search (Brent: bisection with secant and inverse
    quadratic steps).
    """
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ParameterError("bracket must satisfy 0 < lo < hi", field="bracket", value=[lo, hi])

    def f(r):
        return horizon_residual(d, Sphere(r, tuple(center)), sign, q)

    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return HorizonResult(lo, 0.0, 0)
    if fhi == 0:
        return HorizonResult(hi, 0.0, 0)
    if np.sign(flo) == np.sign(fhi):
        raise NotFoundError("no sign change of the horizon residual in the bracket",
                            bracket=[lo, hi], residuals=[flo, fhi])
    root, info = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                 maxiter=200, full_output=True)
    res = f(root)
    if abs(res) > tol:
        raise NotFoundError("root search did not reach the residual tolerance", radius=root, residual=res)
    return HorizonResult(float(root), float(res), int(info.iterations))


# ---------------------------------------------------------------------------
# rigid motions of planar ends


def _rotate_field(f: TensorField, R) -> TensorField:
    R = np.asarray(R, float)

    def pull(x):
        return np.einsum("ab,...b->...a", R.T, np.asarray(x, float))

    def v(x):
        return np.einsum("ia,jb,...ab->...ij", R, R, f(pull(x)))

    def d1(x):
        return np.einsum("kc,ia,jb,...cab->...kij", R, R, R, f.grad(pull(x)))

    def d2(x):
        return np.einsum("kc,le,ia,jb,...ceab->...klij", R, R, R, R, f.hess(pull(x)))

    return TensorField(v, 3, d1, d2, f.name, f.coords)


def rotate_data_set(d: InitialDataSet, R) -> InitialDataSet:
    """The same data in end coordinates ``x' = R x``."""
    if d.hyperbolic:
        raise ParameterError("rotations act on planar ends", field="end")
    R = np.asarray(R, float)
    if not np.allclose(R @ R.T, np.eye(3), atol=1e-12) or np.linalg.det(R) < 0:
        raise ParameterError("R must be a proper rotation", field="R")
    rot = lambda f: None if f is None else _rotate_field(f, R)  # noqa: E731
    return replace(
        d,
        g=rot(d.g),
        K=rot(d.K),
        h=rot(d.h),
        gbar_dev=rot(d.gbar_dev),
        z=tuple(R @ np.asarray(d.z, float)),
        psi_interval=None,
        name=d.name + " (rotated)",
    )


# ---------------------------------------------------------------------------
# integrability surrogate


def integrability_diagnostics(d: InitialDataSet, radii, q=QuadratureSpec(8, 16), n_radial=4):
    """Integrals of ``|R(g)|`` and ``|T_0i|`` over successive annuli of a
    planar end.

    Integrability is judged by the annulus contributions shrinking
    geometrically (the finite-radius integrals form a Cauchy sequence).
    """
    from .tensor_kernel import constraints, curvature

    if d.hyperbolic:
        raise ParameterError("annulus integrals are implemented for planar ends", field="end")
    radii = np.asarray(radii, float)
    nodes = sphere_nodes(q)
    xr, wr = np.polynomial.legendre.leggauss(n_radial)
    shells = {"scalar_curvature": [], "momentum_density": []}
    for r0, r1 in zip(radii[:-1], radii[1:]):
        rs = 0.5 * (r1 - r0) * xr + 0.5 * (r1 + r0)
        ws = 0.5 * (r1 - r0) * wr
        pts = (rs[:, None, None] * nodes.n[None]).reshape(-1, 3)
        wts = (ws[:, None] * rs[:, None] ** 2 * nodes.weight[None]).reshape(-1)
        vol = np.sqrt(np.linalg.det(d.g(pts)))
        scal = curvature(d.g, pts).scalar
        mom = constraints(d.g, d.K, d.Lambda, pts).T0i_norm
        shells["scalar_curvature"].append(fsum_weighted(np.abs(scal) * vol, wts))
        shells["momentum_density"].append(fsum_weighted(mom * vol, wts))
    out = {}
    for k, v in shells.items():
        v = np.array(v)
        ok = bool(np.all(v < 1e-12) or np.all(v[1:] <= 0.9 * v[:-1] + 1e-12))
        out[k] = {"annuli": v.tolist(), "cauchy": ok}
    return out
