"""Product quadrature on coordinate spheres.

Gauss-Legendre in ``cos(theta)`` times the periodic trapezoid rule in ``psi``.
Sums are compensated (``math.fsum``) so that results do not depend on the
evaluation order of the nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import IntegrationError, ParameterError

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class QuadratureSpec:
    n_theta: int = 64
    n_psi: int = 128
    # fixed (start, end) or a callable radius -> (start, end); None is [0, 2 pi)
    psi_interval: tuple | Callable | None = None

    def __post_init__(self):
        if int(self.n_theta) != self.n_theta or self.n_theta < 8:
            raise ParameterError("n_theta must be an integer >= 8", field="n_theta", value=self.n_theta)
        if int(self.n_psi) != self.n_psi or self.n_psi < 16:
            raise ParameterError("n_psi must be an integer >= 16", field="n_psi", value=self.n_psi)
        iv = self.psi_interval
        if iv is not None and not callable(iv):
            a, b = iv
            if not b > a:
                raise ParameterError("psi interval must have positive length", field="psi_interval", value=list(iv))

    def interval(self, radius):
        iv = self.psi_interval
        if iv is None:
            return 0.0, TWO_PI
        if callable(iv):
            iv = iv(radius)
        return float(iv[0]), float(iv[1])

    def doubled(self):
        return QuadratureSpec(2 * self.n_theta, 2 * self.n_psi, self.psi_interval)


class SphereNodes(NamedTuple):
    """Nodes on a unit sphere: directions ``n``, angles, and weights for
    ``sin(theta) dtheta dpsi``."""

    n: np.ndarray  # (N, 3)
    theta: np.ndarray
    psi: np.ndarray
    weight: np.ndarray


def sphere_nodes(q: QuadratureSpec, radius=None) -> SphereNodes:
    u, wu = np.polynomial.legendre.leggauss(q.n_theta)
    a, b = q.interval(radius)
    psi = a + (b - a) * np.arange(q.n_psi) / q.n_psi
    wpsi = (b - a) / q.n_psi
    U, P = np.meshgrid(u, psi, indexing="ij")
    W = np.repeat(wu[:, None] * wpsi, q.n_psi, axis=1)
    S = np.sqrt((1 - U) * (1 + U))
    n = np.stack([S * np.cos(P), S * np.sin(P), U], axis=-1).reshape(-1, 3)
    return SphereNodes(n, np.arccos(U).ravel(), P.ravel(), W.ravel())


def fsum_weighted(values, weights, points=None):
    """Compensated ``sum(values * weights)`` over the leading axis.

    ``values`` may carry trailing component axes; each component is summed
    separately.
    """
    values = np.asarray(values, float)
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values.reshape(values.shape[0], -1)).all(axis=1))[0, 0]
        where = None if points is None else np.asarray(points)[bad].tolist()
        raise IntegrationError("non-finite integrand sample", node=int(bad), point=where)
    prod = values * np.asarray(weights, float).reshape((-1,) + (1,) * (values.ndim - 1))
    flat = prod.reshape(prod.shape[0], -1)
    out = np.array([math.fsum(flat[:, k]) for k in range(flat.shape[1])])
    return out.reshape(values.shape[1:]) if values.ndim > 1 else float(out[0])


def surface_integral(f, radius, q: QuadratureSpec = QuadratureSpec(), center=(0.0, 0.0, 0.0)):
    """Integral of ``f(points, normals)`` over the flat coordinate sphere of
    the given radius with area element ``r^2 sin(theta) dtheta dpsi``."""
    if not radius > 0:
        raise ParameterError("radius must be positive", field="radius", value=radius)
    nodes = sphere_nodes(q, radius)
    pts = np.asarray(center, float) + radius * nodes.n
    vals = np.asarray(f(pts, nodes.n), float)
    return fsum_weighted(vals, nodes.weight * radius**2, pts)


def fibonacci_directions(n=256):
    """Quasi-uniform unit vectors."""
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (3 - np.sqrt(5)) * k
    s = np.sqrt(1 - z**2)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1)
