"""Compile sympy component matrices into vectorized tensor fields.

Closed-form models are written once as sympy expressions; first and second
derivatives are generated symbolically and lambdified with common
subexpression elimination.  Compilation is cached per expression.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import sympy as sp

from .tensor_kernel import MetricField3, TensorField


def _broadcast_stack(values, shape, tail):
    out = np.empty(shape + (len(values),))
    for k, v in enumerate(values):
        out[..., k] = v
    return out.reshape(shape + tail)


class CompiledTensor:
    """Lambdified ``(value, d1, d2)`` of a symmetric ``n x n`` sympy matrix.

    ``coords`` are the symbols that become the point array, ``params`` the
    symbols bound when a field is requested.
    """

    def __init__(self, matrix, coords, params=(), derivatives=2):
        self.matrix = sp.ImmutableMatrix(matrix)
        self.coords = tuple(coords)
        self.params = tuple(params)
        n = len(self.coords)
        self.n = n
        args = list(self.coords) + list(self.params)
        entries = list(self.matrix)
        self._f = sp.lambdify(args, entries, modules="numpy", cse=True)
        self._d1 = self._d2 = None
        memo = {}

        def diff(e, *v):
            # symmetric matrices repeat entries; differentiate each once
            key = (e, tuple(sorted(v, key=str)))
            if key not in memo:
                if e == 0:
                    memo[key] = sp.S.Zero
                elif len(v) == 1:
                    memo[key] = sp.diff(e, v[0])
                else:
                    memo[key] = sp.diff(diff(e, *v[:-1]), v[-1])
            return memo[key]

        if derivatives >= 1:
            d1 = [diff(e, c) for c in self.coords for e in entries]
            self._d1 = sp.lambdify(args, d1, modules="numpy", cse=True)
        if derivatives >= 2:
            d2 = []
            for a in self.coords:
                for b in self.coords:
                    d2.extend(diff(e, a, b) for e in entries)
            self._d2 = sp.lambdify(args, d2, modules="numpy", cse=True)

    def _call(self, fn, x, values, tail):
        x = np.asarray(x, dtype=float)
        cols = [x[..., k] for k in range(self.n)]
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = fn(*cols, *values)
        return _broadcast_stack(vals, x.shape[:-1], tail)

    def field(self, values=(), name="", coords="cartesian", metric=False):
        values = tuple(float(v) for v in values)
        n = self.n
        cls = MetricField3 if metric and n == 3 else TensorField
        d1 = d2 = None
        if self._d1 is not None:
            d1 = lambda x: self._call(self._d1, x, values, (n, n, n))  # noqa: E731
        if self._d2 is not None:
            d2 = lambda x: self._call(self._d2, x, values, (n, n, n, n))  # noqa: E731
        return cls(
            lambda x: self._call(self._f, x, values, (n, n)),
            n,
            d1,
            d2,
            name,
            coords,
        )


@lru_cache(maxsize=None)
def compile_tensor(matrix, coords, params=(), derivatives=2):
    return CompiledTensor(matrix, coords, params, derivatives)


def slice_expressions(metric4, coords, lapse=None, orientation=1, simplify=True):
    """Symbolic ``(g, K, N)`` of the level sets of ``coords[0]``.

    ``lapse`` may be supplied when the metric's ``g_00`` is a perfect square
    whose root sympy would otherwise wrap in an absolute value.
    """
    G = sp.Matrix(metric4)
    t = coords[0]
    xs = coords[1:]
    g = G[1:, 1:]
    Ni = G[0, 1:]
    shift_free = all(sp.simplify(v) == 0 for v in Ni)
    if shift_free:
        N = lapse if lapse is not None else sp.sqrt(-G[0, 0])
        K = g.diff(t) / (2 * N)
    else:
        ginv = g.inv()
        N = lapse if lapse is not None else sp.sqrt(-G[0, 0] + (Ni * ginv * Ni.T)[0, 0])
        gam = [[[sum(ginv[l, m] * (sp.diff(g[m, i], xs[j]) + sp.diff(g[m, j], xs[i]) - sp.diff(g[i, j], xs[m])) for m in range(3)) / 2
                 for j in range(3)] for i in range(3)] for l in range(3)]
        DN = sp.Matrix(3, 3, lambda i, j: sp.diff(Ni[j], xs[i]) - sum(gam[l][i][j] * Ni[l] for l in range(3)))
        K = (g.diff(t) - DN - DN.T) / (2 * N)
    K = orientation * K
    if simplify:
        K = K.applyfunc(lambda e: sp.cancel(sp.together(e)))
    return g, K, N
