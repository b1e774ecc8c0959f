"""The ambient pseudo-Riemannian manifold in a single chart."""

import numpy as np

from .errors import SingularMetricError
from .expr import ExprField, parse
from .linalg import SymBilinearForm, rank_signature
from .numdiff import ExprMap


def _as_field(entry, coords):
    if isinstance(entry, ExprField):
        if entry.variables != tuple(coords):
            raise ValueError("field variables differ from the chart coordinates")
        return entry
    return parse(str(entry), coords)


class AmbientManifold:
    """Chart ``coords`` with metric components ``metric[i][j]``.

    ``metric`` may hold expression strings or parsed fields; the grid is
    symmetrised by averaging ``(i, j)`` and ``(j, i)`` at evaluation time.
    """

    def __init__(self, coords, metric, signature=None, singular_tol=1e-12):
        self.coords = tuple(coords)
        n = len(self.coords)
        if len(metric) != n or any(len(row) != n for row in metric):
            raise ValueError(f"metric must be {n}x{n}")
        self.metric = tuple(tuple(_as_field(e, self.coords) for e in row) for row in metric)
        self.signature = None if signature is None else tuple(signature)
        self.singular_tol = singular_tol
        self._map = ExprMap([self.metric[i][j] for i in range(n) for j in range(n)])
        self._flat = all(f.is_constant for row in self.metric for f in row)

    @classmethod
    def from_entries(cls, coords, entries, signature=None):
        """Build from ``{(i, j): source}``; missing entries are zero, ``(j, i)`` mirrors ``(i, j)``."""
        n = len(coords)
        grid = [["0"] * n for _ in range(n)]
        for (i, j), src in entries.items():
            grid[i][j] = src
            if (j, i) not in entries:
                grid[j][i] = src
        return cls(coords, grid, signature)

    @property
    def dim(self):
        return len(self.coords)

    def metric_at(self, x):
        n = self.dim
        g = self._map(np.asarray(x, dtype=float)).reshape(n, n)
        return 0.5 * (g + g.T)

    def form_at(self, x):
        return SymBilinearForm(self.metric_at(x))

    def inner(self, x, v, w):
        return float(np.asarray(v) @ self.metric_at(x) @ np.asarray(w))

    def metric_derivatives(self, x):
        """``dg[l, i, j] = d g_ij / d x_l``."""
        n = self.dim
        if self._flat:
            return np.zeros((n, n, n))
        J = self._map.jacobian(np.asarray(x, dtype=float), order=2).reshape(n, n, n)
        J = 0.5 * (J + J.transpose(1, 0, 2))
        return J.transpose(2, 0, 1)

    def inverse_metric(self, x):
        g = self.metric_at(x)
        w = np.linalg.eigvalsh(g)
        if np.min(np.abs(w)) <= self.singular_tol * max(np.max(np.abs(w)), 1e-300):
            raise SingularMetricError(f"metric is singular at {tuple(np.asarray(x, float))}")
        return np.linalg.inv(g)

    def christoffel(self, x):
        """``Gamma[k, i, j]`` of the Levi-Civita connection, symmetric in ``i, j``."""
        ginv = self.inverse_metric(x)
        n = self.dim
        if self._flat:
            return np.zeros((n, n, n))
        dg = self.metric_derivatives(x)
        # first kind: G[l, i, j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
        first = 0.5 * (dg.transpose(2, 0, 1) + dg.transpose(2, 1, 0) - dg)
        gamma = np.einsum("kl,lij->kij", ginv, first)
        return 0.5 * (gamma + gamma.transpose(0, 2, 1))

    def metric_many(self, X):
        n = self.dim
        g = self._map.many(np.atleast_2d(np.asarray(X, dtype=float))).reshape(-1, n, n)
        return 0.5 * (g + g.transpose(0, 2, 1))

    def christoffel_many(self, X):
        """:meth:`christoffel` at each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = self.dim
        if self._flat:
            return np.zeros((len(X), n, n, n))
        return np.stack([self.christoffel(x) for x in X])

    def check_signature(self, x, tol=1e-9):
        rank, pos, neg = rank_signature(self.form_at(x), tol)
        return rank == self.dim and (self.signature is None or (pos, neg) == self.signature)


def connection_term(gamma, v, w):
    """``Gamma^k_ij v^i w^j``."""
    return np.einsum("kij,i,j->k", gamma, v, w)


class VectorField:
    """Ambient vector field with expression components in the chart coordinates."""

    def __init__(self, components, coords=None):
        comps = list(components)
        if coords is not None:
            comps = [_as_field(c, tuple(coords)) for c in comps]
        self.components = tuple(comps)
        self._map = ExprMap(self.components)

    @classmethod
    def from_strings(cls, sources, coords):
        return cls([parse(s, tuple(coords)) for s in sources])

    @property
    def coords(self):
        return self._map.variables

    def __call__(self, x):
        return self._map(np.asarray(x, dtype=float))

    def jacobian(self, x):
        """``DY[k, i] = d Y^k / d x_i`` (second-order central differences)."""
        return self._map.jacobian(np.asarray(x, dtype=float), order=2)


def covariant_derivative(m, X, Y, point):
    """``(D_X Y)^k = X^i d_i Y^k + Gamma^k_ij X^i Y^j`` at ``point``."""
    x = np.asarray(point, dtype=float)
    xv = X(x)
    yv = Y(x)
    return Y.jacobian(x) @ xv + connection_term(m.christoffel(x), xv, yv)


def lie_bracket(X, Y, point):
    """``[X, Y]^k = X^i d_i Y^k - Y^i d_i X^k``."""
    x = np.asarray(point, dtype=float)
    return Y.jacobian(x) @ X(x) - X.jacobian(x) @ Y(x)
