"""Immersed hypersurfaces, their radical direction and normalizing pairs.

Points of the hypersurface are addressed by parameter vectors ``u``; tangent
vectors are carried either as parameter components ``a`` (pushed forward by
the immersion Jacobian ``J``) or directly as ambient components ``J @ a``.

The radical direction is normalised so that its largest parameter component
(the *pivot*) is +1.  Frames evaluated on a finite-difference stencil reuse
the pivots of the centre point so that derived fields stay smooth.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .ambient import connection_term
from .errors import (
    DomainError,
    ImmersionDegenerateError,
    NotLightlikeError,
    NumericalDegeneracyError,
    ScreenDegenerateError,
)
from .expr import ExprField, parse
from .errors import NoSolutionError
from .linalg import DEFAULT_TOL, SymBilinearForm, null_space, pseudo_solve, rank_signature
from .numdiff import ExprMap

SCREEN_POLICIES = ("euclidean_complement", "user_frame", "ker_theta")
_OPS = {
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
}


@dataclass(frozen=True)
class PointData:
    """Everything at ``u`` that needs no stencil of frames."""

    u: np.ndarray
    x: np.ndarray  # ambient position
    J: np.ndarray  # (n+2, n+1)
    H: np.ndarray  # (n+2, n+1, n+1)
    G: np.ndarray  # ambient metric at x
    gamma: np.ndarray  # ambient Christoffel symbols at x

    @property
    def g(self):
        return self.J.T @ self.G @ self.J

    def inner(self, v, w):
        return float(np.asarray(v) @ self.G @ np.asarray(w))

    def dbar_coordinate(self):
        """Ambient ``D_{d_i} d_j f`` for the coordinate fields, shape (n+2, n+1, n+1)."""
        return self.H + np.einsum("kab,ai,bj->kij", self.gamma, self.J, self.J)


class HypersurfaceChart:
    """A hypersurface ``f: params -> ambient coords`` with a screen policy.

    ``screen_frame`` (policy ``user_frame``) is a list of ``n`` lists of
    parameter-component expressions.  ``theta`` (policy ``ker_theta``) is a
    callable returning a covector on parameter components.
    """

    def __init__(self, ambient, params, immersion, screen_policy="euclidean_complement",
                 screen_frame=None, theta=None, tol=DEFAULT_TOL, domain=()):
        self.ambient = ambient
        self.domain = tuple(domain)
        self.params = tuple(params)
        comps = [c if isinstance(c, ExprField) else parse(str(c), self.params) for c in immersion]
        if len(comps) != ambient.dim:
            raise ValueError(f"immersion needs {ambient.dim} components, got {len(comps)}")
        if len(self.params) != ambient.dim - 1:
            raise ValueError("a hypersurface needs dim(ambient) - 1 parameters")
        self.immersion = ExprMap(comps)
        if screen_policy not in SCREEN_POLICIES:
            raise ValueError(f"unknown screen policy {screen_policy!r}")
        self.screen_policy = screen_policy
        self.screen_frame = None
        if screen_frame is not None:
            self.screen_frame = [
                ExprMap([c if isinstance(c, ExprField) else parse(str(c), self.params) for c in vec])
                for vec in screen_frame
            ]
        if screen_policy == "user_frame" and (self.screen_frame is None or len(self.screen_frame) != self.n):
            raise ValueError(f"user_frame screen needs {self.n} vectors")
        if screen_policy == "ker_theta" and theta is None:
            raise ValueError("ker_theta screen needs a theta covector field")
        self.theta = theta
        self.tol = tol
        self._data = lru_cache(maxsize=8192)(self._point_data)

    @property
    def n(self):
        return len(self.params) - 1

    def with_screen(self, policy, screen_frame=None, theta=None):
        h = HypersurfaceChart.__new__(HypersurfaceChart)
        h.__dict__.update(self.__dict__)
        h.screen_policy = policy
        if screen_frame is not None:
            h.screen_frame = [
                ExprMap([c if isinstance(c, ExprField) else parse(str(c), self.params) for c in vec])
                for vec in screen_frame
            ]
        h.theta = theta if theta is not None else self.theta
        if policy == "user_frame" and h.screen_frame is None:
            raise ValueError("user_frame screen needs vectors")
        if policy == "ker_theta" and h.theta is None:
            raise ValueError("ker_theta screen needs theta")
        return h

    def check_domain(self, u):
        """Raise :class:`DomainError` if ``u`` violates a ``(index, op, bound)`` constraint."""
        for i, op, bound in self.domain:
            if not _OPS[op](float(u[i]), bound):
                raise DomainError(f"{self.params[i]} {op} {bound!r} violated", u)

    def _point_data(self, key):
        u = np.array(key, dtype=float)
        self.check_domain(u)
        x = self.immersion(u)
        J = self.immersion.jacobian(u, order=4)
        if np.linalg.matrix_rank(J, tol=1e-10 * max(1.0, np.abs(J).max())) < J.shape[1]:
            raise ImmersionDegenerateError(f"immersion Jacobian is rank deficient at {key}")
        H = self.immersion.hessian(u)
        return PointData(u, x, J, H, self.ambient.metric_at(x), self.ambient.christoffel(x))

    def data(self, u):
        return self._data(tuple(float(v) for v in np.asarray(u, dtype=float)))

    def position(self, u):
        return self.data(u).x

    def jacobian(self, u):
        return self.data(u).J

    def metric_params(self, u):
        """Induced metric on parameter components."""
        return self.data(u).g


def induced_metric(h, u):
    """``g_ij = gbar(d_i f, d_j f)`` as a form on parameter components."""
    return SymBilinearForm(h.data(u).g)


def radical_params(h, u, tol=None, pivot=None):
    """Kernel of the induced metric in parameter components, with its pivot."""
    tol = h.tol if tol is None else tol
    form = induced_metric(h, u)
    rank, _, _ = rank_signature(form, tol)
    if rank != h.n:
        raise NotLightlikeError(rank, h.n, tuple(np.asarray(u, float)))
    (v,) = null_space(form, tol)
    if pivot is None:
        pivot = int(np.argmax(np.abs(v)))
    if abs(v[pivot]) < 1e-8 * np.max(np.abs(v)):
        raise NumericalDegeneracyError("radical direction lost its pivot component")
    return v / v[pivot], pivot


def radical_direction(h, u, tol=None):
    """Ambient radical vector ``xi`` (largest parameter component +1)."""
    xi, _ = radical_params(h, u, tol)
    return h.data(u).J @ xi


def _pivot_complement(vec, pivot):
    """Rows ``e_i - (vec_i / vec_p) e_p`` for ``i != p``: a smooth basis of ``vec``'s kernel."""
    k = vec.size
    rows = []
    for i in range(k):
        if i == pivot:
            continue
        w = np.zeros(k)
        w[i] = 1.0
        w[pivot] = -vec[i] / vec[pivot]
        rows.append(w)
    return np.array(rows).reshape(len(rows), k)


def screen_params(h, u, xi, xi_pivot, screen_pivot=None):
    """Screen basis in parameter components (rows) and the pivot used."""
    if h.screen_policy == "euclidean_complement":
        k = xi.size
        rows = []
        for i in range(k):
            if i == xi_pivot:
                continue
            e = np.zeros(k)
            e[i] = 1.0
            rows.append(e - (xi[i] / (xi @ xi)) * xi)
        return np.array(rows).reshape(len(rows), k), None
    if h.screen_policy == "user_frame":
        return np.array([vec(np.asarray(u, float)) for vec in h.screen_frame]), None
    theta = np.asarray(h.theta(np.asarray(u, float)), dtype=float)
    if screen_pivot is None:
        screen_pivot = int(np.argmax(np.abs(theta)))
    if abs(theta[screen_pivot]) <= 1e-12 * max(1.0, np.max(np.abs(theta))):
        raise ScreenDegenerateError("theta vanishes; its kernel is not a screen")
    return _pivot_complement(theta, screen_pivot), screen_pivot


class Projection(NamedTuple):
    tangent: np.ndarray  # Q(v), ambient components
    transversal: float  # coefficient of N
    screen: np.ndarray  # P(v), ambient components
    radical: float  # coefficient of xi


@dataclass(frozen=True)
class PointFrame:
    data: PointData
    xi_params: np.ndarray
    screen_params: np.ndarray  # (n, n+1)
    N: np.ndarray
    xi_pivot: int
    screen_pivot: object = None

    @property
    def point(self):
        return self.data.u

    @property
    def tangent_basis(self):
        return self.data.J.T

    @property
    def xi(self):
        return self.data.J @ self.xi_params

    @property
    def screen_basis(self):
        return (self.data.J @ self.screen_params.T).T

    def inner(self, v, w):
        return self.data.inner(v, w)

    def eta(self, v):
        return self.data.inner(self.N, v)

    def tangent_components(self, v):
        """Parameter components of a tangent ambient vector (least squares)."""
        a, *_ = np.linalg.lstsq(self.data.J, np.asarray(v, dtype=float), rcond=None)
        return a

    def projections(self, v):
        return projections(self, v)


def normalizing_pair(h, u, screen_basis=None, like=None):
    """Frame with radical ``xi``, a screen and the transversal null ``N``.

    ``screen_basis`` (parameter components, rows) overrides the chart policy.
    ``like`` is a frame whose pivots are reused.
    """
    d = h.data(u)
    xi_pivot = None if like is None else like.xi_pivot
    xi, xi_pivot = radical_params(h, u, pivot=xi_pivot)
    if screen_basis is None:
        sp, spiv = screen_params(h, u, xi, xi_pivot, None if like is None else like.screen_pivot)
    else:
        sp, spiv = np.atleast_2d(np.asarray(screen_basis, dtype=float)), None
    if sp.shape != (h.n, h.n + 1):
        raise ScreenDegenerateError(f"screen needs {h.n} vectors of length {h.n + 1}")
    g = d.g
    gs = sp @ g @ sp.T
    rank, _, _ = rank_signature(SymBilinearForm(gs), h.tol)
    if rank != h.n:
        raise ScreenDegenerateError(f"screen metric has rank {rank}, expected {h.n}")
    xi_amb = d.J @ xi
    W = (d.J @ sp.T).T
    A = np.vstack([W @ d.G, (d.G @ xi_amb)[None, :]])
    b = np.zeros(h.n + 1)
    b[-1] = 1.0
    try:
        V0, _ = pseudo_solve(A, b)
    except NoSolutionError:
        raise NumericalDegeneracyError("no transversal vector pairs with xi") from None
    N = V0 - 0.5 * d.inner(V0, V0) * xi_amb
    return PointFrame(d, xi, sp, N, xi_pivot, spiv)


def transversal_from(frame, V):
    """``N`` rebuilt from an arbitrary transversal candidate ``V``.

    ``V`` is first made gbar-orthogonal to the screen; the result is the
    unique null vector with ``gbar(N, xi) = 1``.
    """
    d = frame.data
    W = frame.screen_basis
    gram = W @ d.G @ W.T
    V = np.asarray(V, dtype=float)
    V = V - W.T @ np.linalg.solve(gram, W @ d.G @ V)
    xi = frame.xi
    c = d.inner(V, xi)
    if abs(c) < 1e-12 * max(1.0, np.linalg.norm(V)):
        raise NumericalDegeneracyError("candidate does not pair with xi")
    return (V - (d.inner(V, V) / (2.0 * c)) * xi) / c


def projections(frame, v):
    """Split ``v = Q(v) + c N`` and ``Q(v) = P(v) + d xi``."""
    v = np.asarray(v, dtype=float)
    c = frame.inner(v, frame.xi)
    q = v - c * frame.N
    dcoef = frame.inner(q, frame.N)
    p = q - dcoef * frame.xi
    return Projection(q, c, p, dcoef)


def frame_field(h, like):
    """Callable ``u -> PointFrame`` reusing the pivots of ``like``."""
    return lambda u: normalizing_pair(h, u, like=like)


def check_radical(frame, tol=1e-8):
    """Largest ``|gbar(xi, d_i f)|`` over the tangent basis."""
    d = frame.data
    return float(np.max(np.abs(d.J.T @ d.G @ frame.xi)))


def dbar_along(h, u, a, b, db):
    """Ambient ``D_X Y`` for tangent fields with parameter components ``a``, ``b``.

    ``db`` is the derivative of ``b`` along ``a`` in parameter components.
    """
    d = h.data(u)
    return d.J @ db + np.einsum("kij,i,j->k", d.H, a, b) + connection_term(d.gamma, d.J @ a, d.J @ b)
