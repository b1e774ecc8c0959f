"""Finite-difference stencils for vector-valued maps.

``ExprMap`` bundles several :class:`~nullgeo.expr.ExprField` components over
the same variables and evaluates whole stencils in one vectorised call.
``directional`` differentiates arbitrary callables, which is how fields that
are themselves built from finite differences (frames, screens) get
differentiated; it uses the larger nested step to keep the noise of the
inner stencil from being amplified.
"""

import numpy as np

from .expr import EPS, default_step

H4 = EPS ** 0.2
H6 = EPS ** (1.0 / 6.0)


def pow2_step(x, base):
    """Power-of-two step near ``base``, widened only once ``|x|`` exceeds ``1/base``.

    Stencil points ``x + o*h`` are then exact, and the step does not grow
    with the coordinate value itself (angles near 2 pi keep the same step).
    """
    h = base * max(1.0, abs(float(x)) * base)
    return 2.0 ** round(np.log2(h))


def _pow2_steps(U, base):
    return np.vectorize(lambda x: pow2_step(x, base), otypes=[float])(U)
_OFFS = (2, 1, -1, -2)
_W1 = (-1.0, 8.0, -8.0, 1.0)


class ExprMap:
    """A map R^k -> R^m given by m expression fields in the same k variables."""

    def __init__(self, components):
        self.components = tuple(components)
        if not self.components:
            raise ValueError("empty map")
        self.variables = self.components[0].variables
        for c in self.components:
            if c.variables != self.variables:
                raise ValueError("components must share their variable list")

    def __len__(self):
        return len(self.components)

    @property
    def nvars(self):
        return len(self.variables)

    def __call__(self, u):
        return self.many(np.asarray(u, dtype=float)[None, :])[0]

    def many(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.stack([c.evaluate_many(pts) for c in self.components], axis=1)

    def jacobian(self, u, order=4):
        """``J[a, i] = d F_a / d u_i``; fourth-order stencil by default."""
        u = np.asarray(u, dtype=float)
        k = u.size
        pts = []
        steps = []
        for i in range(k):
            if order == 4:
                h = pow2_step(u[i], H4)
                offs = (2.0, 1.0, -1.0, -2.0)
            else:
                h = default_step(u[i])
                offs = (1.0, -1.0)
            for o in offs:
                p = u.copy()
                p[i] = u[i] + o * h
                pts.append(p)
            steps.append(h)
        vals = self.many(np.array(pts))
        J = np.empty((len(self), k))
        per = 4 if order == 4 else 2
        for i in range(k):
            v = vals[per * i: per * (i + 1)]
            if order == 4:
                J[:, i] = (-v[0] + 8.0 * v[1] - 8.0 * v[2] + v[3]) / (12.0 * steps[i])
            else:
                x = u[i]
                J[:, i] = (v[0] - v[1]) / ((x + steps[i]) - (x - steps[i]))
        return J

    def hessian(self, u):
        """``H[a, i, j] = d^2 F_a / du_i du_j`` with fourth-order stencils.

        Diagonal entries use the five-point formula, mixed ones the tensor
        product of two fourth-order first-derivative stencils.
        """
        u = np.asarray(u, dtype=float)
        k = u.size
        h = np.array([pow2_step(x, H6) for x in u])
        pts = [u]
        index = {}
        for i in range(k):
            for o in (2, 1, -1, -2):
                p = u.copy()
                p[i] = u[i] + o * h[i]
                index[(i, i, o)] = len(pts)
                pts.append(p)
            for j in range(i + 1, k):
                for oi in _OFFS:
                    for oj in _OFFS:
                        p = u.copy()
                        p[i] = u[i] + oi * h[i]
                        p[j] = u[j] + oj * h[j]
                        index[(i, j, oi, oj)] = len(pts)
                        pts.append(p)
        vals = self.many(np.array(pts))
        f0 = vals[0]
        H = np.empty((len(self), k, k))
        for i in range(k):
            v = [vals[index[(i, i, o)]] for o in (2, 1, -1, -2)]
            H[:, i, i] = (-v[0] + 16.0 * v[1] - 30.0 * f0 + 16.0 * v[2] - v[3]) / (12.0 * h[i] ** 2)
            for j in range(i + 1, k):
                acc = 0.0
                for oi, wi in zip(_OFFS, _W1):
                    for oj, wj in zip(_OFFS, _W1):
                        acc = acc + wi * wj * vals[index[(i, j, oi, oj)]]
                H[:, i, j] = H[:, j, i] = acc / (144.0 * h[i] * h[j])
        return H


def nested_step(u):
    return EPS ** 0.25 * max(1.0, float(np.max(np.abs(u))) if np.size(u) else 1.0)


def directional(func, u, direction, step=None, order=2):
    """Central difference of ``func`` at ``u`` along ``direction``.

    The derivative is linear in ``direction``; the stencil walks along the
    unit direction and rescales, so ``step`` is a distance in parameter space.
    ``order=4`` uses the five-point stencil with a wider default step, for
    smooth functions that are themselves accurate to near rounding.
    """
    u = np.asarray(u, dtype=float)
    d = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        return np.zeros_like(np.asarray(func(u), dtype=float))
    e = d / norm
    if order == 4:
        s = pow2_step(float(np.max(np.abs(u))), H4) if step is None else float(step)
        f = [np.asarray(func(u + o * s * e), dtype=float) for o in _OFFS]
        return norm * (-f[0] + 8.0 * f[1] - 8.0 * f[2] + f[3]) / (12.0 * s)
    s = nested_step(u) if step is None else float(step)
    fp = np.asarray(func(u + s * e), dtype=float)
    fm = np.asarray(func(u - s * e), dtype=float)
    return norm * (fp - fm) / (2.0 * s)


def gradient(func, u, step=None):
    """Columns are the partial derivatives of a (vector-valued) callable."""
    u = np.asarray(u, dtype=float)
    cols = []
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = 1.0
        cols.append(directional(func, u, e, step))
    return np.stack(cols, axis=-1)


def derivatives_many(fmap, points):
    """Values, fourth-order Jacobians and Hessians of ``fmap`` at each row of ``points``.

    Same stencils and steps as :meth:`ExprMap.jacobian` and
    :meth:`ExprMap.hessian`, evaluated in one batch.  Shapes: ``(K, m)``,
    ``(K, m, k)`` and ``(K, m, k, k)``.
    """
    U = np.atleast_2d(np.asarray(points, dtype=float))
    K, k = U.shape
    h4 = _pow2_steps(U, H4)
    h6 = _pow2_steps(U, H6)
    offsets = []  # list of (K, k) displacement arrays
    offsets.append(np.zeros_like(U))
    for i in range(k):
        for o in _OFFS:
            d = np.zeros_like(U)
            d[:, i] = o * h4[:, i]
            offsets.append(d)
    n_j = len(offsets)
    for i in range(k):
        for o in _OFFS:
            d = np.zeros_like(U)
            d[:, i] = o * h6[:, i]
            offsets.append(d)
    mixed = {}
    for i in range(k):
        for j in range(i + 1, k):
            for oi in _OFFS:
                for oj in _OFFS:
                    d = np.zeros_like(U)
                    d[:, i] = oi * h6[:, i]
                    d[:, j] = oj * h6[:, j]
                    mixed[(i, j, oi, oj)] = len(offsets)
                    offsets.append(d)
    pts = (U[:, None, :] + np.stack(offsets, axis=1)).reshape(-1, k)
    vals = fmap.many(pts).reshape(K, len(offsets), -1)
    f0 = vals[:, 0]
    m = f0.shape[1]
    J = np.empty((K, m, k))
    H = np.empty((K, m, k, k))
    for i in range(k):
        v = vals[:, 1 + 4 * i: 5 + 4 * i]
        J[:, :, i] = (-v[:, 0] + 8.0 * v[:, 1] - 8.0 * v[:, 2] + v[:, 3]) / (12.0 * h4[:, i, None])
        v = vals[:, n_j + 4 * i: n_j + 4 + 4 * i]
        H[:, :, i, i] = (-v[:, 0] + 16.0 * v[:, 1] - 30.0 * f0 + 16.0 * v[:, 2] - v[:, 3]) / (12.0 * h6[:, i, None] ** 2)
        for j in range(i + 1, k):
            acc = 0.0
            for oi, wi in zip(_OFFS, _W1):
                for oj, wj in zip(_OFFS, _W1):
                    acc = acc + wi * wj * vals[:, mixed[(i, j, oi, oj)]]
            H[:, :, i, j] = H[:, :, j, i] = acc / (144.0 * h6[:, i, None] * h6[:, j, None])
    return f0, J, H
