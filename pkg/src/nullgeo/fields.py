"""Tangent fields on parameter space.

A tangent field is any callable ``u -> parameter components``.  The helpers
here build the ones the diagnostics need: coordinate fields and seeded
quadratic polynomial fields for randomised verification.
"""

import numpy as np

from .numdiff import directional


class CoordinateField:
    def __init__(self, index, dim):
        self.index = index
        self.dim = dim

    def __call__(self, u):
        e = np.zeros(self.dim)
        e[self.index] = 1.0
        return e

    def __repr__(self):
        return f"CoordinateField({self.index})"


class PolynomialField:
    """``a(u) = c + M (u - u0) + 1/2 Q[u - u0, u - u0]``."""

    def __init__(self, center, c, M, Q=None):
        self.center = np.asarray(center, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.M = np.asarray(M, dtype=float)
        k = self.c.size
        self.Q = np.zeros((k, k, k)) if Q is None else np.asarray(Q, dtype=float)

    def __call__(self, u):
        d = np.asarray(u, dtype=float) - self.center
        return self.c + self.M @ d + 0.5 * np.einsum("kij,i,j->k", self.Q, d, d)

    @classmethod
    def random(cls, rng, center, scale=1.0, curvature=0.3):
        k = np.asarray(center).size
        c = rng.normal(size=k)
        M = scale * rng.normal(size=(k, k))
        Q = curvature * scale * rng.normal(size=(k, k, k))
        Q = 0.5 * (Q + Q.transpose(0, 2, 1))
        return cls(center, c, M, Q)


def random_triples(seed, center, count):
    """``count`` deterministic triples of random polynomial fields around ``center``."""
    rng = np.random.default_rng(seed)
    return [tuple(PolynomialField.random(rng, center) for _ in range(3)) for _ in range(count)]


def bracket(X, Y, u, step=None):
    """Parameter-space Lie bracket ``[X, Y] = dY[X] - dX[Y]``."""
    return directional(Y, u, X(u), step) - directional(X, u, Y(u), step)
