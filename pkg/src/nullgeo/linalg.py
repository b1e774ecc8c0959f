"""Small dense linear algebra for forms sized by the manifold dimension."""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import NoSolutionError, NumericalDegeneracyError

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class SymBilinearForm:
    """Symmetric bilinear form given by its matrix in some frame.

    The matrix is symmetrised on construction.
    """

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("form must be a square matrix")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self):
        return self.entries.shape[0]

    def __call__(self, v, w):
        return float(np.asarray(v) @ self.entries @ np.asarray(w))

    @cached_property
    def eigh(self):
        return np.linalg.eigh(self.entries)

    def norm(self):
        w = self.eigh[0]
        return float(np.max(np.abs(w))) if w.size else 0.0

    def restrict(self, basis):
        """Form restricted to the span of the rows of ``basis``."""
        b = np.atleast_2d(np.asarray(basis, dtype=float))
        return SymBilinearForm(b @ self.entries @ b.T)


def _zero_mask(w, tol):
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    return np.abs(w) <= tol * scale


def rank_signature(form, tol=DEFAULT_TOL):
    """``(rank, positives, negatives)``; eigenvalues within ``tol * max|ev|`` count as zero."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    w = form.eigh[0]
    zero = _zero_mask(w, tol)
    pos = int(np.sum((w > 0) & ~zero))
    neg = int(np.sum((w < 0) & ~zero))
    return pos + neg, pos, neg


def null_space(form, tol=DEFAULT_TOL):
    """Euclidean-orthonormal kernel basis, one vector per row."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    w, v = form.eigh
    zero = _zero_mask(w, tol)
    return v[:, zero].T.copy()


def kernel(matrix, tol=DEFAULT_TOL):
    """Right kernel of a (possibly rectangular) matrix, rows orthonormal."""
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    _, s, vt = np.linalg.svd(a)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    rank = int(np.sum(s > tol * scale)) if s.size and s[0] > 0 else 0
    return vt[rank:].copy()


def solve(A, b):
    """Exact solve for a square nonsingular system, least squares otherwise."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.shape[0] == A.shape[1]:
        try:
            return np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            pass
    return pseudo_solve(A, b)[0]


def pseudo_solve(A, b, tol=DEFAULT_TOL):
    """Minimal-norm least-squares solution and its residual norm.

    Raises :class:`NoSolutionError` if the residual exceeds ``tol`` relative to
    ``|A| |x| + |b|``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    x, *_ = np.linalg.lstsq(A, b, rcond=tol)
    residual = float(np.linalg.norm(A @ x - b))
    scale = float(np.linalg.norm(A, 2) * np.linalg.norm(x) + np.linalg.norm(b))
    if residual > tol * scale:
        raise NoSolutionError(residual)
    return x, residual


def gram_schmidt(form, vectors, tol=DEFAULT_TOL):
    """Orthonormalise ``vectors`` against an indefinite form.

    Each output vector ``e`` has ``form(e, e) = +/-1``; a null vector met on
    the way raises :class:`NumericalDegeneracyError`.
    """
    out = []
    signs = []
    scale = max(form.norm(), 1e-300)
    for v in np.atleast_2d(np.asarray(vectors, dtype=float)):
        w = v.copy()
        for e, s in zip(out, signs):
            w = w - s * form(w, e) * e
        q = form(w, w)
        if abs(q) <= tol * scale * float(w @ w):
            raise NumericalDegeneracyError("null vector encountered in Gram-Schmidt")
        w = w / np.sqrt(abs(q))
        out.append(w)
        signs.append(1.0 if q > 0 else -1.0)
    return np.array(out), np.array(signs)
