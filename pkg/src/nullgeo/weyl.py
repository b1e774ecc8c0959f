"""Weyl connections on totally umbilical lightlike hypersurfaces.

Given ``B = lambda g``, a section ``zeta`` along the hypersurface with
``gbar(zeta, xi) = lambda`` defines the 1-form ``theta(X) = -2 gbar(zeta, X)``
and the connection::

    nabla_X Y = Dbar_X Y - 1/2 theta(Y) X - 1/2 theta(X) Y - g(X, Y) zeta

which is tangent, torsion-free and satisfies ``nabla g = theta (x) g``.  The
default section is ``zeta = lambda N``; a tangent part may be added, which
changes the connection but not these properties.

``g(X, Y)`` in the last term is the induced (degenerate) metric.  On tangent
vectors it agrees with ``gbar``, which is why either may be used there.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DegenerateKernelError, NotLightlikeError, NotUmbilicalError
from .fields import CoordinateField, bracket, random_triples
from .hypersurface import _pivot_complement, dbar_along, normalizing_pair
from .induced import UMBILIC_TOL, metric_along, umbilic_fit, xi_field
from .numdiff import derivatives_many, directional, gradient


class WeylData:
    """The section ``zeta``, the form ``theta`` and the connection they define.

    ``tangent_part`` is an optional gauge: a callable ``u -> parameter
    components`` added to ``lambda N``.
    """

    def __init__(self, h, tangent_part=None, tol=UMBILIC_TOL):
        self.h = h
        self.tangent_part = tangent_part
        self.tol = tol
        self._cache = lru_cache(maxsize=8192)(self._compute)

    def _compute(self, key):
        u = np.array(key)
        frame = normalizing_pair(self.h, u)
        lam, res = umbilic_fit(frame)
        if res > self.tol:
            raise NotUmbilicalError(
                f"umbilicity residual {res:.3e} exceeds {self.tol:.1e} at {key}; no Weyl section"
            )
        d = frame.data
        zeta = lam * frame.N
        if self.tangent_part is not None:
            zeta = zeta + d.J @ np.asarray(self.tangent_part(u), dtype=float)
        theta = -2.0 * (d.J.T @ d.G @ zeta)
        return frame, lam, res, zeta, theta

    def at(self, u):
        return self._cache(tuple(float(v) for v in np.asarray(u, dtype=float)))

    def frame(self, u):
        return self.at(u)[0]

    def lam(self, u):
        return self.at(u)[1]

    def zeta(self, u):
        return self.at(u)[3]

    def theta(self, u):
        """``theta`` on parameter components."""
        return self.at(u)[4]

    def connection(self, X, Y, u):
        """Ambient components of ``nabla^theta_X Y`` for tangent fields ``X``, ``Y``."""
        u = np.asarray(u, dtype=float)
        d = self.h.data(u)
        a, b = X(u), Y(u)
        th = self.theta(u)
        v = dbar_along(self.h, u, a, b, directional(Y, u, a))
        gxy = float(a @ d.g @ b)
        return v - 0.5 * float(th @ b) * (d.J @ a) - 0.5 * float(th @ a) * (d.J @ b) - gxy * self.zeta(u)

    def christoffel(self, u):
        """``Gamma[k, i, j]`` of the connection in the parameter coordinates."""
        u = np.asarray(u, dtype=float)
        d = self.h.data(u)
        th = self.theta(u)
        D = d.dbar_coordinate()
        V = (D
             - 0.5 * np.einsum("j,ki->kij", th, d.J)
             - 0.5 * np.einsum("i,kj->kij", th, d.J)
             - np.einsum("ij,k->kij", d.g, self.zeta(u)))
        k = u.size
        sol, *_ = np.linalg.lstsq(d.J, V.reshape(V.shape[0], k * k), rcond=None)
        G = sol.reshape(k, k, k)
        return 0.5 * (G + G.transpose(0, 2, 1))

    def christoffel_many(self, points):
        """:meth:`christoffel` at each row of ``points`` in one batch.

        Batched for the default screen and no gauge; other settings fall back
        to the pointwise path.
        """
        U = np.atleast_2d(np.asarray(points, dtype=float))
        if self.h.screen_policy != "euclidean_complement" or self.tangent_part is not None:
            return np.stack([self.christoffel(u) for u in U])
        return _christoffel_batch(self.h, U, self.tol)


def _christoffel_batch(h, U, tol):
    K, k = U.shape
    X, J, H = derivatives_many(h.immersion, U)
    G = h.ambient.metric_many(X)
    gam = h.ambient.christoffel_many(X)
    g = np.einsum("kai,kab,kbj->kij", J, G, J)
    w, V = np.linalg.eigh(g)
    order = np.argsort(np.abs(w), axis=1)
    wmax = np.max(np.abs(w), axis=1)
    small = np.sum(np.abs(w) <= h.tol * wmax[:, None], axis=1)
    if np.any(small != 1):
        bad = int(np.flatnonzero(small != 1)[0])
        raise NotLightlikeError(k - int(small[bad]), h.n, tuple(U[bad]))
    xi = V[np.arange(K), :, order[:, 0]]
    piv = np.argmax(np.abs(xi), axis=1)
    xi = xi / xi[np.arange(K), piv][:, None]
    sp = np.empty((K, k - 1, k))
    nrm = np.sum(xi * xi, axis=1)
    for p in range(K):
        rows = [i for i in range(k) if i != piv[p]]
        sp[p] = np.eye(k)[rows] - (xi[p, rows] / nrm[p])[:, None] * xi[p][None, :]
    xa = np.einsum("kai,ki->ka", J, xi)
    W = np.einsum("kai,kji->kja", J, sp)
    A = np.concatenate([np.einsum("kja,kab->kjb", W, G), np.einsum("ka,kab->kb", xa, G)[:, None, :]], axis=1)
    b = np.zeros(k)
    b[-1] = 1.0
    V0 = np.einsum("kmj,j->km", np.linalg.pinv(A), b)
    N = V0 - 0.5 * np.einsum("ka,kab,kb->k", V0, G, V0)[:, None] * xa
    D = H + np.einsum("kcab,kai,kbj->kcij", gam, J, J)
    B = np.einsum("kcij,kc->kij", D, np.einsum("kab,kb->ka", G, xa))
    B = 0.5 * (B + B.transpose(0, 2, 1))
    bs = np.einsum("kai,kij,kbj->kab", sp, B, sp)
    gs = np.einsum("kai,kij,kbj->kab", sp, g, sp)
    gg = np.sum(gs * gs, axis=(1, 2))
    lam = np.sum(bs * gs, axis=(1, 2)) / gg
    res = np.linalg.norm((bs - lam[:, None, None] * gs).reshape(K, -1), axis=1) / np.sqrt(gg)
    if np.any(res > tol):
        bad = int(np.argmax(res))
        raise NotUmbilicalError(f"umbilicity residual {res[bad]:.3e} exceeds {tol:.1e} at {tuple(U[bad])}; no Weyl section")
    zeta = lam[:, None] * N
    theta = -2.0 * np.einsum("kai,kab,kb->ki", J, G, zeta)
    Vt = (D
          - 0.5 * np.einsum("kj,kci->kcij", theta, J)
          - 0.5 * np.einsum("ki,kcj->kcij", theta, J)
          - np.einsum("kij,kc->kcij", g, zeta))
    Gm = np.einsum("kic,kcab->kiab", np.linalg.pinv(J), Vt)
    return 0.5 * (Gm + Gm.transpose(0, 1, 3, 2))


def build_zeta(h, frame, u, tangent_part=None, tol=UMBILIC_TOL):
    """``zeta = lambda N`` (plus an optional tangent part) at ``u``."""
    lam, res = umbilic_fit(frame)
    if res > tol:
        raise NotUmbilicalError(f"umbilicity residual {res:.3e} exceeds {tol:.1e}")
    z = lam * frame.N
    if tangent_part is not None:
        z = z + frame.data.J @ np.asarray(tangent_part, dtype=float)
    return z


def weyl_connection(w, X, Y, u):
    """Parameter components of ``nabla^theta_X Y`` and ``|gbar(result, xi)|``."""
    v = w.connection(X, Y, u)
    frame = w.frame(u)
    return frame.tangent_components(v), abs(frame.inner(v, frame.xi))


@dataclass
class WeylVerification:
    conformality: dict
    torsion: dict
    tangency: dict
    tol: float
    seed: object = None
    triples: int = 0
    passed: bool = field(default=False)

    def max(self, which):
        return max(getattr(self, which).values()) if getattr(self, which) else 0.0


def conformality_residual(w, X, Y, Z, u, connection=None, step=None):
    """``(nabla_X g)(Y, Z) - theta(X) g(Y, Z)``; the derivative of ``g(Y, Z)`` is taken by finite differences."""
    conn = w.connection if connection is None else connection
    u = np.asarray(u, dtype=float)
    d = w.h.data(u)
    a = X(u)
    dg = float(directional(lambda p: np.array([metric_along(w.h, p, Y, Z)]), u, a, step, order=4)[0])
    ny = conn(X, Y, u)
    nz = conn(X, Z, u)
    y, z = d.J @ Y(u), d.J @ Z(u)
    lhs = dg - d.inner(ny, z) - d.inner(y, nz)
    return lhs - float(w.theta(u) @ a) * float(Y(u) @ d.g @ Z(u))


def torsion_residual(w, X, Y, u, connection=None):
    conn = w.connection if connection is None else connection
    d = w.h.data(u)
    t = conn(X, Y, u) - conn(Y, X, u) - d.J @ bracket(X, Y, u)
    return float(np.max(np.abs(t)))


def verify_weyl(w, sample_points, field_triples=None, tol=1e-5, seed=0, triples=5,
                connection=None, torsion_tol=1e-8, tangency_tol=1e-6, step=None):
    """Residuals of torsion, tangency and conformality over samples and field triples.

    Without explicit ``field_triples``, ``triples`` random quadratic fields are
    drawn per point from ``seed``.  ``step`` overrides the finite-difference
    step of the conformality check.
    """
    conn = w.connection if connection is None else connection
    conf, tors, tang = {}, {}, {}
    for name, u in sample_points.items():
        u = np.asarray(u, dtype=float)
        fts = field_triples if field_triples is not None else random_triples(
            (seed, hash_name(name)), u, triples)
        frame = w.frame(u)
        c = t = tg = 0.0
        for X, Y, Z in fts:
            c = max(c, abs(conformality_residual(w, X, Y, Z, u, conn, step)))
            t = max(t, torsion_residual(w, X, Y, u, conn))
            tg = max(tg, abs(frame.inner(conn(X, Y, u), frame.xi)))
        conf[name], tors[name], tang[name] = c, t, tg
    rep = WeylVerification(conf, tors, tang, tol, seed, len(fts) if sample_points else 0)
    rep.passed = (rep.max("conformality") <= tol and rep.max("torsion") <= torsion_tol
                  and rep.max("tangency") <= tangency_tol)
    return rep


def hash_name(name):
    """Stable small integer from a point name (Python's ``hash`` is salted)."""
    return sum((i + 1) * ord(ch) for i, ch in enumerate(str(name))) % 2**31


def screen_from_theta(w, u):
    """Basis of ``ker theta`` in parameter components (rows)."""
    th = w.theta(u)
    if np.max(np.abs(th)) <= 1e-12:
        raise DegenerateKernelError("theta vanishes; its kernel is the whole tangent space")
    return _pivot_complement(th, int(np.argmax(np.abs(th))))


CLOSEDNESS_STEP = 1e-3


def theta_closedness(w, u, step=None):
    """``max |d theta(d_i, d_j)|`` from finite differences of ``theta``.

    ``theta`` already carries second-derivative noise, so the outer step is
    wider than the nested default.
    """
    u = np.asarray(u, dtype=float)
    step = CLOSEDNESS_STEP * max(1.0, float(np.max(np.abs(u)))) if step is None else step
    D = gradient(lambda p: w.theta(p), u, step)  # D[j, i] = d_i theta_j
    return float(np.max(np.abs(D - D.T)))


def alpha_from_lie(w, X, Y, u):
    """``(L_xi g)(X, Y)`` and ``theta(xi) g(X, Y)``, which agree for a Weyl connection."""
    frame = w.frame(u)
    xi = xi_field(w.h, frame)
    d = frame.data
    dg = float(directional(lambda p: np.array([metric_along(w.h, p, X, Y)]), u, xi(u), order=4)[0])
    lie = dg - float(bracket(xi, X, u) @ d.g @ Y(u)) - float(X(u) @ d.g @ bracket(xi, Y, u))
    return lie, float(w.theta(u) @ frame.xi_params) * float(X(u) @ d.g @ Y(u))


def frame_coefficients(w, u, frame_fields):
    """``Gamma[c, a, b]`` with ``nabla_{e_a} e_b = Gamma^c_ab e_c`` for parameter frame fields."""
    u = np.asarray(u, dtype=float)
    E = np.stack([e(u) for e in frame_fields], axis=1)
    G = w.christoffel(u)
    k = u.size
    out = np.empty((k, k, k))
    for a in range(k):
        for b in range(k):
            ea = E[:, a]
            v = directional(frame_fields[b], u, ea) + np.einsum("kij,i,j->k", G, ea, E[:, b])
            out[:, a, b] = np.linalg.solve(E, v)
    return out


def adapted_frame_fields(w, u):
    """Parameter fields ``(xi, screen_1, ..., screen_n)`` pinned to the pivots at ``u``."""
    frame = w.frame(u)
    h = w.h

    def component(idx):
        def f(p):
            fr = normalizing_pair(h, p, like=frame)
            return fr.xi_params if idx == 0 else fr.screen_params[idx - 1]
        return f

    return [component(i) for i in range(h.n + 1)]


def match_gauge(w, u, frame_fields, target, mask=None):
    """Tangent gauge ``W`` bringing the frame coefficients closest to ``target``.

    The coefficients are affine in ``W``; this solves the least-squares problem
    over the entries selected by ``mask`` (default: all) and returns
    ``(W, residual_per_entry)``.
    """
    u = np.asarray(u, dtype=float)
    k = u.size
    target = np.asarray(target, dtype=float)
    mask = np.ones(target.shape, bool) if mask is None else np.asarray(mask, bool)

    def coeffs(W):
        gauge = WeylData(w.h, tangent_part=lambda p, W=W: W, tol=w.tol)
        return frame_coefficients(gauge, u, frame_fields)

    base = coeffs(np.zeros(k))
    cols = [(coeffs(np.eye(k)[m]) - base)[mask] for m in range(k)]
    A = np.stack(cols, axis=1)
    W, *_ = np.linalg.lstsq(A, (target - base)[mask], rcond=None)
    return W, coeffs(W) - target


def coordinate_fields(k):
    return [CoordinateField(i, k) for i in range(k)]
