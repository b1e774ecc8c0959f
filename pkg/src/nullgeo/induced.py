"""Gauss-Weingarten apparatus of a lightlike hypersurface and its diagnostics.

Everything is evaluated on parameter components at a point ``u``.  Quantities
that need derivatives of frame fields (``tau``, ``phi``, ``C`` and the shape
operators) differentiate frames built on a small stencil around ``u`` with
the pivots of the centre frame.

Sign conventions, checked numerically on the light cone:

* ``B(X, Y) = gbar(Dbar_X Y, xi)``; with the outward generator
  ``xi = d_r + d_z`` of the cone this gives ``lambda = -1/r``.
* ``phi(X) = gbar(nabla_X xi, N)`` so that ``nabla_X xi = -A*_xi X + phi(X) xi``
  holds as written; it satisfies ``phi = -tau``.
* ``L_xi g = -2 alpha(xi) g`` with ``alpha(xi) = lambda``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NotApplicableError
from .fields import CoordinateField, bracket
from .hypersurface import dbar_along, normalizing_pair, projections, radical_params
from .numdiff import directional, nested_step

UMBILIC_TOL = 1e-5
PROPER_TOL = 1e-6


def dbar(h, u, X, Y):
    """Ambient covariant derivative of tangent field ``Y`` along ``X``."""
    a = X(u)
    return dbar_along(h, u, a, Y(u), directional(Y, u, a))


def induced_connection(h, frame, X, Y, u):
    """``nabla_X Y = Q(Dbar_X Y)`` in parameter components, and the B-coefficient."""
    v = dbar(h, u, X, Y)
    pr = projections(frame, v)
    return frame.tangent_components(pr.tangent), pr.transversal


@dataclass(frozen=True)
class AdaptedFrameGeometry:
    frame: object
    B: np.ndarray  # on parameter components
    C: np.ndarray  # C(d_i, W_j), (n+1, n)
    tau: np.ndarray
    phi: np.ndarray
    A_N: np.ndarray  # column i: parameter components of A_N d_i
    A_star_xi: np.ndarray
    eta: np.ndarray
    lambda_umbilic: float
    umbilic_residual: float
    screen_policy: str = field(default="")

    def check(self):
        """Residuals of the pointwise identities among the forms."""
        g = self.frame.data.g
        xi = self.frame.xi_params
        sp = self.frame.screen_params
        return {
            "B_symmetry": float(np.max(np.abs(self.B - self.B.T))),
            "B_xi": float(np.max(np.abs(self.B @ xi))),
            "B_shape": float(np.max(np.abs(self.B - (g @ self.A_star_xi).T))),
            "A_star_xi_xi": float(np.max(np.abs(self.A_star_xi @ xi))),
            "eta_xi": abs(float(self.eta @ xi) - 1.0),
            "eta_screen": float(np.max(np.abs(sp @ self.eta))) if sp.size else 0.0,
            "phi_plus_tau": float(np.max(np.abs(self.phi + self.tau))),
        }


def second_fundamental_form(frame):
    """``B_ij = gbar(Dbar_{d_i} d_j, xi)`` on parameter components."""
    d = frame.data
    D = d.dbar_coordinate()
    B = np.einsum("kij,k->ij", D, d.G @ frame.xi)
    return 0.5 * (B + B.T)


def umbilic_fit(frame, B=None):
    """Least-squares ``lambda`` with ``B = lambda g`` on the screen block, and the relative residual."""
    B = second_fundamental_form(frame) if B is None else B
    sp = frame.screen_params
    g = frame.data.g
    bs = sp @ B @ sp.T
    gs = sp @ g @ sp.T
    gg = float(np.sum(gs * gs))
    lam = float(np.sum(bs * gs) / gg)
    res = float(np.linalg.norm(bs - lam * gs) / np.sqrt(gg))
    return lam, res


def _stencil_frames(h, u, frame):
    s = nested_step(u)
    k = u.size
    plus, minus = [], []
    for i in range(k):
        e = np.zeros(k)
        e[i] = s
        plus.append(normalizing_pair(h, u + e, like=frame))
        minus.append(normalizing_pair(h, u - e, like=frame))
    return s, plus, minus


def fundamental_forms(h, u, frame=None):
    u = np.asarray(u, dtype=float)
    frame = normalizing_pair(h, u) if frame is None else frame
    d = frame.data
    k = u.size
    n = k - 1
    B = second_fundamental_form(frame)
    lam, res = umbilic_fit(frame, B)
    s, plus, minus = _stencil_frames(h, u, frame)

    def deriv(get, i):
        return (get(plus[i]) - get(minus[i])) / (2.0 * s)

    xi = frame.xi
    N = frame.N
    W = frame.screen_basis
    tau = np.empty(k)
    phi = np.empty(k)
    A_N = np.empty((k, k))
    A_star = np.empty((k, k))
    C = np.empty((k, n))
    for i in range(k):
        Xi = d.J[:, i]
        dN = deriv(lambda f: f.N, i) + np.einsum("kab,a,b->k", d.gamma, Xi, N)
        tau[i] = d.inner(dN, xi)
        A_N[:, i] = -frame.tangent_components(dN - tau[i] * N)
        dxi = deriv(lambda f: f.xi, i) + np.einsum("kab,a,b->k", d.gamma, Xi, xi)
        nab_xi = projections(frame, dxi).tangent
        phi[i] = d.inner(nab_xi, N)
        A_star[:, i] = -frame.tangent_components(nab_xi - phi[i] * xi)
        for j in range(n):
            dW = deriv(lambda f: f.screen_basis[j], i) + np.einsum("kab,a,b->k", d.gamma, Xi, W[j])
            C[i, j] = d.inner(dW, N)
    eta = d.J.T @ d.G @ N
    return AdaptedFrameGeometry(frame, B, C, tau, phi, A_N, A_star, eta, lam, res, h.screen_policy)


def metric_along(h, u, Y, Z):
    return float(Y(u) @ h.metric_params(u) @ Z(u))


def nabla_g_residual(h, frame, X, Y, Z, u):
    """Both sides of ``(nabla_X g)(Y, Z) = B(X, Y) eta(Z) + B(X, Z) eta(Y)``."""
    u = np.asarray(u, dtype=float)
    d = frame.data
    a = X(u)
    dg = float(directional(lambda p: np.array([metric_along(h, p, Y, Z)]), u, a, order=4)[0])
    nab_y, _ = induced_connection(h, frame, X, Y, u)
    nab_z, _ = induced_connection(h, frame, X, Z, u)
    g = d.g
    lhs = dg - float(nab_y @ g @ Z(u)) - float(Y(u) @ g @ nab_z)
    B = second_fundamental_form(frame)
    eta = d.J.T @ d.G @ frame.N
    y, z = Y(u), Z(u)
    rhs = float(a @ B @ y) * float(eta @ z) + float(a @ B @ z) * float(eta @ y)
    return lhs, rhs


@dataclass
class GeodesicReport:
    verdict: str
    max_abs_B: dict
    tol: float


def diagnose_geodesic(h, sample_points, tol=1e-10):
    """Totally geodesic iff ``max |B_ij|`` stays within ``tol`` at every sample."""
    per = {}
    for name, u in sample_points.items():
        frame = normalizing_pair(h, np.asarray(u, float))
        per[name] = float(np.max(np.abs(second_fundamental_form(frame))))
    verdict = "totally_geodesic" if all(v <= tol for v in per.values()) else "not_geodesic"
    return GeodesicReport(verdict, per, tol)


@dataclass
class UmbilicReport:
    verdict: str
    lambdas: dict
    residuals: dict
    tol: float
    proper_tol: float


def diagnose_umbilic(h, sample_points, tol=UMBILIC_TOL, proper_tol=PROPER_TOL):
    lambdas, residuals = {}, {}
    for name, u in sample_points.items():
        frame = normalizing_pair(h, np.asarray(u, float))
        lambdas[name], residuals[name] = umbilic_fit(frame)
    return UmbilicReport(umbilic_verdict(lambdas, residuals, tol, proper_tol),
                         lambdas, residuals, tol, proper_tol)


def umbilic_verdict(lambdas, residuals, tol=UMBILIC_TOL, proper_tol=PROPER_TOL):
    """Verdict over all samples from per-point factors and fit residuals."""
    if any(r > tol for r in residuals.values()):
        return "not_umbilical"
    if all(abs(l) > proper_tol for l in lambdas.values()):
        return "proper_totally_umbilical"
    return "totally_umbilical"


def xi_field(h, frame):
    """Radical direction as a parameter field, normalised on the pivot of ``frame``."""
    return lambda p: radical_params(h, p, pivot=frame.xi_pivot)[0]


def lie_derivative_check(h, frame, X, Y, u):
    """``(L_xi g)(X, Y)`` by finite differences, and ``-2 B(X, Y)``."""
    u = np.asarray(u, dtype=float)
    xi = xi_field(h, frame)
    g = frame.data.g
    dg = float(directional(lambda p: np.array([metric_along(h, p, X, Y)]), u, xi(u), order=4)[0])
    lie = dg - float(bracket(xi, X, u) @ g @ Y(u)) - float(X(u) @ g @ bracket(xi, Y, u))
    B = second_fundamental_form(frame)
    return lie, -2.0 * float(X(u) @ B @ Y(u))


@dataclass
class NeverWeylWitness:
    point: str
    X: int
    Z: int
    B_value: float
    theta_fit: np.ndarray
    fit_residual: float


def induced_theta_fit(h, frame, u):
    """Best ``theta`` with ``nabla g ~ theta (x) g`` for the induced connection, and the max residual."""
    u = np.asarray(u, dtype=float)
    k = u.size
    coords = [CoordinateField(i, k) for i in range(k)]
    g = frame.data.g
    dgs = np.stack([
        directional(lambda p: h.metric_params(p).ravel(), u, coords[i](u), order=4).reshape(k, k)
        for i in range(k)
    ])
    nab = np.empty((k, k, k))  # nab[i, j] = nabla_{d_i} d_j
    for i in range(k):
        for j in range(k):
            nab[i, j], _ = induced_connection(h, frame, coords[i], coords[j], u)
    L = dgs - np.einsum("ijm,mk->ijk", nab, g) - np.einsum("ikm,jm->ijk", nab, g)
    gg = float(np.sum(g * g))
    theta = np.array([float(np.sum(L[i] * g)) / gg for i in range(k)])
    resid = float(np.max(np.abs(L - theta[:, None, None] * g[None])))
    return theta, resid


def never_weyl_witness(h, sample_points, tol=1e-8):
    """A pair of coordinate fields with ``B(X, Z) != 0`` at the sample where it is largest.

    With ``Y = xi`` the conformality condition for the induced connection
    reduces to ``B(X, Z) = 0``, so a nonzero value certifies that no 1-form
    makes the induced connection conformal.
    """
    best = None
    for name, u in sample_points.items():
        frame = normalizing_pair(h, np.asarray(u, float))
        B = second_fundamental_form(frame)
        i, j = np.unravel_index(int(np.argmax(np.abs(B))), B.shape)
        if best is None or abs(B[i, j]) > abs(best[3]):
            best = (name, int(i), int(j), float(B[i, j]), frame, u)
    if best is None or abs(best[3]) <= tol:
        raise NotApplicableError("second fundamental form vanishes: induced connection is Weyl with theta = 0")
    name, i, j, value, frame, u = best
    theta, resid = induced_theta_fit(h, frame, np.asarray(u, float))
    return NeverWeylWitness(name, i, j, value, theta, resid)
