"""Finite-difference invariants shared by the module tests and the acceptance suite.

Each function returns the largest residual it saw; callers compare against
the tolerance stated for the invariant.
"""

import numpy as np

from nullgeo.ambient import AmbientManifold, VectorField, covariant_derivative, lie_bracket
from nullgeo.fields import CoordinateField, random_triples
from nullgeo.holonomy import holonomy_at_base
from nullgeo.hypersurface import check_radical, normalizing_pair, projections
from nullgeo.induced import fundamental_forms, lie_derivative_check, nabla_g_residual, umbilic_fit
from nullgeo.numdiff import directional
from nullgeo.weyl import alpha_from_lie, verify_weyl

COMPAT_TOL = 1e-5
TORSION_TOL = 1e-5
PROJECTION_TOL = 1e-9
RADICAL_TOL = 1e-8
FORMS_TOL = 1e-6
NABLA_G_TOL = 1e-5
ALPHA_TOL = 1e-5
LIOUVILLE_TOL = 1e-6


def curved_ambient():
    """A non-flat Lorentzian metric in three coordinates."""
    return AmbientManifold(("x", "y", "z"), [
        ["1 + x^2", "0.3*z", "0"],
        ["0.3*z", "exp(0.2*y)", "0.1*x"],
        ["0", "0.1*x", "-(1 + y^2)"],
    ])


def random_vector_field(rng, coords):
    names = list(coords)
    comps = []
    for _ in names:
        c = [float(v) for v in rng.normal(size=1 + 2 * len(names))]
        terms = [f"{c[0]!r}"] + [f"{c[1 + i]!r}*{v}" for i, v in enumerate(names)]
        terms += [f"{c[1 + len(names) + i]!r}*{v}*{names[(i + 1) % len(names)]}" for i, v in enumerate(names)]
        comps.append(" + ".join(terms))
    return VectorField.from_strings(comps, coords)


def ambient_compatibility(m, points, rng, fields_per_point=3):
    """``X g(Y, Z) - g(D_X Y, Z) - g(Y, D_X Z)``."""
    worst = 0.0
    for x in points:
        x = np.asarray(x, dtype=float)
        for _ in range(fields_per_point):
            X, Y, Z = (random_vector_field(rng, m.coords) for _ in range(3))
            dg = float(directional(lambda p: np.array([Y(p) @ m.metric_at(p) @ Z(p)]), x, X(x), order=4)[0])
            g = m.metric_at(x)
            lhs = dg - covariant_derivative(m, X, Y, x) @ g @ Z(x) - Y(x) @ g @ covariant_derivative(m, X, Z, x)
            worst = max(worst, abs(float(lhs)))
    return worst


def ambient_torsion(m, points, rng, fields_per_point=3):
    """``D_X Y - D_Y X - [X, Y]`` componentwise."""
    worst = 0.0
    for x in points:
        for _ in range(fields_per_point):
            X, Y = (random_vector_field(rng, m.coords) for _ in range(2))
            t = covariant_derivative(m, X, Y, x) - covariant_derivative(m, Y, X, x) - lie_bracket(X, Y, x)
            worst = max(worst, float(np.max(np.abs(t))))
    return worst


def projection_residuals(frame, vectors):
    """Reconstruction ``Q(v) + c N = v`` and idempotence of ``Q`` and ``P``, relative to ``|v|``."""
    worst = 0.0
    for v in vectors:
        pr = projections(frame, v)
        scale = max(1.0, float(np.linalg.norm(v)))
        rec = np.linalg.norm(pr.tangent + pr.transversal * frame.N - v) / scale
        qq = np.linalg.norm(projections(frame, pr.tangent).tangent - pr.tangent) / scale
        pp = np.linalg.norm(projections(frame, pr.screen).screen - pr.screen) / scale
        worst = max(worst, float(rec), float(qq), float(pp))
    return worst


def radical_orthogonality(h, points):
    return max(check_radical(normalizing_pair(h, np.asarray(u, float))) for u in points)


def forms_identities(h, points):
    """Largest residual of the pointwise identities among the fundamental forms."""
    return max(max(fundamental_forms(h, np.asarray(u, float)).check().values()) for u in points)


def nabla_g_identity(h, points, triples=100, seed=0):
    """``(nabla_X g)(Y, Z)`` against ``B(X,Y) eta(Z) + B(X,Z) eta(Y)`` over random field triples."""
    worst = 0.0
    per_point = max(1, triples // max(1, len(points)))
    for k, u in enumerate(points):
        u = np.asarray(u, float)
        frame = normalizing_pair(h, u)
        for X, Y, Z in random_triples((seed, k), u, per_point):
            lhs, rhs = nabla_g_residual(h, frame, X, Y, Z, u)
            worst = max(worst, abs(lhs - rhs))
    return worst


def lambda_alpha(h, points):
    """``alpha(xi)`` from ``L_xi g = -2 alpha(xi) g`` against the fitted ``lambda``."""
    worst = 0.0
    for u in points:
        u = np.asarray(u, float)
        frame = normalizing_pair(h, u)
        lam, _ = umbilic_fit(frame)
        for Y in (CoordinateField(i, u.size) for i in range(u.size)):
            g = float(Y(u) @ frame.data.g @ Y(u))
            if abs(g) < 1e-8:
                continue
            lie, _ = lie_derivative_check(h, frame, Y, Y, u)
            worst = max(worst, abs(-0.5 * lie / g - lam))
    return worst


def weyl_forward(w, points, seed=0):
    """``L_xi g = theta(xi) g`` (that is ``alpha(xi) = -theta(xi)/2``) for random fields."""
    worst = 0.0
    for k, u in enumerate(points):
        u = np.asarray(u, float)
        for X, Y, _ in random_triples((seed, k), u, 3):
            lie, rhs = alpha_from_lie(w, X, Y, u)
            worst = max(worst, abs(lie - rhs))
    return worst


def weyl_passes(w, points, tol=1e-5):
    return verify_weyl(w, {f"p{k}": np.asarray(u, float) for k, u in enumerate(points)}, tol=tol).passed


def liouville(c, loops, steps=2000):
    return max(holonomy_at_base(c, loop, steps, loop_id=name).liouville_residual
               for name, loop in sorted(loops.items()))
