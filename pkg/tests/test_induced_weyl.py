import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import invariants as inv
from conftest import definition
from nullgeo.errors import DegenerateKernelError, NotUmbilicalError
from nullgeo.fields import PolynomialField
from nullgeo.hypersurface import normalizing_pair
from nullgeo.induced import (
    diagnose_geodesic,
    diagnose_umbilic,
    induced_theta_fit,
    never_weyl_witness,
    second_fundamental_form,
    umbilic_fit,
)
from nullgeo.weyl import (
    WeylData,
    match_gauge,
    screen_from_theta,
    theta_closedness,
    verify_weyl,
)

CONE_R = (0.5, 1.0, 2.0, 5.0)


def _points(name):
    return list(definition(name).sorted_points().values())


# induced geometry ---------------------------------------------------------

def test_cone_umbilic_factor_magnitude_and_verdict(cone):
    rep = diagnose_umbilic(cone.hypersurface, {f"r{r}": np.array([r, 0.3]) for r in CONE_R})
    assert rep.verdict == "proper_totally_umbilical"
    for r in CONE_R:
        # this chart's radical is d_r, and B(P, P) = -r^-3 against g(P, P) = r^-2
        assert rep.lambdas[f"r{r}"] == pytest.approx(-1.0 / r, abs=1e-6)
        assert rep.residuals[f"r{r}"] <= 1e-6


def test_plane_is_totally_geodesic():
    d = definition("plane.def")
    rep = diagnose_geodesic(d.hypersurface, d.points)
    assert rep.verdict == "totally_geodesic"
    assert max(rep.max_abs_B.values()) <= 1e-10
    assert diagnose_umbilic(d.hypersurface, d.points).verdict == "totally_umbilical"


def test_null_cylinder_is_not_umbilical():
    d = definition("null_cylinder.def")
    assert diagnose_umbilic(d.hypersurface, d.points).verdict == "not_umbilical"
    assert diagnose_geodesic(d.hypersurface, d.points).verdict == "not_geodesic"


@pytest.mark.parametrize("name", ["lightcone.def", "cone4.def", "null_cylinder.def"])
def test_second_fundamental_form_is_screen_independent(name):
    h = definition(name).hypersurface
    rng = np.random.default_rng(2)
    for u in _points(name):
        fr = normalizing_pair(h, u)
        # another screen: shear every screen vector along xi
        other = fr.screen_params + rng.normal(size=(h.n, 1)) * fr.xi_params[None, :]
        fr2 = normalizing_pair(h, u, screen_basis=other)
        np.testing.assert_allclose(second_fundamental_form(fr2), second_fundamental_form(fr), atol=1e-8)


@pytest.mark.parametrize("name", ["lightcone.def", "cone4.def", "null_cylinder.def", "plane.def"])
def test_fundamental_form_identities(name):
    assert inv.forms_identities(definition(name).hypersurface, _points(name)) <= inv.FORMS_TOL


@pytest.mark.parametrize("name", ["lightcone.def", "cone4.def", "null_cylinder.def"])
def test_induced_metric_derivative_identity(name):
    assert inv.nabla_g_identity(definition(name).hypersurface, _points(name), triples=100) <= inv.NABLA_G_TOL


@pytest.mark.parametrize("name", ["lightcone.def", "cone4.def"])
def test_lie_derivative_gives_umbilic_factor(name):
    assert inv.lambda_alpha(definition(name).hypersurface, _points(name)) <= inv.ALPHA_TOL


def test_never_weyl_witness_on_the_cone(cone):
    h = cone.hypersurface
    w = never_weyl_witness(h, {"r1": np.array([1.0, 0.3])})
    assert abs(w.B_value) > 0.5
    fr = normalizing_pair(h, np.array([1.0, 0.0]))
    B = second_fundamental_form(fr)
    assert B[1, 1] == pytest.approx(-1.0, abs=1e-8)
    _, resid = induced_theta_fit(h, fr, np.array([1.0, 0.0]))
    assert resid >= 1e-2


# weyl ---------------------------------------------------------------------

@pytest.mark.parametrize("name", ["lightcone.def", "cone4.def"])
def test_umbilic_implies_weyl(name):
    d = definition(name)
    assert diagnose_umbilic(d.hypersurface, d.points).verdict == "proper_totally_umbilical"
    rep = verify_weyl(WeylData(d.hypersurface), d.sorted_points())
    assert rep.passed
    assert rep.max("torsion") <= 1e-8
    assert rep.max("tangency") <= 1e-6
    assert rep.max("conformality") <= 1e-5


@pytest.mark.parametrize("name", ["lightcone.def", "cone4.def"])
def test_weyl_implies_lie_umbilicity(name):
    w = WeylData(definition(name).hypersurface)
    assert inv.weyl_forward(w, _points(name)) <= inv.ALPHA_TOL


def test_cone_theta_and_zeta(cone):
    w = WeylData(cone.hypersurface)
    for r in CONE_R:
        u = np.array([r, 0.0])
        assert float(w.theta(u) @ [1.0, 0.0]) == pytest.approx(2.0 / r, abs=1e-8)
        assert theta_closedness(w, u) <= 1e-6
    np.testing.assert_allclose(w.zeta(np.array([1.0, 0.0])), [-0.5, 0.0, 0.5], atol=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_gauge_covariance(seed):
    """Any tangent part added to lambda N gives another Weyl connection."""
    h = definition("lightcone.def").hypersurface
    pts = {"a": np.array([1.3, 0.2]), "b": np.array([2.4, -1.1])}
    W = PolynomialField.random(np.random.default_rng(seed), np.array([1.5, 0.0]), scale=0.3, curvature=0.1)
    base = verify_weyl(WeylData(h), pts, seed=seed)
    gauged = verify_weyl(WeylData(h, tangent_part=W), pts, seed=seed)
    assert base.passed and gauged.passed


def test_not_umbilic_has_no_weyl_section():
    d = definition("null_cylinder.def")
    with pytest.raises(NotUmbilicalError):
        WeylData(d.hypersurface).theta(d.points["a"])


def test_screen_from_theta_spans_its_kernel(cone):
    w = WeylData(cone.hypersurface)
    u = np.array([1.0, 0.4])
    S = screen_from_theta(w, u)
    np.testing.assert_allclose(S @ w.theta(u), 0.0, atol=1e-12)
    plane = WeylData(definition("plane.def").hypersurface)
    with pytest.raises(DegenerateKernelError):
        screen_from_theta(plane, np.array([0.0, 0.0]))


def test_gauge_matching_leaves_the_structural_gap(cone):
    """No tangent gauge reproduces a table with the opposite radical coefficient."""
    w = WeylData(cone.hypersurface)
    xi = lambda p: np.array([1.0, 0.0])  # noqa: E731
    P = lambda p: np.array([0.0, 1.0 / p[0] ** 2])  # noqa: E731
    for r in (1.0, 2.0, 3.0):
        target = np.zeros((2, 2, 2))
        target[0, 0, 0] = 2.0 / r
        _, diff = match_gauge(w, np.array([r, 0.3]), [xi, P], target)
        assert np.max(np.abs(diff)) == pytest.approx(4.0 / r, abs=1e-6)


def test_umbilic_fit_is_exact_for_proportional_forms(cone):
    fr = normalizing_pair(cone.hypersurface, np.array([2.0, 1.0]))
    lam, res = umbilic_fit(fr, B=3.0 * fr.data.g)
    assert lam == pytest.approx(3.0)
    assert res < 1e-14
