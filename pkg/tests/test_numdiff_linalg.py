import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nullgeo.errors import NoSolutionError, NumericalDegeneracyError
from nullgeo.expr import parse
from nullgeo.linalg import (
    SymBilinearForm,
    gram_schmidt,
    kernel,
    null_space,
    pseudo_solve,
    rank_signature,
    solve,
)
from nullgeo.numdiff import ExprMap, derivatives_many, directional, gradient, pow2_step

VARS = ("u", "v")


def _map():
    return ExprMap([parse(s, VARS) for s in ("sin(u)*v^2", "exp(u - v)", "u^3*v + cos(v)")])


def _exact(u, v):
    J = np.array([
        [np.cos(u) * v**2, 2 * np.sin(u) * v],
        [np.exp(u - v), -np.exp(u - v)],
        [3 * u**2 * v, u**3 - np.sin(v)],
    ])
    H = np.array([
        [[-np.sin(u) * v**2, 2 * np.cos(u) * v], [2 * np.cos(u) * v, 2 * np.sin(u)]],
        [[np.exp(u - v), -np.exp(u - v)], [-np.exp(u - v), np.exp(u - v)]],
        [[6 * u * v, 3 * u**2], [3 * u**2, -np.cos(v)]],
    ])
    return J, H


@pytest.mark.parametrize("point", [(0.3, -0.7), (1.2, 2.5), (-2.0, 0.1)])
def test_jacobian_and_hessian_fourth_order(point):
    m = _map()
    J, H = _exact(*point)
    np.testing.assert_allclose(m.jacobian(point), J, atol=1e-11 * max(1.0, np.abs(J).max()))
    np.testing.assert_allclose(m.hessian(point), H, atol=1e-8 * max(1.0, np.abs(H).max()))


def test_batched_derivatives_are_bit_identical():
    m = _map()
    pts = np.array([[0.3, -0.7], [1.2, 2.5], [-2.0, 0.1], [40.0, 3.0]])
    F, J, H = derivatives_many(m, pts)
    for k, p in enumerate(pts):
        assert np.array_equal(F[k], m(p))
        assert np.array_equal(J[k], m.jacobian(p))
        assert np.array_equal(H[k], m.hessian(p))


@given(st.floats(-1e6, 1e6, allow_nan=False), st.sampled_from([1e-3, 6e-6, 7e-4]))
def test_pow2_step_is_a_power_of_two(x, base):
    h = pow2_step(x, base)
    m, _ = np.frexp(h)
    assert m == 0.5
    assert 0.5 * base * max(1.0, abs(x) * base) <= h <= 2.0 * base * max(1.0, abs(x) * base)


def test_directional_orders():
    f = lambda p: np.array([np.sin(p[0]) * np.exp(p[1])])  # noqa: E731
    u = np.array([0.4, -0.3])
    d = np.array([2.0, -1.0])
    exact = np.cos(0.4) * np.exp(-0.3) * 2.0 - np.sin(0.4) * np.exp(-0.3)
    assert abs(directional(f, u, d)[0] - exact) < 1e-7
    assert abs(directional(f, u, d, order=4)[0] - exact) < 1e-11
    assert directional(f, u, np.zeros(2))[0] == 0.0
    g = gradient(f, u)
    assert g.shape == (1, 2)


# linear algebra -----------------------------------------------------------

def _form_with_rank(rng, n, rank):
    A = rng.normal(size=(n, rank))
    s = rng.choice([-1.0, 1.0], size=rank)
    return SymBilinearForm(A @ np.diag(s) @ A.T)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.data())
def test_rank_plus_nullity_is_dim(n, data):
    rank = data.draw(st.integers(0, n))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    form = _form_with_rank(rng, n, rank)
    r, pos, neg = rank_signature(form)
    assert r == rank
    assert r + null_space(form).shape[0] == n
    assert pos + neg == r


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.data())
def test_null_space_vectors_pair_to_zero(n, data):
    rank = data.draw(st.integers(0, n - 1))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    form = _form_with_rank(rng, n, rank)
    tol = 1e-9
    for v in null_space(form, tol):
        for w in np.eye(n):
            assert abs(form(v, w)) <= 10 * tol * form.norm() * np.linalg.norm(w)


def test_sylvester_law_of_inertia():
    rng = np.random.default_rng(20240611)
    for _ in range(50):
        n_pos, n_neg = rng.integers(0, 3), rng.integers(0, 3)
        diag = np.concatenate([rng.uniform(0.5, 2, n_pos), -rng.uniform(0.5, 2, n_neg),
                               np.zeros(4 - n_pos - n_neg)])
        Q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        form = SymBilinearForm(Q @ np.diag(diag) @ Q.T)
        S = rng.normal(size=(4, 4))
        while abs(np.linalg.det(S)) < 1e-2:
            S = rng.normal(size=(4, 4))
        assert rank_signature(form) == rank_signature(SymBilinearForm(S.T @ form.entries @ S))
        assert rank_signature(form) == (n_pos + n_neg, n_pos, n_neg)


def test_form_is_symmetrised_and_restricts():
    f = SymBilinearForm([[1.0, 2.0], [0.0, -1.0]])
    assert np.array_equal(f.entries, [[1.0, 1.0], [1.0, -1.0]])
    assert f.restrict([[1.0, 0.0]]).entries.tolist() == [[1.0]]
    with pytest.raises(ValueError):
        SymBilinearForm([1.0, 2.0])
    with pytest.raises(ValueError):
        rank_signature(f, tol=0.0)


def test_solvers():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    b = np.array([1.0, 2.0])
    np.testing.assert_allclose(A @ solve(A, b), b)
    x, res = pseudo_solve(np.array([[1.0, 1.0]]), np.array([2.0]))
    np.testing.assert_allclose(x, [1.0, 1.0])
    assert res < 1e-15
    with pytest.raises(NoSolutionError):
        pseudo_solve(np.array([[1.0], [1.0]]), np.array([0.0, 1.0]))
    k = kernel([[1.0, 1.0, 0.0]])
    assert k.shape == (2, 3)
    np.testing.assert_allclose(k @ [1.0, 1.0, 0.0], 0.0, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(arrays(float, 3, elements=st.floats(0.5, 3.0)), st.integers(0, 2))
def test_gram_schmidt_on_indefinite_forms(scales, n_neg):
    diag = scales.copy()
    diag[:n_neg] *= -1
    form = SymBilinearForm(np.diag(diag))
    rng = np.random.default_rng(int(scales.sum() * 1000))
    E, signs = gram_schmidt(form, rng.normal(size=(3, 3)))
    G = E @ form.entries @ E.T
    np.testing.assert_allclose(G, np.diag(signs), atol=1e-9)
    assert int(np.sum(signs < 0)) == n_neg


def test_gram_schmidt_rejects_null_vectors():
    form = SymBilinearForm(np.diag([1.0, -1.0]))
    with pytest.raises(NumericalDegeneracyError):
        gram_schmidt(form, [[1.0, 1.0]])
