import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from onduloid.numerics import (BallGeometry, BracketError, SymTridiag, UniformGrid1D,
                               fd_derivative, find_root, integrate_weighted, richardson,
                               sym_tridiag_eigs)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("N", [1, 2, 7, 50])
def test_second_difference_spectrum(N):
    m = SymTridiag(np.full(N, 2.0), np.full(N - 1, -1.0))
    got = [lam for lam, _ in sym_tridiag_eigs(m, N)]
    j = np.arange(1, N + 1)
    np.testing.assert_allclose(got, 2 - 2 * np.cos(j * np.pi / (N + 1)), atol=1e-12)


def test_one_by_one_and_zero_matrix():
    assert sym_tridiag_eigs(SymTridiag(np.array([5.0]), np.array([])), 1)[0][0] == 5.0
    vals = [lam for lam, _ in sym_tridiag_eigs(SymTridiag(np.zeros(4), np.zeros(3)), 4)]
    assert vals == [0.0] * 4


def test_k_out_of_range():
    with pytest.raises(ValueError):
        sym_tridiag_eigs(SymTridiag(np.zeros(3), np.zeros(2)), 4)


def test_inconsistent_lengths():
    with pytest.raises(ValueError):
        SymTridiag(np.zeros(3), np.zeros(3))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30).flatmap(
    lambda n: st.tuples(arrays(float, n, elements=finite), arrays(float, n - 1, elements=finite))))
def test_trace_residual_and_order(de):
    d, e = de
    m = SymTridiag(d, e)
    pairs = sym_tridiag_eigs(m, m.dim)
    vals = np.array([lam for lam, _ in pairs])
    assert np.all(np.diff(vals) >= 0)
    assert abs(vals.sum() - d.sum()) <= 1e-9 * max(1.0, np.abs(d).sum())
    for lam, v in pairs:
        assert np.linalg.norm(m.matvec(v) - lam * v) <= 1e-10 * max(m.norm(), 1e-300) + 1e-14
        assert abs(np.linalg.norm(v) - 1) < 1e-12


def test_weighted_normalisation():
    w = np.linspace(1, 2, 10)
    m = SymTridiag(np.full(10, 2.0), np.full(9, -1.0))
    for _, v in sym_tridiag_eigs(m, 3, weights=w):
        assert abs(np.sum(w * v * v) - 1) < 1e-12


@pytest.mark.parametrize("fcn, bracket, root", [
    (lambda m: m * math.tanh(m) - 1, (0.5, 2), 1.19967864025773),
    (lambda x: x, (-1, 1), 0.0),
    (lambda x: x * x - 4, (0, 3), 2.0),
])
def test_find_root(fcn, bracket, root):
    x = find_root(fcn, bracket, tol=1e-13)
    assert abs(x - root) < 1e-12
    assert find_root(fcn, bracket, tol=1e-13) == x  # bit-identical


def test_find_root_without_sign_change():
    with pytest.raises(BracketError):
        find_root(lambda x: x * x + 1, (-1, 1))


@pytest.mark.parametrize("values, weight, exact, tol", [
    (lambda r: np.ones_like(r), lambda r: r ** 2, 1 / 3, 1e-10),
    (lambda r: r ** 2, lambda r: np.ones_like(r), 1 / 3, 1e-10),
    (lambda r: np.sin(np.pi * r), lambda r: np.ones_like(r), 2 / np.pi, 1e-8),
])
def test_integrate_weighted(values, weight, exact, tol):
    g = UniformGrid1D(401)
    r = g.nodes
    assert abs(integrate_weighted(values(r), weight(r), g) - exact) < tol


def test_integrate_length_mismatch():
    with pytest.raises(ValueError):
        integrate_weighted(np.ones(10), 1.0, UniformGrid1D(11))


@settings(max_examples=30, deadline=None)
@given(arrays(float, 21, elements=finite), arrays(float, 21, elements=finite),
       st.floats(-3, 3, allow_nan=False))
def test_integrate_is_linear(a, b, s):
    g = UniformGrid1D(21)
    w = g.nodes ** 2
    lhs = integrate_weighted(a + s * b, w, g)
    rhs = integrate_weighted(a, w, g) + s * integrate_weighted(b, w, g)
    assert abs(lhs - rhs) <= 1e-12 * (1 + np.abs(a).sum() + abs(s) * np.abs(b).sum())


def test_simpson_fourth_order():
    errs = []
    for m in (11, 21, 41):
        g = UniformGrid1D(m)
        errs.append(abs(integrate_weighted(np.exp(g.nodes), 1.0, g) - (math.e - 1)))
    assert 14 < errs[0] / errs[1] < 18 and 14 < errs[1] / errs[2] < 18


@pytest.mark.parametrize("n, omega", [(1, 2.0), (2, 2 * math.pi), (3, 4 * math.pi),
                                      (4, 2 * math.pi ** 2)])
def test_sphere_area(n, omega):
    assert abs(BallGeometry(n).omega_n - omega) < 1e-13


def test_richardson_removes_even_terms():
    h = np.array([0.1, 0.05, 0.025])
    vals = 3.0 + 2 * h ** 2 - 5 * h ** 4
    best, err = richardson(vals)
    assert abs(best - 3.0) < 1e-13 and err < 1e-4


def test_fd_derivative_sixth_order_exact_on_polynomials():
    g = UniformGrid1D(15)
    r = g.nodes
    y = r ** 6 - 2 * r ** 3 + r
    np.testing.assert_allclose(fd_derivative(y, g.h), 6 * r ** 5 - 6 * r ** 2 + 1, atol=1e-9)


def test_grid_invariants():
    g = UniformGrid1D(5, 0.0, 2.0)
    assert g.h == 0.5 and np.all(np.diff(g.nodes) > 0)
    assert g.refined(2).n_points == 9
    with pytest.raises(ValueError):
        UniformGrid1D(1)
    with pytest.raises(ValueError):
        UniformGrid1D(5, 1.0, 1.0)
