import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import ground, mu_n1, mu_n3, spectra
from onduloid.ball_spectra import UNIT_BOUNDARY
from onduloid.cylinder_spectra import (ConditioningError, InconsistencyError, alpha_beta,
                                       export_sigma_csv, find_t_star_by_root, jt_quadratic,
                                       mode_flux, mode_solution, q_T_quadrature, sigma_curve,
                                       sigma_k, t_bar, t_star, transversality)
from onduloid.nonlinearity import Nonlinearity
from onduloid.numerics import BallGeometry
from onduloid.radial_ball import solve_ground_profile

TWO_PI = 2 * math.pi


def closed_flux(k, T):
    kap = TWO_PI * k / T
    return kap * math.tanh(kap)


def test_t_bar_and_t_star():
    assert t_bar(-4 * math.pi ** 2) == pytest.approx(1.0)
    assert t_bar(-math.pi ** 2) == pytest.approx(2.0)
    assert math.isinf(t_bar(math.pi ** 2 / 4))
    with pytest.raises(ValueError):
        t_bar(0.0)
    assert t_star(-4 * math.pi ** 2) == pytest.approx(1.0)
    with pytest.raises(InconsistencyError):
        t_star(0.1)


@pytest.mark.parametrize("k,T", [(1, 1.0), (1, 5.0), (2, 1.0), (3, 2.5), (1, 20.0)])
def test_mode_flux_closed_form(k, T):
    f, geom, p = ground("const_n1")
    m = mode_solution(p, f, geom, k, T)
    assert m.flux == pytest.approx(closed_flux(k, T), abs=1e-8)
    kap = TWO_PI * k / T
    np.testing.assert_allclose(m.values, np.cosh(kap * p.r) / np.cosh(kap), atol=1e-9)
    assert m.values[-1] == 1.0
    assert m.residual(p, f) <= 1e-8
    assert m.sigma_k == pytest.approx(m.flux - 1.0)


def test_mode_zero_is_constant():
    f, geom, p = ground("const_n1")
    m = mode_solution(p, f, geom, 0, 3.0)
    np.testing.assert_allclose(m.values, 1.0, atol=1e-12)
    assert abs(m.flux) < 1e-12


@pytest.mark.parametrize("n", [2, 3])
def test_mode_flux_bessel(n):
    # f = 1: rho solves the modified Bessel equation; compare against scipy's I_nu
    from scipy.special import iv, ivp
    f, geom = Nonlinearity.constant(1), BallGeometry(n)
    p = solve_ground_profile(f, geom)
    kap, nu = TWO_PI / 2.0, n / 2 - 1
    exact = kap * ivp(nu, kap) / iv(nu, kap) - nu
    assert mode_flux(p, f, 1, 2.0)[0] == pytest.approx(exact, abs=1e-8)


def test_conditioning_error_near_dirichlet_resonance():
    f, geom, p = ground("cubic_n2")
    d, _ = spectra("cubic_n2")
    with pytest.raises(ConditioningError):
        mode_solution(p, f, geom, 1, t_bar(d.eigenvalues[0]) * (1 + 1e-13))


def test_sigma_curve_constant_source():
    f, geom, p = ground("const_n1")
    ts = t_star(-mu_n1() ** 2)
    curve = sigma_curve(p, f, geom, -1.0, [1.0, ts, ts - 0.5, ts + 0.5])
    s = curve.sigma_values
    assert s[0] == pytest.approx(TWO_PI * math.tanh(TWO_PI) - 1, abs=1e-6)
    assert abs(s[1]) <= 1e-6
    assert s[2] > 0 > s[3]
    assert np.all(curve.minimizing_k == 1) and not curve.dominance_violations()


def test_sigma_curve_rejects_beyond_t_bar():
    f, geom, p = ground("cubic_n2")
    d, _ = spectra("cubic_n2")
    with pytest.raises(ValueError):
        sigma_curve(p, f, geom, p.robin_c, [1.0, 1.6], gamma_D1=d.eigenvalues[0])


def test_sigma_curve_empty_and_threaded():
    from concurrent.futures import ThreadPoolExecutor
    f, geom, p = ground("const_n1")
    assert len(sigma_curve(p, f, geom, -1.0, []).sigma_values) == 0
    T = np.linspace(2, 8, 7)
    serial = sigma_curve(p, f, geom, -1.0, T, k_max=3)
    with ThreadPoolExecutor(2) as ex:
        par = sigma_curve(p, f, geom, -1.0, T, k_max=3, executor=ex)
    np.testing.assert_array_equal(serial.sigma_table, par.sigma_table)


@pytest.mark.parametrize("name,tol", [("const_n1", 1e-5), ("const_n3", 1e-4),
                                      ("cubic_n2", 1e-4), ("gelfand_n2", 1e-4)])
def test_t_star_cross_validation(name, tol):
    f, geom, p = ground(name)
    d, r = spectra(name)
    ts = t_star(r.eigenvalues[0])
    root = find_t_star_by_root(p, f, geom, p.robin_c, d.eigenvalues[0])
    assert abs(root - ts) <= tol
    assert root < t_bar(d.eigenvalues[0])


def test_t_star_oracles():
    assert t_star(spectra("const_n1")[1].eigenvalues[0]) == pytest.approx(TWO_PI / mu_n1(), abs=1e-5)
    assert t_star(spectra("const_n3")[1].eigenvalues[0]) == pytest.approx(TWO_PI / mu_n3(), abs=1e-4)


def test_alpha_beta_examples():
    d, r = spectra("const_n1")
    a, b, info = alpha_beta(d, r.eigenvalues[0], 1.0)
    assert a == pytest.approx(math.pi ** 2 / 4, abs=1e-6) and info["alpha_branch"] == "D_l+1"
    _, b, _ = alpha_beta(d, -4 * math.pi ** 2, 1.0)
    assert b == pytest.approx(0.0, abs=1e-12)


def test_alpha_beta_monotone_in_T():
    d, r = spectra("cubic_n2")
    tb = t_bar(d.eigenvalues[0])
    vals = np.array([alpha_beta(d, r.eigenvalues[0], T)[:2] for T in np.linspace(0.2, tb * 0.99, 30)])
    assert np.all(np.diff(vals[:, 0]) <= 0) and np.all(np.diff(vals[:, 1]) <= 0)


def test_jt_quadratic():
    f, geom, p = ground("const_n1")
    ts = t_star(spectra("const_n1")[1].eigenvalues[0])
    assert abs(jt_quadratic([1.0], ts, [sigma_k(p, f, -1.0, 1, ts)])) <= 1e-6
    assert jt_quadratic([1.0], 1.0, [sigma_k(p, f, -1.0, 1, 1.0)]) == pytest.approx(
        0.5 * (TWO_PI * math.tanh(TWO_PI) - 1), abs=1e-6)
    assert jt_quadratic([0.0, 0.0], 1.0, [1.0]) == 0.0
    with pytest.raises(ValueError):
        jt_quadratic([0.0, 1.0], 1.0, [1.0])


@settings(max_examples=6, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=3))
def test_cylinder_form_quadrature(coeffs):
    f, geom, p = ground("cubic_n2")
    T = 1.2
    sig = [sigma_k(p, f, p.robin_c, k, T) for k in range(1, len(coeffs) + 1)]
    q = q_T_quadrature(p, f, geom, p.robin_c, T, coeffs)
    assert abs(q - T * geom.omega_n * jt_quadratic(coeffs, T, sig)) <= 1e-6 * (1 + abs(q))


@pytest.mark.parametrize("name", ["const_n1", "const_n3", "cubic_n2", "gelfand_n2"])
def test_transversality(name):
    f, geom, p = ground(name)
    d, r = spectra(name)
    ts = t_star(r.eigenvalues[0])
    psi = r.normalized(UNIT_BOUNDARY).eigenfunctions[:, 0]
    res = transversality(p, f, geom, p.robin_c, ts, psi, t_bar_value=t_bar(d.eigenvalues[0]))
    assert res.certified and res.fd_value < 0
    assert res.rel_error <= 1e-4
    # consistency: (T/2) gamma_1 |psi|^2 + (2 pi^2 / T) |psi|^2 = 0
    g1 = r.eigenvalues[0]
    assert abs(ts / 2 * g1 + 2 * math.pi ** 2 / ts) <= 1e-6


def test_transversality_closed_form_n1():
    f, geom, p = ground("const_n1")
    mu = mu_n1()
    ts = TWO_PI / mu
    # int_0^1 cosh^2(mu r)/cosh^2(mu) dr
    integral = (0.5 + math.sinh(2 * mu) / (4 * mu)) / math.cosh(mu) ** 2
    res = transversality(p, f, geom, -1.0, ts)
    assert res.fd_value == pytest.approx(-4 * math.pi ** 2 / ts ** 3 * integral, rel=1e-5)


def test_sigma_csv(tmp_path):
    f, geom, p = ground("const_n1")
    curve = sigma_curve(p, f, geom, -1.0, [2.0, 3.0])
    export_sigma_csv(curve, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "T,sigma,k_min" and len(lines) == 3
