import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onduloid.nonlinearity import DomainError, Nonlinearity, eval, eval_deriv

FAMILIES = [Nonlinearity.constant(1.0), Nonlinearity.power_minus_linear(3.0),
            Nonlinearity.power_minus_linear(2.5), Nonlinearity.gelfand(0.5),
            Nonlinearity.linear(2.0)]


@pytest.mark.parametrize("f, u, val", [
    (Nonlinearity.constant(1), 0.7, 1.0),
    (Nonlinearity.power_minus_linear(3), 2.0, 6.0),
    (Nonlinearity.gelfand(0.5), 0.0, 0.5),
])
def test_eval_examples(f, u, val):
    assert eval(f, u) == pytest.approx(val, abs=1e-15)


@pytest.mark.parametrize("f, u, val", [
    (Nonlinearity.constant(1), 3.3, 0.0),
    (Nonlinearity.power_minus_linear(3), 1.0, 2.0),
    (Nonlinearity.gelfand(0.5), 1.0, 0.5 * math.e),
])
def test_deriv_examples(f, u, val):
    assert eval_deriv(f, u) == pytest.approx(val, abs=1e-14)


@pytest.mark.parametrize("f", FAMILIES, ids=lambda f: f.label())
def test_negative_argument_rejected(f):
    with pytest.raises(DomainError):
        f.eval(-0.1)
    with pytest.raises(DomainError):
        f.eval_deriv(-1e-12)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(FAMILIES), st.floats(1e-2, 3.0))
def test_central_difference_is_second_order(f, u):
    errs = []
    for h in (1e-3, 1e-4):
        fd = (f.eval(u + h) - f.eval(max(u - h, 0.0))) / (u + h - max(u - h, 0.0))
        errs.append(abs(fd - f.eval_deriv(u)))
    # second order: error scales like h^2 (allow roundoff floor)
    assert errs[1] <= 0.02 * errs[0] + 1e-8


def test_extension_below_zero_is_linear():
    f = Nonlinearity.power_minus_linear(3)
    assert f.f_ext(-0.5) == pytest.approx(0.5)      # f(0) + f'(0) u = 0 - (-0.5)
    assert f.df_ext(-0.5) == pytest.approx(-1.0)


@pytest.mark.parametrize("kind, param", [("power_minus_linear", 1.0), ("gelfand", 0.0),
                                         ("gelfand", -1.0)])
def test_invalid_parameters(kind, param):
    with pytest.raises(ValueError):
        getattr(Nonlinearity, kind)(param)


def test_subcritical_exponent():
    Nonlinearity.power_minus_linear(4.9).check_dimension(3)
    with pytest.raises(ValueError):
        Nonlinearity.power_minus_linear(5.0).check_dimension(3)
    Nonlinearity.power_minus_linear(7.0).check_dimension(2)


def test_tabulated_interpolates_monotonically(tmp_path):
    u = np.linspace(0, 2, 21)
    f = Nonlinearity.tabulated(u, u ** 3 - u, 3 * u ** 2 - 1)
    assert f.eval(1.0) == pytest.approx(0.0, abs=1e-12)  # node value
    uu = np.linspace(0, 2, 401)
    vals = f.eval(uu)
    assert np.all(np.diff(vals[uu > 0.7]) >= 0)        # PCHIP keeps monotone stretches
    assert np.max(np.abs(vals - (uu ** 3 - uu))) < 5e-3

    (tmp_path / "f.csv").write_text("u,f\n" + "\n".join(f"{a},{a**3 - a}" for a in u))
    (tmp_path / "df.csv").write_text("u,df\n" + "\n".join(f"{a},{3*a*a - 1}" for a in u))
    g = Nonlinearity.from_csv(tmp_path / "f.csv", tmp_path / "df.csv")
    assert g.eval(0.55) == f.eval(0.55)


@pytest.mark.parametrize("u", [np.array([0, 1, 1]), np.array([0.1, 1.0])])
def test_tabulated_grid_validation(u):
    with pytest.raises(ValueError):
        Nonlinearity.tabulated(u, np.zeros(len(u)), np.zeros(len(u)))


_u = np.linspace(0, 5, 51)
SCALAR_CASES = [Nonlinearity.constant(1.5), Nonlinearity.power_minus_linear(3),
                Nonlinearity.gelfand(0.3), Nonlinearity.linear(2.0),
                Nonlinearity.tabulated(_u, np.sin(_u) + _u, np.cos(_u) + 1)]


@pytest.mark.parametrize("f", SCALAR_CASES, ids=lambda f: f.kind)
@settings(max_examples=40, deadline=None)
@given(x=st.floats(-2, 5))
def test_scalar_extension_matches_array_path(f, x):
    assert f.f_ext_scalar(x) == pytest.approx(float(f.f_ext(x)), rel=1e-15, abs=1e-15)
