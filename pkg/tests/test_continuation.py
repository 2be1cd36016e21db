import math

import numpy as np
import pytest

from helpers import ground, linear_degenerate, spectra
from onduloid.continuation import (BranchSetup, branch_diagnostics, certify_bifurcation,
                                   export_branch_csv, extend_branch)
from onduloid.dtn import DtNGrid

COARSE = DtNGrid(n_radial=51, M=8)


@pytest.fixture(scope="module")
def cert_n1():
    f, geom, p = ground("const_n1")
    return certify_bifurcation(p, f, geom)


@pytest.fixture(scope="module")
def small_branch(cert_n1):
    f, geom, p = ground("const_n1")
    setup = BranchSetup.from_certificate(p, f, geom, cert_n1, grid=COARSE)
    return extend_branch(setup, [-2e-3, -1e-3, 0.0, 1e-3, 2e-3], K=4)


def test_certify_constant_source(cert_n1):
    assert cert_n1.certified
    assert cert_n1.kernel_dim == 1 and cert_n1.kernel_modes == (1,)
    assert cert_n1.transversality < 0
    assert cert_n1.negative_count == 0
    # sigma_k(T*) = kappa_k tanh(kappa_k) - 1 increases with k
    assert np.all(np.diff(cert_n1.sigma_at_t_star) > 0)
    assert math.isinf(cert_n1.t_bar) and cert_n1.as_dict()["t_bar"] is None


def test_certify_cubic():
    f, geom, p = ground("cubic_n2")
    d, r = spectra("cubic_n2")
    cert = certify_bifurcation(p, f, geom, dirichlet=d, robin=r)
    assert cert.certified and cert.negative_count == 1
    assert cert.t_star < cert.t_bar


def test_certify_refuses_degenerate_linear():
    f, geom, p = linear_degenerate()
    cert = certify_bifurcation(p, f, geom)
    assert not cert.certified
    assert cert.hypotheses == {"assumption_2": False}
    with pytest.raises(ValueError, match="not certified"):
        BranchSetup.from_certificate(p, f, geom, cert)


def test_trivial_point(cert_n1):
    f, geom, p = ground("const_n1")
    setup = BranchSetup.from_certificate(p, f, geom, cert_n1, grid=COARSE)
    br = extend_branch(setup, [0.0])
    assert len(br.points) == 1
    pt = br.points[0]
    assert pt.s == 0 and pt.T_s == cert_n1.t_star
    assert np.all(pt.v_s.coefficients == 0) and pt.newton_residual <= 1e-10
    diag = branch_diagnostics(br)
    row = diag.per_point[0]
    assert row["flux_deviation"] <= 1e-10 and row["remainder"] == 0 and row["evenness"] == 0


def test_small_branch_invariants(small_branch):
    br = small_branch
    assert np.all(np.diff(br.s_values) > 0) and not br.truncated
    for p in br.points:
        assert p.v_s.coefficients[0] == p.s
        assert p.newton_residual <= 1e-9
        assert p.flux_deviation <= 1e-8
        assert np.all(p.field.values[:-1] > 0)
    nz = [p for p in br.points if p.s != 0]
    for p in nz:
        tail = np.max(np.abs(p.v_s.coefficients[1:]))
        assert tail <= 10 * p.s ** 2
        assert abs(p.T_s - br.t_star) <= 10 * abs(p.s)


def test_small_branch_diagnostics(small_branch):
    diag = branch_diagnostics(small_branch)
    assert diag.remainder_slope >= 1.8
    assert np.isfinite(diag.period_constant)
    assert diag.symmetry_defect < 1e-8
    assert all(r["positive"] and abs(r["mean_v"]) < 1e-14 for r in diag.per_point)


def test_threaded_matches_serial(cert_n1, small_branch):
    from concurrent.futures import ThreadPoolExecutor
    f, geom, p = ground("const_n1")
    setup = BranchSetup.from_certificate(p, f, geom, cert_n1, grid=COARSE)
    with ThreadPoolExecutor(2) as ex:
        par = extend_branch(setup, [-2e-3, -1e-3, 0.0, 1e-3, 2e-3], K=4, executor=ex)
    np.testing.assert_array_equal(par.T_values, small_branch.T_values)


def test_K_above_collocation_rejected(cert_n1):
    f, geom, p = ground("const_n1")
    setup = BranchSetup.from_certificate(p, f, geom, cert_n1, grid=COARSE)
    with pytest.raises(ValueError):
        extend_branch(setup, [1e-3], K=16)


def test_export(small_branch, tmp_path):
    export_branch_csv(small_branch, tmp_path / "b.csv")
    rows = np.loadtxt(tmp_path / "b.csv", delimiter=",", skiprows=1)
    assert rows.shape[0] == 5
    np.testing.assert_array_equal(rows[:, 0], small_branch.s_values)
