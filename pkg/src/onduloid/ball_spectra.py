"""Radial spectra of the linearised operator in the unit ball.

Dirichlet and Robin eigenproblems for

    -(r^{n-1} psi')' / r^{n-1} - f'(phi_1) psi = gamma psi,   psi'(0) = 0,

with either ``psi(1) = 0`` or ``psi'(1) + c psi(1) = 0``. Eigenvalues come
from a finite-volume discretisation (symmetric after diagonal scaling) on
three nested grids followed by Richardson extrapolation. Eigenfunctions are
then integrated with RK4 at the extrapolated eigenvalue, which gives
fourth-order node values *and* derivatives for the quadratic forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .nonlinearity import Nonlinearity
from .numerics import (BallGeometry, SymTridiag, UniformGrid1D, find_root,
                       integrate_weighted, richardson, sym_tridiag_eigs)
from .radial_ball import RadialProfile, eval_profile, shoot_linear

DIRICHLET = "dirichlet"
ROBIN = "robin"
UNIT_L2 = "unit_l2_ball"
UNIT_BOUNDARY = "unit_boundary_value"


@dataclass(frozen=True, eq=False)
class Spectrum:
    bc: str
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # (n_points, k), columns on the profile grid
    derivatives: np.ndarray
    grid: UniformGrid1D
    n: int
    c: float | None = None
    normalization: str = UNIT_L2
    error_estimates: np.ndarray = field(default=None, repr=False)
    levels: tuple = ()

    @property
    def negative_count(self) -> int:
        return int(np.sum(self.eigenvalues < 0))

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    def boundary_residuals(self) -> np.ndarray:
        """|psi(1)| (Dirichlet) or |psi'(1) + c psi(1)| (Robin) per column."""
        if self.bc == DIRICHLET:
            return np.abs(self.eigenfunctions[-1])
        return np.abs(self.derivatives[-1] + self.c * self.eigenfunctions[-1])

    def normalized(self, kind: str) -> "Spectrum":
        geom = BallGeometry(self.n)
        psi, dpsi = self.eigenfunctions.copy(), self.derivatives.copy()
        for j in range(self.k):
            if kind == UNIT_L2:
                s = math.sqrt(l2_ball(psi[:, j], self.grid, geom))
            elif kind == UNIT_BOUNDARY:
                if self.bc == DIRICHLET:
                    raise ValueError("Dirichlet eigenfunctions vanish on the boundary")
                s = psi[-1, j]
            else:
                raise ValueError(f"unknown normalization {kind!r}")
            psi[:, j] /= s
            dpsi[:, j] /= s
        return replace(self, eigenfunctions=psi, derivatives=dpsi, normalization=kind)


def l2_ball(values, grid: UniformGrid1D, geom: BallGeometry) -> float:
    """omega_n int_0^1 r^{n-1} values^2 dr."""
    return geom.omega_n * integrate_weighted(np.asarray(values) ** 2,
                                             geom.radial_weight(grid.nodes), grid)


def _fv_matrix(n: int, n_points: int, q: np.ndarray, c: float | None):
    """Symmetrised finite-volume matrix; returns (SymTridiag, cell volumes)."""
    h = 1.0 / (n_points - 1)
    r = np.linspace(0.0, 1.0, n_points)
    rh = r[:-1] + h / 2
    p = rh ** (n - 1)
    vol = np.empty(n_points)
    vol[0] = (h / 2) ** n / n
    vol[1:-1] = (rh[1:] ** n - rh[:-1] ** n) / n
    vol[-1] = (1.0 - rh[-1] ** n) / n
    d = np.zeros(n_points)
    d[:-1] += p / h
    d[1:] += p / h
    d -= vol * q
    e = -p / h
    if c is None:
        d, e, vol = d[:-1], e[:-1], vol[:-1]
    else:
        d[-1] += c
    s = np.sqrt(vol)
    return SymTridiag(d / vol, e / (s[:-1] * s[1:])), vol


def _fv_eigenvalues(profile, f, k, c, levels):
    out = []
    for m in levels:
        r = np.linspace(0.0, 1.0, m)
        phi, _ = eval_profile(profile, r)
        mat, _ = _fv_matrix(profile.n, m, f.df_ext(phi), c)
        out.append([lam for lam, _ in sym_tridiag_eigs(mat, k)])
    return np.array(out)


def _boundary_miss(profile, f, c, lam, substeps):
    p1, d1 = shoot_linear(profile, f, lam, substeps=substeps)
    return p1 if c is None else d1 + c * p1


def _polish(profile, f, c, vals, j, err, substeps):
    """Refine an extrapolated eigenvalue by shooting on the boundary condition."""
    lam = vals[j]
    gaps = [abs(vals[i] - lam) for i in (j - 1, j + 1) if 0 <= i < len(vals)]
    limit = 0.45 * min(gaps) if gaps else 1.0
    delta = min(max(100 * err, 1e-9 * max(1.0, abs(lam))), limit)
    miss = lambda x: _boundary_miss(profile, f, c, x, substeps)
    while True:
        lo, hi = lam - delta, lam + delta
        if np.sign(miss(lo)) != np.sign(miss(hi)):
            return find_root(miss, (lo, hi), tol=1e-13 * max(1.0, abs(lam)))
        if delta >= limit:
            return lam
        delta = min(10 * delta, limit)


def _spectrum(profile, f, geom, k, c, levels, substeps=4):
    base = profile.grid.n_points
    levels = levels or ((base - 1) + 1, 2 * (base - 1) + 1, 4 * (base - 1) + 1)
    raw = _fv_eigenvalues(profile, f, k, c, levels)
    vals, errs = [], []
    for j in range(k):
        lam, err = richardson(raw[:, j], orders=(2, 4))
        vals.append(lam)
        errs.append(err)
    psi = np.empty((base, k))
    dpsi = np.empty((base, k))
    for j in range(k):
        lam = _polish(profile, f, c, vals, j, errs[j], substeps)
        errs[j] = max(errs[j], abs(lam - vals[j]))
        vals[j] = lam
        psi[:, j], dpsi[:, j] = shoot_linear(profile, f, lam, return_all=True,
                                             substeps=substeps)
    spec = Spectrum(DIRICHLET if c is None else ROBIN, np.array(vals), psi, dpsi,
                    profile.grid, geom.n, c, UNIT_L2, np.array(errs), tuple(levels))
    return spec.normalized(UNIT_L2)


def dirichlet_spectrum(profile: RadialProfile, f: Nonlinearity, geom: BallGeometry,
                       k: int = 4, levels=None) -> Spectrum:
    """First ``k`` radial Dirichlet eigenpairs ``(gamma_Dj, z_j)``.

    Eigenfunctions are normalised to unit L2 norm on the ball and are
    positive at the centre.
    """
    return _spectrum(profile, f, geom, k, None, levels)


def robin_spectrum(profile: RadialProfile, f: Nonlinearity, geom: BallGeometry,
                   c: float, k: int = 4, levels=None) -> Spectrum:
    """First ``k`` eigenpairs with ``psi'(1) + c psi(1) = 0``.

    Returned with unit L2 normalisation; use
    ``spec.normalized(UNIT_BOUNDARY)`` for ``psi(1) = 1``.
    """
    return _spectrum(profile, f, geom, k, float(c), levels)


def quadratic_form_Q(profile: RadialProfile, f: Nonlinearity, geom: BallGeometry,
                     c: float, psi, dpsi=None, include_boundary: bool = True) -> float:
    """omega_n int r^{n-1} (psi'^2 - f'(phi_1) psi^2) dr + c omega_n psi(1)^2.

    With ``include_boundary=False`` the boundary term is dropped, which is
    the Dirichlet form for functions vanishing at r = 1. ``dpsi`` defaults
    to a sixth-order difference of ``psi``.
    """
    from .numerics import fd_derivative

    psi = np.asarray(psi, dtype=float)
    grid = profile.grid
    if dpsi is None:
        dpsi = fd_derivative(psi, grid.h)
    w = geom.radial_weight(grid.nodes)
    integrand = dpsi ** 2 - f.df_ext(profile.values) * psi ** 2
    val = geom.omega_n * integrate_weighted(integrand, w, grid)
    if include_boundary:
        val += c * geom.omega_n * psi[-1] ** 2
    return float(val)


def flux_derivative_identity(profile: RadialProfile, f: Nonlinearity, geom: BallGeometry, c: float):
    """Q(phi_1') and -(n-1) omega_n int r^{n-3} phi_1'^2 dr.

    The two agree for radial ground states; for n = 1 both vanish.
    """
    d1 = profile.derivative_values
    d2 = profile.second_derivative(f)
    q = quadratic_form_Q(profile, f, geom, c, d1, d2)
    n = geom.n
    if n == 1:
        return q, 0.0
    r = profile.r
    integrand = np.empty_like(r)
    # r^{n-3} phi'^2 ~ r^{n-1} (f(a)/n)^2 -> 0 at the centre
    integrand[0] = 0.0
    integrand[1:] = r[1:] ** (n - 3) * d1[1:] ** 2
    rhs = -(n - 1) * geom.omega_n * integrate_weighted(integrand, 1.0, profile.grid)
    return q, float(rhs)


@dataclass(frozen=True)
class AssumptionReport:
    passed: bool
    inconclusive: bool
    negative_count: int
    min_abs_eigenvalue: float
    max_error_estimate: float
    tol: float
    message: str

    def as_dict(self):
        return dict(self.__dict__)


def check_assumptions(dirichlet: Spectrum, tol: float = 1e-4) -> AssumptionReport:
    """Non-degeneracy of the radial Dirichlet linearisation.

    Passes when no computed eigenvalue lies within ``tol`` of zero and the
    extrapolation error estimates are below ``tol / 10``.
    """
    if dirichlet.bc != DIRICHLET:
        raise ValueError("check_assumptions expects a Dirichlet spectrum")
    gam = dirichlet.eigenvalues
    err = float(np.max(dirichlet.error_estimates))
    min_abs = float(np.min(np.abs(gam)))
    l = dirichlet.negative_count
    if l >= dirichlet.k:
        return AssumptionReport(False, True, l, min_abs, err, tol,
                                "all computed eigenvalues are negative; increase k")
    if err > tol / 10:
        return AssumptionReport(False, True, l, min_abs, err, tol,
                                f"inconclusive: extrapolation error {err:.2e} exceeds tol/10")
    if min_abs <= tol:
        return AssumptionReport(False, False, l, min_abs, err, tol,
                                f"Assumption 2 unverified: |gamma_D| = {min_abs:.2e} <= {tol:g}")
    return AssumptionReport(True, False, l, min_abs, err, tol,
                            f"nondegenerate, l = {l} negative eigenvalue(s)")


def robin_below_dirichlet(gamma_1: float, gamma_D1: float) -> bool:
    """gamma_1 < min(0, gamma_D1)."""
    return gamma_1 < min(0.0, gamma_D1)


def export_spectrum_csv(spec: Spectrum, path, eigenfunction_path=None) -> None:
    """Write ``(index, eigenvalue, error_estimate)`` rows, optionally the columns too."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue", "error_estimate"])
        for j, (lam, err) in enumerate(zip(spec.eigenvalues, spec.error_estimates), 1):
            w.writerow([j, repr(float(lam)), repr(float(err))])
    if eigenfunction_path is not None:
        with open(eigenfunction_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r"] + [f"psi_{j}" for j in range(1, spec.k + 1)])
            for r, row in zip(spec.grid.nodes, spec.eigenfunctions):
                w.writerow([repr(float(r))] + [repr(float(x)) for x in row])
