"""Nonlinear Dirichlet-to-Neumann operator on perturbed periodic cylinders.

The domain ``{|x| < 1 + v(t/T)}`` is pulled back to the straight cylinder
with ``rho = r / a(s)``, ``a = 1 + v``, where ``s = t/T`` has period one.
With ``b = a'/a`` and ``lambda = 1/T^2`` the equation
``Delta_x u + u_tt + f(u) = 0`` becomes

    (Phi_rr + (n-1)/rho Phi_r) / a^2
      + lambda (Phi_ss - 2 rho b Phi_rs + rho^2 b^2 Phi_rr + rho (b^2 - b') Phi_r)
      + f(Phi) = 0

(subscript r meaning d/d rho). The unknown is the correction
``Psi = Phi - phi_1`` so that the unperturbed cylinder is solved exactly.

Discretisation: second-order central differences in rho, cosine
collocation in s on the half-period nodes ``s_j = j/(2M)``. Boundary
fluxes use a ghost layer fixed by imposing the equation on rho = 1. The
error therefore expands in even powers of h, and quantities are
Richardson-extrapolated over three radial grids.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve, solve_banded
from scipy.sparse import coo_matrix

from .ball_spectra import Spectrum
from .cylinder_spectra import ConditioningError, sigma_k
from .nonlinearity import Nonlinearity
from .numerics import BallGeometry, ConvergenceError, integrate_weighted, richardson_array
from .radial_ball import PositivityError, RadialProfile, eval_profile


class DomainValidityError(ValueError):
    """The perturbed radius 1 + v is not positive or the solution lost positivity."""


# -- periodic profiles ---------------------------------------------------------

@dataclass(frozen=True)
class EvenFourierProfile:
    """``v(t) = sum_k v_k cos(2 pi k t)`` for k = 1..K (no constant term)."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=float)).copy()
        if c.ndim != 1:
            raise ValueError("coefficients must be a vector")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def zero(cls, K: int = 1) -> "EvenFourierProfile":
        return cls(np.zeros(K))

    @classmethod
    def mode(cls, k: int, amplitude: float = 1.0, K: int | None = None):
        c = np.zeros(max(k, K or k))
        c[k - 1] = amplitude
        return cls(c)

    @property
    def K(self) -> int:
        return len(self.coefficients)

    @property
    def sup_bound(self) -> float:
        return float(np.sum(np.abs(self.coefficients)))

    def padded(self, K: int) -> "EvenFourierProfile":
        c = np.zeros(max(K, self.K))
        c[: self.K] = self.coefficients
        return EvenFourierProfile(c[:K] if K < self.K else c)

    def __call__(self, t, deriv: int = 0):
        t = np.asarray(t, dtype=float)
        k = np.arange(1, self.K + 1)
        w = 2 * math.pi * k
        arg = np.multiply.outer(t, w)
        if deriv == 0:
            return np.cos(arg) @ self.coefficients
        if deriv == 1:
            return -np.sin(arg) @ (w * self.coefficients)
        if deriv == 2:
            return -np.cos(arg) @ (w ** 2 * self.coefficients)
        raise ValueError("deriv must be 0, 1 or 2")

    def __add__(self, other):
        K = max(self.K, other.K)
        return EvenFourierProfile(self.padded(K).coefficients + other.padded(K).coefficients)

    def __mul__(self, s: float):
        return EvenFourierProfile(self.coefficients * float(s))

    __rmul__ = __mul__


# -- collocation in s ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CosineCollocation:
    """Even 1-periodic functions sampled at ``s_j = j/(2M)``, j = 0..M."""

    M: int

    def __post_init__(self):
        M = self.M
        j = np.arange(M + 1)[:, None]
        k = np.arange(M + 1)[None, :]
        cmat = np.cos(np.pi * j * k / M)
        smat = np.sin(np.pi * j * k / M)
        cinv = np.linalg.inv(cmat)
        w = 2 * np.pi * np.arange(M + 1)
        object.__setattr__(self, "to_coeffs", cinv)
        object.__setattr__(self, "d1", smat @ np.diag(-w) @ cinv)       # even -> odd
        object.__setattr__(self, "d2", cmat @ np.diag(-w ** 2) @ cinv)  # even -> even
        tw = np.full(M + 1, 1.0 / M)
        tw[[0, -1]] *= 0.5
        object.__setattr__(self, "weights", tw)  # mean over a period

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.M + 1) / (2 * self.M)

    def mean(self, values, weight=None) -> float:
        if weight is None:
            return float(self.weights @ values)
        return float(self.weights @ (weight * values) / (self.weights @ weight))


# -- fields and results --------------------------------------------------------

@dataclass(frozen=True)
class DtNGrid:
    n_radial: int = 101       # coarsest radial level; the others are 2x and 4x finer
    M: int = 16               # half-period collocation nodes minus one
    levels: int = 3
    newton_tol: float = 1e-10
    max_newton: int = 50

    def radial_levels(self):
        return tuple(2 ** i * (self.n_radial - 1) + 1 for i in range(self.levels))


@dataclass(frozen=True, eq=False)
class CylinderField:
    r: np.ndarray               # radial nodes (pulled-back coordinate rho)
    t: np.ndarray               # half-period nodes s_j in [0, 1/2]
    values: np.ndarray          # Phi, shape (len(r), len(t))
    T: float
    v: EvenFourierProfile
    residual: float
    iterations: int
    converged: bool = True
    flux_correction: np.ndarray = field(default=None, repr=False)  # Psi_rho(1, s_j)
    boundary_flux: np.ndarray = field(default=None, repr=False)    # d_nu u(s_j)
    weight: np.ndarray = field(default=None, repr=False)           # surface element

    def full_period(self):
        """(t, values) on the periodic nodes ``j/(2M)``, j = 0..2M-1."""
        M = len(self.t) - 1
        t = np.arange(2 * M) / (2 * M)
        vals = np.concatenate([self.values, self.values[:, -2:0:-1]], axis=1)
        return t, vals

    def physical_radius(self) -> np.ndarray:
        """``(1 + v(s_j)) * rho`` on the grid."""
        return np.outer(self.r, 1.0 + self.v(self.t))


@dataclass(frozen=True, eq=False)
class DtNResult:
    g: EvenFourierProfile
    mean_flux: float
    residual: float
    error_estimate: float = 0.0
    flux_deviation: float = 0.0     # max over nodes of |d_nu u - mean|
    levels: tuple = ()
    fields: tuple = field(default=(), repr=False)

    def as_dict(self):
        return {"coefficients": [float(x) for x in self.g.coefficients],
                "mean_flux": self.mean_flux, "residual": self.residual,
                "error_estimate": self.error_estimate,
                "flux_deviation": self.flux_deviation, "levels": list(self.levels)}


# -- discretisation ------------------------------------------------------------

def _coefficients(v: EvenFourierProfile, col: CosineCollocation):
    s = col.nodes
    a = 1.0 + v(s)
    if np.any(a <= 0):
        raise DomainValidityError("1 + v must stay positive")
    b = v(s, 1) / a
    db = v(s, 2) / a - b ** 2
    return a, b, db


def _profile_on(profile: RadialProfile, f: Nonlinearity, m: int):
    cache = profile.__dict__.setdefault("_dtn_cache", {})
    key = (id(f), m)
    if key not in cache:
        r = np.linspace(0.0, 1.0, m)
        phi, dphi = eval_profile(profile, r)
        d2 = np.empty(m)
        d2[0] = -float(f.f_ext(phi[0])) / profile.n
        d2[1:] = -f.f_ext(phi[1:]) - (profile.n - 1) * dphi[1:] / r[1:]
        cache[key] = (f, r, phi, dphi, d2)
    return cache[key][1:]


def pulled_back_operator(n: int, m: int, v: EvenFourierProfile, T: float,
                         col: CosineCollocation):
    """Sparse matrix of the pulled-back linear operator.

    Rows are the nodes ``(i, j)``, i = 0..m-2, in radial-major order; columns
    include the boundary layer i = m-1 as the last ``M+1`` entries.
    """
    M1 = col.M + 1
    h = 1.0 / (m - 1)
    lam = 1.0 / T ** 2
    a, b, db = _coefficients(v, col)
    rows, cols, vals = [], [], []

    def put(r_idx, c_idx, val):
        rows.append(r_idx)
        cols.append(c_idx)
        vals.append(val)

    jj = np.arange(M1)
    JJ, JP = np.meshgrid(jj, jj, indexing="ij")
    d1, d2 = col.d1, col.d2
    # origin: Laplacian -> n Phi_rr, rho-weighted terms vanish
    put(jj, jj, -2 * n / (a ** 2 * h * h))
    put(jj, M1 + jj, 2 * n / (a ** 2 * h * h))
    put(JJ.ravel(), JP.ravel(), lam * d2.ravel())
    for i in range(1, m - 1):
        rho = i * h
        A = 1 / a ** 2 + lam * b ** 2 * rho ** 2
        B = (n - 1) / (a ** 2 * rho) + lam * rho * (b ** 2 - db)
        C = -2 * lam * rho * b
        base, lo, hi = i * M1, (i - 1) * M1, (i + 1) * M1
        put(base + jj, lo + jj, A / h ** 2 - B / (2 * h))
        put(base + jj, base + jj, -2 * A / h ** 2)
        put(base + jj, hi + jj, A / h ** 2 + B / (2 * h))
        mix = (C[:, None] * d1 / (2 * h)).ravel()
        put(base + JJ.ravel(), hi + JP.ravel(), mix)
        put(base + JJ.ravel(), lo + JP.ravel(), -mix)
        put(base + JJ.ravel(), base + JP.ravel(), lam * d2.ravel())
    rows, cols, vals = (np.concatenate([np.atleast_1d(x) for x in z]) for z in (rows, cols, vals))
    return coo_matrix((vals, (rows, cols)), shape=((m - 1) * M1, m * M1)).tocsr()


def _to_banded(mat, bw: int):
    coo = mat.tocoo()
    N = mat.shape[0]
    ab = np.zeros((2 * bw + 1, N))
    np.add.at(ab, (bw + coo.row - coo.col, coo.col), coo.data)
    return ab


def _source(n, r, phi, dphi, d2phi, f, v, T, col):
    a, b, db = _coefficients(v, col)
    lam = 1.0 / T ** 2
    rr = r[:-1, None]
    return (-f.f_ext(phi[:-1])[:, None] / a ** 2
            + lam * (rr ** 2 * b ** 2 * d2phi[:-1, None] + rr * (b ** 2 - db) * dphi[:-1, None]))


def _ghost_flux(n, h, psi_last, extra, v, T, col):
    """Psi_rho(1, s_j) from the equation imposed on rho = 1.

    ``psi_last`` is Psi at rho = 1 - h and ``extra`` the remaining,
    derivative-free part of the equation at rho = 1.
    """
    a, b, db = _coefficients(v, col)
    lam = 1.0 / T ** 2
    A = 1 / a ** 2 + lam * b ** 2
    B = (n - 1) / a ** 2 + lam * (b ** 2 - db)
    # A (2 psi_last + 2 h D)/h^2 + B D - 2 lam b (d1 D) + extra = 0
    mat = np.diag(2 * A / h + B) - 2 * lam * b[:, None] * col.d1
    rhs = -(2 * A * psi_last / h ** 2 + extra)
    return solve(mat, rhs)


@dataclass(frozen=True, eq=False)
class _Level:
    m: int
    r: np.ndarray
    psi: np.ndarray       # (m, M+1), zero on the last row
    dflux: np.ndarray     # Psi_rho at rho = 1
    residual: float
    iterations: int


def _solve_level(profile, f, m, v, T, col, tol, max_iter, psi0=None):
    n = profile.n
    r, phi, dphi, d2phi = _profile_on(profile, f, m)
    M1 = col.M + 1
    h = 1.0 / (m - 1)
    L = pulled_back_operator(n, m, v, T, col)[:, : (m - 1) * M1]
    bw = 2 * M1 - 1
    band = _to_banded(L, bw)
    src = _source(n, r, phi, dphi, d2phi, f, v, T, col).ravel()
    base = np.repeat(phi[:-1], M1)
    psi = np.zeros((m - 1) * M1) if psi0 is None else psi0.copy()

    def resid(x):
        return L @ x + src + f.f_ext(base + x)

    res = resid(psi)
    rn = float(np.max(np.abs(res)))
    it = 0
    while rn > tol:
        if it >= max_iter:
            raise ConvergenceError(f"Newton stalled after {it} steps, residual {rn:.3e}")
        jac = band.copy()
        jac[bw] += f.df_ext(base + psi)
        try:
            step = solve_banded((bw, bw), jac, -res, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise ConditioningError(f"singular Jacobian: {exc}") from exc
        if not np.all(np.isfinite(step)):
            raise ConditioningError("non-finite Newton step")
        t = 1.0
        while True:
            trial = psi + t * step
            res_t = resid(trial)
            rn_t = float(np.max(np.abs(res_t)))
            if rn_t < rn or t < 1e-4:
                break
            t *= 0.5
        if rn_t >= rn:
            # no decrease at roundoff level: accept if already tiny
            if rn < 1e3 * tol:
                break
            raise ConvergenceError(f"damped Newton failed to decrease residual {rn:.3e}")
        psi, res, rn = trial, res_t, rn_t
        it += 1
    grid_psi = np.zeros((m, M1))
    grid_psi[:-1] = psi.reshape(m - 1, M1)
    a, b, db = _coefficients(v, col)
    lam = 1.0 / T ** 2
    # at rho = 1: Psi = 0 so the s-derivatives vanish and f(phi_1 + Psi) = f(0)
    extra = (-f.f_ext(phi[-1]) / a ** 2
             + lam * (b ** 2 * d2phi[-1] + (b ** 2 - db) * dphi[-1]) + f.f_ext(phi[-1]))
    dflux = _ghost_flux(n, h, grid_psi[-2], extra, v, T, col)
    return _Level(m, r, grid_psi, dflux, rn, it)


def solve_perturbed_dirichlet(profile0: RadialProfile, f: Nonlinearity, geom: BallGeometry,
                              v: EvenFourierProfile, T: float, grid: DtNGrid = DtNGrid(),
                              t_bar_value: float = math.inf, check_positive: bool = True):
    """Newton solve of the pulled-back Dirichlet problem on every radial level.

    Returns the list of :class:`CylinderField` (coarse to fine). Each level
    starts from Psi = 0, i.e. from phi_1 on every slice.

    Raises
    ------
    DomainValidityError
        ``sum |v_k| >= 1`` or a converged field is not positive inside.
    ConvergenceError, ConditioningError
        Newton failure or a singular linearisation.
    """
    if not T < t_bar_value:
        raise ValueError(f"T = {T} must lie below T_bar = {t_bar_value}")
    if v.sup_bound >= 1:
        raise DomainValidityError(f"sum |v_k| = {v.sup_bound:.3g} >= 1")
    col = CosineCollocation(grid.M)
    fields = []
    for m in grid.radial_levels():
        lev = _solve_level(profile0, f, m, v, T, col, grid.newton_tol, grid.max_newton)
        _, phi, dphi, _ = _profile_on(profile0, f, m)
        values = phi[:, None] + lev.psi
        if check_positive and np.any(values[:-1] <= 0):
            raise DomainValidityError("converged field is not positive inside the domain")
        a = 1.0 + v(col.nodes)
        slope = np.sqrt(1 + (v(col.nodes, 1) / T) ** 2)
        flux = (dphi[-1] + lev.dflux) / a * slope
        weight = a ** (geom.n - 1) * slope
        fields.append(CylinderField(lev.r, col.nodes, values, float(T), v, lev.residual,
                                    lev.iterations, True, lev.dflux, flux, weight))
    return fields


def _g_values(fld: CylinderField, col: CosineCollocation):
    mean = col.mean(fld.boundary_flux, fld.weight)
    return fld.boundary_flux - mean, mean


def g_operator(fields, K: int | None = None) -> DtNResult:
    """G(v, T): boundary-flux deviation from its surface mean, as cosine coefficients.

    ``fields`` is the level list from :func:`solve_perturbed_dirichlet` (a
    single field is accepted and used without extrapolation).
    """
    if isinstance(fields, CylinderField):
        fields = [fields]
    if not all(fl.converged for fl in fields):
        raise ValueError("field is not converged")
    col = CosineCollocation(len(fields[0].t) - 1)
    coeffs, devs, means = [], [], []
    for fl in fields:
        g, mean = _g_values(fl, col)
        coeffs.append((col.to_coeffs @ g)[1:])
        devs.append(g)
        means.append(mean)
    best = richardson_array(coeffs)
    dev = richardson_array(devs)
    mean = float(richardson_array([np.array([x]) for x in means])[0])
    err = float(np.max(np.abs(best - richardson_array(coeffs[:-1])))) if len(coeffs) > 1 else 0.0
    K = K or len(best)
    return DtNResult(EvenFourierProfile(best[:K]), mean,
                     float(max(fl.residual for fl in fields)), err,
                     float(np.max(np.abs(dev))), tuple(len(fl.r) for fl in fields),
                     tuple(fields))


def evaluate_g(profile, f, geom, v, T, grid: DtNGrid = DtNGrid(), K=None, **kw) -> DtNResult:
    return g_operator(solve_perturbed_dirichlet(profile, f, geom, v, T, grid, **kw), K)


# -- the linearised operator on the 2D grid -------------------------------------

def _linear_level(profile, f, m, w: EvenFourierProfile, T, col):
    """psi with Delta psi + f'(phi_1) psi + lambda psi_ss = 0, psi = w on rho = 1."""
    n = profile.n
    r, phi, _, _ = _profile_on(profile, f, m)
    M1 = col.M + 1
    h = 1.0 / (m - 1)
    zero = EvenFourierProfile.zero()
    L = pulled_back_operator(n, m, zero, T, col)
    Li, Lb = L[:, : (m - 1) * M1], L[:, (m - 1) * M1:]
    wb = w(col.nodes)
    bw = 2 * M1 - 1
    band = _to_banded(Li, bw)
    band[bw] += np.repeat(f.df_ext(phi[:-1]), M1)
    try:
        sol = solve_banded((bw, bw), band, -(Lb @ wb), check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConditioningError(f"linear cylinder problem singular: {exc}") from exc
    if not np.all(np.isfinite(sol)) or np.max(np.abs(sol)) > 1e8 * max(1.0, np.max(np.abs(wb))):
        raise ConditioningError("linear cylinder problem nearly singular")
    psi = np.vstack([sol.reshape(m - 1, M1), wb])
    lam = 1.0 / T ** 2
    # equation on rho = 1 with ghost layer; psi_ss there is known from w
    extra = lam * (col.d2 @ wb) + f.df_ext(phi[-1]) * wb - 2 * wb / h ** 2
    A = 1.0
    mat = np.eye(M1) * (2 * A / h + (n - 1))
    dflux = solve(mat, -(2 * A * psi[-2] / h ** 2 + extra))
    return psi, dflux


@dataclass(frozen=True, eq=False)
class LinearCylinderSolution:
    w: EvenFourierProfile
    T: float
    r: np.ndarray
    t: np.ndarray
    psi: np.ndarray          # finest level, (len(r), M+1)
    flux: np.ndarray         # extrapolated psi_rho(1, s_j)
    ht_values: np.ndarray    # extrapolated H_T(w)(s_j)


def linear_cylinder_solve(profile, f, geom, w: EvenFourierProfile, T: float, c: float,
                          grid: DtNGrid = DtNGrid()) -> LinearCylinderSolution:
    col = CosineCollocation(grid.M)
    if w.K > grid.M:
        raise ValueError(f"w has {w.K} modes but collocation resolves only M = {grid.M}")
    fluxes, psi = [], None
    for m in grid.radial_levels():
        psi, dflux = _linear_level(profile, f, m, w, T, col)
        fluxes.append(dflux)
    flux = richardson_array(fluxes)
    return LinearCylinderSolution(w, float(T), np.linspace(0, 1, len(psi)), col.nodes, psi,
                                  flux, flux + c * w(col.nodes))


def ht_apply_2d(profile, f, geom, w: EvenFourierProfile, T: float, c: float,
                grid: DtNGrid = DtNGrid()) -> EvenFourierProfile:
    """H_T(w) from a 2D solve on the straight cylinder, as cosine coefficients."""
    sol = linear_cylinder_solve(profile, f, geom, w, T, c, grid)
    col = CosineCollocation(grid.M)
    coeffs = (col.to_coeffs @ sol.ht_values)[1:]
    return EvenFourierProfile(coeffs[: max(w.K, 1)])


def ht_apply_modes(profile, f, w: EvenFourierProfile, T: float, c: float) -> EvenFourierProfile:
    """H_T(w) assembled from the separated-mode fluxes sigma_k(T)."""
    out = [sigma_k(profile, f, c, k, T) * wk if wk != 0 else 0.0
           for k, wk in enumerate(w.coefficients, 1)]
    return EvenFourierProfile(np.array(out, dtype=float))


def inner(v: EvenFourierProfile, w: EvenFourierProfile) -> float:
    """int_0^1 v w dt for cosine series."""
    K = min(v.K, w.K)
    return 0.5 * float(v.coefficients[:K] @ w.coefficients[:K])


# -- checks ----------------------------------------------------------------------

@dataclass(frozen=True)
class LinearizationReport:
    eps: tuple
    r: tuple
    ratios: tuple
    orders: tuple
    passed: bool
    min_order: float

    def as_dict(self):
        return dict(self.__dict__)


def fd_linearization_check(profile, f, geom, w: EvenFourierProfile, T: float,
                           eps_list=(1e-2, 1e-3, 1e-4), grid: DtNGrid = DtNGrid(),
                           c: float | None = None, min_order: float = 0.9) -> LinearizationReport:
    """r(eps) = ||G(eps w, T)/eps + phi_1'(1) H_T(w)|| over eps_list.

    H_T comes from the separated-mode path, so the check ties the nonlinear
    2D solver to the independent one-dimensional computation. The norm is
    the maximum over the cosine coefficients resolved by the grid.
    """
    c = profile.robin_c if c is None else c
    K = grid.M
    target = -profile.d_at_1 * ht_apply_modes(profile, f, w, T, c).padded(K).coefficients
    rs = []
    for eps in eps_list:
        g = evaluate_g(profile, f, geom, w * eps, T, grid).g.padded(K).coefficients
        rs.append(float(np.max(np.abs(g / eps - target))))
    eps = np.asarray(eps_list, dtype=float)
    r = np.asarray(rs)
    orders = tuple(float(np.log(r[i] / r[i + 1]) / np.log(eps[i] / eps[i + 1]))
                   for i in range(len(r) - 1))
    ratios = tuple(float(x) for x in r / eps)
    mo = min(orders) if orders else float("nan")
    passed = bool(orders) and mo >= min_order and max(ratios) < 1e6
    return LinearizationReport(tuple(float(e) for e in eps), tuple(rs), ratios, orders,
                               passed, float(mo))


def self_adjointness_defect(profile, f, geom, w1, w2, T, c, grid: DtNGrid = DtNGrid()) -> float:
    """|<H_T w1, w2> - <H_T w2, w1>| with the 2D operator."""
    K = max(w1.K, w2.K)
    h1 = ht_apply_2d(profile, f, geom, w1.padded(K), T, c, grid)
    h2 = ht_apply_2d(profile, f, geom, w2.padded(K), T, c, grid)
    return abs(inner(h1, w2.padded(K)) - inner(h2, w1.padded(K)))


@dataclass(frozen=True)
class OrthogonalityReport:
    z_integrals: tuple
    flux_integral: float
    passed: bool
    tol: float

    def as_dict(self):
        return dict(self.__dict__)


def orthogonality_check(sol: LinearCylinderSolution, dirichlet: Spectrum, profile: RadialProfile,
                        geom: BallGeometry, tol: float = 1e-8) -> OrthogonalityReport:
    """int_C psi_v z_j and int_{dC} d_nu psi_v over one period.

    Quadrature: Simpson in r (weight omega_n r^{n-1}) on the solution's
    finest grid, trapezoid over the full period in t.
    """
    from .numerics import UniformGrid1D

    m = len(sol.r)
    col = CosineCollocation(len(sol.t) - 1)
    grid = UniformGrid1D(m)
    zs = []
    for j in range(dirichlet.k):
        zj, _ = _interp_columns(dirichlet, profile, sol.r, j)
        per_t = np.array([integrate_weighted(sol.psi[:, q] * zj, geom.radial_weight(sol.r), grid)
                          for q in range(len(sol.t))])
        zs.append(float(geom.omega_n * sol.T * col.mean(per_t)))
    flux_int = float(geom.omega_n * sol.T * col.mean(sol.flux))
    ok = max([abs(x) for x in zs] + [abs(flux_int)]) <= tol
    return OrthogonalityReport(tuple(zs), flux_int, bool(ok), tol)


def _interp_columns(spec: Spectrum, profile: RadialProfile, r, j):
    from scipy.interpolate import CubicHermiteSpline

    sp = CubicHermiteSpline(spec.grid.nodes, spec.eigenfunctions[:, j], spec.derivatives[:, j])
    return sp(r), sp(r, 1)


def pullback_check(n: int, v: EvenFourierProfile, T: float, m: int, M: int = 16):
    """Max error of the discrete pulled-back operator on a smooth test function.

    Uses ``F = exp(-|x|^2) (1 + 0.3 cos 2 pi s)`` whose transformed Laplacian
    ``((4 r^2 - 2n) (1 + 0.3 cos) - 0.3 lambda (2 pi)^2 cos) exp(-r^2)`` is
    known in closed form at ``r = (1 + v) rho``.
    """
    col = CosineCollocation(M)
    s = col.nodes
    rho = np.linspace(0.0, 1.0, m)
    a = 1.0 + v(s)
    R = np.outer(rho, a)
    mod = 1 + 0.3 * np.cos(2 * np.pi * s)
    F = np.exp(-R ** 2) * mod
    lam = 1.0 / T ** 2
    exact = np.exp(-R ** 2) * ((4 * R ** 2 - 2 * n) * mod
                               - 0.3 * lam * (2 * np.pi) ** 2 * np.cos(2 * np.pi * s))
    L = pulled_back_operator(n, m, v, T, col)
    got = (L @ F.ravel()).reshape(m - 1, M + 1)
    return float(np.max(np.abs(got - exact[:-1])))


# -- exports ----------------------------------------------------------------------

def export_field_csv(fld: CylinderField, path) -> None:
    """Rows (r, t, u) over the full period in physical radius."""
    t, vals = fld.full_period()
    a = 1.0 + fld.v(t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "t", "u"])
        for q, tq in enumerate(t):
            for i, rho in enumerate(fld.r):
                w.writerow([repr(float(rho * a[q])), repr(float(tq * fld.T)), repr(float(vals[i, q]))])


def export_dtn_json(res: DtNResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(res.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
