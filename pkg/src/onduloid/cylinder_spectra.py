"""Linear analysis on the straight cylinder B x (0, T).

On cosine modes ``cos(2 pi k t / T)`` the linearised Dirichlet-to-Neumann
operator H_T is diagonal. Mode k needs the radial solution of

    rho'' + (n-1)/r rho' + (f'(phi_1) - (2 pi k / T)^2) rho = 0,   rho(1) = 1,

and contributes the eigenvalue ``sigma_k(T) = rho_k'(1) + c``. This module
computes these fluxes, the curve sigma(T), the thresholds T_bar and T*,
the closed-form minima (alpha, beta) and the transversality derivative.

Fluxes come from a second-order central-difference solve on three nested
grids. The boundary derivative is read off a ghost node obtained by imposing
the equation at r = 1, so the error expands in even powers of h and two
Richardson steps remove the h^2 and h^4 terms.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .ball_spectra import Spectrum
from .nonlinearity import Nonlinearity
from .numerics import BallGeometry, find_root, integrate_weighted, richardson
from .radial_ball import RadialProfile, eval_profile, shoot_linear


class ConditioningError(ArithmeticError):
    """The shifted radial operator is (nearly) singular at this period."""


class InconsistencyError(RuntimeError):
    """A numerical result contradicts a structural identity that must hold."""


RHO_BLOWUP = 1e8


def t_bar(gamma_D1: float) -> float:
    """Period threshold ``2 pi / sqrt(-gamma_D1)``, infinite when gamma_D1 > 0."""
    if gamma_D1 == 0:
        raise ValueError("gamma_D1 = 0: the Dirichlet linearisation is degenerate")
    if gamma_D1 > 0:
        return math.inf
    return 2 * math.pi / math.sqrt(-gamma_D1)


def t_star(gamma_1: float) -> float:
    """Bifurcation period ``2 pi / sqrt(-gamma_1)``."""
    if not gamma_1 < 0:
        raise InconsistencyError(f"gamma_1 = {gamma_1} >= 0; expected a negative Robin eigenvalue")
    return 2 * math.pi / math.sqrt(-gamma_1)


def _potential_on(profile: RadialProfile, f: Nonlinearity, m: int) -> np.ndarray:
    cache = profile.__dict__.setdefault("_fd_potential_cache", {})
    key = (id(f), m)
    if key not in cache:
        phi, _ = eval_profile(profile, np.linspace(0.0, 1.0, m))
        cache[key] = (f, f.df_ext(phi))
    return cache[key][1]


def fd_levels(profile: RadialProfile):
    m = profile.grid.n_points
    return (m, 2 * m - 1, 4 * m - 3)


def _fd_mode(n: int, q: np.ndarray, kappa2: float):
    """Central-difference solve for one grid; returns (rho, flux)."""
    m = len(q)
    h = 1.0 / (m - 1)
    r = np.linspace(0.0, 1.0, m)
    ri = r[1:-1]
    lo = 1 / h ** 2 - (n - 1) / (2 * h * ri)
    up = 1 / h ** 2 + (n - 1) / (2 * h * ri)
    diag = np.empty(m - 1)
    diag[0] = -2 * n / h ** 2 + q[0] - kappa2
    diag[1:] = -2 / h ** 2 + q[1:-1] - kappa2
    ab = np.zeros((3, m - 1))
    ab[0, 1] = 2 * n / h ** 2
    ab[0, 2:] = up[:-1]
    ab[1] = diag
    ab[2, :-1] = lo
    rhs = np.zeros(m - 1)
    rhs[-1] = -up[-1]
    try:
        rho = solve_banded((1, 1), ab, rhs, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConditioningError(f"banded solve failed: {exc}") from exc
    if not np.all(np.isfinite(rho)) or np.max(np.abs(rho)) > RHO_BLOWUP:
        raise ConditioningError(
            f"shifted operator nearly singular (max|rho| = {np.max(np.abs(rho)):.3e})")
    rho = np.append(rho, 1.0)
    # ghost node rho_{m}: impose the equation at r = 1 and eliminate it
    flux = (2 - 2 * rho[-2] - h * h * (q[-1] - kappa2)) / (2 * h + (n - 1) * h * h)
    return rho, flux


def mode_flux(profile: RadialProfile, f: Nonlinearity, k: int, T: float,
              levels=None):
    """Richardson-extrapolated ``rho_k'(1)`` and its error estimate."""
    if k < 0 or T <= 0:
        raise ValueError("need k >= 0 and T > 0")
    kappa2 = (2 * math.pi * k / T) ** 2
    levels = levels or fd_levels(profile)
    fluxes = [_fd_mode(profile.n, _potential_on(profile, f, m), kappa2)[1] for m in levels]
    return richardson(fluxes, orders=(2, 4))


@dataclass(frozen=True, eq=False)
class ModeProfile:
    k: int
    T: float
    r: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    flux: float
    sigma_k: float
    flux_error: float = 0.0

    def residual(self, profile: RadialProfile, f: Nonlinearity) -> float:
        """Max interior residual of the mode ODE (sixth-order differences)."""
        from .numerics import fd_derivative

        h = self.r[1] - self.r[0]
        d2 = fd_derivative(self.derivatives, h)
        kappa2 = (2 * math.pi * self.k / self.T) ** 2
        q = f.df_ext(profile.values) - kappa2
        res = d2[1:-1] + (profile.n - 1) * self.derivatives[1:-1] / self.r[1:-1] \
            + q[1:-1] * self.values[1:-1]
        return float(np.max(np.abs(res)) / max(1.0, np.max(np.abs(self.values))))


def mode_solution(profile: RadialProfile, f: Nonlinearity, geom: BallGeometry,
                  k: int, T: float, c: float | None = None) -> ModeProfile:
    """Separated-mode solution rho_k with rho_k(1) = 1.

    Node values and derivatives are integrated with RK4 (four substeps per
    cell); the flux is the extrapolated finite-difference value. ``c``
    defaults to the profile's Robin constant.

    Raises
    ------
    ConditioningError
        When ``-(2 pi k / T)^2`` sits on a Dirichlet eigenvalue.
    """
    c = profile.robin_c if c is None else c
    flux, err = mode_flux(profile, f, k, T)
    kappa2 = (2 * math.pi * k / T) ** 2
    psi, dpsi = shoot_linear(profile, f, -kappa2, return_all=True, substeps=4)
    scale = np.max(np.abs(psi))
    if abs(psi[-1]) < scale / RHO_BLOWUP:
        raise ConditioningError(f"psi(1) = {psi[-1]:.3e} relative to max {scale:.3e}")
    return ModeProfile(k, float(T), profile.r, psi / psi[-1], dpsi / psi[-1],
                       float(flux), float(flux + c), float(err))


def sigma_k(profile: RadialProfile, f: Nonlinearity, c: float, k: int, T: float) -> float:
    return mode_flux(profile, f, k, T)[0] + c


@dataclass(frozen=True, eq=False)
class SigmaCurve:
    T_values: np.ndarray
    sigma_values: np.ndarray
    minimizing_k: np.ndarray
    sigma_table: np.ndarray = field(repr=False)  # (len(T), k_max), column j is mode j+1
    t_bar: float = math.inf

    def sign_changes(self) -> np.ndarray:
        """Indices i with a sign change between T_values[i] and T_values[i+1]."""
        s = np.sign(self.sigma_values)
        return np.nonzero(s[:-1] * s[1:] < 0)[0]

    def dominance_violations(self) -> list:
        """T values where some mode k >= 2 lies below mode 1."""
        if self.sigma_table.shape[1] < 2:
            return []
        bad = np.any(self.sigma_table[:, 1:] < self.sigma_table[:, :1], axis=1)
        return [float(t) for t in self.T_values[bad]]


def sigma_curve(profile: RadialProfile, f: Nonlinearity, geom: BallGeometry, c: float,
                T_range, k_max: int = 8, gamma_D1: float | None = None,
                executor=None) -> SigmaCurve:
    """sigma(T) = min over 1 <= k <= k_max of sigma_k(T) on the given periods.

    ``gamma_D1`` (if given) is used to reject periods at or beyond T_bar.
    ``executor`` may be any object with an ordered ``map``.
    """
    T = np.asarray(T_range, dtype=float).ravel()
    tb = math.inf if gamma_D1 is None else t_bar(gamma_D1)
    if np.any(T >= tb) or np.any(T <= 0):
        raise ValueError(f"all periods must lie in (0, T_bar = {tb:g})")
    row = lambda t: [sigma_k(profile, f, c, k, t) for k in range(1, k_max + 1)]
    mapper = map if executor is None else executor.map
    table = np.array(list(mapper(row, T)), dtype=float).reshape(len(T), k_max)
    if len(T):
        kmin = np.argmin(table, axis=1) + 1
        smin = table[np.arange(len(T)), kmin - 1]
    else:
        kmin, smin = np.zeros(0, dtype=int), np.zeros(0)
    return SigmaCurve(T, smin, kmin, table, tb)


def find_t_star_by_root(profile: RadialProfile, f: Nonlinearity, geom: BallGeometry,
                        c: float, gamma_D1: float | None = None, tol: float = 1e-12) -> float:
    """Root of ``T -> sigma_1(T)`` on (0, T_bar), located without gamma_1.

    Scans the frequency ``kappa = 2 pi / T`` downward from a large value
    (where sigma_1 ~ kappa > 0) towards ``sqrt(-gamma_D1)`` (or 0) and
    refines the first sign change.
    """
    kap_min = 0.0 if gamma_D1 is None or gamma_D1 > 0 else math.sqrt(-gamma_D1)
    g = lambda kap: sigma_k(profile, f, c, 1, 2 * math.pi / kap)
    kap_hi = max(4.0 * kap_min, 8.0)
    while g(kap_hi) <= 0:
        kap_hi *= 2
        if kap_hi > 1e4:
            raise InconsistencyError("sigma_1 stays nonpositive at short periods")
    # geometric approach towards kap_min, plus kap -> 0 when T_bar is infinite
    span = kap_hi - kap_min
    kaps = kap_min + span * np.geomspace(1.0, 1e-6, 121)
    prev_k, prev_v = kap_hi, g(kap_hi)
    for kap in kaps[1:]:
        try:
            val = g(kap)
        except ConditioningError:
            break
        if np.sign(val) != np.sign(prev_v):
            root_kap = find_root(g, (kap, prev_k), tol=tol * 1e-2)
            return 2 * math.pi / root_kap
        prev_k, prev_v = kap, val
    raise InconsistencyError("sigma_1(T) has no sign change on (0, T_bar)")


def alpha_beta(dirichlet: Spectrum, gamma_1: float, T: float):
    """The two closed-form minima and which branch is active.

    Returns
    -------
    (alpha, beta, info)
        ``info`` records the enumerated candidates and the active branch of
        each minimum (``"D_l+1"`` or ``"shifted"``).
    """
    l = dirichlet.negative_count
    if dirichlet.k < l + 1:
        raise ValueError("spectrum must contain gamma_D(l+1)")
    shift = 4 * math.pi ** 2 / T ** 2
    g_next = float(dirichlet.eigenvalues[l])
    cand_a = (g_next, float(dirichlet.eigenvalues[0]) + shift)
    cand_b = (g_next, gamma_1 + shift)
    alpha, beta = min(cand_a), min(cand_b)
    info = {
        "alpha_candidates": cand_a, "beta_candidates": cand_b,
        "alpha_branch": "D_l+1" if cand_a[0] <= cand_a[1] else "shifted",
        "beta_branch": "D_l+1" if cand_b[0] <= cand_b[1] else "shifted",
    }
    return alpha, beta, info


def jt_quadratic(v, T: float, sigma_ks) -> float:
    """J_T(v) = 1/2 sum_k sigma_k(T) v_k^2.

    ``v`` is an EvenFourierProfile or a plain coefficient sequence
    ``(v_1, ..., v_K)``; ``sigma_ks[k-1]`` must hold sigma_k(T).
    """
    coeffs = np.asarray(getattr(v, "coefficients", v), dtype=float)
    sig = np.asarray(sigma_ks, dtype=float)
    active = np.nonzero(coeffs)[0]
    if len(active) and active[-1] >= len(sig):
        raise ValueError(f"sigma_k missing for mode {active[-1] + 1}")
    return 0.5 * float(np.sum(sig[: len(coeffs)][active] * coeffs[active] ** 2))


@dataclass(frozen=True)
class TransversalityResult:
    fd_value: float
    closed_form: float
    rel_error: float
    certified: bool
    tol: float

    def as_dict(self):
        return dict(self.__dict__)


def transversality(profile: RadialProfile, f: Nonlinearity, geom: BallGeometry, c: float,
                   T_star: float, psi1_boundary_normalized=None,
                   rel_step: float = 2e-3, zero_tol: float = 1e-8,
                   t_bar_value: float = math.inf) -> TransversalityResult:
    """d/dT J_T(cos 2 pi t) at T*, by extrapolated centred differences.

    Compared with ``-(4 pi^2 / T*^3) int_0^1 r^{n-1} psi_1^2 dr`` where
    ``psi_1(1) = 1``. When ``psi1_boundary_normalized`` is omitted the
    k = 1 mode profile at T* is used (it is that eigenfunction).
    """
    J = lambda t: jt_quadratic([1.0], t, [sigma_k(profile, f, c, 1, t)])
    cd = lambda s: (J(T_star + s) - J(T_star - s)) / (2 * s)
    # sigma_1 has a pole at T_bar; keep the stencil well inside its Taylor disc
    d = min(rel_step * T_star, 0.05 * (t_bar_value - T_star))
    fd, _ = richardson([cd(d), cd(d / 2), cd(d / 4)], orders=(2, 4))
    if psi1_boundary_normalized is None:
        psi1_boundary_normalized = mode_solution(profile, f, geom, 1, T_star, c).values
    psi = np.asarray(psi1_boundary_normalized, dtype=float)
    integral = integrate_weighted(psi ** 2, geom.radial_weight(profile.r), profile.grid)
    closed = -4 * math.pi ** 2 / T_star ** 3 * integral
    rel = abs(fd - closed) / abs(closed)
    return TransversalityResult(float(fd), float(closed), float(rel),
                                bool(abs(fd) > zero_tol and fd < 0), zero_tol)


def q_T_quadrature(profile: RadialProfile, f: Nonlinearity, geom: BallGeometry, c: float,
                   T: float, coefficients, n_t: int = 64) -> float:
    """Q^T(psi_v) by direct quadrature on an (r, t) tensor grid.

    ``psi_v = sum_k v_k rho_k(r) cos(2 pi k t / T)`` is tabulated on the
    grid, its gradient formed per point, and the integrand
    ``|grad_x psi|^2 + psi_t^2 - f'(phi_1) psi^2`` integrated with Simpson
    in r and the (periodic, spectrally exact) rectangle rule in t.
    """
    coeffs = np.asarray(coefficients, dtype=float)
    t = np.arange(n_t) * T / n_t
    modes = [mode_solution(profile, f, geom, k, T, c) for k in range(1, len(coeffs) + 1)]
    cos = np.array([np.cos(2 * math.pi * k * t / T) for k in range(1, len(coeffs) + 1)])
    sin = np.array([np.sin(2 * math.pi * k * t / T) for k in range(1, len(coeffs) + 1)])
    rho = np.array([m.values for m in modes])          # (K, N)
    drho = np.array([m.derivatives for m in modes])
    kap = 2 * math.pi * np.arange(1, len(coeffs) + 1) / T
    psi = np.einsum("k,kr,kt->rt", coeffs, rho, cos)
    psi_r = np.einsum("k,kr,kt->rt", coeffs, drho, cos)
    psi_t = -np.einsum("k,k,kr,kt->rt", coeffs, kap, rho, sin)
    q = f.df_ext(profile.values)[:, None]
    dens = psi_r ** 2 + psi_t ** 2 - q * psi ** 2          # (N, n_t)
    radial = np.array([integrate_weighted(dens[:, j], geom.radial_weight(profile.r),
                                          profile.grid) for j in range(n_t)])
    bulk = geom.omega_n * np.sum(radial) * T / n_t
    boundary = c * geom.omega_n * np.sum(psi[-1] ** 2) * T / n_t
    return float(bulk + boundary)


def export_sigma_csv(curve: SigmaCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["T", "sigma", "k_min"])
        for t, s, k in zip(curve.T_values, curve.sigma_values, curve.minimizing_k):
            w.writerow([repr(float(t)), repr(float(s)), int(k)])


def export_report_json(path, t_bar_value: float, t_star_value: float,
                       trans: TransversalityResult | None = None, **extra) -> None:
    rep = {"t_bar": None if math.isinf(t_bar_value) else t_bar_value,
           "t_bar_infinite": math.isinf(t_bar_value), "t_star": t_star_value}
    if trans is not None:
        rep["transversality"] = trans.as_dict()
    rep.update(extra)
    with open(path, "w") as fh:
        json.dump(rep, fh, indent=2, sort_keys=True)
        fh.write("\n")


__all__ = [
    "ConditioningError", "InconsistencyError", "ModeProfile", "SigmaCurve",
    "TransversalityResult", "alpha_beta", "find_t_star_by_root", "jt_quadratic",
    "mode_flux", "mode_solution", "q_T_quadrature", "sigma_curve",
    "sigma_k", "t_bar", "t_star", "transversality", "export_sigma_csv", "export_report_json",
]
