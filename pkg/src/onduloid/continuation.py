"""Bifurcation certification and amplitude-pinned branch continuation.

Near the bifurcation period T* the nontrivial solutions of G(v, T) = 0 form
a curve parameterised by the first cosine coefficient of v. Pinning
``v_1 = s`` leaves K unknowns ``(v_2, ..., v_K, T)`` for the K equations
``G_1 = ... = G_K = 0``, which are solved by Newton's method with a
finite-difference Jacobian.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .ball_spectra import Spectrum, check_assumptions, dirichlet_spectrum, robin_spectrum, \
    robin_below_dirichlet
from .cylinder_spectra import (ConditioningError, find_t_star_by_root, sigma_k, t_bar, t_star,
                               transversality)
from .dtn import (CylinderField, DomainValidityError, DtNGrid, DtNResult, EvenFourierProfile,
                  evaluate_g)
from .nonlinearity import Nonlinearity
from .numerics import BallGeometry, ConvergenceError
from .radial_ball import RadialProfile

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CertificationReport:
    t_star: float
    t_star_root: float
    t_bar: float
    gamma_1: float
    gamma_D1: float
    negative_count: int
    sigma_at_t_star: tuple
    kernel_dim: int
    kernel_modes: tuple
    transversality: float
    transversality_closed_form: float
    hypotheses: dict
    certified: bool
    message: str

    def as_dict(self):
        d = dict(self.__dict__)
        d["t_bar"] = None if math.isinf(self.t_bar) else self.t_bar
        return d


def certify_bifurcation(profile: RadialProfile, f: Nonlinearity, geom: BallGeometry,
                        c: float | None = None, k_max: int = 8, kernel_tol: float = 1e-6,
                        dirichlet: Spectrum | None = None, robin: Spectrum | None = None,
                        assumption_tol: float = 1e-4) -> CertificationReport:
    """Check the hypotheses of the simple-eigenvalue bifurcation theorem at T*.

    The kernel of H_{T*} is counted over modes 1..k_max as the number of
    ``|sigma_k(T*)| <= kernel_tol``; it must be the single mode k = 1.
    Transversality must be nonzero (it is negative for every admissible f).
    """
    c = profile.robin_c if c is None else c
    dirichlet = dirichlet or dirichlet_spectrum(profile, f, geom, k=4)
    ass = check_assumptions(dirichlet, assumption_tol)
    gD1 = float(dirichlet.eigenvalues[0])
    if not ass.passed:
        return CertificationReport(math.nan, math.nan, math.nan, math.nan, gD1,
                                   ass.negative_count, (), 0, (), math.nan, math.nan,
                                   {"assumption_2": False}, False, ass.message)
    robin = robin or robin_spectrum(profile, f, geom, c, k=2)
    g1 = float(robin.eigenvalues[0])
    tb = t_bar(gD1)
    hyp = {"assumption_2": True, "robin_below_dirichlet": robin_below_dirichlet(g1, gD1)}
    if not hyp["robin_below_dirichlet"]:
        return CertificationReport(math.nan, math.nan, tb, g1, gD1, ass.negative_count, (), 0,
                                   (), math.nan, math.nan, hyp, False,
                                   "gamma_1 < min(0, gamma_D1) fails")
    ts = t_star(g1)
    ts_root = find_t_star_by_root(profile, f, geom, c, gD1)
    sig = tuple(sigma_k(profile, f, c, k, ts) for k in range(1, k_max + 1))
    kernel = tuple(k for k, s in enumerate(sig, 1) if abs(s) <= kernel_tol)
    tr = transversality(profile, f, geom, c, ts, t_bar_value=tb)
    hyp["t_star_below_t_bar"] = ts < tb
    hyp["t_star_cross_check"] = abs(ts - ts_root) <= 1e-4
    hyp["kernel_simple"] = kernel == (1,)
    hyp["transversality"] = tr.certified
    ok = all(hyp.values())
    msg = "bifurcation certified" if ok else \
        "not certified: " + ", ".join(k for k, v in hyp.items() if not v)
    return CertificationReport(ts, ts_root, tb, g1, gD1, ass.negative_count, sig, len(kernel),
                               kernel, tr.fd_value, tr.closed_form, hyp, ok, msg)


@dataclass(frozen=True, eq=False)
class BranchPoint:
    s: float
    T_s: float
    v_s: EvenFourierProfile
    field: CylinderField
    flux_constant: float
    newton_residual: float       # max |G_k| over the solved coefficients
    flux_deviation: float        # max over boundary nodes of |d_nu u - mean|
    iterations: int = 0
    dtn: DtNResult | None = field(default=None, repr=False)

    @property
    def K(self) -> int:
        return self.v_s.K


@dataclass(frozen=True, eq=False)
class Branch:
    points: list
    t_star: float
    kernel_mode: int = 1
    truncated: tuple = ()        # diagnostics for half-branches stopped early

    @property
    def s_values(self) -> np.ndarray:
        return np.array([p.s for p in self.points])

    @property
    def T_values(self) -> np.ndarray:
        return np.array([p.T_s for p in self.points])


@dataclass(frozen=True)
class BranchSetup:
    profile: RadialProfile
    f: Nonlinearity
    geom: BallGeometry
    t_star: float
    t_bar: float = math.inf
    grid: DtNGrid = DtNGrid()
    tol: float = 1e-11
    max_newton: int = 12
    max_K: int = 16

    @classmethod
    def from_certificate(cls, profile, f, geom, cert: CertificationReport, **kw):
        if not cert.certified:
            raise ValueError(f"bifurcation not certified: {cert.message}")
        return cls(profile, f, geom, cert.t_star, cert.t_bar, **kw)


def _residual(setup: BranchSetup, s: float, x: np.ndarray, K: int):
    v = EvenFourierProfile(np.concatenate([[s], x[:-1]]))
    res = evaluate_g(setup.profile, setup.f, setup.geom, v, x[-1], setup.grid,
                     t_bar_value=setup.t_bar)
    return res.g.padded(K).coefficients[:K], res, v


def _newton(setup: BranchSetup, s: float, x0: np.ndarray, K: int):
    x = x0.copy()
    F, res, v = _residual(setup, s, x, K)
    for it in range(setup.max_newton):
        if np.max(np.abs(F)) <= setup.tol:
            return x, res, v, it
        jac = np.empty((K, K))
        for q in range(K - 1):
            d = 1e-6
            xp = x.copy()
            xp[q] += d
            jac[:, q] = (_residual(setup, s, xp, K)[0] - F) / d
        dT = 1e-5 * x[-1]
        xp, xm = x.copy(), x.copy()
        xp[-1] += dT
        xm[-1] -= dT
        jac[:, -1] = (_residual(setup, s, xp, K)[0] - _residual(setup, s, xm, K)[0]) / (2 * dT)
        step = np.linalg.solve(jac, -F)
        t = 1.0
        while True:
            try:
                F_new, res_new, v_new = _residual(setup, s, x + t * step, K)
                if np.max(np.abs(F_new)) < np.max(np.abs(F)):
                    break
            except (ConvergenceError, ConditioningError, DomainValidityError, ValueError):
                pass
            t *= 0.5
            if t < 1e-3:
                raise ConvergenceError(f"branch Newton stalled at s = {s}")
        x, F, res, v = x + t * step, F_new, res_new, v_new
    if np.max(np.abs(F)) <= setup.tol:
        return x, res, v, setup.max_newton
    raise ConvergenceError(f"branch Newton did not converge at s = {s}: |G| = {np.max(np.abs(F)):.2e}")


def _point(setup: BranchSetup, s: float, guess: BranchPoint | None, K: int) -> BranchPoint:
    if s == 0:
        v = EvenFourierProfile.zero(K)
        res = evaluate_g(setup.profile, setup.f, setup.geom, v, setup.t_star, setup.grid,
                         t_bar_value=setup.t_bar)
        return BranchPoint(0.0, setup.t_star, v, res.fields[-1], res.mean_flux,
                           float(np.max(np.abs(res.g.coefficients))), res.flux_deviation, 0, res)
    if guess is None or guess.s == 0:
        x0 = np.concatenate([np.zeros(K - 1), [setup.t_star]])
    else:
        prev = guess.v_s.padded(K).coefficients
        x0 = np.concatenate([prev[1:K], [guess.T_s]])
    assert len(x0) == K, "pinned system must be square"
    x, res, v, it = _newton(setup, s, x0, K)
    G = res.g.padded(K).coefficients[:K]
    return BranchPoint(float(s), float(x[-1]), v, res.fields[-1], res.mean_flux,
                       float(np.max(np.abs(G))), res.flux_deviation, it, res)


def _needs_more_modes(p: BranchPoint) -> bool:
    c = p.v_s.coefficients
    return abs(c[-1]) > 1e-10 * np.max(np.abs(c))


def _half_branch(setup: BranchSetup, targets, K: int, min_step: float = 1e-6):
    """Continue from s = 0 through ``targets`` (all of one sign, increasing |s|)."""
    pts, prev, note = [], None, None
    s_prev = 0.0
    for target in targets:
        s = target
        while True:
            try:
                p = _point(setup, s, prev, K)
                while _needs_more_modes(p) and 2 * K <= min(setup.max_K, setup.grid.M):
                    K *= 2
                    p = _point(setup, s, p, K)
            except (ConvergenceError, ConditioningError, DomainValidityError, ValueError) as exc:
                step = (s - s_prev) / 2
                if abs(step) < min_step:
                    note = f"truncated after s = {s_prev:g}: {exc}"
                    log.warning(note)
                    return pts, note
                s = s_prev + step
                continue
            pts.append(p)
            prev, s_prev = p, s
            if s == target:
                break
            s = target
    return pts, note


def extend_branch(setup: BranchSetup, s_grid, K: int = 8, executor=None) -> Branch:
    """Solve G(v, T) = 0 with ``v_1 = s`` for every amplitude in ``s_grid``.

    Positive and negative amplitudes are continued outward from s = 0 as two
    independent half-branches (run through ``executor.map`` if given). A
    failed Newton solve halves the amplitude step; below 1e-6 the
    half-branch is truncated at its last good point.
    """
    if K > setup.grid.M:
        raise ValueError("K must not exceed the collocation order M")
    s_arr = np.unique(np.asarray(s_grid, dtype=float))
    pos = sorted(x for x in s_arr if x > 0)
    neg = sorted((x for x in s_arr if x < 0), reverse=True)
    halves = [h for h in (pos, neg) if h]
    mapper = map if executor is None else executor.map
    results = list(mapper(lambda h: _half_branch(setup, h, K), halves))
    points, notes = [], []
    for pts, note in results:
        points.extend(pts)
        if note:
            notes.append(note)
    if np.any(s_arr == 0) or not points:
        points.append(_point(setup, 0.0, None, K))
    points.sort(key=lambda p: p.s)
    for p in points:
        # independent re-validation of G at the accepted state
        chk = evaluate_g(setup.profile, setup.f, setup.geom, p.v_s, p.T_s, setup.grid,
                         t_bar_value=setup.t_bar)
        if np.max(np.abs(chk.g.padded(p.K).coefficients[: p.K])) > 1e-9:
            raise ConvergenceError(f"re-validation of G failed at s = {p.s}")
    return Branch(points, setup.t_star, 1, tuple(notes))


@dataclass(frozen=True)
class BranchDiagnostics:
    per_point: list
    remainder_slope: float
    period_slope: float
    period_constant: float
    symmetry_defect: float

    def as_dict(self):
        return dict(self.__dict__)


def _slope(x, y):
    x, y = np.asarray(x), np.asarray(y)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def branch_diagnostics(branch: Branch) -> BranchDiagnostics:
    """Per-point residuals and branch-level asymptotic slopes.

    ``remainder_slope`` regresses ``log ||v_s - s cos 2 pi t||_inf`` on
    ``log |s|``; ``period_constant`` is ``max |T_s - T*| / |s|``.
    """
    if not branch.points:
        raise ValueError("empty branch")
    t = np.linspace(0.0, 1.0, 257)[:-1]
    rows, s_abs, rem, dT = [], [], [], []
    for p in branch.points:
        vals = p.v_s(t)
        tail = float(np.sum(np.abs(p.v_s.coefficients[1:])))
        mean = float(np.mean(vals))
        even = float(np.max(np.abs(vals - p.v_s(-t))))
        u_min = float(np.min(p.field.values[:-1]))
        rows.append({"s": p.s, "T_s": p.T_s, "flux_deviation": p.flux_deviation,
                     "newton_residual": p.newton_residual, "positive": u_min > 0,
                     "u_min_interior": u_min, "mean_v": mean, "evenness": even,
                     "remainder": tail, "K": p.K})
        if p.s != 0:
            s_abs.append(abs(p.s))
            rem.append(float(np.max(np.abs(vals - p.s * np.cos(2 * np.pi * t)))))
            dT.append(abs(p.T_s - branch.t_star))
    s_abs, dT = np.array(s_abs), np.array(dT)
    const = float(np.max(dT / s_abs)) if len(s_abs) else 0.0
    # +/- symmetry: v_{-s}(t) vs v_s(t + 1/2)
    by_s = {round(p.s, 14): p for p in branch.points}
    sym = 0.0
    for p in branch.points:
        q = by_s.get(round(-p.s, 14))
        if p.s > 0 and q is not None:
            sym = max(sym, abs(p.T_s - q.T_s),
                      float(np.max(np.abs(q.v_s(t) - p.v_s(t + 0.5)))))
    return BranchDiagnostics(rows, _slope(s_abs, rem), _slope(s_abs, dT), const, sym)


def export_branch_csv(branch: Branch, path) -> None:
    K = max(p.K for p in branch.points)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "T_s", "flux_constant", "flux_deviation", "newton_residual"]
                   + [f"v_{k}" for k in range(1, K + 1)])
        for p in branch.points:
            w.writerow([repr(p.s), repr(p.T_s), repr(p.flux_constant), repr(p.flux_deviation),
                        repr(p.newton_residual)]
                       + [repr(float(x)) for x in p.v_s.padded(K).coefficients])
