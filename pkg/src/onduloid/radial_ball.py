"""Radial ground state of the Dirichlet problem in the unit ball.

The profile solves ``phi'' + (n-1)/r phi' + f(phi) = 0`` on (0, 1] with
``phi'(0) = 0`` and ``phi(1) = 0``. It is found by shooting on the centre
value ``a = phi(0)`` with a classical RK4 integrator started at ``r = h``
from the Taylor series of the regular solution.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .nonlinearity import Nonlinearity
from .numerics import (BallGeometry, UniformGrid1D, fd_derivative,
                       find_root)


class AssumptionError(RuntimeError):
    """A structural hypothesis on f could not be verified numerically."""


class ScaleInvariantFamily(AssumptionError):
    """The shooting map is flat in the amplitude (linear f at an eigenvalue).

    ``profile`` holds the unit-amplitude member of the family, which is
    enough to study the (amplitude independent) linearised spectra.
    """

    def __init__(self, message, profile=None):
        super().__init__(message)
        self.profile = profile


class PositivityError(AssumptionError):
    """Every candidate profile changes sign before r = 1."""


@dataclass(frozen=True)
class ShootingConfig:
    n_points: int = 401
    a_lo: float = 1e-4
    a_hi: float = 50.0
    n_scan: int = 240
    bracket: int | None = None  # index into the admissible brackets; None = first


@dataclass(frozen=True, eq=False)
class RadialProfile:
    grid: UniformGrid1D
    values: np.ndarray
    derivative_values: np.ndarray
    n: int
    brackets: tuple = field(default=(), repr=False)
    robin_c: float = float("nan")

    @property
    def d_at_1(self) -> float:
        return float(self.derivative_values[-1])

    @property
    def center_value(self) -> float:
        return float(self.values[0])

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def h(self) -> float:
        return self.grid.h

    @cached_property
    def _spline(self):
        return CubicHermiteSpline(self.r, self.values, self.derivative_values)

    @cached_property
    def mid_values(self) -> np.ndarray:
        """phi at the cell midpoints (cubic Hermite, fourth order)."""
        r = self.r
        return self._spline(0.5 * (r[:-1] + r[1:]))

    def second_derivative(self, f: Nonlinearity) -> np.ndarray:
        """phi'' at the nodes from the ODE itself."""
        r = self.r
        out = np.empty_like(r)
        out[0] = -float(f.f_ext(self.values[0])) / self.n
        out[1:] = -f.f_ext(self.values[1:]) - (self.n - 1) * self.derivative_values[1:] / r[1:]
        return out


def _series_start(a, fa, dfa, n, r0):
    b2 = -fa / (2 * n)
    b4 = -dfa * b2 / (4 * (n + 2))
    return a + b2 * r0 ** 2 + b4 * r0 ** 4, 2 * b2 * r0 + 4 * b4 * r0 ** 3


def _shoot(f: Nonlinearity, n: int, a, grid: UniformGrid1D, keep=False):
    """RK4 shots for an array of centre values; returns phi(1), phi'(1)."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.size == 1 and not keep:
        p, dp = _shoot_scalar(f, n, float(a[0]), grid)
        return np.array([p]), np.array([dp])
    h = grid.h
    r = grid.nodes
    y0, y1 = _series_start(a, f.f_ext(a), f.df_ext(a), n, h)
    if keep:
        vals = np.empty((grid.n_points, len(a)))
        ders = np.empty_like(vals)
        vals[0], ders[0] = a, 0.0
        vals[1], ders[1] = y0, y1
    nm1 = n - 1

    def rhs(rr, p, dp):
        return dp, -nm1 * dp / rr - f.f_ext(p)

    p, dp = y0, y1
    for i in range(1, grid.n_points - 1):
        ri = r[i]
        k1p, k1d = rhs(ri, p, dp)
        k2p, k2d = rhs(ri + h / 2, p + h / 2 * k1p, dp + h / 2 * k1d)
        k3p, k3d = rhs(ri + h / 2, p + h / 2 * k2p, dp + h / 2 * k2d)
        k4p, k4d = rhs(ri + h, p + h * k3p, dp + h * k3d)
        p = p + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        dp = dp + h / 6 * (k1d + 2 * k2d + 2 * k3d + k4d)
        if keep:
            vals[i + 1], ders[i + 1] = p, dp
    if keep:
        return vals, ders
    return p, dp


def _shoot_scalar(f: Nonlinearity, n: int, a: float, grid: UniformGrid1D):
    """Same scheme as :func:`_shoot` on plain floats (root refinement is scalar)."""
    h = grid.h
    fe = f.f_ext_scalar
    p, dp = _series_start(a, fe(a), float(f.df_ext(a)), n, h)
    nm1 = n - 1
    for i in range(1, grid.n_points - 1):
        ri = i * h
        rm, re = ri + h / 2, ri + h
        k1p, k1d = dp, -nm1 * dp / ri - fe(p)
        k2p = dp + h / 2 * k1d
        k2d = -nm1 * k2p / rm - fe(p + h / 2 * k1p)
        k3p = dp + h / 2 * k2d
        k3d = -nm1 * k3p / rm - fe(p + h / 2 * k2p)
        k4p = dp + h * k3d
        k4d = -nm1 * k4p / re - fe(p + h * k3p)
        p = p + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        dp = dp + h / 6 * (k1d + 2 * k2d + 2 * k3d + k4d)
    return p, dp


def _make_profile(f, geom, a, grid, brackets=()):
    vals, ders = _shoot(f, geom.n, a, grid, keep=True)
    vals, ders = vals[:, 0], ders[:, 0]
    d1 = float(ders[-1])
    c = geom.n - 1 + float(f.f_ext(0.0)) / d1 if d1 != 0 else float("nan")
    return RadialProfile(grid, vals, ders, geom.n, tuple(brackets), c)


def solve_ground_profile(f: Nonlinearity, geom: BallGeometry,
                         cfg: ShootingConfig | None = None) -> RadialProfile:
    """Positive radial solution of the Dirichlet problem in the unit ball.

    The centre value is scanned on a geometric lattice over
    ``[cfg.a_lo, cfg.a_hi]``; every sign change of ``phi(1; a)`` is refined
    by root finding. Among the brackets whose profile stays positive on
    (0, 1) the first one (smallest amplitude) is returned unless
    ``cfg.bracket`` selects another. All admissible centre values are kept
    in ``profile.brackets``.

    Raises
    ------
    ScaleInvariantFamily
        ``phi(1; a)`` does not depend on ``a`` (linear f at an eigenvalue).
    AssumptionError
        No centre value in the interval gives ``phi(1) = 0``.
    PositivityError
        Every root found changes sign inside the ball.
    """
    cfg = cfg or ShootingConfig()
    f.check_dimension(geom.n)
    grid = UniformGrid1D(cfg.n_points, 0.0, 1.0)
    lattice = np.geomspace(cfg.a_lo, cfg.a_hi, cfg.n_scan)
    with np.errstate(over="ignore", invalid="ignore"):
        end, _ = _shoot(f, geom.n, lattice, grid)
    finite = np.isfinite(end)
    end = np.where(finite, end, 0.0)

    slope = np.abs(np.diff(end) / np.diff(lattice))
    if np.all(finite) and np.all(slope < 1e-10):
        rep = _make_profile(f, geom, 1.0, grid)
        raise ScaleInvariantFamily(
            "scale-invariant family: phi(1; a) is flat in a "
            f"(max slope {slope.max():.2e}); Assumption 2 fails", rep)

    roots = []
    for i in np.nonzero(np.sign(end[:-1]) * np.sign(end[1:]) <= 0)[0]:
        if not (finite[i] and finite[i + 1]) or (end[i] == 0.0 and i > 0 and end[i - 1] == 0.0):
            continue
        fn = lambda a: float(_shoot(f, geom.n, a, grid)[0][0])
        roots.append(find_root(fn, (lattice[i], lattice[i + 1]), tol=1e-15))
    if not roots:
        raise AssumptionError(
            f"Assumption 1 unverified: no centre value in [{cfg.a_lo}, {cfg.a_hi}] "
            "shoots to zero at r = 1")

    admissible = []
    for a in roots:
        vals, ders = _shoot(f, geom.n, a, grid, keep=True)
        if np.all(vals[:-1, 0] > 0) and ders[-1, 0] != 0:
            admissible.append(a)
    if not admissible:
        raise PositivityError(
            "positivity failure: every profile with phi(1) = 0 vanishes inside the ball")
    pick = 0 if cfg.bracket is None else cfg.bracket
    return _make_profile(f, geom, admissible[pick], grid, admissible)


def robin_constant(profile: RadialProfile, f: Nonlinearity, geom: BallGeometry) -> float:
    """c = n - 1 + f(0) / phi'(1)."""
    return geom.n - 1 + float(f.eval(0.0)) / profile.d_at_1


def robin_constant_from_curvature(profile: RadialProfile) -> float:
    """c = -phi''(1)/phi'(1) with phi''(1) from a one-sided O(h^2) difference."""
    d, h = profile.derivative_values, profile.h
    d2 = (3 * d[-1] - 4 * d[-2] + d[-3]) / (2 * h)
    return -d2 / profile.d_at_1


def eval_profile(profile: RadialProfile, r):
    """(phi(r), phi'(r)) by cubic Hermite interpolation of the stored nodes."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError("r must lie in [0, 1]")
    sp = profile._spline
    val, der = sp(arr), sp(arr, 1)
    if arr.ndim == 0:
        return float(val), float(der)
    return val, der


def ode_residual(profile: RadialProfile, f: Nonlinearity) -> float:
    """max |phi'' + (n-1)/r phi' + f(phi)| on interior nodes.

    phi'' is taken from a sixth-order difference of the stored phi'.
    """
    r, d = profile.r, profile.derivative_values
    d2 = fd_derivative(d, profile.h)
    res = d2[1:-1] + (profile.n - 1) * d[1:-1] / r[1:-1] + f.f_ext(profile.values[1:-1])
    return float(np.max(np.abs(res)))


def shoot_linear(profile: RadialProfile, f: Nonlinearity, shift: float,
                 return_all: bool = False, substeps: int = 1):
    """Regular solution of ``psi'' + (n-1)/r psi' + (f'(phi_1) + shift) psi = 0``.

    Normalised by ``psi(0) = 1``. RK4 with ``substeps`` steps per grid cell
    (phi_1 between nodes from the Hermite interpolant). Returns
    ``(psi(1), psi'(1))`` or, with ``return_all``, psi and psi' at the
    profile nodes.
    """
    q_nodes, q_mid = _potential(profile, f, substeps)
    h = profile.h / substeps
    a = profile.center_value
    q2 = f.d2f(a) * (-float(f.f_ext(a)) / (2 * profile.n))
    vals, ders = _rk4_linear(profile.n, h, q_nodes + shift, q_mid + shift, q2, return_all)
    if return_all:
        return vals[::substeps], ders[::substeps]
    return vals, ders


def _potential(profile, f, substeps):
    cache = profile.__dict__.setdefault("_potential_cache", {})
    key = (id(f), substeps)
    if key not in cache:
        if substeps == 1:
            phi_nodes, phi_mid = profile.values, profile.mid_values
        else:
            m = substeps * (profile.grid.n_points - 1) + 1
            r = np.linspace(0.0, 1.0, m)
            phi_nodes = profile._spline(r)
            phi_nodes[::substeps] = profile.values
            phi_mid = profile._spline(0.5 * (r[:-1] + r[1:]))
        cache[key] = (f, f.df_ext(phi_nodes), f.df_ext(phi_mid))
    return cache[key][1], cache[key][2]


def _rk4_linear(n, h, q_nodes, q_mid, q2, return_all):
    """RK4 on a uniform grid from r = h, started by the regular series."""
    m = len(q_nodes)
    q0 = float(q_nodes[0])
    c2 = -q0 / (2 * n)
    c4 = -(q0 * c2 + q2) / (4 * (n + 2))
    p = 1.0 + c2 * h * h + c4 * h ** 4
    dp = 2 * c2 * h + 4 * c4 * h ** 3
    if return_all:
        vals = np.empty(m)
        ders = np.empty(m)
        vals[0], ders[0], vals[1], ders[1] = 1.0, 0.0, p, dp
    nm1 = n - 1
    qn = q_nodes.tolist()
    qm = q_mid.tolist()
    h2, h6 = h / 2, h / 6
    for i in range(1, m - 1):
        ri = i * h
        qa, qb, qc = qn[i], qm[i], qn[i + 1]
        rm, re = ri + h2, ri + h
        k1p = dp
        k1d = -nm1 * dp / ri - qa * p
        p2, d2 = p + h2 * k1p, dp + h2 * k1d
        k2p = d2
        k2d = -nm1 * d2 / rm - qb * p2
        p3, d3 = p + h2 * k2p, dp + h2 * k2d
        k3p = d3
        k3d = -nm1 * d3 / rm - qb * p3
        p4, d4 = p + h * k3p, dp + h * k3d
        k4p = d4
        k4d = -nm1 * d4 / re - qc * p4
        p = p + h6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        dp = dp + h6 * (k1d + 2 * k2d + 2 * k3d + k4d)
        if return_all:
            vals[i + 1], ders[i + 1] = p, dp
    if return_all:
        return vals, ders
    return p, dp


def export_profile_csv(profile: RadialProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "phi", "dphi"])
        for row in zip(profile.r, profile.values, profile.derivative_values):
            w.writerow([repr(float(x)) for x in row])


def closed_form_constant_profile(n: int, r):
    """phi = (1 - r^2) / (2n), the ground state for f = 1."""
    r = np.asarray(r, dtype=float)
    return (1 - r ** 2) / (2 * n), -r / n


def richardson_order(values) -> float:
    """Observed order from three results on grids h, h/2, h/4."""
    v = np.asarray(values, dtype=float)
    num, den = v[0] - v[1], v[1] - v[2]
    if den == 0 or num == 0:
        return float("inf")
    return math.log2(abs(num / den))
