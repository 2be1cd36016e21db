"""Cached problem instances and independent oracles shared by the test modules."""

from __future__ import annotations

import math
from functools import lru_cache

import mpmath
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from onduloid.ball_spectra import dirichlet_spectrum, robin_spectrum
from onduloid.nonlinearity import Nonlinearity
from onduloid.numerics import BallGeometry
from onduloid.radial_ball import ScaleInvariantFamily, ShootingConfig, solve_ground_profile

CASES = {
    "const_n1": ("constant", 1.0, 1),
    "const_n3": ("constant", 1.0, 3),
    "cubic_n2": ("power_minus_linear", 3.0, 2),
    "gelfand_n2": ("gelfand", 0.2, 2),
}


def make_f(kind, param) -> Nonlinearity:
    return getattr(Nonlinearity, kind)(param)


@lru_cache(maxsize=None)
def ground(name: str, nodes: int = 401):
    kind, param, n = CASES[name]
    f, geom = make_f(kind, param), BallGeometry(n)
    return f, geom, solve_ground_profile(f, geom, ShootingConfig(n_points=nodes))


@lru_cache(maxsize=None)
def spectra(name: str, nodes: int = 401, k: int = 4):
    f, geom, p = ground(name, nodes)
    return dirichlet_spectrum(p, f, geom, k), robin_spectrum(p, f, geom, p.robin_c, k)


@lru_cache(maxsize=None)
def linear_degenerate(nodes: int = 401):
    f = Nonlinearity.linear(math.pi ** 2 / 4)
    geom = BallGeometry(1)
    try:
        solve_ground_profile(f, geom, ShootingConfig(n_points=nodes))
    except ScaleInvariantFamily as exc:
        return f, geom, exc.profile
    raise AssertionError("linear f at the first eigenvalue must be scale invariant")


# -- oracles ------------------------------------------------------------------

MP_DPS = 30


def mu_n1() -> float:
    """Root of mu tanh(mu) = 1."""
    mpmath.mp.dps = MP_DPS
    return float(mpmath.findroot(lambda m: m * mpmath.tanh(m) - 1, 1.2))


def mu_n3() -> float:
    """Positive root of tanh(mu) = mu / 2."""
    mpmath.mp.dps = MP_DPS
    return float(mpmath.findroot(lambda m: mpmath.tanh(m) - m / 2, 1.9))


def gelfand_n2(lam: float):
    """u = 2 ln((1 + beta)/(1 + beta r^2)), lam = 8 beta/(1 + beta)^2 (minimal branch)."""
    mpmath.mp.dps = MP_DPS
    beta = float(mpmath.findroot(lambda b: 8 * b / (1 + b) ** 2 - lam, lam / 8))
    center = 2 * math.log(1 + beta)
    d_at_1 = -4 * beta / (1 + beta)
    return beta, center, d_at_1


def shooting_oracle(f: Nonlinearity, n: int, bracket, rtol=1e-13):
    """Centre value and phi'(1) by adaptive DOP853 shooting (independent of the RK4 path)."""

    def end(a):
        r0 = 1e-4
        fa = float(f.f_ext(a))
        y0 = [a - fa * r0 ** 2 / (2 * n), -fa * r0 / n]
        rhs = lambda r, y: [y[1], -(n - 1) / r * y[1] - float(f.f_ext(y[0]))]
        sol = solve_ivp(rhs, (r0, 1.0), y0, method="DOP853", rtol=rtol, atol=1e-14)
        return sol.y[0, -1], sol.y[1, -1]

    a = brentq(lambda a: end(a)[0], *bracket, xtol=1e-14)
    return a, end(a)[1]
