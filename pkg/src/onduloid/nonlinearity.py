"""Reaction terms f and their derivatives.

Four closed-form families plus a tabulated kind for user data. Solvers use
the ``*_ext`` evaluators, which continue f linearly below zero,
``f(u) = f(0) + f'(0) u``, so that Newton transients with slightly
negative iterates stay well defined.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

KINDS = ("constant", "power_minus_linear", "gelfand", "linear", "tabulated")


class DomainError(ValueError):
    """f was evaluated at a negative argument."""


@dataclass(frozen=True)
class Nonlinearity:
    """A reaction term ``f: [0, inf) -> R``.

    Use the constructors :meth:`constant`, :meth:`power_minus_linear`,
    :meth:`gelfand`, :meth:`linear` and :meth:`tabulated` rather than
    building instances by hand.
    """

    kind: str
    param: float = 0.0
    table_u: np.ndarray | None = field(default=None, repr=False, compare=False)
    table_f: np.ndarray | None = field(default=None, repr=False, compare=False)
    table_df: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "power_minus_linear" and not self.param > 1:
            raise ValueError("u^p - u needs p > 1")
        if self.kind == "gelfand" and not self.param > 0:
            raise ValueError("lambda e^u needs lambda > 0")
        if self.kind == "tabulated":
            u = np.asarray(self.table_u, dtype=float)
            fv = np.asarray(self.table_f, dtype=float)
            dfv = np.asarray(self.table_df, dtype=float)
            if u.ndim != 1 or len(u) < 2 or fv.shape != u.shape or dfv.shape != u.shape:
                raise ValueError("tabulated f needs equal-length u, f, f' columns")
            if np.any(np.diff(u) <= 0):
                raise ValueError("tabulated grid must be strictly increasing")
            if u[0] > 0:
                raise ValueError("tabulated grid must start at u = 0")
            object.__setattr__(self, "table_u", u)
            object.__setattr__(self, "table_f", fv)
            object.__setattr__(self, "table_df", dfv)
            object.__setattr__(self, "_f_interp", PchipInterpolator(u, fv))
            object.__setattr__(self, "_df_interp", PchipInterpolator(u, dfv))

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, a: float = 1.0) -> "Nonlinearity":
        return cls("constant", float(a))

    @classmethod
    def power_minus_linear(cls, p: float) -> "Nonlinearity":
        return cls("power_minus_linear", float(p))

    @classmethod
    def gelfand(cls, lam: float) -> "Nonlinearity":
        return cls("gelfand", float(lam))

    @classmethod
    def linear(cls, lam: float) -> "Nonlinearity":
        return cls("linear", float(lam))

    @classmethod
    def tabulated(cls, u, f_values, df_values) -> "Nonlinearity":
        return cls("tabulated", 0.0, np.asarray(u), np.asarray(f_values),
                   np.asarray(df_values))

    @classmethod
    def from_csv(cls, f_path, df_path) -> "Nonlinearity":
        """Read two two-column CSV files, ``(u, f)`` and ``(u, f')``."""
        u1, fv = _read_two_columns(f_path)
        u2, dfv = _read_two_columns(df_path)
        if len(u1) != len(u2) or not np.allclose(u1, u2, rtol=0, atol=1e-14):
            raise ValueError("f and f' tables must share the same u column")
        return cls.tabulated(u1, fv, dfv)

    def check_dimension(self, n: int) -> None:
        """Raise if the family is not admissible in dimension ``n``."""
        if self.kind == "power_minus_linear" and n > 2:
            crit = (n + 2) / (n - 2)
            if not self.param < crit:
                raise ValueError(f"u^p - u needs p < {crit:g} in dimension {n}")

    def label(self) -> str:
        if self.kind == "constant":
            return f"f(u) = {self.param:g}"
        if self.kind == "power_minus_linear":
            return f"f(u) = u^{self.param:g} - u"
        if self.kind == "gelfand":
            return f"f(u) = {self.param:g} exp(u)"
        if self.kind == "linear":
            return f"f(u) = {self.param:.12g} u"
        return f"f tabulated on [{self.table_u[0]:g}, {self.table_u[-1]:g}]"

    # -- evaluation on u >= 0 ----------------------------------------------
    def _f(self, u):
        k, p = self.kind, self.param
        if k == "constant":
            return np.full_like(u, p)
        if k == "power_minus_linear":
            return u ** p - u
        if k == "gelfand":
            return p * np.exp(u)
        if k == "linear":
            return p * u
        return self._f_interp(u)

    def _df(self, u):
        k, p = self.kind, self.param
        if k == "constant":
            return np.zeros_like(u)
        if k == "power_minus_linear":
            return p * u ** (p - 1) - 1.0
        if k == "gelfand":
            return p * np.exp(u)
        if k == "linear":
            return np.full_like(u, p)
        return self._df_interp(u)

    def eval(self, u):
        """f(u) for u >= 0."""
        arr = np.asarray(u, dtype=float)
        if np.any(arr < 0):
            raise DomainError("f is only defined on [0, inf)")
        out = self._f(arr)
        return float(out) if out.ndim == 0 else out

    def eval_deriv(self, u):
        """f'(u) for u >= 0."""
        arr = np.asarray(u, dtype=float)
        if np.any(arr < 0):
            raise DomainError("f' is only defined on [0, inf)")
        out = self._df(arr)
        return float(out) if out.ndim == 0 else out

    # -- solver evaluators, linear continuation below 0 ------------------
    def f_ext(self, u):
        u = np.asarray(u, dtype=float)
        pos = np.maximum(u, 0.0)
        zero = np.zeros_like(u)
        return np.where(u >= 0, self._f(pos), self._f(zero) + self._df(zero) * u)

    def f_ext_scalar(self, x: float) -> float:
        """``f_ext`` on a plain float, without array overhead."""
        if x < 0:
            return float(self._f(np.zeros(1))[0] + self._df(np.zeros(1))[0] * x)
        k, p = self.kind, self.param
        if k == "constant":
            return p
        if k == "power_minus_linear":
            return x ** p - x
        if k == "gelfand":
            return p * math.exp(x)
        if k == "linear":
            return p * x
        return float(self._f_interp(x))

    def df_ext(self, u):
        u = np.asarray(u, dtype=float)
        pos = np.maximum(u, 0.0)
        return np.where(u >= 0, self._df(pos), self._df(np.zeros_like(u)))

    def d2f(self, u: float) -> float:
        """f''(u) by central differencing of f' (used only in series starts)."""
        du = 1e-5 * max(1.0, abs(u))
        lo = max(u - du, 0.0)
        return float((self.df_ext(u + du) - self.df_ext(lo)) / (u + du - lo))


def eval(spec: Nonlinearity, u):  # noqa: A001 - mirrors the operation name
    return spec.eval(u)


def eval_deriv(spec: Nonlinearity, u):
    return spec.eval_deriv(u)


def _read_two_columns(path):
    rows = []
    with open(Path(path), newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise
                continue  # header line
    if not rows:
        raise ValueError(f"{path}: no numeric rows")
    data = np.array(rows)
    return data[:, 0], data[:, 1]


def first_dirichlet_eigenvalue(n: int) -> float:
    """lambda_1 of the Dirichlet Laplacian on the unit ball of R^n."""
    from scipy.special import jn_zeros

    if n == 1:
        return math.pi ** 2 / 4
    if n == 3:
        return math.pi ** 2
    nu = n / 2 - 1
    if float(nu).is_integer():
        return float(jn_zeros(int(nu), 1)[0]) ** 2
    from scipy.optimize import brentq
    from scipy.special import jv

    # first zero of J_nu for half-integer nu lies in (nu, nu + pi + 2)
    lo = nu + 1e-6
    xs = np.linspace(lo, nu + 2 * math.pi + 2, 400)
    vals = jv(nu, xs)
    i = int(np.argmax(np.sign(vals[:-1]) != np.sign(vals[1:])))
    return brentq(lambda x: jv(nu, x), xs[i], xs[i + 1], xtol=1e-15) ** 2
