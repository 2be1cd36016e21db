"""Shared numerical kernels.

Small, deterministic building blocks used by every other module: uniform
grids, symmetric tridiagonal eigenpairs, bracketed root finding, weighted
Simpson quadrature, Richardson extrapolation and ball geometry constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, linalg, optimize, special


class ConvergenceError(RuntimeError):
    """An iterative kernel stopped before meeting its tolerance."""


class BracketError(ValueError):
    """The supplied interval does not bracket a sign change."""


@dataclass(frozen=True)
class UniformGrid1D:
    n_points: int
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("a grid needs at least two points")
        if not self.b > self.a:
            raise ValueError("grid endpoints must satisfy a < b")

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n_points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n_points)

    def refined(self, factor: int = 2) -> "UniformGrid1D":
        """Grid with spacing h/factor sharing every node of this one."""
        return UniformGrid1D(factor * (self.n_points - 1) + 1, self.a, self.b)


@dataclass(frozen=True)
class SymTridiag:
    diagonal: np.ndarray
    off_diagonal: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diagonal, dtype=float)
        e = np.asarray(self.off_diagonal, dtype=float)
        if d.ndim != 1 or e.ndim != 1 or len(e) != max(len(d) - 1, 0):
            raise ValueError("off-diagonal must have one entry fewer than the diagonal")
        object.__setattr__(self, "diagonal", d)
        object.__setattr__(self, "off_diagonal", e)

    @property
    def dim(self) -> int:
        return len(self.diagonal)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diagonal * x
        y[:-1] += self.off_diagonal * x[1:]
        y[1:] += self.off_diagonal * x[:-1]
        return y

    def norm(self) -> float:
        """Infinity norm (max absolute row sum)."""
        rows = np.abs(self.diagonal).copy()
        rows[:-1] += np.abs(self.off_diagonal)
        rows[1:] += np.abs(self.off_diagonal)
        return float(rows.max()) if len(rows) else 0.0


@dataclass(frozen=True)
class BallGeometry:
    """Unit ball B in R^n; ``omega_n`` is the area of the unit sphere S^{n-1}."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("dimension n must be a positive integer")

    @property
    def omega_n(self) -> float:
        return 2.0 * math.pi ** (self.n / 2) / special.gamma(self.n / 2)

    def radial_weight(self, r: np.ndarray) -> np.ndarray:
        return np.asarray(r, dtype=float) ** (self.n - 1)


def sym_tridiag_eigs(m: SymTridiag, k: int, weights: np.ndarray | None = None):
    """Lowest ``k`` eigenpairs of a symmetric tridiagonal matrix.

    Eigenvalues are located by bisection on Sturm sequences and the vectors
    by inverse iteration (LAPACK ``stebz``/``stein``).

    Parameters
    ----------
    m : SymTridiag
    k : int
        Number of eigenpairs, ``1 <= k <= m.dim``.
    weights : array, optional
        Positive diagonal of a discrete inner product ``<x, y> = sum(w x y)``.
        Eigenvectors are scaled to unit norm in it (Euclidean by default).

    Returns
    -------
    list of (float, ndarray)
        Pairs sorted by ascending eigenvalue.
    """
    if not 1 <= k <= m.dim:
        raise ValueError(f"k={k} outside 1..{m.dim}")
    if m.dim == 1:
        vals, vecs = m.diagonal.copy(), np.ones((1, 1))
    else:
        try:
            vals, vecs = linalg.eigh_tridiagonal(
                m.diagonal, m.off_diagonal, select="i", select_range=(0, k - 1),
                lapack_driver="stebz")
        except linalg.LinAlgError as exc:
            raise ConvergenceError(f"tridiagonal eigensolver failed: {exc}") from exc
    w = np.ones(m.dim) if weights is None else np.asarray(weights, dtype=float)
    pairs = []
    for j in range(k):
        v = vecs[:, j].copy()
        v /= math.sqrt(float(np.sum(w * v * v)))
        # sign convention: first nonzero component positive
        idx = int(np.argmax(np.abs(v) > 1e-12 * np.abs(v).max()))
        if v[idx] < 0:
            v = -v
        pairs.append((float(vals[j]), v))
    return pairs


def find_root(fcn: Callable[[float], float], bracket: Sequence[float],
              tol: float = 1e-12) -> float:
    """Root of a continuous scalar function on a sign-changing bracket.

    Brent's method (bisection safeguarded by secant/inverse quadratic
    steps); derivative free and deterministic.
    """
    a, b = float(bracket[0]), float(bracket[1])
    fa, fb = fcn(a), fcn(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise BracketError(f"no sign change on [{a}, {b}]: f={fa:.3e}, {fb:.3e}")
    return optimize.brentq(fcn, a, b, xtol=tol, rtol=4 * np.finfo(float).eps,
                           maxiter=500)


def simpson_weights(grid: UniformGrid1D) -> np.ndarray:
    """Composite Simpson weights; an even panel count is required."""
    if (grid.n_points - 1) % 2:
        raise ValueError("composite Simpson needs an odd number of points")
    w = np.ones(grid.n_points)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * grid.h / 3.0


def integrate_weighted(values, weights, grid: UniformGrid1D) -> float:
    """Composite-Simpson approximation of ``int values * weights`` over the grid."""
    values = np.asarray(values, dtype=float)
    weights = np.broadcast_to(np.asarray(weights, dtype=float), values.shape)
    if values.shape != (grid.n_points,):
        raise ValueError(f"expected {grid.n_points} samples, got {values.shape}")
    if (grid.n_points - 1) % 2:
        return float(integrate.simpson(values * weights, x=grid.nodes))
    return float(np.dot(simpson_weights(grid), values * weights))


def richardson(values: Sequence[float], ratio: float = 2.0,
               orders: Sequence[int] = (2, 4)):
    """Richardson extrapolation from a sequence of successively refined results.

    ``values[i]`` is computed with spacing ``h / ratio**i``; the error is
    assumed to expand in the powers given by ``orders``. Uses
    ``len(values) - 1`` of them.

    Returns
    -------
    (float, float)
        Extrapolated value and an error estimate (difference to the
        extrapolation that uses one grid fewer).
    """
    table = [np.asarray(values, dtype=float)]
    for p in orders[: len(values) - 1]:
        prev = table[-1]
        fac = ratio ** p
        table.append((fac * prev[1:] - prev[:-1]) / (fac - 1.0))
    best = float(table[-1][-1])
    if len(table) > 1:
        err = abs(best - float(table[-2][-1]))
    else:
        err = float("nan")
    return best, err


def richardson_array(arrays: Sequence[np.ndarray], ratio: float = 2.0,
                     orders: Sequence[int] = (2, 4)) -> np.ndarray:
    """Element-wise Richardson extrapolation of equally shaped arrays."""
    table = [np.asarray(a, dtype=float) for a in arrays]
    for p in orders[: len(arrays) - 1]:
        fac = ratio ** p
        table = [(fac * table[i + 1] - table[i]) / (fac - 1.0)
                 for i in range(len(table) - 1)]
    return table[-1]


def fd_derivative(y: np.ndarray, h: float) -> np.ndarray:
    """Sixth-order first derivative of uniformly sampled data.

    Central seven-point stencil inside, one-sided seven-point stencils in the
    three nodes next to each end.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 7:
        raise ValueError("need at least seven samples")
    d = np.empty_like(y)
    c = np.array([-1, 9, -45, 0, 45, -9, 1]) / 60.0
    d[3:-3] = sum(c[k] * y[k:n - 6 + k] for k in range(7))
    for i in range(3):
        w = _fd_weights(np.arange(7) - i)
        d[i] = w @ y[:7]
        d[n - 1 - i] = -w @ y[::-1][:7]
    return d / h


def _fd_weights(offsets) -> np.ndarray:
    """First-derivative weights at 0 for the given integer offsets."""
    offsets = np.asarray(offsets, dtype=float)
    m = len(offsets)
    vander = np.vander(offsets, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[1] = 1.0
    return np.linalg.solve(vander, rhs)
