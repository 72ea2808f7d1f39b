"""B-spline design matrices over observation times."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import BSpline

from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class BasisMatrix:
    """Design matrix ``phi`` (T x k_n) plus the null-space projector.

    ``null_basis`` spans the subspace the shrinkage prior pulls toward. When
    it is empty the projector ``q0`` is the zero matrix and ``d0 = 0``, i.e.
    shrinkage toward the zero function.
    """

    phi: np.ndarray
    degree: int
    knots: np.ndarray
    null_basis: Optional[np.ndarray] = None

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        T, k = phi.shape
        if k > T:
            raise ConfigError(f"k_n={k} exceeds T={T}")
        if np.linalg.matrix_rank(phi) < k:
            raise ConfigError("basis matrix is not of full column rank")
        object.__setattr__(self, "phi", phi)
        if self.null_basis is None or np.size(self.null_basis) == 0:
            q0 = np.zeros((T, T))
            d0 = 0
            nb = np.zeros((T, 0))
        else:
            nb = np.asarray(self.null_basis, dtype=float).reshape(T, -1)
            d0 = int(np.linalg.matrix_rank(nb))
            q0 = nb @ np.linalg.pinv(nb.T @ nb) @ nb.T
        object.__setattr__(self, "null_basis", nb)
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "d0", d0)
        gram = phi.T @ phi
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "penalty", phi.T @ (np.eye(T) - q0) @ phi)

    @property
    def T(self) -> int:
        return self.phi.shape[0]

    @property
    def k_n(self) -> int:
        return self.phi.shape[1]


def default_kn(T: int) -> int:
    """``max(2, T // 4)`` capped at ``T``.

    The horseshoe constant ``b = T**(-k_n/2)`` shrinks fast in ``k_n``; with
    few time points a richer basis makes the zero verdict win for every
    function, so the default stays small.
    """
    return min(T, max(2, T // 4))


def default_degree(k_n: int) -> int:
    return min(3, k_n - 1)


def build_bspline(T, times=None, k_n=None, degree=None, null_basis=None) -> BasisMatrix:
    """Evaluate ``k_n`` B-splines of ``degree`` at the observation times.

    Clamped knot vector over ``[min(times), max(times)]`` with interior knots
    at equally spaced quantiles of ``times``. Defaults follow
    :func:`default_kn` and :func:`default_degree`.
    """
    T = int(T)
    if T < 1:
        raise ConfigError("T must be positive")
    k_n = default_kn(T) if k_n is None else int(k_n)
    degree = default_degree(k_n) if degree is None else int(degree)
    if k_n > T:
        raise ConfigError(f"k_n={k_n} exceeds the number of time points T={T}")
    if degree < 0:
        raise ConfigError("degree must be non-negative")
    if degree >= k_n:
        raise ConfigError(f"degree={degree} must be smaller than k_n={k_n}")
    if times is None:
        x = np.arange(1, T + 1, dtype=float)
    else:
        x = np.asarray(times, dtype=float)
        if x.shape != (T,):
            raise ConfigError(f"times must have length T={T}")
        if T > 1 and not np.all(np.diff(x) > 0):
            raise ConfigError("times must be strictly increasing")
    if T == 1:
        # a single time point only admits the constant function
        return BasisMatrix(np.ones((1, 1)), 0, np.array([x[0], x[0]]), null_basis)

    lo, hi = x[0], x[-1]
    n_interior = k_n - degree - 1
    levels = np.arange(1, n_interior + 1) / (n_interior + 1)
    interior = np.quantile(x, levels)
    knots = np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])
    phi = BSpline.design_matrix(x, knots, degree).toarray()
    return BasisMatrix(phi, degree, knots, null_basis)


def fhs_constants(k_n, T):
    """Hyperparameters ``(a, b)`` of the functional horseshoe: ``a = 1/2``, ``b = T**(-k_n/2)``."""
    if k_n < 1 or T < 2:
        raise ConfigError("need k_n >= 1 and T >= 2")
    return 0.5, math.exp(-k_n * math.log(T) / 2.0)
