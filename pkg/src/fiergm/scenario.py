"""Synthetic simulation scenarios with cyclic functional parameters."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import _rng
from .errors import ConfigError
from .model import ParamIndex, ParamState, ResponseTensor
from .sampler import simulate_dataset

ZERO, NEGATIVE, POSITIVE = 0, -1, 1


def trend(t):
    """Cyclic mean ``(cos(pi t) + sin(pi t)) / 8``."""
    t = np.asarray(t, dtype=float)
    out = (np.cos(np.pi * t) + np.sin(np.pi * t)) / 8.0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ScenarioSpec:
    """Simulation design.

    Easiness functions sit at ``easiness_level``; interactions are split into
    a zero group, a negative group and a positive group. Group counts left as
    ``None`` are filled in proportion 22:11:12 of the interactions, which for
    ``p = 10`` gives exactly 22, 11 and 12. ``time_grid`` is ``"integer"``
    (trend evaluated at t = 1..T) or ``"unit"`` (at t/T).
    """

    n: int = 600
    p: int = 10
    T: int = 8
    sigma2: float = 0.05
    easiness_level: float = -1.0
    negative_level: float = -1.0
    positive_level: float = 1.0
    n_zero: Optional[int] = None
    n_negative: Optional[int] = None
    n_positive: Optional[int] = None
    time_grid: str = "integer"
    seed: int = 0
    burn_multiplier: int = 100

    def __post_init__(self):
        if self.n < 1 or self.p < 2 or self.T < 1:
            raise ConfigError("need n >= 1, p >= 2, T >= 1")
        if self.sigma2 < 0:
            raise ConfigError("sigma2 must be non-negative")
        if self.time_grid not in ("integer", "unit"):
            raise ConfigError("time_grid must be 'integer' or 'unit'")
        if self.burn_multiplier < 1:
            raise ConfigError("burn_multiplier must be >= 1")
        zero, neg, pos = self.group_sizes()
        if min(zero, neg, pos) < 0 or zero + neg + pos != self.n_interactions:
            raise ConfigError(
                f"group sizes {zero}+{neg}+{pos} do not add up to {self.n_interactions} interactions"
            )

    @property
    def n_interactions(self) -> int:
        return self.p * (self.p - 1) // 2

    @property
    def q(self) -> int:
        return self.p + self.n_interactions

    def group_sizes(self):
        m = self.n_interactions
        zero = self.n_zero if self.n_zero is not None else int(round(m * 22 / 45))
        neg = self.n_negative if self.n_negative is not None else int(round(m * 11 / 45))
        if self.n_positive is not None:
            pos = self.n_positive
        else:
            pos = m - zero - neg
        return zero, neg, pos

    def times(self) -> np.ndarray:
        t = np.arange(1, self.T + 1, dtype=float)
        return t if self.time_grid == "integer" else t / self.T

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class Truth:
    theta: ParamState
    groups: np.ndarray  # ZERO/NEGATIVE/POSITIVE level sign per functional index
    true_zero: np.ndarray  # sorted flat indices of the zero-level interactions

    @property
    def true_nonzero(self) -> np.ndarray:
        idx = ParamIndex(self.theta.p)
        zero = set(self.true_zero.tolist())
        return np.array([i for i in idx.interactions if i not in zero], dtype=int)


def generate_truth(spec: ScenarioSpec, rng=None) -> Truth:
    """Draw every functional parameter as level + trend(t) + N(0, sigma2) noise.

    Interactions are assigned to the zero/negative/positive groups by a
    seeded random permutation; easiness functions use ``easiness_level``.
    """
    if rng is None:
        rng = _rng.stream(spec.seed, _rng.TRUTH)
    index = ParamIndex(spec.p)
    zero, neg, pos = spec.group_sizes()
    levels = np.empty(index.q)
    groups = np.empty(index.q, dtype=int)
    levels[: spec.p] = spec.easiness_level
    groups[: spec.p] = NEGATIVE if spec.easiness_level < 0 else POSITIVE
    perm = rng.permutation(np.arange(spec.p, index.q))
    zero_idx = np.sort(perm[:zero])
    neg_idx = np.sort(perm[zero : zero + neg])
    pos_idx = np.sort(perm[zero + neg :])
    levels[zero_idx], groups[zero_idx] = 0.0, ZERO
    levels[neg_idx], groups[neg_idx] = spec.negative_level, NEGATIVE
    levels[pos_idx], groups[pos_idx] = spec.positive_level, POSITIVE
    mu = trend(spec.times())
    noise = rng.standard_normal((spec.T, index.q)) * math.sqrt(spec.sigma2)
    theta = levels[None, :] + np.asarray(mu)[:, None] + noise
    return Truth(theta=ParamState(theta, index), groups=groups, true_zero=zero_idx)


def generate_scenario(spec: ScenarioSpec):
    """Return ``(tensor, truth)``: parameters from :func:`generate_truth`, data by long Gibbs runs."""
    truth = generate_truth(spec)
    x = simulate_dataset(truth.theta, spec.n, burn_multiplier=spec.burn_multiplier, seed=spec.seed)
    x = ResponseTensor(x.data, time_labels=spec.times())
    return x, truth
