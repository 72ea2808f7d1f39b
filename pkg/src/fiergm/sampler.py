"""Random-scan single-entry Gibbs simulation of response slices.

Each step picks a (respondent, item) cell uniformly and redraws it from its
full conditional. This is the Metropolis-Hastings update with the full
conditional as proposal, so it is always accepted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _rng
from .errors import ConfigError, InvalidInputError
from .model import ParamState, ResponseTensor, coupling_matrix, items_from_q, n_params


@dataclass(frozen=True)
class InnerSamplerConfig:
    step_multiplier: int = 2
    update_rule: str = "random-scan"
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.step_multiplier) < 1:
            raise ConfigError("step_multiplier must be >= 1")
        if self.update_rule != "random-scan":
            raise ConfigError(f"unsupported update rule {self.update_rule!r}")


@njit(nogil=True, cache=True)
def gibbs_steps(y, alpha, coupling, steps, rng):
    """Run ``steps`` random-scan updates on the int8 slice ``y`` in place."""
    n, p = y.shape
    if steps <= 0:
        return
    cells = rng.integers(0, n * p, steps)
    u = rng.random(steps)
    for s in range(steps):
        c = cells[s]
        l = c // p
        j = c - l * p
        f = alpha[j]
        for k in range(p):
            f += coupling[j, k] * y[l, k]
        # u < 1 / (1 + exp(-f)) without a division
        if u[s] * (1.0 + np.exp(-f)) < 1.0:
            y[l, j] = 1
        else:
            y[l, j] = 0


def _row(theta_t, p=None):
    row = np.asarray(theta_t, dtype=float)
    if row.ndim != 1:
        raise InvalidInputError("theta_t must be a vector")
    if not np.all(np.isfinite(row)):
        raise InvalidInputError("theta_t has non-finite entries")
    if p is not None and row.shape[0] != n_params(p):
        raise InvalidInputError(f"theta_t has length {row.shape[0]}, expected {n_params(p)}")
    return row


def _p_from_row(row):
    return items_from_q(row.shape[0])


def random_slice(n, p, rng):
    return rng.integers(0, 2, size=(n, p)).astype(np.int8)


def simulate_slice(theta_t, n, init=None, cfg=InnerSamplerConfig(), rng=None):
    """Simulate one ``n x p`` slice at parameters ``theta_t``.

    Runs ``cfg.step_multiplier * n`` random-scan updates starting from
    ``init`` (or a uniform random slice). ``init`` is not modified. When
    ``rng`` is omitted the stream is derived from ``cfg.rng_seed``.
    """
    row = _row(theta_t)
    p = _p_from_row(row)
    if rng is None:
        rng = _rng.stream(cfg.rng_seed, _rng.SLICE)
    if init is None:
        y = random_slice(n, p, rng)
    else:
        y = np.array(init, dtype=np.int8)
        if y.shape != (n, p):
            raise InvalidInputError(f"init has shape {y.shape}, expected {(n, p)}")
        if not np.isin(y, (0, 1)).all():
            raise InvalidInputError("init has entries outside {0, 1}")
    gibbs_steps(y, row[:p].copy(), coupling_matrix(row, p), int(cfg.step_multiplier) * int(n), rng)
    return y


def simulate_dataset(theta, n, burn_multiplier=100, cfg=InnerSamplerConfig(), seed=None):
    """Simulate a ``T x n x p`` tensor, each slice from its own random start.

    Every slice runs ``burn_multiplier * n`` updates on an independent stream
    keyed by ``(seed, t)``; ``seed`` defaults to ``cfg.rng_seed``.
    """
    th = theta.theta if isinstance(theta, ParamState) else np.asarray(theta, dtype=float)
    if th.ndim != 2:
        raise InvalidInputError("theta must be T x q")
    if int(burn_multiplier) < 1:
        raise ConfigError("burn_multiplier must be >= 1")
    seed = cfg.rng_seed if seed is None else seed
    T = th.shape[0]
    p = _p_from_row(th[0])
    out = np.empty((T, n, p), dtype=np.int8)
    for t in range(T):
        row = _row(th[t], p)
        rng = _rng.stream(seed, _rng.DATA, t)
        y = random_slice(n, p, rng)
        gibbs_steps(y, row[:p].copy(), coupling_matrix(row, p), int(burn_multiplier) * int(n), rng)
        out[t] = y
    return ResponseTensor(out)
