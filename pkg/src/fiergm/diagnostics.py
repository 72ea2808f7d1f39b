"""Shrinkage verdicts, Monte Carlo standard errors, posterior predictive checks and scoring."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _rng
from .errors import InvalidInputError
from .model import ParamIndex, ResponseTensor, coupling_matrix, items_from_q, stats_matrix
from .sampler import gibbs_steps, random_slice

OMEGA_THRESHOLD = 0.5


@dataclass
class ShrinkageReport:
    mean_omega: np.ndarray
    is_zero: np.ndarray
    names: list

    @property
    def n_zero(self) -> int:
        return int(self.is_zero.sum())

    def n_zero_interactions(self, p: int) -> int:
        return int(self.is_zero[p:].sum())

    def rows(self):
        for i, (name, w, z) in enumerate(zip(self.names, self.mean_omega, self.is_zero)):
            yield i, name, float(w), "zero" if z else "nonzero"


def diagnose_shrinkage(omega_traces, threshold=OMEGA_THRESHOLD, names=None) -> ShrinkageReport:
    """A function is diagnosed zero when the posterior mean of its omega exceeds ``threshold``."""
    w = np.asarray(omega_traces, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    if w.shape[0] == 0:
        raise InvalidInputError("omega trace is empty")
    mean = w.mean(axis=0)
    if names is None:
        try:
            names = ParamIndex(items_from_q(w.shape[1])).names
        except InvalidInputError:
            names = [f"f{i + 1}" for i in range(w.shape[1])]
    return ShrinkageReport(mean_omega=mean, is_zero=mean > threshold, names=list(names))


def mcse(trace) -> float:
    """Batch-means Monte Carlo standard error with batch size ``floor(sqrt(len))``."""
    x = np.asarray(trace, dtype=float).ravel()
    n = x.shape[0]
    if n < 100:
        raise InvalidInputError(f"need at least 100 draws for batch means, got {n}")
    b = int(math.isqrt(n))
    a = n // b
    batches = x[: a * b].reshape(a, b).mean(axis=1)
    var = b * np.sum((batches - batches.mean()) ** 2) / (a - 1)
    return float(math.sqrt(var / (a * b)))


def mcse_array(draws) -> np.ndarray:
    """MCSE for every trailing coordinate of a ``(draws, ...)`` array."""
    d = np.asarray(draws, dtype=float)
    flat = d.reshape(d.shape[0], -1)
    return np.array([mcse(flat[:, c]) for c in range(flat.shape[1])]).reshape(d.shape[1:])


def max_mcse(out) -> float:
    """Largest MCSE over all theta traces (the single summary figure reported)."""
    return float(mcse_array(out.theta).max())


def degree_statistics(x_t) -> np.ndarray:
    """Average number of items with item-item degree ``m`` per respondent, ``m = 0..p-1``.

    For respondent ``l`` item ``j`` has degree ``|{k != j : x_lj x_lk = 1}|``.
    """
    x = np.asarray(x_t)
    n, p = x.shape
    r = x.sum(axis=1).astype(np.int64)
    counts = np.zeros(p)
    counts[0] += np.sum(p - r)
    np.add.at(counts, np.maximum(r - 1, 0), r)
    return counts / n


def degree_matrix(x) -> np.ndarray:
    data = x.data if isinstance(x, ResponseTensor) else np.asarray(x)
    return np.stack([degree_statistics(s) for s in data])


@dataclass
class PpcReport:
    observed_stats: np.ndarray  # T x q
    simulated_stats: np.ndarray  # T x q, mean over replicates
    observed_degree: np.ndarray  # T x p
    simulated_degree: np.ndarray  # T x p
    replicates: int
    names: list

    def stats_table(self):
        T, q = self.observed_stats.shape
        for t in range(T):
            for i in range(q):
                yield t + 1, self.names[i], self.observed_stats[t, i], self.simulated_stats[t, i]

    def degree_table(self):
        T, p = self.observed_degree.shape
        for t in range(T):
            for m in range(p):
                yield t + 1, m, self.observed_degree[t, m], self.simulated_degree[t, m]

    def stats_correlation(self) -> float:
        return float(np.corrcoef(self.observed_stats.ravel(), self.simulated_stats.ravel())[0, 1])

    def degree_correlation(self) -> float:
        return float(np.corrcoef(self.observed_degree.ravel(), self.simulated_degree.ravel())[0, 1])

    def degree_slope(self) -> float:
        """OLS slope of observed on mean simulated degree statistics."""
        return _slope(self.simulated_degree.ravel(), self.observed_degree.ravel())

    def stats_slope(self) -> float:
        return _slope(self.simulated_stats.ravel(), self.observed_stats.ravel())


def _slope(x, y) -> float:
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def _replicate(theta, n, steps, seed, r):
    T, q = theta.shape
    p = items_from_q(q)
    stats = np.empty((T, q))
    degree = np.empty((T, p))
    for t in range(T):
        rng = _rng.stream(seed, _rng.PPC, r, t)
        row = theta[t]
        y = random_slice(n, p, rng)
        gibbs_steps(y, row[:p].copy(), coupling_matrix(row, p), steps, rng)
        stats[t] = stats_matrix(y[None])[0]
        degree[t] = degree_statistics(y)
    return stats, degree


def ppc_summary(x: ResponseTensor, theta_samples, replicates=1000, burn_multiplier=100, seed=0,
                workers=1) -> PpcReport:
    """Posterior predictive comparison of sufficient and degree statistics.

    ``replicates`` parameter draws are taken evenly spaced from
    ``theta_samples`` (``draws x T x q``); one tensor is simulated per draw
    from a random start with ``burn_multiplier * n`` updates per slice.
    """
    samples = np.asarray(theta_samples, dtype=float)
    if samples.ndim == 2:
        samples = samples[None]
    if samples.shape[0] < replicates:
        raise InvalidInputError(
            f"need at least {replicates} posterior draws for the PPC, got {samples.shape[0]}"
        )
    if replicates < 1:
        raise InvalidInputError("replicates must be positive")
    if samples.shape[1:] != (x.T, len(ParamIndex(x.p))):
        raise InvalidInputError("posterior draws do not match the tensor dimensions")
    pick = np.linspace(0, samples.shape[0] - 1, replicates).round().astype(int)
    steps = int(burn_multiplier) * x.n

    def job(r):
        return _replicate(np.ascontiguousarray(samples[pick[r]]), x.n, steps, seed, r)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(replicates)))
    else:
        results = [job(r) for r in range(replicates)]
    sim_stats = np.mean([s for s, _ in results], axis=0)
    sim_degree = np.mean([d for _, d in results], axis=0)
    return PpcReport(
        observed_stats=stats_matrix(x).astype(float),
        simulated_stats=sim_stats,
        observed_degree=degree_matrix(x),
        simulated_degree=sim_degree,
        replicates=replicates,
        names=ParamIndex(x.p).names,
    )


@dataclass(frozen=True)
class Score:
    mse: float
    tp: float
    tn: float


def score_scenario(estimates, truth, true_zero_set, report: ShrinkageReport,
                   true_nonzero_set: Optional[np.ndarray] = None) -> Score:
    """MSE over all functional parameters plus TP/TN of the zero verdicts.

    MSE is ``mean_i |theta_hat_i - theta_i|^2`` with the squared norm taken
    over time. TP is the share of ``true_zero_set`` diagnosed zero; TN is the
    share of true-nonzero interactions diagnosed nonzero. Unless given, the
    true-nonzero set is every interaction outside ``true_zero_set``.
    """
    est = np.asarray(estimates, dtype=float)
    th = truth.theta if hasattr(truth, "theta") else np.asarray(truth, dtype=float)
    if est.shape != th.shape:
        raise InvalidInputError(f"estimate shape {est.shape} != truth shape {th.shape}")
    q = th.shape[1]
    mse = float(np.mean(np.sum((est - th) ** 2, axis=0)))
    zero = np.asarray(sorted(set(int(i) for i in true_zero_set)), dtype=int)
    if true_nonzero_set is None:
        p = items_from_q(q)
        zs = set(zero.tolist())
        nonzero = np.array([i for i in range(p, q) if i not in zs], dtype=int)
    else:
        nonzero = np.asarray(true_nonzero_set, dtype=int)
    verdict = np.asarray(report.is_zero, dtype=bool)
    tp = float(verdict[zero].mean()) if zero.size else float("nan")
    tn = float((~verdict[nonzero]).mean()) if nonzero.size else float("nan")
    return Score(mse=mse, tp=tp, tn=tn)
