"""Reference posterior sampler that evaluates the likelihood exactly.

Same hierarchy, proposals, sweep order and hyperparameter updates as
:func:`fiergm.dmh.run_chain`, but each coordinate update accepts with the
true likelihood ratio, computed through the enumerated normalizer. Only
feasible for small ``p``; used to validate the auxiliary-variable chain.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from . import _rng
from .basis import BasisMatrix
from .dmh import ChainConfig, ChainOutput, _resolve_ab, _validate
from .errors import CapacityError
from .fhs import hyper_step, init_state
from .model import ParamIndex, ResponseTensor, stats_matrix

MAX_ORACLE_ITEMS = 12


def _energy_design(p: int) -> np.ndarray:
    """Rows are the sufficient statistics of every response pattern (2**p x q)."""
    index = ParamIndex(p)
    codes = np.arange(1 << p)
    v = ((codes[:, None] >> np.arange(p)) & 1).astype(float)
    return np.hstack([v, v[:, index.pair_j] * v[:, index.pair_k]])


def run_exact_chain(x: ResponseTensor, phi: BasisMatrix, cfg: ChainConfig = ChainConfig()) -> ChainOutput:
    """Metropolis-within-Gibbs with the exact likelihood; returns a :class:`ChainOutput`."""
    x = _validate(x, phi)
    T, n, p = x.shape
    if p > MAX_ORACLE_ITEMS:
        raise CapacityError(f"exact chain limited to p <= {MAX_ORACLE_ITEMS}")
    q = ParamIndex(p).q
    a, b = _resolve_ab(cfg, phi)
    design = _energy_design(p)
    stat_x = stats_matrix(x).astype(float)

    theta, state = init_state(q, phi.k_n, T, cfg.fhs, _rng.stream(cfg.seed, _rng.INIT))
    sd = np.full((T, q), cfg.proposal.sd)
    acc = np.zeros((T, q))
    draws = cfg.n_draws
    out_theta = np.empty((draws, T, q))
    out_eta = np.empty((draws, q))
    out_sigma2 = np.empty((draws, q))
    out_beta = np.empty((draws, q, phi.k_n))
    k = 0
    for m in range(cfg.iterations):
        prior_mean = (state.beta @ phi.phi.T).T
        for t in range(T):
            rng = _rng.stream(cfg.seed, _rng.ORACLE, t, m)
            row = theta[t]
            energy = design @ row
            log_z = logsumexp(energy)
            for i in range(q):
                prop = row[i] + sd[t, i] * rng.standard_normal()
                delta = prop - row[i]
                energy_new = energy + delta * design[:, i]
                log_z_new = logsumexp(energy_new)
                dc = row[i] - prior_mean[t, i]
                dp = prop - prior_mean[t, i]
                lr = delta * stat_x[t, i] - n * (log_z_new - log_z) + (dc * dc - dp * dp) / (2 * state.sigma2[i])
                if math.log(rng.random()) < lr:
                    row[i] = prop
                    energy, log_z = energy_new, log_z_new
                    if m >= cfg.burnin:
                        acc[t, i] += 1
        hyper_step(theta, state, phi, cfg.fhs, a, b, _rng.stream(cfg.seed, _rng.HYPER, m))
        if m >= cfg.burnin and (m - cfg.burnin + 1) % cfg.thin == 0 and k < draws:
            out_theta[k] = theta
            out_eta[k] = state.eta
            out_sigma2[k] = state.sigma2
            out_beta[k] = state.beta
            k += 1
    post = max(cfg.iterations - cfg.burnin, 1)
    return ChainOutput(
        theta=out_theta,
        omega=out_eta / (1.0 + out_eta),
        tau=1.0 / np.sqrt(out_eta),
        sigma2=out_sigma2,
        beta=out_beta,
        acceptance=acc / post,
        proposal_sd=sd,
        metadata={"sampler": "exact", "config": cfg.to_dict(), "shape": [T, n, p], "a": a, "b": b},
    )
