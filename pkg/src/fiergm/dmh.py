"""Functional-horseshoe double Metropolis-Hastings (FHS-DMH) chain.

Each iteration sweeps every time point ``t`` (time points in parallel, since
slices only depend on their own parameter row) and, within ``t``, every
functional index ``i`` sequentially with the freshest values. A coordinate
update proposes ``theta'_ti``, simulates an auxiliary slice ``y_t`` at the
proposed row, and accepts with

    log r = (theta' - theta) * (S_i(x_t) - S_i(y_t)) + log prior(theta') - log prior(theta)

where ``S_i`` is the sufficient statistic paired with coordinate ``i``. The
first term is the difference of unnormalized log-likelihoods
``l(x|theta') + l(y|theta) - l(x|theta) - l(y|theta')``; because the
exponent is linear and the rows differ only at ``i``, it reduces exactly to
the product above. The normalizing constant never appears.

Hyperparameters (eta/tau, sigma2, beta) are then refreshed for all ``i``.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from numba import njit

from . import __version__, _rng
from .basis import BasisMatrix, fhs_constants
from .errors import ConfigError, InvalidInputError
from .fhs import FhsConfig, FhsState, hyper_step, init_state
from .model import ParamIndex, ResponseTensor, items_from_q, stats_matrix
from .sampler import gibbs_steps

RATE_LOW = 0.1
RATE_HIGH = 0.7


@dataclass(frozen=True)
class ProposalConfig:
    """Normal proposal ``N(theta_ti, sd^2)`` for each coordinate.

    With ``adapt`` set, per-coordinate scales are tuned during burn-in by a
    Robbins-Monro recursion on the log scale toward ``target_accept`` and
    then frozen.
    """

    kind: str = "independent-normal"
    sd: float = 0.1
    adapt: bool = False
    target_accept: float = 0.3

    def __post_init__(self):
        if self.kind != "independent-normal":
            raise ConfigError(f"unsupported proposal kind {self.kind!r}")
        if not self.sd > 0:
            raise ConfigError("proposal sd must be positive")
        if not 0 < self.target_accept < 1:
            raise ConfigError("target_accept must lie in (0, 1)")


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 10_000
    burnin: int = 5_000
    thin: int = 1
    inner_multiplier: int = 2
    workers: int = 1
    seed: int = 0
    proposal: ProposalConfig = field(default_factory=ProposalConfig)
    fhs: FhsConfig = field(default_factory=FhsConfig)

    def __post_init__(self):
        if self.iterations < 0 or self.burnin < 0:
            raise ConfigError("iterations and burnin must be non-negative")
        if self.burnin > self.iterations:
            raise ConfigError("burnin must not exceed iterations")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.inner_multiplier < 1:
            raise ConfigError("inner_multiplier must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def n_draws(self) -> int:
        return (self.iterations - self.burnin) // self.thin

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ChainConfig":
        d = dict(d)
        d["proposal"] = ProposalConfig(**d.get("proposal", {}))
        d["fhs"] = FhsConfig(**d.get("fhs", {}))
        return cls(**d)


ARRAY_FIELDS = ("theta", "omega", "tau", "sigma2", "beta", "acceptance", "proposal_sd")
TIMING_KEYS = ("wall_clock_seconds", "started_at")


@dataclass(eq=False)
class ChainOutput:
    """Post-burn-in, thinned draws and run metadata.

    ``theta`` is ``(draws, T, q)``; ``omega``, ``tau``, ``sigma2`` are
    ``(draws, q)``; ``beta`` is ``(draws, q, k_n)``; ``acceptance`` and
    ``proposal_sd`` are ``(T, q)``.
    """

    theta: np.ndarray
    omega: np.ndarray
    tau: np.ndarray
    sigma2: np.ndarray
    beta: np.ndarray
    acceptance: np.ndarray
    proposal_sd: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.theta.shape[0]

    @property
    def p(self) -> int:
        return _index_for_q(self.theta.shape[2]).p

    def posterior_mean(self) -> np.ndarray:
        if self.n_draws == 0:
            raise InvalidInputError("chain has no draws")
        return self.theta.mean(axis=0)

    def identical(self, other: "ChainOutput") -> bool:
        """Bitwise equality of all draws and non-timing metadata."""
        for name in ARRAY_FIELDS:
            a, b = getattr(self, name), getattr(other, name)
            if a.shape != b.shape or a.dtype != b.dtype or a.tobytes() != b.tobytes():
                return False
        strip = lambda m: {k: v for k, v in m.items() if k not in TIMING_KEYS}  # noqa: E731
        return strip(self.metadata) == strip(other.metadata)


def _index_for_q(q):
    return ParamIndex(items_from_q(q))


# ---------------------------------------------------------------------------
# kernels


@njit(nogil=True, cache=True)
def _set_coord(alpha, coupling, i, value, p, pair_j, pair_k):
    if i < p:
        alpha[i] = value
    else:
        j = pair_j[i - p]
        k = pair_k[i - p]
        coupling[j, k] = value
        coupling[k, j] = value


@njit(nogil=True, cache=True)
def _coord_stat(y, i, p, pair_j, pair_k):
    n = y.shape[0]
    s = 0
    if i < p:
        for l in range(n):
            s += y[l, i]
    else:
        j = pair_j[i - p]
        k = pair_k[i - p]
        for l in range(n):
            s += y[l, j] * y[l, k]
    return s


@njit(nogil=True, cache=True)
def log_acceptance(stat_x, stat_y, current, proposal, prior_mean, prior_var):
    """Log DMH ratio for one coordinate (normalizing constants cancel)."""
    delta = proposal - current
    lik = delta * (stat_x - stat_y)
    dc = current - prior_mean
    dp = proposal - prior_mean
    prior = (dc * dc - dp * dp) / (2.0 * prior_var)
    return lik + prior


@njit(nogil=True, cache=True)
def _dmh_coord(theta_t, alpha, coupling, x_t, y, stat_x_i, i, proposal, prior_mean_i, sigma2_i,
               inner_steps, pair_j, pair_k, rng):
    p = x_t.shape[1]
    current = theta_t[i]
    _set_coord(alpha, coupling, i, proposal, p, pair_j, pair_k)
    y[:, :] = x_t
    gibbs_steps(y, alpha, coupling, inner_steps, rng)
    stat_y = _coord_stat(y, i, p, pair_j, pair_k)
    lr = log_acceptance(float(stat_x_i), float(stat_y), current, proposal, prior_mean_i, sigma2_i)
    if np.log(rng.random()) < lr:
        theta_t[i] = proposal
        return 1
    _set_coord(alpha, coupling, i, current, p, pair_j, pair_k)
    return 0


@njit(nogil=True, cache=True)
def _dmh_time_sweep(theta_t, x_t, stat_x, prior_mean_t, sigma2, sd, inner_steps,
                    pair_j, pair_k, rng, y, accepted):
    p = x_t.shape[1]
    q = theta_t.shape[0]
    alpha = theta_t[:p].copy()
    coupling = np.zeros((p, p))
    for m in range(q - p):
        coupling[pair_j[m], pair_k[m]] = theta_t[p + m]
        coupling[pair_k[m], pair_j[m]] = theta_t[p + m]
    nonfinite = 0
    for i in range(q):
        proposal = theta_t[i] + sd[i] * rng.standard_normal()
        if not np.isfinite(proposal):
            nonfinite += 1
            continue
        accepted[i] = _dmh_coord(theta_t, alpha, coupling, x_t, y, stat_x[i], i, proposal,
                                 prior_mean_t[i], sigma2[i], inner_steps, pair_j, pair_k, rng)
    return nonfinite


# ---------------------------------------------------------------------------
# public operations


def dmh_update(t, i, theta_t, x_t, prior_mean, sigma2, sd, inner_multiplier=2, rng=None,
               proposal=None):
    """Single DMH coordinate update at time ``t`` (label only) for index ``i``.

    ``prior_mean`` is ``(phi @ beta_i)[t]`` and ``sigma2`` the prior variance
    of coordinate ``i``. ``theta_t`` is updated in place. Returns
    ``(new_value, accepted)``. A non-finite proposal is rejected.
    """
    if rng is None:
        rng = _rng.stream(0, _rng.DMH, t, i)
    x = np.ascontiguousarray(x_t, dtype=np.int8)
    n, p = x.shape
    index = ParamIndex(p)
    theta_t = np.asarray(theta_t)
    if theta_t.shape != (index.q,) or theta_t.dtype != np.float64:
        raise InvalidInputError("theta_t must be a float64 vector of length q")
    if proposal is None:
        proposal = theta_t[i] + sd * rng.standard_normal()
    if not math.isfinite(proposal):
        return float(theta_t[i]), False
    alpha = theta_t[:p].copy()
    coupling = np.zeros((p, p))
    coupling[index.pair_j, index.pair_k] = theta_t[p:]
    coupling[index.pair_k, index.pair_j] = theta_t[p:]
    stat_x = _coord_stat(x, i, p, index.pair_j, index.pair_k)
    y = np.empty_like(x)
    acc = _dmh_coord(theta_t, alpha, coupling, x, y, stat_x, i, float(proposal), float(prior_mean),
                     float(sigma2), int(inner_multiplier) * n, index.pair_j, index.pair_k, rng)
    return float(theta_t[i]), bool(acc)


def _validate(x: ResponseTensor, phi: BasisMatrix):
    if not isinstance(x, ResponseTensor):
        x = ResponseTensor(x)
    if phi.T != x.T:
        raise ConfigError(f"basis built for T={phi.T} but data has T={x.T}")
    return x


def _resolve_ab(cfg: ChainConfig, phi: BasisMatrix):
    if cfg.fhs.b is not None:
        return cfg.fhs.a, cfg.fhs.b
    if phi.T < 2:
        raise ConfigError("b must be given explicitly when T < 2")
    _, b = fhs_constants(phi.k_n, phi.T)
    return cfg.fhs.a, b


def _adapt_step(m):
    return 1.0 / (m + 1) ** 0.6


def run_chain(x: ResponseTensor, phi: BasisMatrix, cfg: ChainConfig = ChainConfig(),
              progress: Optional[Callable[[int, int], None]] = None,
              progress_every: int = 100) -> ChainOutput:
    """Run FHS-DMH and return thinned post-burn-in draws.

    Reproducible from ``cfg.seed``: every (time point, iteration) pair and
    every hyperparameter sweep has its own counter-keyed stream, so output is
    identical for any worker count.
    """
    x = _validate(x, phi)
    T, n, p = x.shape
    index = ParamIndex(p)
    q = index.q
    a, b = _resolve_ab(cfg, phi)
    data = x.data
    stat_x = stats_matrix(data).astype(np.int64)

    theta, state = init_state(q, phi.k_n, T, cfg.fhs, _rng.stream(cfg.seed, _rng.INIT))
    theta = np.ascontiguousarray(theta)
    log_sd = np.full((T, q), math.log(cfg.proposal.sd))
    sd = np.exp(log_sd)
    inner_steps = int(cfg.inner_multiplier) * n
    ybuf = np.empty_like(data)
    acc_iter = np.zeros((T, q), dtype=np.int64)
    acc_post = np.zeros((T, q), dtype=np.int64)
    acc_all = np.zeros((T, q), dtype=np.int64)
    nonfinite = np.zeros(T, dtype=np.int64)

    draws = cfg.n_draws
    out_theta = np.empty((draws, T, q))
    out_eta = np.empty((draws, q))
    out_sigma2 = np.empty((draws, q))
    out_beta = np.empty((draws, q, phi.k_n))

    def sweep(t, m, prior_mean):
        rng = _rng.stream(cfg.seed, _rng.DMH, t, m)
        acc_iter[t] = 0
        nonfinite[t] += _dmh_time_sweep(theta[t], data[t], stat_x[t], prior_mean[t], state.sigma2,
                                        sd[t], inner_steps, index.pair_j, index.pair_k, rng,
                                        ybuf[t], acc_iter[t])

    started = time.time()
    pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    k = 0
    try:
        for m in range(cfg.iterations):
            prior_mean = np.ascontiguousarray((state.beta @ phi.phi.T).T)  # T x q
            if pool is None:
                for t in range(T):
                    sweep(t, m, prior_mean)
            else:
                list(pool.map(lambda t: sweep(t, m, prior_mean), range(T)))
            acc_all += acc_iter
            if m < cfg.burnin:
                if cfg.proposal.adapt:
                    log_sd += _adapt_step(m) * (acc_iter - cfg.proposal.target_accept)
                    np.clip(log_sd, math.log(1e-4), math.log(10.0), out=log_sd)
                    sd[:] = np.exp(log_sd)
            else:
                acc_post += acc_iter

            hyper_step(theta, state, phi, cfg.fhs, a, b, _rng.stream(cfg.seed, _rng.HYPER, m))

            if m >= cfg.burnin and (m - cfg.burnin + 1) % cfg.thin == 0 and k < draws:
                out_theta[k] = theta
                out_eta[k] = state.eta
                out_sigma2[k] = state.sigma2
                out_beta[k] = state.beta
                k += 1
            if progress is not None and ((m + 1) % progress_every == 0 or m + 1 == cfg.iterations):
                progress(m + 1, cfg.iterations)
    finally:
        if pool is not None:
            pool.shutdown()
    elapsed = time.time() - started

    post_iters = cfg.iterations - cfg.burnin
    if post_iters > 0:
        acceptance = acc_post / post_iters
    elif cfg.iterations > 0:
        acceptance = acc_all / cfg.iterations
    else:
        acceptance = np.zeros((T, q))
    metadata = {
        "version": __version__,
        "config": cfg.to_dict(),
        "shape": [T, n, p],
        "k_n": phi.k_n,
        "degree": phi.degree,
        "a": a,
        "b": b,
        "nonfinite_proposals": int(nonfinite.sum()),
        "wall_clock_seconds": elapsed,
        "started_at": started,
    }
    return ChainOutput(
        theta=out_theta,
        omega=out_eta / (1.0 + out_eta),
        tau=1.0 / np.sqrt(out_eta),
        sigma2=out_sigma2,
        beta=out_beta,
        acceptance=np.asarray(acceptance, dtype=float),
        proposal_sd=sd.copy(),
        metadata=metadata,
    )


@dataclass
class AcceptanceReport:
    rates: np.ndarray
    flagged: np.ndarray  # boolean (T, q): outside [RATE_LOW, RATE_HIGH]
    warnings: list

    @property
    def fraction_healthy(self) -> float:
        return float(1.0 - self.flagged.mean())


def acceptance_report(out: ChainOutput, low=RATE_LOW, high=RATE_HIGH, names=None) -> AcceptanceReport:
    rates = np.asarray(out.acceptance, dtype=float)
    if rates.size == 0:
        raise InvalidInputError("empty chain")
    flagged = (rates < low) | (rates > high)
    if names is None:
        names = _index_for_q(rates.shape[1]).names
    warnings = [
        f"t={t + 1} {names[i]}: acceptance {rates[t, i]:.3f} outside [{low}, {high}]"
        for t, i in zip(*np.nonzero(flagged))
    ]
    return AcceptanceReport(rates=rates, flagged=flagged, warnings=warnings)
