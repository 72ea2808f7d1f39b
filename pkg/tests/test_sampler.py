import itertools
import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import expit

from fiergm import _rng
from fiergm.errors import ConfigError, InvalidInputError
from fiergm.model import compute_suff_stats, coupling_matrix, exact_per_respondent_normalizer, n_params
from fiergm.sampler import InnerSamplerConfig, gibbs_steps, simulate_dataset, simulate_slice

THIN = 20


def exact_pair_distribution(row):
    """Probabilities of (0,0), (1,0), (0,1), (1,1) for p = 2 by enumeration."""
    lz = exact_per_respondent_normalizer(row, 2)
    out = []
    for v in itertools.product((0, 1), repeat=2):
        v = v[::-1]  # code = v0 + 2 v1
        e = row[0] * v[0] + row[1] * v[1] + row[2] * v[0] * v[1]
        out.append(math.exp(e - lz))
    return np.array(out)


def run_trace(row, total_steps, thin, seed):
    p = 2
    y = np.zeros((1, p), dtype=np.int8)
    alpha, g = row[:p].copy(), coupling_matrix(row, p)
    rng = _rng.stream(seed, 99)
    counts = np.zeros(4, dtype=np.int64)
    for _ in range(total_steps // thin):
        gibbs_steps(y, alpha, g, thin, rng)
        counts[y[0, 0] + 2 * y[0, 1]] += 1
    return counts


def test_pair_chain_matches_exact_distribution():
    row = np.array([0.3, -0.5, 0.8])
    counts = run_trace(row, 1_000_000, THIN, seed=11)
    probs = exact_pair_distribution(row)
    freq = counts / counts.sum()
    assert np.max(np.abs(freq - probs)) < 0.01
    chi2 = stats.chisquare(counts, counts.sum() * probs)
    assert chi2.pvalue > 0.01


def test_independent_items_match_logistic():
    alpha = np.array([-1.0, 0.0, 0.7, 2.0])
    row = np.concatenate([alpha, np.zeros(6)])
    y = simulate_slice(row, 200, cfg=InnerSamplerConfig(step_multiplier=200), rng=_rng.stream(3, 1))
    assert np.all(np.abs(y.mean(axis=0) - expit(alpha)) < 0.05)
    x = simulate_dataset(np.tile(row, (6, 1)), 500, seed=4)
    assert np.all(np.abs(x.data.mean(axis=(0, 1)) - expit(alpha)) < 0.02)


def test_symmetric_model_mean_half():
    y = simulate_slice(np.zeros(n_params(5)), 100, cfg=InnerSamplerConfig(step_multiplier=1000),
                       rng=_rng.stream(5, 1))
    assert abs(y.mean() - 0.5) < 0.02


def test_step_count_and_init_untouched():
    init = np.zeros((30, 3), dtype=np.int8)
    row = np.full(n_params(3), 5.0)
    y = simulate_slice(row, 30, init=init, cfg=InnerSamplerConfig(step_multiplier=1), rng=_rng.stream(0, 1))
    assert not init.any()
    # 30 steps cannot touch more than 30 cells
    assert 0 < y.sum() <= 30


def test_simulate_slice_determinism():
    row = np.random.default_rng(0).normal(size=n_params(4))
    a = simulate_slice(row, 50, cfg=InnerSamplerConfig(rng_seed=9))
    b = simulate_slice(row, 50, cfg=InnerSamplerConfig(rng_seed=9))
    c = simulate_slice(row, 50, cfg=InnerSamplerConfig(rng_seed=10))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_simulate_slice_validation():
    with pytest.raises(InvalidInputError):
        simulate_slice(np.zeros(6), 4, init=np.zeros((3, 3)))
    with pytest.raises(InvalidInputError):
        simulate_slice(np.array([0.0, np.inf, 0.0]), 4)
    with pytest.raises(ConfigError):
        InnerSamplerConfig(step_multiplier=0)


def test_init_independence():
    rng = np.random.default_rng(1)
    row = np.concatenate([rng.normal(-0.5, 0.3, 4), rng.normal(0, 0.5, 6)])
    cfg = InnerSamplerConfig(step_multiplier=100)
    zeros = simulate_slice(row, 2000, init=np.zeros((2000, 4)), cfg=cfg, rng=_rng.stream(1, 1))
    ones = simulate_slice(row, 2000, init=np.ones((2000, 4)), cfg=cfg, rng=_rng.stream(2, 1))
    sz, so = compute_suff_stats(zeros).vector(), compute_suff_stats(ones).vector()
    # binomial-scale tolerance on counts out of 2000
    assert np.all(np.abs(sz - so) < 5 * np.sqrt(2000 * 0.25 * 2))


def test_simulate_dataset_reproducible_and_independent_slices():
    theta = np.tile(np.random.default_rng(2).normal(0, 0.5, n_params(3)), (4, 1))
    a = simulate_dataset(theta, 40, seed=3)
    b = simulate_dataset(theta, 40, seed=3)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data[0], a.data[1])
    assert a.shape == (4, 40, 3)


def test_simulate_dataset_uniform_model():
    x = simulate_dataset(np.zeros((3, n_params(4))), 300, seed=1)
    assert abs(x.data.mean() - 0.5) < 0.02


def test_two_seeds_agree_in_distribution():
    rng = np.random.default_rng(3)
    theta = np.tile(np.concatenate([rng.normal(-0.5, 0.2, 4), rng.normal(0, 0.4, 6)]), (2, 1))
    a = simulate_dataset(theta, 3000, seed=1)
    b = simulate_dataset(theta, 3000, seed=2)
    ma, mb = a.data.mean(axis=1), b.data.mean(axis=1)
    assert np.all(np.abs(ma - mb) < 5 * np.sqrt(0.5 / 3000))
