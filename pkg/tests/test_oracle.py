import itertools

import numpy as np
import pytest
from scipy.optimize import minimize

from fiergm.basis import build_bspline
from fiergm.dmh import ChainConfig
from fiergm.errors import CapacityError
from fiergm.model import ParamIndex, ResponseTensor, compute_suff_stats, exact_per_respondent_normalizer
from fiergm.oracle import _energy_design, run_exact_chain
from fiergm.sampler import simulate_dataset


def test_energy_design_rows_are_pattern_statistics():
    p = 4
    d = _energy_design(p)
    assert d.shape == (16, ParamIndex(p).q)
    rows = {tuple(r) for r in d}
    for bits in itertools.product((0, 1), repeat=p):
        assert tuple(compute_suff_stats(np.array([bits])).vector().astype(float)) in rows
    theta = np.random.default_rng(0).normal(size=ParamIndex(p).q)
    log_z = np.log(np.exp(d @ theta).sum())
    assert log_z == pytest.approx(exact_per_respondent_normalizer(theta, p))


def test_capacity_limit():
    x = ResponseTensor(np.zeros((2, 3, 13), dtype=int))
    with pytest.raises(CapacityError):
        run_exact_chain(x, build_bspline(2), ChainConfig(iterations=1, burnin=0))


def test_large_sample_posterior_centres_on_mle():
    # with n large the likelihood dominates the prior, so the posterior mean
    # should sit within a few standard errors of the numerical MLE
    p, T, n = 2, 2, 3000
    theta = np.array([[0.4, -0.6, 0.8], [-0.3, 0.2, -0.5]])
    x = simulate_dataset(theta, n, seed=1)
    d = _energy_design(p)
    out = run_exact_chain(x, build_bspline(T, k_n=2), ChainConfig(iterations=3000, burnin=500, seed=2))
    mean = out.posterior_mean()
    for t in range(T):
        s = compute_suff_stats(x.data[t]).vector().astype(float)

        def nll(th):
            e = d @ th
            m = e.max()
            return -(s @ th - n * (m + np.log(np.exp(e - m).sum())))

        mle = minimize(nll, np.zeros(3), method="BFGS").x
        assert np.max(np.abs(mean[t] - mle)) < 0.06
    assert out.metadata["sampler"] == "exact"


def test_deterministic():
    x = simulate_dataset(np.zeros((2, 3)), 20, seed=0)
    cfg = ChainConfig(iterations=20, burnin=5, seed=3)
    a = run_exact_chain(x, build_bspline(2), cfg)
    b = run_exact_chain(x, build_bspline(2), cfg)
    assert a.identical(b)
