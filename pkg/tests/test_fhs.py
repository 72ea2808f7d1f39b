import math

import numpy as np
import pytest
from scipy import integrate, stats

from fiergm.basis import build_bspline, fhs_constants
from fiergm.errors import ConfigError, InvalidStateError
from fiergm.fhs import (
    FhsConfig,
    FhsState,
    beta_conditional,
    eta_rate,
    eta_shape,
    hyper_step,
    init_state,
    log_prior_theta,
    omega,
    slice_update_eta,
    update_beta,
    update_sigma2,
)

PHI = build_bspline(8, k_n=6)
A, B = fhs_constants(PHI.k_n, PHI.T)
N_DRAWS = 1_000_000


def rng(seed=0):
    return np.random.default_rng(seed)


# -- omega / prior density ----------------------------------------------------


def test_omega_values():
    assert omega(1.0) == 0.5
    assert omega(3.0) == pytest.approx(0.1)
    assert omega(1e-9) == pytest.approx(1.0)
    taus = np.linspace(0.1, 5, 50)
    assert np.all(np.diff(omega(taus)) < 0)
    with pytest.raises(InvalidStateError):
        omega(0.0)


def test_state_bookkeeping():
    s = FhsState(beta=np.zeros((3, 6)), eta=np.array([0.25, 1.0, 9.0]), sigma2=np.ones(3))
    assert np.allclose(s.eta * s.tau**2, 1.0, atol=1e-12)
    assert np.allclose(s.omega, s.eta / (1 + s.eta))
    assert np.allclose(s.omega, omega(s.tau))


def test_log_prior_theta_at_mean():
    beta = rng().normal(size=PHI.k_n)
    theta = PHI.phi @ beta
    assert log_prior_theta(theta, beta, 0.3, PHI) == pytest.approx(-4 * math.log(2 * math.pi * 0.3))
    assert log_prior_theta(theta, beta, 0.6, PHI) < log_prior_theta(theta, beta, 0.3, PHI)


def test_log_prior_theta_formula():
    r = rng(1)
    beta, theta = r.normal(size=PHI.k_n), r.normal(size=8)
    s2 = 0.7
    resid = theta - PHI.phi @ beta
    want = sum(-0.5 * math.log(2 * math.pi * s2) - e * e / (2 * s2) for e in resid)
    assert log_prior_theta(theta, beta, s2, PHI) == pytest.approx(want, abs=1e-10)
    with pytest.raises(InvalidStateError):
        log_prior_theta(theta, beta, 0.0, PHI)


# -- eta slice sampler --------------------------------------------------------


def eta_log_density(eta, shape, c, ab):
    return (shape - 1) * np.log(eta) - c * eta - ab * np.log1p(eta)


def quadrature_cdf(shape, c, ab):
    """Normalized CDF of the eta conditional on a fine log grid."""
    u = np.linspace(-40, 12, 200_001)
    eta = np.exp(u)
    logf = eta_log_density(eta, shape, c, ab) + u  # change of variables d eta = eta du
    f = np.exp(logf - logf.max())
    cdf = integrate.cumulative_trapezoid(f, u, initial=0.0)
    cdf /= cdf[-1]
    return lambda x: np.interp(np.log(np.maximum(x, 1e-300)), u, cdf)


@pytest.mark.parametrize("scale", [0.15, 0.6, 0.0])
def test_slice_sampler_matches_quadrature(scale):
    r = rng(2)
    n_chains, steps = 100_000, 60
    beta1 = scale * r.normal(size=PHI.k_n)
    sigma2 = 0.2
    beta = np.tile(beta1, (n_chains, 1))
    s2 = np.full(n_chains, sigma2)
    eta = np.full(n_chains, 1.0)
    for _ in range(steps):
        eta = slice_update_eta(eta, beta, s2, PHI, A, B, r)
    c = float(eta_rate(beta1, sigma2, PHI))
    cdf = quadrature_cdf(eta_shape(A, PHI), c, A + B)
    if c == 0.0:
        # improper without the exponential factor: check only that the power-law path ran
        assert np.all(np.isfinite(eta)) and np.all(eta > 0)
        return
    ks = stats.kstest(eta, cdf).statistic
    assert ks < 0.02


def test_slice_contains_current_point():
    # with u at its maximum the bound equals eta, so the new point is <= eta
    r = rng(3)
    eta = np.full(1000, 2.5)
    beta = np.tile(r.normal(size=PHI.k_n), (1000, 1))

    class TopU:
        def __init__(self, inner):
            self.inner, self.calls = inner, 0

        def random(self, shape):
            self.calls += 1
            return np.ones(shape) if self.calls == 1 else self.inner.random(shape)

    new = slice_update_eta(eta, beta, np.ones(1000), PHI, A, B, TopU(r))
    assert np.all(new <= 2.5 * (1 + 1e-12))


def test_slice_never_leaves_slice():
    r = rng(4)
    for _ in range(200):
        eta = np.exp(r.normal(0, 3, 50))
        beta = r.normal(0, r.uniform(0.01, 3), (50, PHI.k_n))

        class Rec:
            def __init__(self):
                self.v = None

            def random(self, shape):
                out = r.random(shape)
                if self.v is None:
                    self.v = out
                return out

        rec = Rec()
        new = slice_update_eta(eta, beta, np.ones(50), PHI, A, B, rec)
        log_u = np.log(rec.v) - (A + B) * np.log1p(eta)
        assert np.all(-(A + B) * np.log1p(new) >= log_u - 1e-9)


def test_strong_signal_shrinks_eta():
    shape = eta_shape(A, PHI)

    def mean(c):
        f = lambda e: math.exp(eta_log_density(e, shape, c, A + B))  # noqa: E731
        z = integrate.quad(f, 0, np.inf, limit=200)[0]
        return integrate.quad(lambda e: e * f(e), 0, np.inf, limit=200)[0] / z

    assert mean(50.0) < mean(1.0)
    r = rng(5)
    draws = {}
    for c_scale in (0.2, 3.0):
        beta = np.tile(c_scale * np.ones(PHI.k_n), (20_000, 1))
        eta = np.ones(20_000)
        for _ in range(30):
            eta = slice_update_eta(eta, beta, np.ones(20_000), PHI, A, B, r)
        draws[c_scale] = eta.mean()
    assert draws[3.0] < draws[0.2]


def test_slice_rejects_nonpositive():
    with pytest.raises(InvalidStateError):
        slice_update_eta(np.array([0.0]), np.zeros((1, PHI.k_n)), np.ones(1), PHI, A, B, rng())


# -- sigma2 -------------------------------------------------------------------


def test_sigma2_zero_data_terms():
    cfg = FhsConfig()
    beta = np.zeros(PHI.k_n)
    draws = update_sigma2(np.zeros((N_DRAWS, 8)), np.zeros((N_DRAWS, PHI.k_n)), np.ones(N_DRAWS), PHI, cfg, rng(6))
    shape = 4 + 3 + 0.01
    ref = stats.invgamma(shape, scale=0.01)
    assert draws.mean() == pytest.approx(ref.mean(), rel=0.01)
    assert draws.var() == pytest.approx(ref.var(), rel=0.05)
    assert update_sigma2(np.zeros(8), beta, 1.0, PHI, cfg, rng()) > 0


def test_sigma2_moments_generic():
    cfg = FhsConfig()
    r = rng(7)
    beta = r.normal(size=PHI.k_n)
    theta = PHI.phi @ beta + r.normal(0, 0.5, 8)
    tau = 0.8
    draws = update_sigma2(np.tile(theta, (N_DRAWS, 1)), np.tile(beta, (N_DRAWS, 1)), np.full(N_DRAWS, tau),
                          PHI, cfg, r)
    shape = 4 + 3 + 0.01
    scale = 0.5 * np.sum((theta - PHI.phi @ beta) ** 2) + 0.5 * beta @ PHI.penalty @ beta / tau**2 + 0.01
    assert draws.mean() == pytest.approx(scale / (shape - 1), rel=0.01)


def test_sigma2_matches_mh_oracle():
    """Random-walk MH on log sigma2 targeting the same conditional density."""
    cfg = FhsConfig()
    r = rng(8)
    beta = r.normal(size=PHI.k_n)
    theta = PHI.phi @ beta + r.normal(0, 0.4, 8)
    tau = 1.3
    rss = np.sum((theta - PHI.phi @ beta) ** 2)
    s = beta @ PHI.penalty @ beta

    def log_target(s2):
        # N(theta | phi beta, s2 I) N(beta | 0, s2 tau^2 P^-1) IG(s2 | 0.01, 0.01)
        return (-(8 / 2 + PHI.k_n / 2 + 0.01 + 1) * np.log(s2)
                - (rss / 2 + s / (2 * tau**2) + 0.01) / s2)

    chains, steps = 20_000, 400
    x = np.full(chains, 1.0)
    lp = log_target(x)
    for _ in range(steps):
        prop = x * np.exp(0.5 * r.normal(size=chains))
        lq = log_target(prop)
        # log-scale proposal: Jacobian term log(prop) - log(x)
        acc = np.log(r.random(chains)) < lq - lp + np.log(prop) - np.log(x)
        x = np.where(acc, prop, x)
        lp = np.where(acc, lq, lp)
    gibbs = update_sigma2(np.tile(theta, (chains, 1)), np.tile(beta, (chains, 1)), np.full(chains, tau),
                          PHI, cfg, r)
    assert stats.ks_2samp(x, gibbs).statistic < 0.02


def test_sigma2_verbatim_mode_uses_printed_scale():
    cfg = FhsConfig(sigma2_update_mode="algorithm-verbatim")
    assert cfg.sigma2_update_mode == "verbatim"
    r = rng(9)
    beta = r.normal(size=PHI.k_n)
    theta = r.normal(size=8)
    draws = update_sigma2(np.tile(theta, (N_DRAWS, 1)), np.tile(beta, (N_DRAWS, 1)), np.full(N_DRAWS, 2.0),
                          PHI, cfg, r)
    shape = 4 + 3 + 0.01
    scale = 0.5 * beta @ PHI.gram @ beta + 0.5 * beta @ PHI.penalty @ beta / 4.0 + 0.01
    assert draws.mean() == pytest.approx(scale / (shape - 1), rel=0.01)


# -- beta ---------------------------------------------------------------------


@pytest.mark.parametrize("mode", ["model", "verbatim"])
def test_beta_moments(mode):
    cfg = FhsConfig(beta_update_mode=mode)
    r = rng(10)
    theta = r.normal(size=8)
    tau, s2 = 0.7, 0.3
    pen = PHI.penalty if mode == "model" else np.eye(PHI.k_n)
    P = PHI.gram + pen / tau**2
    m = np.linalg.solve(P, PHI.phi.T @ theta)
    cov = s2 * np.linalg.inv(P)
    draws = update_beta(np.tile(theta, (N_DRAWS, 1)), np.full(N_DRAWS, tau), np.full(N_DRAWS, s2), PHI, cfg, r)
    sd = np.sqrt(np.diag(cov))
    assert np.all(np.abs(draws.mean(axis=0) - m) < 0.01 * sd)
    emp = np.cov(draws.T)
    assert np.all(np.abs(emp - cov) < 0.01 * np.outer(sd, sd))


def test_beta_least_squares_limit():
    theta = rng(11).normal(size=8)
    mean, _ = beta_conditional(theta, 1e6, PHI)
    ls = np.linalg.lstsq(PHI.phi, theta, rcond=None)[0]
    assert np.allclose(mean[0], ls, atol=1e-6)


def test_beta_zero_theta_symmetric():
    cfg = FhsConfig()
    mean, _ = beta_conditional(np.zeros(8), 0.5, PHI)
    assert not mean.any()
    draws = update_beta(np.zeros((200_000, 8)), np.full(200_000, 0.5), np.ones(200_000), PHI, cfg, rng(12))
    assert np.all(np.abs(draws.mean(axis=0)) < 5 * draws.std(axis=0) / math.sqrt(200_000))


def test_beta_mean_norm_monotone_in_tau():
    theta = rng(13).normal(size=8)
    taus = np.geomspace(1e-3, 1e3, 40)
    norms = [np.linalg.norm(beta_conditional(theta, t, PHI)[0]) for t in taus]
    assert np.all(np.diff(norms) >= -1e-12)
    assert norms[0] < 1e-4


def test_beta_rejects_bad_state():
    with pytest.raises(InvalidStateError):
        update_beta(np.zeros(8), -1.0, 1.0, PHI, FhsConfig(), rng())


# -- config, init, composed kernel --------------------------------------------


def test_config_validation():
    with pytest.raises(ConfigError):
        FhsConfig(a=0)
    with pytest.raises(ConfigError):
        FhsConfig(beta_update_mode="bogus")
    with pytest.raises(ConfigError):
        FhsConfig(b=-1.0)


def test_init_state():
    cfg = FhsConfig()
    theta, s = init_state(55, 6, 8, cfg, rng(14))
    assert theta.shape == (8, 55)
    assert np.all((theta > -5) & (theta < 5))
    assert np.all(s.tau > 0) and np.all(s.sigma2 == 1.0)
    assert s.beta.shape == (55, 6)
    theta2, s2 = init_state(55, 6, 8, cfg, rng(14))
    assert np.array_equal(theta, theta2) and np.array_equal(s.eta, s2.eta)


def collapsed_moments(theta, phi, a, b, ig=0.01):
    """E[omega | theta] and E[sigma2 | theta] with beta and sigma2 integrated out.

    theta | omega ~ multivariate t-type kernel omega^(k/2) (R/2 + omega S/2 + ig)^-(T/2 + ig),
    omega ~ Beta(a, b); R and S split |theta|^2 by the hat matrix of phi.
    """
    T, k = phi.phi.shape
    H = phi.phi @ np.linalg.pinv(phi.phi)
    S = theta @ H @ theta
    R = theta @ theta - S
    shape = T / 2 + ig

    def log_w(om, one_minus):
        return ((a - 1 + k / 2) * np.log(om) + (b - 1) * np.log(one_minus)
                - shape * np.log(R / 2 + om * S / 2 + ig))

    u = np.linspace(-80, math.log(0.5), 200_001)
    x = np.exp(u)
    lo = log_w(x, 1 - x) + u  # omega = x
    hi = log_w(1 - x, x) + u  # omega = 1 - x
    # below u = -80 on the upper side the integrand is const * exp(b u)
    log_tail = -shape * math.log(R / 2 + S / 2 + ig) + b * u[0] - math.log(b)
    m = max(lo.max(), hi.max(), log_tail)
    flo, fhi, ftail = np.exp(lo - m), np.exp(hi - m), math.exp(log_tail - m)
    sig_lo = (R / 2 + x * S / 2 + ig) / (shape - 1)
    sig_hi = (R / 2 + (1 - x) * S / 2 + ig) / (shape - 1)
    sig_tail = (R / 2 + S / 2 + ig) / (shape - 1)
    z = np.trapezoid(flo, u) + np.trapezoid(fhi, u) + ftail
    e_om = (np.trapezoid(flo * x, u) + np.trapezoid(fhi * (1 - x), u) + ftail) / z
    e_s2 = (np.trapezoid(flo * sig_lo, u) + np.trapezoid(fhi * sig_hi, u) + ftail * sig_tail) / z
    return e_om, e_s2


def batch_se(traces):
    """Per-chain means as batches: standard error of the grand mean."""
    means = traces.mean(axis=0)
    return means.std(ddof=1) / math.sqrt(means.size)


@pytest.mark.slow
@pytest.mark.parametrize("signal", [0.25, 0.45])
def test_composed_kernel_matches_collapsed_quadrature(signal):
    """Long-run (omega, sigma2) moments of the eta -> sigma2 -> beta sweep vs exact 1-D quadrature."""
    phi = build_bspline(8, k_n=3)
    a, b = fhs_constants(3, 8)
    cfg = FhsConfig()
    r = rng(15)
    t = np.arange(1, 9)
    theta = signal * (1 + 0.1 * t) + 0.15 * np.array([1, -1, 0.5, 0.2, -0.7, 0.3, -0.2, 0.4])
    want_om, want_s2 = collapsed_moments(theta, phi, a, b)

    chains, burn, keep = 500, 1000, 3000
    _, state = init_state(chains, 3, 8, cfg, r)
    th = np.tile(theta, (chains, 1)).T
    w, s = np.empty((keep, chains)), np.empty((keep, chains))
    for it in range(burn + keep):
        hyper_step(th, state, phi, cfg, a, b, r)
        if it >= burn:
            w[it - burn] = state.omega
            s[it - burn] = state.sigma2
    assert abs(w.mean() - want_om) < 3 * batch_se(w) + 1e-3
    assert abs(s.mean() - want_s2) < 3 * batch_se(s) + 1e-3 * want_s2
