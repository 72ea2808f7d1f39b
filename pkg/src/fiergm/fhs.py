"""Functional horseshoe prior and its conditional updates.

Each functional parameter ``theta[:, i]`` (length T) has the hierarchy

    theta_i | beta_i, s2_i   ~ N(phi @ beta_i, s2_i I_T)
    beta_i | s2_i, tau_i     ~ N(0, s2_i tau_i^2 (phi' (I - Q0) phi)^-1)   (on the non-null part)
    tau_i                    ~ (tau^2)^(b - 1/2) / (1 + tau^2)^(a + b)
    s2_i                     ~ IG(ig_shape, ig_rate)

The updates below are vectorized over a leading axis of functional indices:
``beta`` is ``(q, k_n)``, ``eta``/``sigma2``/``tau`` are ``(q,)`` and
``theta_cols`` is ``(q, T)``. A single function can be passed with ``q = 1``
or as 1-D/scalar inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammainc, gammaincinv

from .basis import BasisMatrix
from .errors import ConfigError, InvalidStateError

MODES = ("model", "verbatim")
_MODE_ALIASES = {
    "model": "model",
    "model-consistent": "model",
    "verbatim": "verbatim",
    "algorithm-verbatim": "verbatim",
}


def _mode(name):
    try:
        return _MODE_ALIASES[name]
    except KeyError:
        raise ConfigError(f"unknown update mode {name!r}; use 'model' or 'verbatim'") from None


@dataclass(frozen=True)
class FhsConfig:
    a: float = 0.5
    b: Optional[float] = None  # None: derive from (k_n, T) via fhs_constants
    ig_shape: float = 0.01
    ig_rate: float = 0.01
    beta_update_mode: str = "model"
    sigma2_update_mode: str = "model"
    theta_init_low: float = -5.0
    theta_init_high: float = 5.0
    tau_init_sd: float = 1.0 / math.sqrt(20.0)
    sigma2_init: float = 1.0

    def __post_init__(self):
        for name in ("a", "ig_shape", "ig_rate", "tau_init_sd", "sigma2_init"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.b is not None and not self.b > 0:
            raise ConfigError("b must be positive")
        if not self.theta_init_low < self.theta_init_high:
            raise ConfigError("theta init range is empty")
        object.__setattr__(self, "beta_update_mode", _mode(self.beta_update_mode))
        object.__setattr__(self, "sigma2_update_mode", _mode(self.sigma2_update_mode))


@dataclass(eq=False)
class FhsState:
    """Hyperparameters for all ``q`` functional parameters.

    ``eta = tau**-2`` is the sampled coordinate; ``tau`` and ``omega`` are
    derived from it.
    """

    beta: np.ndarray
    eta: np.ndarray
    sigma2: np.ndarray

    @property
    def tau(self) -> np.ndarray:
        return 1.0 / np.sqrt(self.eta)

    @property
    def omega(self) -> np.ndarray:
        return self.eta / (1.0 + self.eta)

    def copy(self) -> "FhsState":
        return FhsState(self.beta.copy(), self.eta.copy(), self.sigma2.copy())


def omega(tau):
    """Weight on the null function, ``1 / (1 + tau^2)``."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise InvalidStateError("tau must be positive")
    out = 1.0 / (1.0 + tau * tau)
    return float(out) if out.ndim == 0 else out


def _quad(mat, beta):
    return np.einsum("...i,ij,...j->...", beta, mat, beta)


def log_prior_theta(theta_col, beta, sigma2, phi: BasisMatrix):
    """Log density of ``N(phi @ beta, sigma2 I_T)`` at ``theta_col``."""
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(sigma2 <= 0):
        raise InvalidStateError("sigma2 must be positive")
    resid = np.asarray(theta_col, dtype=float) - np.asarray(beta, dtype=float) @ phi.phi.T
    T = phi.T
    out = -0.5 * T * np.log(2 * np.pi * sigma2) - 0.5 * np.sum(resid * resid, axis=-1) / sigma2
    return float(out) if np.ndim(out) == 0 else out


def eta_shape(a, phi: BasisMatrix) -> float:
    return a + 0.5 * (phi.k_n - phi.d0)


def eta_rate(beta, sigma2, phi: BasisMatrix):
    """Rate ``c`` of the exponential factor in the eta conditional."""
    return _quad(phi.penalty, np.asarray(beta, dtype=float)) / (2.0 * np.asarray(sigma2, dtype=float))


def slice_update_eta(eta, beta, sigma2, phi: BasisMatrix, a, b, rng):
    """One slice-sampling transition for ``eta = tau**-2``.

    Target: ``eta**(shape - 1) exp(-c eta) / (1 + eta)**(a + b)`` with
    ``shape = a + (k_n - d0)/2``. The auxiliary level ``u`` is drawn under
    ``(1 + eta)**-(a + b)``; the slice ``{(1 + eta')**-(a + b) >= u}`` is
    ``[0, u**(-1/(a + b)) - 1]`` and the remaining factor is a Gamma kernel,
    so the new point is an inverse-CDF draw from the truncated Gamma.
    """
    eta = np.asarray(eta, dtype=float)
    scalar = eta.ndim == 0
    eta = np.atleast_1d(eta)
    if np.any(eta <= 0) or np.any(np.asarray(sigma2) <= 0):
        raise InvalidStateError("eta and sigma2 must be positive")
    c = np.atleast_1d(eta_rate(beta, sigma2, phi)).astype(float)
    c = np.broadcast_to(c, eta.shape)
    shape = eta_shape(a, phi)
    ab = a + b

    v = rng.random(eta.shape)
    log_u = np.log(np.maximum(v, np.finfo(float).tiny)) - ab * np.log1p(eta)
    bound = np.expm1(-log_u / ab)
    # (1 + eta)**-(a+b) >= u holds at eta itself; guard the round-off
    bound = np.maximum(bound, eta)

    w = rng.random(eta.shape)
    new = np.empty_like(eta)
    pos = c > 0
    fb = np.zeros_like(eta)
    fb[pos] = gammainc(shape, c[pos] * bound[pos])
    inv_ok = pos & (fb > 1e-280)
    if np.any(inv_ok):
        new[inv_ok] = gammaincinv(shape, w[inv_ok] * fb[inv_ok]) / c[inv_ok]
    # power-law limit: exp(-c eta) ~ 1 on the whole slice
    rest = ~inv_ok
    if np.any(rest):
        new[rest] = bound[rest] * w[rest] ** (1.0 / shape)
    bad = ~(new > 0) | ~np.isfinite(new)
    if np.any(bad):
        new[bad] = bound[bad] * w[bad] ** (1.0 / shape)
    new = np.minimum(new, bound)
    new = np.maximum(new, np.finfo(float).tiny)
    return float(new[0]) if scalar else new


def _as_2d(beta):
    beta = np.asarray(beta, dtype=float)
    return beta[None, :] if beta.ndim == 1 else beta


def update_sigma2(theta_col, beta, tau, phi: BasisMatrix, cfg: FhsConfig, rng):
    """Draw ``sigma2`` from its inverse-gamma conditional.

    model mode: shape ``T/2 + (k_n - d0)/2 + ig_shape``, scale
    ``|theta - phi beta|^2 / 2 + beta' P beta / (2 tau^2) + ig_rate``.
    verbatim mode replaces the residual term by ``beta' phi' phi beta / 2``
    and uses ``k_n`` in the shape.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise InvalidStateError("tau must be positive")
    scalar = tau.ndim == 0
    b2 = _as_2d(beta)
    theta_col = np.atleast_2d(np.asarray(theta_col, dtype=float))
    s = _quad(phi.penalty, b2)
    if cfg.sigma2_update_mode == "model":
        resid = theta_col - b2 @ phi.phi.T
        data_term = 0.5 * np.sum(resid * resid, axis=-1)
        shape = 0.5 * phi.T + 0.5 * (phi.k_n - phi.d0) + cfg.ig_shape
    else:
        data_term = 0.5 * _quad(phi.gram, b2)
        shape = 0.5 * phi.T + 0.5 * phi.k_n + cfg.ig_shape
    scale = data_term + 0.5 * s / np.atleast_1d(tau) ** 2 + cfg.ig_rate
    draw = scale / rng.standard_gamma(shape, size=scale.shape)
    return float(draw[0]) if scalar else draw


def beta_conditional(theta_col, tau, phi: BasisMatrix, mode="model"):
    """Mean and precision factor ``P`` of the beta conditional (covariance ``sigma2 P^-1``)."""
    mode = _mode(mode)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    theta_col = np.atleast_2d(np.asarray(theta_col, dtype=float))
    k = phi.k_n
    pen = phi.penalty if mode == "model" else np.eye(k)
    prec = phi.gram[None, :, :] + pen[None, :, :] / (tau**2)[:, None, None]
    rhs = theta_col @ phi.phi  # (q, k)
    mean = np.linalg.solve(prec, rhs[..., None])[..., 0]
    return mean, prec


def update_beta(theta_col, tau, sigma2, phi: BasisMatrix, cfg: FhsConfig, rng):
    """Draw basis coefficients from ``N(m, sigma2 P^-1)``.

    model mode: ``P = phi' phi + phi' (I - Q0) phi / tau^2``;
    verbatim mode: ``P = phi' phi + I / tau^2``. ``m = P^-1 phi' theta``.
    """
    tau = np.asarray(tau, dtype=float)
    sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    if np.any(tau <= 0) or np.any(sigma2 <= 0):
        raise InvalidStateError("tau and sigma2 must be positive")
    scalar = tau.ndim == 0
    mean, prec = beta_conditional(theta_col, tau, phi, cfg.beta_update_mode)
    chol = np.linalg.cholesky(prec)  # prec = L L'
    z = rng.standard_normal(mean.shape)
    # L' v = z gives v ~ N(0, P^-1)
    v = np.linalg.solve(np.swapaxes(chol, -1, -2), z[..., None])[..., 0]
    draw = mean + np.sqrt(sigma2)[:, None] * v
    return draw[0] if scalar else draw


def init_state(q, k_n, T, cfg: FhsConfig, rng):
    """Arbitrary starting point: theta ~ U(low, high), beta ~ N(0, I), tau = |N(0, sd)|, sigma2 fixed."""
    theta = rng.uniform(cfg.theta_init_low, cfg.theta_init_high, size=(T, q))
    beta = rng.standard_normal((q, k_n))
    tau = np.abs(rng.normal(0.0, cfg.tau_init_sd, size=q))
    tau = np.maximum(tau, 1e-8)
    sigma2 = np.full(q, float(cfg.sigma2_init))
    return theta, FhsState(beta=beta, eta=1.0 / tau**2, sigma2=sigma2)


def hyper_step(theta, state: FhsState, phi: BasisMatrix, cfg: FhsConfig, a, b, rng):
    """Gibbs sweep over all functional indices: eta (tau), then sigma2, then beta.

    ``theta`` is the ``T x q`` parameter matrix; ``state`` is updated in place.
    """
    cols = theta.T
    state.eta = slice_update_eta(state.eta, state.beta, state.sigma2, phi, a, b, rng)
    tau = state.tau
    state.sigma2 = update_sigma2(cols, state.beta, tau, phi, cfg, rng)
    state.beta = update_beta(cols, tau, state.sigma2, phi, cfg, rng)
    return state
