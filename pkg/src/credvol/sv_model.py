"""Stochastic volatility model with a leverage channel.

Observation and state equations (t = 1..T, y_0 = 0):

    y_t = phi_y * y_{t-1} + exp(h_t / 2) * eps_t
    h_t = mu_h + phi_h * (h_{t-1} - mu_h) + tau * eta_t
    eta_t = rho * eps_{t-1} + sqrt(1 - rho^2) * etastar_t

with eps_t, etastar_t iid standard normal and h_1 drawn from the
stationary law N(mu_h, tau^2 / (1 - phi_h^2)). The level innovation
feeding the volatility equation is recovered from observables as
eps_{t-1} = exp(-h_{t-1}/2) * (y_{t-1} - phi_y * y_{t-2}), which is what
:func:`transition_moments` uses. Setting rho = 0 gives the standard SV
model; there is no separate code path for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import betaln, ndtr

from .timeseries import TimeSeries, parse_period
from .validation import as_float_array, check_finite

__all__ = [
    "SvParams",
    "PriorSpec",
    "ShockSet",
    "log_observation_density",
    "transition_moments",
    "log_prior",
    "simulate",
    "extract_shocks",
]

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

PARAM_NAMES = ("mu_h", "phi_y", "phi_h", "tau", "rho")


@dataclass(frozen=True)
class SvParams:
    """Model parameters.

    mu_h : float
        Unconditional mean of log-variance. Any finite value.
    phi_y : float
        Observation autoregression, in (-1, 1).
    phi_h : float
        Log-variance persistence, in (-1, 1).
    tau : float
        Volatility-of-volatility, positive.
    rho : float
        Leverage correlation between the lagged level innovation and the
        volatility innovation, in (-1, 1).
    """

    mu_h: float
    phi_y: float
    phi_h: float
    tau: float
    rho: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        for name in ("phi_y", "phi_h", "rho"):
            v = getattr(self, name)
            if not -1.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (-1, 1), got {v}")
        if not self.tau > 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        missing = [k for k in PARAM_NAMES if k not in d]
        if missing:
            raise ValueError(f"missing parameter fields: {missing}")
        extra = [k for k in d if k not in PARAM_NAMES]
        if extra:
            raise ValueError(f"unknown parameter fields: {extra}")
        return cls(**{k: float(d[k]) for k in PARAM_NAMES})

    def as_array(self):
        return np.array([self.mu_h, self.phi_y, self.phi_h, self.tau, self.rho])

    def stationary_h_std(self):
        return self.tau / math.sqrt(1.0 - self.phi_h**2)


@dataclass(frozen=True)
class ShockSet:
    """Structural shock series implied by (y, h) under given parameters.

    eps has length T (level innovations, t = 1..T). eta and eta_star
    have length T-1 (volatility innovations, t = 2..T): the t = 1
    volatility state is an initial condition, not a shock. The identity
    eta_t = rho * eps_{t-1} + sqrt(1 - rho^2) * etastar_t holds exactly.
    """

    eps: np.ndarray
    eta: np.ndarray
    eta_star: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eps", as_float_array(self.eps, "eps", min_len=1))
        object.__setattr__(self, "eta", as_float_array(self.eta, "eta"))
        object.__setattr__(self, "eta_star", as_float_array(self.eta_star, "eta_star"))
        if self.eta.shape[0] != self.eps.shape[0] - 1:
            raise ValueError(
                f"eta must have length len(eps)-1, got {self.eta.shape[0]} vs eps {self.eps.shape[0]}"
            )
        if self.eta_star.shape != self.eta.shape:
            raise ValueError("eta and eta_star length mismatch")
        for name in ("eps", "eta", "eta_star"):
            check_finite(getattr(self, name), name)


@dataclass(frozen=True)
class PriorSpec:
    """Prior family selector with overridable hyperparameters.

    variant = "baseline":
        (phi+1)/2 ~ Beta(persistence_a, persistence_b) for phi_y, phi_h;
        tau half-Cauchy with unit scale; mu_h flat (improper);
        rho ~ U(-1, 1).
    variant = "robustness":
        phi_y, phi_h ~ N(persistence_loc, persistence_scale^2) truncated
        to (0, 1); mu_h ~ N(0, mu_h_scale^2); tau ~ N(tau_loc,
        tau_scale^2) truncated to (0, inf); rho ~ U(-1, 1).
    """

    variant: str = "baseline"
    persistence_a: float = 20.0
    persistence_b: float = 1.5
    persistence_loc: float = 0.9
    persistence_scale: float = 0.05
    mu_h_scale: float = 10.0
    tau_loc: float = 0.5
    tau_scale: float = 0.3

    def __post_init__(self):
        if self.variant not in ("baseline", "robustness"):
            raise ValueError(f"unknown prior variant {self.variant!r}")

    def to_dict(self):
        return asdict(self)


def log_observation_density(y_t, y_prev, h_t, params):
    """Log density of y_t given its lag and the log-variance h_t.

    Vectorized over ``h_t`` (and broadcasting ``y_t``/``y_prev``), which
    is how the particle filter evaluates a whole swarm at once.
    """
    h = np.asarray(h_t, dtype=float)
    resid = np.asarray(y_t, dtype=float) - params.phi_y * np.asarray(y_prev, dtype=float)
    return -_HALF_LOG_2PI - 0.5 * h - 0.5 * resid * resid * np.exp(-h)


def transition_moments(h_prev, y_prev, y_prev2, params):
    """Conditional mean and variance of h_t given h_{t-1} and the data.

    The leverage channel enters through the reconstructed lagged level
    innovation exp(-h_{t-1}/2) * (y_{t-1} - phi_y * y_{t-2}):

        mean = mu_h + phi_h*(h_{t-1} - mu_h)
               + rho*tau*exp(-h_{t-1}/2)*(y_{t-1} - phi_y*y_{t-2})
        var  = tau^2 * (1 - rho^2)

    At t = 2 pass ``y_prev2 = 0`` (the model pins y_0 = 0). With rho = 0
    the mean term vanishes numerically and the standard SV transition is
    recovered; no branch exists.
    """
    h = np.asarray(h_prev, dtype=float)
    eps_prev = np.exp(-0.5 * h) * (np.asarray(y_prev, dtype=float) - params.phi_y * np.asarray(y_prev2, dtype=float))
    mean = params.mu_h + params.phi_h * (h - params.mu_h) + params.rho * params.tau * eps_prev
    var = params.tau**2 * (1.0 - params.rho**2)
    return mean, var


def _log_beta_persistence(phi, a, b):
    # (phi+1)/2 ~ Beta(a, b); change of variables adds log(1/2).
    # x can round to exactly 0 or 1 for phi within float eps of the
    # boundary; with a, b > 1 the density is 0 there.
    if not -1.0 < phi < 1.0:
        return -np.inf
    x = 0.5 * (phi + 1.0)
    if x <= 0.0 or x >= 1.0:
        return -np.inf
    return (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - betaln(a, b) - math.log(2.0)


def _log_truncnorm(x, loc, scale, lo, hi):
    if not lo < x < hi:
        return -np.inf
    z = (x - loc) / scale
    mass = ndtr((hi - loc) / scale) - ndtr((lo - loc) / scale)
    return -_HALF_LOG_2PI - math.log(scale) - 0.5 * z * z - math.log(mass)


def log_prior(params, spec):
    """Joint log prior density of the five parameters under ``spec``.

    Returns -inf outside the support. The baseline mu_h prior is flat,
    so its contribution is a constant zero and the returned value is a
    log density only up to that improper normalization.
    """
    p = params
    if spec.variant == "baseline":
        lp = _log_beta_persistence(p.phi_y, spec.persistence_a, spec.persistence_b)
        lp += _log_beta_persistence(p.phi_h, spec.persistence_a, spec.persistence_b)
        if p.tau <= 0.0:
            return -np.inf
        lp += math.log(2.0 / math.pi) - math.log1p(p.tau**2)
        lp += -math.log(2.0) if -1.0 < p.rho < 1.0 else -np.inf
        return lp
    lp = _log_truncnorm(p.phi_y, spec.persistence_loc, spec.persistence_scale, 0.0, 1.0)
    lp += _log_truncnorm(p.phi_h, spec.persistence_loc, spec.persistence_scale, 0.0, 1.0)
    lp += _log_truncnorm(p.tau, spec.tau_loc, spec.tau_scale, 0.0, np.inf)
    lp += -_HALF_LOG_2PI - math.log(spec.mu_h_scale) - 0.5 * (p.mu_h / spec.mu_h_scale) ** 2
    lp += -math.log(2.0) if -1.0 < p.rho < 1.0 else -np.inf
    return lp


def simulate(params, n_obs, seed, start_period="2000Q1"):
    """Simulate (y, h, shocks) of length ``n_obs`` from the model.

    Returns
    -------
    y : TimeSeries
        Simulated observations on a synthetic quarterly calendar.
    h : ndarray
        The latent log-variance path, length ``n_obs``.
    shocks : ShockSet
        The shocks that generated the path; ``extract_shocks`` on the
        output recovers them exactly.
    """
    if n_obs < 1:
        raise ValueError(f"n_obs must be at least 1, got {n_obs}")
    rng = np.random.default_rng(seed)
    p = params

    eps = rng.standard_normal(n_obs)
    eta_star = rng.standard_normal(n_obs - 1)
    h0 = rng.standard_normal()

    h = np.empty(n_obs)
    y = np.empty(n_obs)
    eta = np.empty(n_obs - 1)

    h[0] = p.mu_h + p.stationary_h_std() * h0
    y[0] = math.exp(0.5 * h[0]) * eps[0]
    for t in range(1, n_obs):
        eta[t - 1] = p.rho * eps[t - 1] + math.sqrt(1.0 - p.rho**2) * eta_star[t - 1]
        h[t] = p.mu_h + p.phi_h * (h[t - 1] - p.mu_h) + p.tau * eta[t - 1]
        y[t] = p.phi_y * y[t - 1] + math.exp(0.5 * h[t]) * eps[t]

    start = parse_period(start_period)
    ts = TimeSeries(np.arange(start, start + n_obs), y, name="simulated")
    return ts, h, ShockSet(eps, eta, eta_star)


def extract_shocks(y, h, params):
    """Back out the structural shocks from observations and a latent path.

    Parameters
    ----------
    y : TimeSeries or ndarray
        Observations (already demeaned; the model has no intercept).
    h : ndarray
        Latent log-variance path of the same length.
    params : SvParams

    Returns
    -------
    ShockSet

    Inverts the model equations: eps_t from the observation equation
    (with y_0 = 0), eta_t from the volatility equation, and eta_star via
    the leverage identity. Composing with :func:`simulate` is the
    identity on the shocks.
    """
    yv = y.values if isinstance(y, TimeSeries) else as_float_array(y, "y")
    hv = as_float_array(h, "h")
    if yv.shape != hv.shape:
        raise ValueError(f"y and h length mismatch: {yv.shape[0]} vs {hv.shape[0]}")
    p = params

    y_lag = np.concatenate(([0.0], yv[:-1]))
    eps = np.exp(-0.5 * hv) * (yv - p.phi_y * y_lag)
    eta = (hv[1:] - p.mu_h - p.phi_h * (hv[:-1] - p.mu_h)) / p.tau
    eta_star = (eta - p.rho * eps[:-1]) / math.sqrt(1.0 - p.rho**2)
    return ShockSet(eps, eta, eta_star)
