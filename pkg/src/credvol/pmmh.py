"""Adaptive pseudo-marginal Metropolis-Hastings for the SV model.

The chain random-walks in an unconstrained parameterization
[mu_h, atanh(phi_y), atanh(phi_h), log(tau), atanh(rho)], with the
change-of-variables Jacobian folded into the acceptance ratio. The
likelihood is the particle filter estimate; in the correlated variant
the filter's seed block moves by an autoregressive step with memory
``gamma`` at each proposal (Deligiannidis-Doucet-Pitt style), in the
standard variant it is redrawn fresh.

Proposal tuning is two-layer: a running empirical covariance of the
chain supplies the shape, and a Robbins-Monro recursion on the log
scalar step size (Garthwaite-Fan-Sisson steplength) steers the realized
acceptance rate to its target. Both keep adapting for the whole run
with a 1/i gain, so the chain remains ergodic.

All randomness derives from one user seed: a ``numpy`` SeedSequence is
spawned into four independent streams (proposals, acceptance uniforms,
seed blocks, backward simulation), so runs replay bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from sklearn.base import BaseEstimator

from .particle_filter import (
    ParticleFilterError,
    backward_simulate,
    correlate_seed,
    correlated_pf,
    make_seed_block,
)
from .sv_model import PARAM_NAMES, PriorSpec, SvParams, log_prior
from .timeseries import TimeSeries
from .validation import as_float_array

__all__ = [
    "ChainConfig",
    "PosteriorDraws",
    "SvPmmhEstimator",
    "transform_params",
    "inverse_transform",
    "log_jacobian",
    "adapt_scale",
    "adapt_constant",
    "run_chain",
    "summarize",
    "integrated_autocorr_time",
    "volatility_path",
]

_N_PARAMS = 5
_COV_WARMUP = 500   # iterations of identity proposal before empirical cov
_COV_REFRESH = 100  # recompute the empirical covariance this often


def transform_params(params):
    """Map SvParams to the unconstrained sampling space."""
    return np.array(
        [
            params.mu_h,
            math.atanh(params.phi_y),
            math.atanh(params.phi_h),
            math.log(params.tau),
            math.atanh(params.rho),
        ]
    )


def inverse_transform(v):
    """Map an unconstrained vector back to SvParams.

    Raises ValueError if the vector saturates a bound (tanh reaching
    +-1.0 or exp overflowing in float64); callers treat that as a
    rejected proposal.
    """
    v = as_float_array(v, "v", min_len=_N_PARAMS)
    if v.shape[0] != _N_PARAMS:
        raise ValueError(f"expected {_N_PARAMS} entries, got {v.shape[0]}")
    try:
        tau = math.exp(v[3])
    except OverflowError:
        raise ValueError("tau coordinate overflows float64") from None
    return SvParams(
        mu_h=v[0],
        phi_y=math.tanh(v[1]),
        phi_h=math.tanh(v[2]),
        tau=tau,
        rho=math.tanh(v[4]),
    )


def log_jacobian(v):
    """log |d(constrained)/d(unconstrained)| at the unconstrained point.

    Each coordinate transforms independently: d tanh = 1 - tanh^2 and
    d exp = exp, so the log determinant is

        log(1-phi_y^2) + log(1-phi_h^2) + log(tau) + log(1-rho^2).
    """
    v = as_float_array(v, "v")

    def _log_dtanh(x):
        # log(1 - tanh(x)^2) = log(4) - 2*log(e^x + e^-x), stable for large |x|
        return math.log(4.0) - 2.0 * (abs(x) + math.log1p(math.exp(-2.0 * abs(x))))

    return _log_dtanh(v[1]) + _log_dtanh(v[2]) + v[3] + _log_dtanh(v[4])


def adapt_constant(target_accept, dim=_N_PARAMS):
    """Steplength constant of the Garthwaite-Fan-Sisson recursion."""
    alpha = -ndtri(target_accept / 2.0)
    c = (1.0 - 1.0 / dim) * math.sqrt(2.0 * math.pi) * math.exp(alpha**2 / 2.0) / (2.0 * alpha)
    return c + 1.0 / (dim * target_accept * (1.0 - target_accept))


def adapt_scale(scale, accepted, iteration, target_accept=0.25, dim=_N_PARAMS):
    """One Robbins-Monro update of the proposal scale on the log grid.

    ``iteration`` is 1-based; the 1/iteration gain makes the adaptation
    diminishing, so it can run for the whole chain.
    """
    if scale <= 0.0:
        raise ValueError(f"scale must be positive, got {scale}")
    if not 0.0 < target_accept < 1.0:
        raise ValueError(f"target_accept must lie in (0, 1), got {target_accept}")
    c = adapt_constant(target_accept, dim)
    step = c * ((1.0 if accepted else 0.0) - target_accept) / max(iteration, 1)
    return scale * math.exp(step)


@dataclass(frozen=True)
class ChainConfig:
    """Sampler settings; defaults match the headline estimation runs."""

    iterations: int = 15000
    burn_in: int = 5000
    particles: int = 100
    gamma: float = 0.99
    target_accept: float = 0.25
    variant: str = "correlated"
    prior: PriorSpec = field(default_factory=PriorSpec)
    seed: int = 0
    init: SvParams | None = None
    initial_scale: float = 0.1
    latent_thin: int = 10

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be positive, got {self.iterations}")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError(
                f"burn_in must lie in [0, iterations), got {self.burn_in} with iterations={self.iterations}"
            )
        if self.particles < 2:
            raise ValueError(f"particles must be at least 2, got {self.particles}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError(f"target_accept must lie in (0, 1), got {self.target_accept}")
        if self.variant not in ("correlated", "standard"):
            raise ValueError(f"variant must be 'correlated' or 'standard', got {self.variant!r}")
        if self.initial_scale <= 0.0:
            raise ValueError(f"initial_scale must be positive, got {self.initial_scale}")
        if self.latent_thin < 1:
            raise ValueError(f"latent_thin must be at least 1, got {self.latent_thin}")


@dataclass(frozen=True)
class PosteriorDraws:
    """Chain output.

    params : (M, 5) retained draws, columns ordered as PARAM_NAMES,
        M = iterations - burn_in.
    logliks : (iterations,) the chain's current log-likelihood estimate
        at every iteration (burn-in included).
    accept_trace, scale_trace : per-iteration diagnostics.
    latent_paths : (K, T) thinned latent log-variance draws, rows
        aligned with ``latent_indices`` into the retained draws.
    """

    params: np.ndarray
    logliks: np.ndarray
    accept_trace: np.ndarray
    scale_trace: np.ndarray
    latent_paths: np.ndarray
    latent_indices: np.ndarray
    burn_in: int
    variant: str
    seed: int
    n_filter_failures: int
    param_names: tuple = PARAM_NAMES

    def __post_init__(self):
        n_iter = self.logliks.shape[0]
        if self.params.shape != (n_iter - self.burn_in, _N_PARAMS):
            raise ValueError(
                f"params must have shape (iterations - burn_in, 5) = "
                f"{(n_iter - self.burn_in, _N_PARAMS)}, got {self.params.shape}"
            )
        if self.accept_trace.shape != (n_iter,) or self.scale_trace.shape != (n_iter,):
            raise ValueError("trace length mismatch")
        if self.latent_paths.shape[0] != self.latent_indices.shape[0]:
            raise ValueError("latent path/index mismatch")

    @property
    def n_retained(self):
        return self.params.shape[0]

    @property
    def iterations(self):
        return self.logliks.shape[0]

    def acceptance_rate(self, after_burn_in=True):
        tr = self.accept_trace[self.burn_in:] if after_burn_in else self.accept_trace
        return float(tr.mean())

    def retained_logliks(self):
        return self.logliks[self.burn_in:]

    def column(self, name):
        return self.params[:, self.param_names.index(name)]


def _default_init(yv):
    # crude scale match: residual variance of a stiff AR(1) sets exp(mu_h)
    resid = yv[1:] - 0.8 * yv[:-1] if yv.shape[0] > 1 else yv
    v = float(np.var(resid))
    return SvParams(mu_h=math.log(max(v, 1e-12)), phi_y=0.8, phi_h=0.9, tau=0.3, rho=0.0)


def run_chain(y, config, _loglik_fn=None, verbose=0):
    """Run one adaptive pseudo-marginal chain on a demeaned series.

    Parameters
    ----------
    y : TimeSeries or ndarray
        Demeaned observations; the model carries no intercept.
    config : ChainConfig
    verbose : int
        If positive, print a progress line every ``verbose`` iterations.

    Returns
    -------
    PosteriorDraws

    Notes
    -----
    A filter failure at the initial parameter value is fatal. A failure
    at a proposal counts as a rejected move (its likelihood is treated
    as -inf) and is tallied in ``n_filter_failures``.

    ``_loglik_fn(params)``, when given, replaces the particle filter
    likelihood entirely (no seed blocks, no latent paths). It exists for
    exact-likelihood and prior-only diagnostics in the test suite.
    """
    yv = y.values if isinstance(y, TimeSeries) else as_float_array(y, "y", min_len=1)
    cfg = config
    T = yv.shape[0]

    ss = np.random.SeedSequence(cfg.seed)
    s_prop, s_acc, s_seed, s_back = ss.spawn(4)
    rng_prop = np.random.default_rng(s_prop)
    rng_acc = np.random.default_rng(s_acc)
    rng_seed = np.random.Generator(np.random.Philox(s_seed))
    rng_back = np.random.default_rng(s_back)

    use_filter = _loglik_fn is None
    p_cur = cfg.init if cfg.init is not None else _default_init(yv)
    v_cur = transform_params(p_cur)
    lp_cur = log_prior(p_cur, cfg.prior) + log_jacobian(v_cur)
    if not np.isfinite(lp_cur):
        raise ValueError("initial parameters have zero prior density")

    if use_filter:
        u_cur = make_seed_block(T, cfg.particles, rng_seed)
        system = correlated_pf(yv, p_cur, u_cur)  # init failure propagates
        ll_cur = system.loglik
        h_cur = backward_simulate(system, yv, p_cur, rng_back)
    else:
        u_cur, ll_cur, h_cur = None, float(_loglik_fn(p_cur)), np.empty(0)

    n_iter, burn = cfg.iterations, cfg.burn_in
    v_hist = np.empty((n_iter + 1, _N_PARAMS))
    v_hist[0] = v_cur
    params_out = np.empty((n_iter - burn, _N_PARAMS))
    logliks = np.empty(n_iter)
    accept_trace = np.zeros(n_iter, dtype=bool)
    scale_trace = np.empty(n_iter)
    latent_rows, latent_idx = [], []

    scale = cfg.initial_scale
    chol = np.eye(_N_PARAMS)
    failures = 0

    for i in range(n_iter):
        if i >= _COV_WARMUP and (i - _COV_WARMUP) % _COV_REFRESH == 0:
            cov = np.cov(v_hist[: i + 1].T) + 1e-9 * np.eye(_N_PARAMS)
            try:
                chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                pass  # keep previous shape until the history is usable

        v_prop = v_cur + scale * (chol @ rng_prop.standard_normal(_N_PARAMS))
        accepted = False
        try:
            p_prop = inverse_transform(v_prop)
        except ValueError:
            p_prop = None

        if p_prop is not None:
            lp_prop = log_prior(p_prop, cfg.prior) + log_jacobian(v_prop)
            if np.isfinite(lp_prop):
                if use_filter:
                    if cfg.variant == "correlated":
                        u_prop = correlate_seed(u_cur, cfg.gamma, rng_seed)
                    else:
                        u_prop = make_seed_block(T, cfg.particles, rng_seed)
                    try:
                        system = correlated_pf(yv, p_prop, u_prop)
                        ll_prop = system.loglik
                    except ParticleFilterError:
                        failures += 1
                        ll_prop = -np.inf
                else:
                    ll_prop = float(_loglik_fn(p_prop))
                log_ratio = (ll_prop + lp_prop) - (ll_cur + lp_cur)
                if math.log(rng_acc.random() or np.nextafter(0, 1)) < log_ratio:
                    accepted = True
                    v_cur, p_cur, lp_cur, ll_cur = v_prop, p_prop, lp_prop, ll_prop
                    if use_filter:
                        u_cur = u_prop
                        h_cur = backward_simulate(system, yv, p_prop, rng_back)

        scale = adapt_scale(scale, accepted, i + 1, cfg.target_accept)
        v_hist[i + 1] = v_cur
        logliks[i] = ll_cur
        accept_trace[i] = accepted
        scale_trace[i] = scale
        if i >= burn:
            j = i - burn
            params_out[j] = p_cur.as_array()
            if use_filter and j % cfg.latent_thin == 0:
                latent_rows.append(h_cur.copy())
                latent_idx.append(j)
        if verbose and (i + 1) % verbose == 0:
            rate = accept_trace[max(0, i - 999): i + 1].mean()
            print(f"iter {i + 1}/{n_iter}  acc(last 1k) {rate:.3f}  scale {scale:.4f}", flush=True)

    latent = np.array(latent_rows) if latent_rows else np.empty((0, T))
    return PosteriorDraws(
        params=params_out,
        logliks=logliks,
        accept_trace=accept_trace,
        scale_trace=scale_trace,
        latent_paths=latent,
        latent_indices=np.array(latent_idx, dtype=int),
        burn_in=burn,
        variant=cfg.variant,
        seed=cfg.seed,
        n_filter_failures=failures,
    )


def integrated_autocorr_time(x):
    """IACT by Geyer's initial positive sequence rule.

    Sums autocorrelations in adjacent pairs until a pair sum turns
    nonpositive. Returns (iact, degenerate): a constant sequence has no
    usable autocorrelation and is flagged instead of faked. The
    estimate is clamped to at least 1.
    """
    x = as_float_array(x, "x", min_len=2)
    n = x.shape[0]
    x = x - x.mean()
    var = np.dot(x, x) / n
    if var <= 1e-300:
        return math.inf, True
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    rho = acov / acov[0]
    total = 0.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0.0:
            break
        total += pair
    return max(2.0 * total - 1.0, 1.0), False


def summarize(draws, ci=0.95):
    """Posterior summary table plus chain-level diagnostics.

    Returns a dict: ``parameters`` maps each name to mean, credible
    interval, IACT, ESS and a degeneracy flag; chain-level keys carry
    acceptance rates, filter failures and the adaptation constant.
    """
    lo_q, hi_q = 100 * (1 - ci) / 2, 100 * (1 + ci) / 2
    table = {}
    for k, name in enumerate(draws.param_names):
        col = draws.params[:, k]
        iact, degenerate = integrated_autocorr_time(col)
        ess = 0.0 if degenerate else draws.n_retained / iact
        table[name] = {
            "mean": float(col.mean()),
            "ci_lo": float(np.percentile(col, lo_q)),
            "ci_hi": float(np.percentile(col, hi_q)),
            "iact": iact,
            "ess": ess,
            "degenerate": degenerate,
        }
    return {
        "parameters": table,
        "ci_level": ci,
        "acceptance_rate": draws.acceptance_rate(after_burn_in=True),
        "acceptance_rate_overall": draws.acceptance_rate(after_burn_in=False),
        "n_retained": draws.n_retained,
        "burn_in": draws.burn_in,
        "variant": draws.variant,
        "seed": draws.seed,
        "n_filter_failures": draws.n_filter_failures,
        "adapt_constant": adapt_constant(0.25),
    }


def volatility_path(draws, bands=(5.0, 95.0)):
    """Posterior summary of the volatility level 100*exp(h_t/2).

    Computed over the stored (thinned) latent draws; returns a dict of
    arrays: h_mean, vol_mean, vol_lo, vol_hi.
    """
    if draws.latent_paths.shape[0] == 0:
        raise ValueError("no latent paths stored in these draws")
    vol = 100.0 * np.exp(0.5 * draws.latent_paths)
    return {
        "h_mean": draws.latent_paths.mean(axis=0),
        "vol_mean": vol.mean(axis=0),
        "vol_lo": np.percentile(vol, bands[0], axis=0),
        "vol_hi": np.percentile(vol, bands[1], axis=0),
    }


class SvPmmhEstimator(BaseEstimator):
    """sklearn-style front end: configure once, ``fit`` a demeaned series.

    After ``fit``, the posterior lives in ``draws_``, the summary table
    in ``summary_``, posterior-mean parameters in ``params_`` and the
    latent volatility summary in ``volatility_path_``.
    """

    def __init__(
        self,
        iterations=15000,
        burn_in=5000,
        particles=100,
        gamma=0.99,
        target_accept=0.25,
        variant="correlated",
        prior="baseline",
        seed=0,
        initial_scale=0.1,
        latent_thin=10,
        verbose=0,
    ):
        self.iterations = iterations
        self.burn_in = burn_in
        self.particles = particles
        self.gamma = gamma
        self.target_accept = target_accept
        self.variant = variant
        self.prior = prior
        self.seed = seed
        self.initial_scale = initial_scale
        self.latent_thin = latent_thin
        self.verbose = verbose

    def _config(self):
        prior = self.prior if isinstance(self.prior, PriorSpec) else PriorSpec(variant=self.prior)
        return ChainConfig(
            iterations=self.iterations,
            burn_in=self.burn_in,
            particles=self.particles,
            gamma=self.gamma,
            target_accept=self.target_accept,
            variant=self.variant,
            prior=prior,
            seed=self.seed,
            initial_scale=self.initial_scale,
            latent_thin=self.latent_thin,
        )

    def fit(self, y):
        self.draws_ = run_chain(y, self._config(), verbose=self.verbose)
        self.summary_ = summarize(self.draws_)
        means = {k: v["mean"] for k, v in self.summary_["parameters"].items()}
        self.params_ = SvParams.from_dict(means)
        self.volatility_path_ = volatility_path(self.draws_)
        return self
