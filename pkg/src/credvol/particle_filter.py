"""Correlated bootstrap particle filter with sorted multinomial resampling.

The likelihood estimator is standard bootstrap: propagate through the
volatility transition, weight by the observation density, resample.
Two features make it usable inside a correlated pseudo-marginal chain:

* every random input is a pre-drawn block of standard normals
  (:class:`SeedBlock`), so the estimator is a deterministic function of
  (y, params, u) and neighbouring u map to neighbouring likelihoods;
* particles are sorted ascending before multinomial resampling, which
  keeps the resampling step close to continuous in the seed block and
  preserves the likelihood correlation across correlated seeds.

Uniforms for resampling come from the normal block through the standard
normal CDF, so the whole seed is one homogeneous Gaussian object that
:func:`correlate_seed` can move slightly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .sv_model import log_observation_density, transition_moments
from .timeseries import TimeSeries
from .validation import as_float_array

__all__ = [
    "SeedBlock",
    "ParticleSystem",
    "ParticleFilterError",
    "make_seed_block",
    "correlate_seed",
    "sorted_multinomial_resample",
    "correlated_pf",
    "backward_simulate",
]

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class ParticleFilterError(RuntimeError):
    """Raised when the filter collapses (all weights vanish at some t)."""


def _gaussian_rng(seed):
    """Generator from an int seed (counter-based Philox) or pass-through.

    Integer seeds map to Philox so that a seed block is a stable,
    reproducible function of the seed alone, independent of how many
    blocks were drawn before it.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class SeedBlock:
    """All randomness one filter run consumes, as standard normals.

    u_h : ndarray, shape (T, N)
        Innovations for particle initialization (row 0) and propagation.
    u_a : ndarray, shape (T-1, N)
        Normals mapped through the normal CDF to resampling uniforms.
    """

    u_h: np.ndarray
    u_a: np.ndarray

    def __post_init__(self):
        u_h = np.asarray(self.u_h, dtype=float)
        u_a = np.asarray(self.u_a, dtype=float)
        if u_h.ndim != 2 or u_a.ndim != 2:
            raise ValueError("seed blocks must be 2-dimensional")
        if u_a.shape != (u_h.shape[0] - 1, u_h.shape[1]):
            raise ValueError(
                f"u_a must have shape (T-1, N) = {(u_h.shape[0] - 1, u_h.shape[1])}, got {u_a.shape}"
            )
        object.__setattr__(self, "u_h", u_h)
        object.__setattr__(self, "u_a", u_a)

    @property
    def n_obs(self):
        return self.u_h.shape[0]

    @property
    def n_particles(self):
        return self.u_h.shape[1]


def make_seed_block(n_obs, n_particles, seed):
    """Draw a fresh standard-normal seed block for ``n_obs`` observations."""
    if n_obs < 1:
        raise ValueError(f"n_obs must be at least 1, got {n_obs}")
    if n_particles < 1:
        raise ValueError(f"n_particles must be at least 1, got {n_particles}")
    rng = _gaussian_rng(seed)
    u_h = rng.standard_normal((n_obs, n_particles))
    u_a = rng.standard_normal((n_obs - 1, n_particles))
    return SeedBlock(u_h, u_a)


def correlate_seed(u, gamma, seed):
    """Autoregressive move of a seed block: gamma*u + sqrt(1-gamma^2)*fresh.

    Marginally the output is again standard normal for any gamma in
    [0, 1]; gamma = 1 reproduces ``u`` exactly and gamma = 0 is an
    independent redraw. One code path covers all gamma.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    rng = _gaussian_rng(seed)
    w = math.sqrt(1.0 - gamma * gamma)
    u_h = gamma * u.u_h + w * rng.standard_normal(u.u_h.shape)
    u_a = gamma * u.u_a + w * rng.standard_normal(u.u_a.shape)
    return SeedBlock(u_h, u_a)


def sorted_multinomial_resample(sorted_weights, uniforms):
    """Multinomial resampling positions from pre-sorted weights.

    Parameters
    ----------
    sorted_weights : ndarray
        Normalized weights already arranged in the particles' ascending
        value order. Must be nonnegative and sum to 1 within 1e-10.
    uniforms : ndarray
        Resampling uniforms in [0, 1).

    Returns
    -------
    ndarray of int
        For each uniform, the smallest index whose cumulative weight
        reaches it. Indices refer to the sorted arrangement; the caller
        maps them back to original particle identities.
    """
    w = as_float_array(sorted_weights, "sorted_weights", min_len=1)
    if np.any(w < 0.0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if abs(total - 1.0) > 1e-10:
        raise ValueError(f"weights must sum to 1, got {total!r}")
    return _resample_positions(w, np.asarray(uniforms, dtype=float))


def _resample_positions(sorted_weights, uniforms):
    # validation-free core shared with the filter's hot loop
    cw = np.cumsum(sorted_weights)
    idx = np.searchsorted(cw, uniforms, side="left")
    # cumulative rounding can leave cw[-1] a hair under a uniform
    return np.minimum(idx, sorted_weights.shape[0] - 1)


@dataclass(frozen=True)
class ParticleSystem:
    """Full output of one filter pass.

    particles : (T, N) latent log-variance values.
    norm_weights : (T, N) normalized weights, rows sum to 1.
    ancestors : (T-1, N) resampled ancestor indices into the previous
        row, in original (unsorted) particle indexing.
    loglik : float, the log of the likelihood estimate.
    step_logliks : (T,) per-step contributions; their sum is ``loglik``.
    """

    particles: np.ndarray
    norm_weights: np.ndarray
    ancestors: np.ndarray
    loglik: float
    step_logliks: np.ndarray

    def __post_init__(self):
        T, N = self.particles.shape
        if self.norm_weights.shape != (T, N):
            raise ValueError("norm_weights shape mismatch")
        if self.ancestors.shape != (T - 1, N):
            raise ValueError("ancestors shape mismatch")
        if self.step_logliks.shape != (T,):
            raise ValueError("step_logliks shape mismatch")
        sums = self.norm_weights.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-8) or np.any(self.norm_weights < 0.0):
            raise ValueError("normalized weights must be nonnegative and sum to 1 per row")
        if self.ancestors.size and (self.ancestors.min() < 0 or self.ancestors.max() >= N):
            raise ValueError("ancestor indices out of range")

    @property
    def n_obs(self):
        return self.particles.shape[0]

    @property
    def n_particles(self):
        return self.particles.shape[1]

    def ess(self):
        """Effective sample size per step, 1 / sum_i w_i^2."""
        return 1.0 / np.sum(self.norm_weights**2, axis=1)


def _series_values(y):
    return y.values if isinstance(y, TimeSeries) else as_float_array(y, "y", min_len=1)


def correlated_pf(y, params, u, sort_particles=True):
    """Run the filter on ``y`` under ``params`` using seed block ``u``.

    Deterministic in its inputs: identical (y, params, u) give a
    bit-identical :class:`ParticleSystem`.

    ``sort_particles=False`` disables the pre-resampling sort. That
    variant is a valid (unbiased) filter but destroys the smoothness of
    the seed-to-likelihood map; it exists so tests can demonstrate the
    difference, and should not be used inside a correlated chain.

    Raises
    ------
    ParticleFilterError
        If every particle weight underflows at some step (the message
        names the 1-based step).
    """
    yv = _series_values(y)
    T = yv.shape[0]
    if u.n_obs != T:
        raise ValueError(f"seed block covers {u.n_obs} observations, data has {T}")
    N = u.n_particles
    p = params

    uniforms = ndtr(u.u_a) if T > 1 else np.empty((0, N))
    sd_stat = p.stationary_h_std()
    sd_trans = p.tau * math.sqrt(1.0 - p.rho**2)
    # leverage regressor rho*tau*(y_{t-1} - phi_y*y_{t-2}) for t = 2..T
    y_reg = yv[:-1].copy()
    y_reg[1:] -= p.phi_y * yv[:-2]
    lever = p.rho * p.tau * y_reg

    particles = np.empty((T, N))
    norm_weights = np.empty((T, N))
    ancestors = np.empty((T - 1, N), dtype=np.intp)
    step_logliks = np.empty(T)

    # extreme residuals may overflow to -inf log weights; _normalize
    # turns a fully collapsed step into ParticleFilterError
    with np.errstate(over="ignore"):
        h = p.mu_h + sd_stat * u.u_h[0]
        particles[0] = h
        logw = log_observation_density(yv[0], 0.0, h, p)
        wbar, step_logliks[0] = _normalize(logw, N, 1)
        norm_weights[0] = wbar

        for t in range(1, T):
            if sort_particles:
                order = np.argsort(h, kind="stable")
                pos = _resample_positions(wbar[order], uniforms[t - 1])
                anc = order[pos]
            else:
                anc = _resample_positions(wbar, uniforms[t - 1])
            ancestors[t - 1] = anc
            h_prev = h[anc]
            mean = p.mu_h + p.phi_h * (h_prev - p.mu_h) + lever[t - 1] * np.exp(-0.5 * h_prev)
            h = mean + sd_trans * u.u_h[t]
            particles[t] = h
            logw = log_observation_density(yv[t], yv[t - 1], h, p)
            wbar, step_logliks[t] = _normalize(logw, N, t + 1)
            norm_weights[t] = wbar

    return ParticleSystem(particles, norm_weights, ancestors, float(step_logliks.sum()), step_logliks)


def _normalize(logw, n, step):
    m = logw.max()
    if not np.isfinite(m):
        raise ParticleFilterError(f"all particle weights vanished at step t={step}")
    w = np.exp(logw - m)
    total = w.sum()
    return w / total, m + math.log(total / n)


def backward_simulate(system, y, params, seed):
    """Draw one latent path from the smoothing distribution.

    Backward pass over the stored filter output: sample the final state
    from the final weights, then walk backwards reweighting each step's
    particles by their transition density into the already-chosen next
    state (Godsill, Doucet & West style backward simulation).

    Returns an ndarray of length T.
    """
    yv = _series_values(y)
    if system.n_obs != yv.shape[0]:
        raise ValueError(f"system covers {system.n_obs} observations, data has {yv.shape[0]}")
    p = params
    var = p.tau**2 * (1.0 - p.rho**2)

    def trans_mean(h_vals, t_next):
        # mean of h at index t_next given h at t_next-1 equal to h_vals
        y_prev = yv[t_next - 1]
        y_prev2 = yv[t_next - 2] if t_next >= 2 else 0.0
        return transition_moments(h_vals, y_prev, y_prev2, p)[0]

    rng = np.random.default_rng(seed)
    return _backward_pass(system.particles, system.norm_weights, trans_mean, var, rng)


def _backward_pass(particles, norm_weights, trans_mean, trans_var, rng):
    # generic Godsill backward pass; trans_mean(values, t_next) -> means
    T, _ = particles.shape
    path = np.empty(T)
    j = _categorical(norm_weights[-1], rng)
    path[-1] = particles[-1, j]
    inv2v = 0.5 / trans_var
    with np.errstate(divide="ignore"):
        logw_filter = np.log(norm_weights)
    for t in range(T - 2, -1, -1):
        mean = trans_mean(particles[t], t + 1)
        logw = logw_filter[t] - inv2v * (path[t + 1] - mean) ** 2
        m = logw.max()
        if not np.isfinite(m):
            raise ParticleFilterError(f"backward pass degenerate at step t={t + 1}")
        w = np.exp(logw - m)
        j = _categorical(w / w.sum(), rng)
        path[t] = particles[t, j]
    return path


def _categorical(probs, rng):
    cw = np.cumsum(probs)
    return int(min(np.searchsorted(cw, rng.random() * cw[-1], side="left"), probs.shape[0] - 1))
