"""Local projection impulse responses with HAC standard errors.

One regression per horizon h: the outcome led h periods on the
(standardized) shock and lagged controls, so the shock coefficient is
the horizon-h response to a one-standard-deviation impulse. Errors
inherit an MA(h) structure from the overlapping leads, so standard
errors come from a Newey-West sandwich whose truncation lag equals the
horizon.

The state-dependent variant interacts every column, intercept included,
with last quarter's regime indicator and with its complement, giving
separate responses per regime from one stacked regression.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.linalg import qr
from scipy.special import ndtri
from sklearn.base import BaseEstimator

from .timeseries import TimeSeries
from .validation import as_float_array, check_finite

__all__ = [
    "LpSpec",
    "LpResult",
    "LocalProjections",
    "standardize_shock",
    "newey_west",
    "run_lp",
]


def standardize_shock(shock):
    """Center and scale to unit variance (population normalization).

    Raises on a constant series: a degenerate shock cannot be scaled.
    """
    x = as_float_array(shock, "shock", min_len=2)
    check_finite(x, "shock")
    sd = x.std()
    if sd == 0.0:
        raise ValueError("shock series is constant; cannot standardize")
    return (x - x.mean()) / sd


def newey_west(design, resid, lag):
    """HAC covariance of OLS coefficients with Bartlett weights.

    cov = (X'X)^-1 * S * (X'X)^-1 with
    S = G_0 + sum_{l=1..lag} (1 - l/(lag+1)) * (G_l + G_l'),
    G_l the lag-l cross product of the score series X_t * u_t.

    No small-sample degrees-of-freedom correction is applied, so
    ``lag=0`` reproduces the White heteroskedasticity-robust covariance
    exactly.
    """
    X = np.asarray(design, dtype=float)
    u = as_float_array(resid, "resid")
    if X.ndim != 2 or X.shape[0] != u.shape[0]:
        raise ValueError(f"design {X.shape} and residuals {u.shape} do not align")
    n = X.shape[0]
    if not 0 <= lag < n:
        raise ValueError(f"lag must lie in [0, n), got {lag} with n={n}")
    scores = X * u[:, None]
    S = scores.T @ scores
    for l in range(1, lag + 1):
        g = scores[l:].T @ scores[:-l]
        S += (1.0 - l / (lag + 1.0)) * (g + g.T)
    xtx_inv = np.linalg.inv(X.T @ X)
    return xtx_inv @ S @ xtx_inv


@dataclass(frozen=True)
class LpSpec:
    """Projection design shared across horizons.

    horizons : int
        Largest horizon H; responses are estimated for h = 0..H.
    lag_order : int
        Number of lags of each control (and of the outcome) included.
    controls : mapping name -> series
        Extra control variables, entered with lags 1..lag_order.
    include_outcome_lags : bool
        Add lags of the dependent variable itself (on by default).
    regime_indicator : series or None
        0/1 series switching the state-dependent form; the regression
        at time t uses its t-1 value, so the indicator is supplied
        unlagged and shifted internally.
    band_level : float
        Two-sided confidence band coverage (0.68 = one sigma bands).
    """

    horizons: int = 12
    lag_order: int = 2
    controls: dict = field(default_factory=dict)
    include_outcome_lags: bool = True
    regime_indicator: object = None
    band_level: float = 0.68

    def __post_init__(self):
        if self.horizons < 0:
            raise ValueError(f"horizons must be nonnegative, got {self.horizons}")
        if self.lag_order < 0:
            raise ValueError(f"lag_order must be nonnegative, got {self.lag_order}")
        if not 0.0 < self.band_level < 1.0:
            raise ValueError(f"band_level must lie in (0, 1), got {self.band_level}")


@dataclass(frozen=True)
class LpResult:
    """Per-horizon, per-regime responses with HAC bands.

    ``regimes`` is ("linear",) or ("1", "0"); each of beta/se/lo/hi/
    n_obs maps a regime label to an array over ``horizons``. Entries are
    NaN where a regime contributed no observations.
    """

    horizons: np.ndarray
    regimes: tuple
    beta: dict
    se: dict
    lo: dict
    hi: dict
    n_obs: dict
    band_level: float

    def to_frame(self):
        rows = []
        for i, h in enumerate(self.horizons):
            for r in self.regimes:
                rows.append(
                    {
                        "h": int(h),
                        "regime": r,
                        "beta": self.beta[r][i],
                        "se": self.se[r][i],
                        "lo": self.lo[r][i],
                        "hi": self.hi[r][i],
                        "n_obs": int(self.n_obs[r][i]),
                    }
                )
        return pd.DataFrame(rows, columns=["h", "regime", "beta", "se", "lo", "hi", "n_obs"])


def _values(x, name):
    if isinstance(x, TimeSeries):
        return x.values
    return as_float_array(x, name)


def _column_names(spec, outcome_name="outcome"):
    names = ["const", "shock"]
    if spec.include_outcome_lags:
        names += [f"{outcome_name}.l{j}" for j in range(1, spec.lag_order + 1)]
    for cname in spec.controls:
        names += [f"{cname}.l{j}" for j in range(1, spec.lag_order + 1)]
    return names


def run_lp(outcome, spec, shock):
    """Estimate the projection at every horizon 0..spec.horizons.

    Parameters
    ----------
    outcome, shock : TimeSeries or ndarray
        Equal-length aligned series. The shock is standardized
        internally, so its scale never matters.
    spec : LpSpec

    Returns
    -------
    LpResult

    Raises
    ------
    ValueError
        On misaligned lengths, a non-0/1 indicator, or a rank-deficient
        design (the message names the collinear columns).

    Horizons whose regression would have fewer observations than
    2 + number of columns are dropped with a warning instead of being
    estimated from nothing.
    """
    y = _values(outcome, "outcome")
    s = standardize_shock(_values(shock, "shock"))
    T = y.shape[0]
    if s.shape[0] != T:
        raise ValueError(f"outcome has {T} observations, shock has {s.shape[0]}")
    controls = {k: _values(v, k) for k, v in spec.controls.items()}
    for k, v in controls.items():
        if v.shape[0] != T:
            raise ValueError(f"control {k!r} has {v.shape[0]} observations, expected {T}")
    check_finite(y, "outcome")

    indicator = None
    if spec.regime_indicator is not None:
        indicator = _values(spec.regime_indicator, "regime_indicator")
        if indicator.shape[0] != T:
            raise ValueError(f"regime_indicator has {indicator.shape[0]} observations, expected {T}")
        if not np.all(np.isin(indicator, (0.0, 1.0))):
            raise ValueError("regime_indicator must be 0/1 valued")

    names = _column_names(spec)
    t0 = spec.lag_order if indicator is None else max(spec.lag_order, 1)
    z = ndtri(0.5 + spec.band_level / 2.0)
    regimes = ("linear",) if indicator is None else ("1", "0")

    kept_h, rows = [], {r: [] for r in regimes}
    for h in range(spec.horizons + 1):
        t_end = T - h  # exclusive; regression rows are t0..t_end-1
        n_rows = t_end - t0
        n_base = len(names)
        n_cols = n_base if indicator is None else 2 * n_base
        # need a couple of spare rows beyond the columns, and the HAC
        # truncation lag (= h) must stay below the sample size
        if n_rows < n_cols + 2 or n_rows <= h:
            warnings.warn(
                f"horizon {h} dropped: {max(n_rows, 0)} usable observations "
                f"for {n_cols} columns with HAC lag {h}",
                UserWarning,
                stacklevel=2,
            )
            break

        t_idx = np.arange(t0, t_end)
        X = np.empty((n_rows, n_base))
        X[:, 0] = 1.0
        X[:, 1] = s[t_idx]
        col = 2
        if spec.include_outcome_lags:
            for j in range(1, spec.lag_order + 1):
                X[:, col] = y[t_idx - j]
                col += 1
        for cv in controls.values():
            for j in range(1, spec.lag_order + 1):
                X[:, col] = cv[t_idx - j]
                col += 1
        dep = y[t_idx + h]

        if indicator is None:
            est = _fit_one(X, dep, names, h)
            rows["linear"].append(est + (n_rows,))
        else:
            ind = indicator[t_idx - 1]
            X_state = np.hstack([X * ind[:, None], X * (1.0 - ind)[:, None]])
            state_names = [f"{n}:1" for n in names] + [f"{n}:0" for n in names]
            b, se_all = _fit_state(X_state, dep, state_names, h)
            n1 = int(ind.sum())
            for r, shock_col, n_r in (("1", 1, n1), ("0", n_base + 1, n_rows - n1)):
                rows[r].append((b[shock_col], se_all[shock_col], n_r))
        kept_h.append(h)

    if not kept_h:
        raise ValueError("no horizon has enough observations for the requested design")

    horizons = np.array(kept_h)
    beta, se, lo, hi, n_obs = {}, {}, {}, {}, {}
    for r in regimes:
        arr = np.array(rows[r], dtype=float)
        beta[r], se[r] = arr[:, 0], arr[:, 1]
        lo[r], hi[r] = beta[r] - z * se[r], beta[r] + z * se[r]
        n_obs[r] = arr[:, 2].astype(int)
    return LpResult(horizons, regimes, beta, se, lo, hi, n_obs, spec.band_level)


def _check_rank(X, names, h):
    """QR with pivoting; returns indices of structurally zero columns.

    Zero columns (a regime absent from the sample) are legitimate and
    reported back for NaN handling; any other rank deficiency is a
    user error naming the collinear columns.
    """
    zero = [j for j in range(X.shape[1]) if not np.any(X[:, j])]
    keep = [j for j in range(X.shape[1]) if j not in zero]
    Xk = X[:, keep]
    if Xk.shape[1] == 0:
        raise ValueError(f"horizon {h}: design matrix is entirely zero")
    R, pivots = qr(Xk, mode="r", pivoting=True)
    r_diag = np.abs(np.diag(R))
    tol = Xk.shape[0] * np.finfo(float).eps * r_diag.max()
    rank = int((r_diag > tol).sum())
    if rank < Xk.shape[1]:
        bad = [names[keep[j]] for j in sorted(pivots[rank:])]
        raise ValueError(f"horizon {h}: design matrix is rank deficient in columns {bad}")
    return zero, keep


def _fit_one(X, dep, names, h):
    zero, keep = _check_rank(X, names, h)
    if zero:
        raise ValueError(
            f"horizon {h}: zero columns {[names[j] for j in zero]} in a linear design"
        )
    b, *_ = np.linalg.lstsq(X, dep, rcond=None)
    cov = newey_west(X, dep - X @ b, h)
    return float(b[1]), float(math.sqrt(cov[1, 1]))


def _fit_state(X, dep, names, h):
    zero, keep = _check_rank(X, names, h)
    Xk = X[:, keep]
    bk, *_ = np.linalg.lstsq(Xk, dep, rcond=None)
    cov = newey_west(Xk, dep - Xk @ bk, h)
    b = np.full(X.shape[1], np.nan)
    se = np.full(X.shape[1], np.nan)
    b[keep] = bk
    se[keep] = np.sqrt(np.diag(cov))
    if zero:
        warnings.warn(
            f"horizon {h}: regime columns {[names[j] for j in zero]} have no "
            "observations; their coefficients are NaN",
            UserWarning,
            stacklevel=3,
        )
    return b, se


class LocalProjections(BaseEstimator):
    """Estimator wrapper around :func:`run_lp`.

    Hyperparameters mirror :class:`LpSpec`; ``fit(outcome, shock,
    controls=..., regime_indicator=...)`` stores the result in
    ``result_`` and the standardized shock in ``shock_``.
    """

    def __init__(self, horizons=12, lag_order=2, include_outcome_lags=True, band_level=0.68):
        self.horizons = horizons
        self.lag_order = lag_order
        self.include_outcome_lags = include_outcome_lags
        self.band_level = band_level

    def fit(self, outcome, shock, controls=None, regime_indicator=None):
        spec = LpSpec(
            horizons=self.horizons,
            lag_order=self.lag_order,
            controls=dict(controls or {}),
            include_outcome_lags=self.include_outcome_lags,
            regime_indicator=regime_indicator,
            band_level=self.band_level,
        )
        self.shock_ = standardize_shock(_values(shock, "shock"))
        self.result_ = run_lp(outcome, spec, shock)
        return self
