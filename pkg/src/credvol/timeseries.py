"""Quarterly time-series ingestion and alignment.

The estimation pipeline works on one quarterly series at a time; this
module owns CSV ingestion with strict validation (bad rows abort with
their row number rather than being imputed), the demeaned growth-rate
transform, and lead/lag cross-correlation tables between two series on
a shared quarterly calendar.
"""

from __future__ import annotations

import csv
import datetime as _dt
import re
from dataclasses import dataclass, field

import numpy as np

from .validation import as_float_array, check_finite

__all__ = [
    "TimeSeries",
    "load_csv",
    "growth_rate_demeaned",
    "lead_lag_correlation",
    "parse_period",
    "format_period",
]

_QUARTER_RE = re.compile(r"^\s*(\d{1,4})\s*[-_ ]?\s*[Qq]\s*([1-4])\s*$")


def parse_period(label):
    """Parse a quarterly period label to an integer quarter index.

    Accepts ``1978Q1`` / ``1978-Q2`` style labels and ISO dates (the
    date's calendar quarter is used). The index is ``year*4 + quarter-1``
    so consecutive quarters differ by exactly 1.
    """
    m = _QUARTER_RE.match(label)
    if m:
        year, q = int(m.group(1)), int(m.group(2))
        return year * 4 + (q - 1)
    try:
        d = _dt.date.fromisoformat(label.strip())
    except ValueError:
        raise ValueError(f"cannot parse period label {label!r}: expected '1978Q1' style or an ISO date") from None
    return d.year * 4 + (d.month - 1) // 3


def format_period(index):
    """Inverse of :func:`parse_period`, always in ``YYYYQn`` form."""
    year, q = divmod(int(index), 4)
    return f"{year}Q{q + 1}"


@dataclass
class TimeSeries:
    """A quarterly series: values plus strictly increasing period indices.

    ``periods`` holds integer quarter indices (see :func:`parse_period`);
    ``labels()`` recovers printable ``YYYYQn`` labels. Gaps are not
    allowed: ingestion rejects non-consecutive quarters, so ``periods``
    always advances by exactly one.
    """

    periods: np.ndarray
    values: np.ndarray
    name: str = field(default="series")

    def __post_init__(self):
        self.periods = np.asarray(self.periods, dtype=np.int64)
        self.values = as_float_array(self.values, "values", ndim=1)
        if self.periods.shape != self.values.shape:
            raise ValueError(
                f"periods and values length mismatch: {self.periods.shape[0]} vs {self.values.shape[0]}"
            )
        if self.periods.size == 0:
            raise ValueError("series is empty")
        steps = np.diff(self.periods)
        if np.any(steps <= 0):
            at = int(np.flatnonzero(steps <= 0)[0])
            raise ValueError(
                f"periods must be strictly increasing: {format_period(self.periods[at + 1])} "
                f"follows {format_period(self.periods[at])}"
            )
        if np.any(steps != 1):
            at = int(np.flatnonzero(steps != 1)[0])
            raise ValueError(
                f"non-quarterly spacing between {format_period(self.periods[at])} "
                f"and {format_period(self.periods[at + 1])}"
            )
        check_finite(self.values, f"values of {self.name!r}")

    def __len__(self):
        return self.values.shape[0]

    def labels(self):
        return [format_period(p) for p in self.periods]

    def span(self):
        return format_period(self.periods[0]), format_period(self.periods[-1])


def load_csv(path, value_column, period_column=None):
    """Load one quarterly series from a CSV file with a header row.

    Parameters
    ----------
    path : str or Path
        CSV file with a header; one period per row.
    value_column : str
        Name of the column holding the numeric values.
    period_column : str, optional
        Name of the column holding period labels. Defaults to the first
        column in the file.

    Returns
    -------
    TimeSeries

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    ValueError
        On a missing column, an unparseable or empty cell, duplicated or
        non-monotone timestamps, or non-quarterly spacing. The message
        names the offending row (1-based, counting the header as row 1).
        Rows with missing values abort ingestion; nothing is imputed.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if value_column not in header:
            raise ValueError(f"{path}: no column named {value_column!r} (header: {header})")
        vcol = header.index(value_column)
        pcol = 0 if period_column is None else header.index(period_column)
        if period_column is not None and period_column not in header:
            raise ValueError(f"{path}: no column named {period_column!r}")

        periods, values = [], []
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) <= max(vcol, pcol):
                raise ValueError(f"{path}: row {rownum} has {len(row)} fields, expected at least {max(vcol, pcol) + 1}")
            rawp, rawv = row[pcol].strip(), row[vcol].strip()
            try:
                p = parse_period(rawp)
            except ValueError as exc:
                raise ValueError(f"{path}: row {rownum}: {exc}") from None
            if rawv == "":
                raise ValueError(f"{path}: row {rownum}: missing value in column {value_column!r}")
            try:
                v = float(rawv)
            except ValueError:
                raise ValueError(f"{path}: row {rownum}: cannot parse {rawv!r} as a number") from None
            if not np.isfinite(v):
                raise ValueError(f"{path}: row {rownum}: non-finite value {rawv!r}")
            if periods and p == periods[-1]:
                raise ValueError(f"{path}: row {rownum}: duplicated period {format_period(p)}")
            if periods and p < periods[-1]:
                raise ValueError(f"{path}: row {rownum}: period {format_period(p)} is out of order")
            if periods and p != periods[-1] + 1:
                raise ValueError(
                    f"{path}: row {rownum}: gap between {format_period(periods[-1])} and {format_period(p)}"
                )
            periods.append(p)
            values.append(v)

    if not periods:
        raise ValueError(f"{path}: no data rows")
    return TimeSeries(np.array(periods), np.array(values), name=value_column)


def growth_rate_demeaned(ts):
    """Demeaned growth rate: ``100*(log v_t - log v_{t-1})`` minus its mean.

    The result is one observation shorter and keeps the later period of
    each difference. Non-positive levels make the log transform
    undefined and raise.
    """
    if len(ts) < 2:
        raise ValueError("growth rate needs at least 2 observations")
    if np.any(ts.values <= 0):
        at = int(np.flatnonzero(ts.values <= 0)[0])
        raise ValueError(
            f"non-positive level at {format_period(ts.periods[at])}: log growth undefined"
        )
    g = 100.0 * np.diff(np.log(ts.values))
    g = g - g.mean()
    return TimeSeries(ts.periods[1:], g, name=f"{ts.name}_growth_demeaned")


def lead_lag_correlation(a, b, k_min=-3, k_max=4, min_overlap=8):
    """Cross-correlations ``corr(a_t, b_{t+k})`` for ``k`` in a range.

    Series are aligned on the quarterly calendar, so ``a`` and ``b`` may
    cover different spans. Positive ``k`` means ``b`` leads by ``k``
    quarters in the pairing (``b`` is shifted back to meet ``a``).

    Returns a list of ``(k, corr)`` tuples. Symmetric in its arguments:
    swapping ``a`` and ``b`` while negating ``k`` gives the same value.

    Raises
    ------
    ValueError
        If fewer than ``min_overlap`` aligned pairs exist at some ``k``,
        or a window is constant (correlation undefined).
    """
    if k_min > k_max:
        raise ValueError(f"k_min={k_min} exceeds k_max={k_max}")
    out = []
    for k in range(k_min, k_max + 1):
        # pair a_t with b_{t+k}: t must lie in a's calendar and t+k in b's
        lo = max(a.periods[0], b.periods[0] - k)
        hi = min(a.periods[-1], b.periods[-1] - k)
        n = hi - lo + 1
        if n < min_overlap:
            raise ValueError(
                f"only {max(n, 0)} overlapping quarters at k={k}, need at least {min_overlap}"
            )
        av = a.values[lo - a.periods[0]: hi - a.periods[0] + 1]
        bv = b.values[lo + k - b.periods[0]: hi + k - b.periods[0] + 1]
        if np.ptp(av) == 0.0 or np.ptp(bv) == 0.0:
            raise ValueError(f"constant window at k={k}: correlation undefined")
        c = np.corrcoef(av, bv)[0, 1]
        out.append((k, float(c)))
    return out
