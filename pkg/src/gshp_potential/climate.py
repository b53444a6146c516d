"""Degree days, monthly load weights and operating-time bounds."""
from __future__ import annotations

from dataclasses import dataclass
import calendar

import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

HDD_BASE = 20.0
HDD_THRESHOLD = 12.0
CDD_BASE = 18.0
PEAK_FACTOR = 1.05
HOURS_PER_YEAR = 8760.0

DAYS_IN_MONTH = np.array([31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31])


class NoLoadSeason(ValueError):
    """Raised when a degree-day profile is zero in every month."""


@dataclass(frozen=True)
class DegreeDayProfile:
    hdd_monthly: tuple
    cdd_monthly: tuple
    w_hdd_max: float
    w_cdd_max: float
    t_m_heat: float
    t_m_cool: float

    @property
    def has_cooling(self) -> bool:
        return self.w_cdd_max > 0


def _as_series(daily_T) -> pd.Series:
    if isinstance(daily_T, pd.Series):
        s = daily_T.copy()
    else:
        s = pd.Series(daily_T)
    s.index = pd.DatetimeIndex(s.index).normalize()
    if s.index.has_duplicates:
        raise ValueError("duplicate dates in daily temperature series")
    if s.isna().any() or not np.isfinite(s.to_numpy(dtype=float)).all():
        raise ValueError("daily temperatures must be finite")
    return s.sort_index().astype(float)


def _check_whole_months(s: pd.Series):
    periods = s.index.to_period("M")
    counts = pd.Series(1, index=periods).groupby(level=0).sum()
    for period, n in counts.items():
        if n != period.days_in_month:
            raise ValueError(f"incomplete month {period}: {n} of {period.days_in_month} days")


def _monthly_mean_over_years(contrib: pd.Series) -> np.ndarray:
    periods = contrib.index.to_period("M")
    per_month = contrib.groupby(periods).sum()
    by_calendar = per_month.groupby(per_month.index.month).mean()
    out = np.zeros(12)
    out[by_calendar.index.to_numpy() - 1] = by_calendar.to_numpy()
    return out


def compute_hdd(daily_T) -> np.ndarray:
    """Monthly heating degree days (K.day), averaged over the years present.

    ``daily_T`` is a series of daily mean temperatures indexed by date.
    Days at or below 12 degC contribute 20 - T.
    """
    s = _as_series(daily_T)
    _check_whole_months(s)
    return _monthly_mean_over_years((HDD_BASE - s).where(s <= HDD_THRESHOLD, 0.0))


def compute_cdd(daily_T) -> np.ndarray:
    """Monthly cooling degree days (K.day); days at or above 18 degC contribute T - 18."""
    s = _as_series(daily_T)
    _check_whole_months(s)
    return _monthly_mean_over_years((s - CDD_BASE).where(s >= CDD_BASE, 0.0))


def load_weights(monthly_dd) -> tuple[float, int]:
    """Peak monthly weight 1.05 * max / sum and the (first) peak month index."""
    dd = np.asarray(monthly_dd, dtype=float)
    if dd.shape != (12,):
        raise ValueError("expected 12 monthly values")
    if np.any(dd < 0):
        raise ValueError("degree days must be non-negative")
    total = dd.sum()
    if total <= 0:
        raise NoLoadSeason("all-zero degree-day profile")
    month = int(np.argmax(dd))
    return PEAK_FACTOR * dd[month] / total, month


def max_operating_time(w_max: float, t_m: float) -> float:
    """Full-load hours when running continuously in the peak month, capped at one year."""
    if w_max <= 0:
        raise ValueError("w_max must be positive")
    return min(t_m / w_max, HOURS_PER_YEAR)


def month_hours(month: int, leap: bool = False) -> float:
    days = calendar.monthrange(2000 if leap else 2001, month + 1)[1]
    return 24.0 * days


def degree_day_profile(daily_T) -> DegreeDayProfile:
    s = _as_series(daily_T)
    hdd = compute_hdd(s)
    cdd = compute_cdd(s)
    all_leap = all(calendar.isleap(y) for y in s.index.year.unique())
    w_h, m_h = load_weights(hdd)
    try:
        w_c, m_c = load_weights(cdd)
        t_c = month_hours(m_c, all_leap)
    except NoLoadSeason:
        w_c, t_c = 0.0, 0.0
    return DegreeDayProfile(tuple(hdd), tuple(cdd), w_h, w_c, month_hours(m_h, all_leap), t_c)


def profile_from_monthly(hdd, cdd) -> DegreeDayProfile:
    """Profile from already-aggregated monthly degree days (non-leap months)."""
    w_h, m_h = load_weights(hdd)
    try:
        w_c, m_c = load_weights(cdd)
        t_c = month_hours(m_c)
    except NoLoadSeason:
        w_c, t_c = 0.0, 0.0
    return DegreeDayProfile(tuple(float(v) for v in hdd), tuple(float(v) for v in cdd),
                            w_h, w_c, month_hours(m_h), t_c)


def interpolate_grid(values, x_centers, y_centers, points):
    """Bilinear interpolation of a gridded field at (x, y) points.

    ``values`` has shape (..., len(y_centers), len(x_centers)); leading axes
    (e.g. days) are carried through. Points outside the grid are clamped to
    the edge cells.
    """
    values = np.asarray(values, dtype=float)
    x = np.asarray(x_centers, dtype=float)
    y = np.asarray(y_centers, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    px = np.clip(pts[:, 0], x.min(), x.max())
    py = np.clip(pts[:, 1], y.min(), y.max())
    lead = values.shape[:-2]
    grid_vals = np.moveaxis(values.reshape(-1, len(y), len(x)), 0, -1)
    if len(x) == 1 or len(y) == 1:
        # degenerate axis: pad so the interpolator has two nodes
        if len(x) == 1:
            x = np.array([x[0], x[0] + 1.0])
            grid_vals = np.concatenate([grid_vals, grid_vals], axis=1)
        if len(y) == 1:
            y = np.array([y[0], y[0] + 1.0])
            grid_vals = np.concatenate([grid_vals, grid_vals], axis=0)
    interp = RegularGridInterpolator((y, x), grid_vals, method="linear")
    out = interp(np.column_stack([py, px]))
    return np.moveaxis(out, -1, 0).reshape(*lead, len(pts))
