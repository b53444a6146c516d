"""Month-by-month load superposition for a borehole field.

Used as an independent check of the weighted-resistance model: the field is
driven by a monthly load history and the mean fluid temperature follows from
temporal superposition of finite line source step responses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .climate import DegreeDayProfile
from .sizing import FieldDesign, HpParams, OperatingPoint
from .thermal import (SECONDS_PER_MONTH, GroundColumn, fls_time_series, pair_distances,
                      superpose_monthly, undisturbed_T_g)

HOURS_PER_MONTH = 8760.0 / 12.0


@dataclass
class LoadHistory:
    """Monthly net specific load (W/m); extraction positive, injection negative."""

    loads: np.ndarray
    t_dim: int = 50

    def __post_init__(self):
        self.loads = np.asarray(self.loads, dtype=float)
        if self.loads.shape != (12 * self.t_dim,):
            raise ValueError(f"expected {12 * self.t_dim} monthly loads, got {self.loads.shape}")
        if not np.all(np.isfinite(self.loads)):
            raise ValueError("loads must be finite")


def field_kernel(design: FieldDesign, ground: GroundColumn, n_months: int) -> np.ndarray:
    """Mean borehole-wall response after 1..n_months of unit load on every borehole."""
    times = np.arange(1, n_months + 1) * SECONDS_PER_MONTH
    own = fls_time_series([ground.r_b], design.H, times, ground)[0]
    dist, counts = pair_distances(design.borehole_xy, design.B)
    if dist.size == 0:
        return own
    others = fls_time_series(dist, design.H, times, ground)
    return own + 2.0 * (counts @ others) / design.N_B


def simulate_T_mf(design: FieldDesign, ground: GroundColumn, loads, peak_loads=None,
                  kernel: np.ndarray | None = None) -> np.ndarray:
    """Mean fluid temperature at the end of every month.

    The ground part superposes the monthly mean loads; the borehole
    resistance term uses ``peak_loads`` when given (instantaneous heat pump
    power) and the monthly means otherwise.
    """
    loads = loads.loads if isinstance(loads, LoadHistory) else np.asarray(loads, dtype=float)
    if kernel is None:
        kernel = field_kernel(design, ground, loads.size)
    ground_drop = superpose_monthly(loads, kernel[: loads.size])
    local = loads if peak_loads is None else np.asarray(peak_loads, dtype=float)
    return undisturbed_T_g(design.H, ground) - ground_drop - local * ground.Rb


def operating_loads(point: OperatingPoint, design: FieldDesign, profile: DegreeDayProfile,
                    t_dim: int = 50):
    """Monthly mean and peak specific loads implied by an operating point.

    Heating energy is spread over the months in proportion to HDD, injected
    energy in proportion to CDD. Returns (mean_loads, heating_peak, cooling_peak)
    where the peaks are zero in months without the respective load.
    """
    hdd = np.asarray(profile.hdd_monthly, dtype=float)
    cdd = np.asarray(profile.cdd_monthly, dtype=float)
    heat_share = hdd / hdd.sum() if hdd.sum() > 0 else np.zeros(12)
    cool_share = cdd / cdd.sum() if cdd.sum() > 0 else np.zeros(12)
    extraction = point.q_max * point.t_op_h  # Wh/m per year
    injection = point.Q_inj / design.length if point.Q_inj > 0 else 0.0
    mean = (extraction * heat_share - injection * cool_share) / HOURS_PER_MONTH
    c_peak = point.Q_inj / (design.length * point.t_op_c) if point.Q_inj > 0 else 0.0
    heat_peak = np.where(heat_share > 0, point.q_max, 0.0)
    cool_peak = np.where(cool_share > 0, c_peak, 0.0)
    return np.tile(mean, t_dim), np.tile(heat_peak, t_dim), np.tile(cool_peak, t_dim)


def validate_operating_point(point: OperatingPoint, design: FieldDesign, ground: GroundColumn,
                             profile: DegreeDayProfile, hp: HpParams | None = None,
                             kernel: np.ndarray | None = None) -> float:
    """Largest excursion (K) of the simulated fluid temperature beyond
    [T_mf_min, T_mf_max] over the dimensioning horizon; 0 when none."""
    hp = hp or HpParams()
    t_dim = int(round(hp.t_dim))
    mean, heat_peak, cool_peak = operating_loads(point, design, profile, t_dim)
    if kernel is None:
        kernel = field_kernel(design, ground, mean.size)
    base = simulate_T_mf(design, ground, mean, peak_loads=np.zeros_like(mean), kernel=kernel)
    T_heat = base - heat_peak * ground.Rb
    T_cool = base + cool_peak * ground.Rb
    worst = 0.0
    heating = heat_peak > 0
    cooling = cool_peak > 0
    if heating.any():
        worst = max(worst, float(np.max(hp.T_mf_min - T_heat[heating])))
    if cooling.any():
        worst = max(worst, float(np.max(T_cool[cooling] - hp.T_mf_max)))
    return max(worst, 0.0)
