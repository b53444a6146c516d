"""Operating-point selection for a borehole field.

Fluid temperatures follow the weighted-resistance model: a long-term
component weighted by the annual fraction of operating time, a seasonal
component weighted by the peak-month load, and the borehole resistance.
Constraints are checked in the first year (no long-term drift) and in the
last year of the dimensioning horizon.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Sequence

import numpy as np

from .climate import DegreeDayProfile, max_operating_time
from .geospatial import place_boreholes
from .thermal import HOURS_PER_YEAR, GroundColumn, ResistanceSet, resistance_set, undisturbed_T_g

SPACINGS = (5.0, 7.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0, 70.0, 100.0)
DEPTHS = (50.0, 100.0, 150.0, 200.0)
MIN_POWER_FRACTION = 0.8
GEOM_EPS = 1e-6

# Nominal full-load heating hours by site altitude (m a.s.l. lower bound, h).
T_NOM_BY_ALTITUDE = ((0.0, 1800.0), (500.0, 1850.0), (800.0, 1900.0), (1000.0, 1950.0), (1200.0, 2000.0))


class Mode(str, Enum):
    NOMINAL_HOURS = "NominalHours"
    NOMINAL_POWER = "NominalPower"


class Phase(str, Enum):
    START = "start"
    END = "end"


class InfeasibleConfigError(ValueError):
    """Inputs that cannot describe a physical configuration."""


@dataclass(frozen=True)
class HpParams:
    COP_heat: float = 4.5
    COP_cool: float = 5.5
    T_mf_min: float = -1.5
    T_mf_max: float = 50.0
    t_dim: float = 50.0

    def __post_init__(self):
        if self.COP_heat <= 1 or self.COP_cool <= 1:
            raise ValueError("COPs must exceed 1")
        if self.T_mf_min >= self.T_mf_max:
            raise ValueError("T_mf_min must be below T_mf_max")


@dataclass
class FieldDesign:
    B: float
    H: float
    borehole_xy: np.ndarray
    resistances: ResistanceSet
    parcel_id: str = ""

    def __post_init__(self):
        self.borehole_xy = np.asarray(self.borehole_xy, dtype=float).reshape(-1, 2)
        if len(self.borehole_xy) < 1:
            raise ValueError("a field needs at least one borehole")

    @property
    def N_B(self) -> int:
        return len(self.borehole_xy)

    @property
    def length(self) -> float:
        """Total drilled length N_B * H (m)."""
        return self.N_B * self.H


@dataclass
class OperatingPoint:
    mode: Mode
    q_max: float
    t_op_h: float
    t_op_c: float
    Q_inj: float
    Q_field: float
    Q_extr: float
    T_mf_h_start: float
    T_mf_h_end: float
    T_mf_c_start: float
    T_mf_c_end: float
    design: FieldDesign | None = field(default=None, repr=False)

    @property
    def T_mf_extremes(self) -> tuple[float, float]:
        temps = (self.T_mf_h_start, self.T_mf_h_end, self.T_mf_c_start, self.T_mf_c_end)
        return min(temps), max(temps)


def candidate_designs(geometry, ground: GroundColumn, H_max: float = 200.0, t_dim: float = 50.0,
                      spacings=SPACINGS, depths=DEPTHS, parcel_id: str = "") -> list[FieldDesign]:
    """Every (B, H) field that fits on an available area, with its resistances.

    All polygon parts of the area form one field.
    """
    out = []
    H_cap = min(H_max, ground.H_max)
    for B in spacings:
        parts = [xy for xy in place_boreholes(geometry, B) if len(xy)]
        if not parts:
            continue
        xy = np.vstack(parts)
        for H in depths:
            if H > H_cap:
                continue
            out.append(FieldDesign(B, H, xy, resistance_set(xy, B, H, ground, t_dim), parcel_id))
    return out


def t_nom_for_altitude(altitude: float, table=T_NOM_BY_ALTITUDE) -> float:
    value = table[0][1]
    for threshold, hours in table:
        if altitude >= threshold:
            value = hours
    return value


def cooling_hours(profile: DegreeDayProfile) -> float:
    if not profile.has_cooling:
        return 0.0
    return max_operating_time(profile.w_cdd_max, profile.t_m_cool)


def heating_hours_bound(profile: DegreeDayProfile) -> float:
    return max_operating_time(profile.w_hdd_max, profile.t_m_heat)


def weighted_resistances(design: FieldDesign, profile: DegreeDayProfile, t_op_h: float,
                         t_op_c: float, phase: Phase | str):
    """Weighted (R'_LT,h, R'_LT,c, R'_seas,h, R'_seas,c) for one phase."""
    phase = Phase(phase)
    for t in (t_op_h, t_op_c):
        if not 0.0 <= t <= HOURS_PER_YEAR:
            raise ValueError(f"operating time {t} h outside [0, 8760]")
    res = design.resistances
    if phase is Phase.START:
        lt_h = lt_c = 0.0
    else:
        long_term = res.long_term
        if long_term < 0:
            raise InfeasibleConfigError(
                f"R_seas={res.R_seas} exceeds R_LT + R_field={res.R_LT + res.R_field}")
        lt_h = t_op_h / HOURS_PER_YEAR * long_term
        lt_c = t_op_c / HOURS_PER_YEAR * long_term
    seas_h = profile.w_hdd_max * t_op_h / profile.t_m_heat * res.R_seas
    seas_c = profile.w_cdd_max * t_op_c / profile.t_m_cool * res.R_seas if t_op_c > 0 else 0.0
    return lt_h, lt_c, seas_h, seas_c


def injection_rate(design: FieldDesign, Q_inj: float, t_op_c: float) -> float:
    """Mean specific injection power during cooling operation (W/m)."""
    if Q_inj < 0:
        raise ValueError("Q_inj must be non-negative")
    if Q_inj == 0:
        return 0.0
    if t_op_c <= 0:
        raise InfeasibleConfigError("heat injection requires a positive cooling operating time")
    return Q_inj / (design.N_B * t_op_c * design.H)


def fluid_temperatures(design: FieldDesign, ground: GroundColumn, hp: HpParams, q_max: float,
                       t_op_h: float, t_op_c: float, Q_inj: float, phase: Phase | str,
                       profile: DegreeDayProfile) -> tuple[float, float]:
    """Peak-heating and peak-cooling mean fluid temperatures (degC)."""
    lt_h, lt_c, seas_h, seas_c = weighted_resistances(design, profile, t_op_h, t_op_c, phase)
    T_g = undisturbed_T_g(design.H, ground)
    c = injection_rate(design, Q_inj, t_op_c)
    T_h = T_g - q_max * (lt_h + seas_h + ground.Rb) + c * lt_c
    T_c = T_g + c * (lt_c + seas_c + ground.Rb) - q_max * lt_h
    return T_h, T_c


def constraint_margins(design, ground, hp, profile, q_max, t_op_h, t_op_c, Q_inj):
    """Slack of the four fluid-temperature constraints; all >= 0 when feasible."""
    out = []
    for phase in (Phase.START, Phase.END):
        T_h, T_c = fluid_temperatures(design, ground, hp, q_max, t_op_h, t_op_c, Q_inj, phase, profile)
        out.extend((T_h - hp.T_mf_min, hp.T_mf_max - T_c))
    return np.array(out)


def _make_point(mode, design, ground, hp, profile, q_max, t_op_h, t_op_c, Q_inj):
    T_h0, T_c0 = fluid_temperatures(design, ground, hp, q_max, t_op_h, t_op_c, Q_inj, Phase.START, profile)
    T_h1, T_c1 = fluid_temperatures(design, ground, hp, q_max, t_op_h, t_op_c, Q_inj, Phase.END, profile)
    Q_field = q_max * t_op_h * design.H * design.N_B
    return OperatingPoint(mode, q_max, t_op_h, t_op_c, Q_inj, Q_field, Q_field,
                          T_h0, T_h1, T_c0, T_c1, design)


def solve_mode1_nominal_hours(design: FieldDesign, ground: GroundColumn, hp: HpParams,
                              profile: DegreeDayProfile, Q_inj: float, t_nom: float,
                              tol: float = 1e-9) -> OperatingPoint | None:
    """Highest extraction rate at t_op_h = t_nom, or None when below 80 % of q_nom.

    Both constraints are linear in q_max, so each phase gives a closed-form
    bound. The rate is bracketed by [0.8 q_nom, q_nom].
    """
    q_nom = ground.q_nom(design.H)
    t_op_c = cooling_hours(profile)
    c = injection_rate(design, Q_inj, t_op_c)
    T_g = undisturbed_T_g(design.H, ground)
    q_hi = q_nom
    q_lo = MIN_POWER_FRACTION * q_nom
    for phase in (Phase.START, Phase.END):
        lt_h, lt_c, seas_h, seas_c = weighted_resistances(design, profile, t_nom, t_op_c, phase)
        # heating: T_g - q*S_h + c*lt_c >= T_min
        s_h = lt_h + seas_h + ground.Rb
        free_h = T_g - hp.T_mf_min + c * lt_c
        if s_h > 0:
            q_hi = min(q_hi, free_h / s_h)
        elif free_h < 0:
            return None
        # cooling: T_g + c*S_c - q*lt_h <= T_max
        excess_c = T_g + c * (lt_c + seas_c + ground.Rb) - hp.T_mf_max
        if lt_h > 0:
            q_lo = max(q_lo, excess_c / lt_h)
        elif excess_c > tol:
            return None
    if q_hi < q_lo - tol:
        return None
    return _make_point(Mode.NOMINAL_HOURS, design, ground, hp, profile, q_hi, t_nom, t_op_c, Q_inj)


def _bisect(pred, lo, hi, tol):
    """Largest x in [lo, hi] with pred(x) true, assuming pred(lo) and a
    single true-to-false transition."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


def solve_mode2_nominal_power(design: FieldDesign, ground: GroundColumn, hp: HpParams,
                              profile: DegreeDayProfile, Q_inj: float, t_nom: float,
                              tol: float = 1e-6) -> OperatingPoint | None:
    """Longest heating operation at q_max = q_nom, or None if no time in
    [t_nom, t_m / w_hdd_max] satisfies every constraint.

    Heating-side slack shrinks with t_op_h while the last-year cooling-side
    slack grows with it, so the feasible times form an interval whose ends
    are located by bisection to ``tol`` hours. The default is far below the
    0.1 h needed for reporting so that injection capacities stay attainable.
    """
    q_nom = ground.q_nom(design.H)
    t_op_c = cooling_hours(profile)
    t_max = heating_hours_bound(profile)
    if t_max < t_nom:
        return None

    def margins(t):
        return constraint_margins(design, ground, hp, profile, q_nom, t, t_op_c, Q_inj)

    def heating_ok(t):
        m = margins(t)
        return m[0] >= 0 and m[2] >= 0

    def cooling_ok(t):
        m = margins(t)
        return m[1] >= 0 and m[3] >= 0

    if not heating_ok(t_nom):
        return None
    t_hi = t_max if heating_ok(t_max) else _bisect(heating_ok, t_nom, t_max, tol)
    if not cooling_ok(t_hi):
        return None
    return _make_point(Mode.NOMINAL_POWER, design, ground, hp, profile, q_nom, t_hi, t_op_c, Q_inj)


def solve_design(design, ground, hp, profile, Q_inj, t_nom):
    """Feasible operating points of both modes for one design."""
    points = []
    for solver in (solve_mode1_nominal_hours, solve_mode2_nominal_power):
        point = solver(design, ground, hp, profile, Q_inj, t_nom)
        if point is not None:
            points.append(point)
    return points


def _preference_key(point: OperatingPoint):
    d = point.design
    # larger objective, then larger B, then smaller H, then mode 1
    return (point.Q_field, d.B, -d.H, point.mode is Mode.NOMINAL_HOURS)


def optimize_field(parcel_designs: Sequence[FieldDesign], ground: GroundColumn, hp: HpParams,
                   profile: DegreeDayProfile, Q_inj: float, t_nom: float,
                   rel_tol: float = 1e-9) -> tuple[OperatingPoint | None, float]:
    """Best feasible (B, H, mode) and its annual extraction Q_extr (Wh/y).

    Q_inj is fixed by the cooling demand assigned to the parcel, so the
    candidate maximising Q_field + Q_inj is the one maximising Q_field.
    Returns (None, 0.0) when no candidate is feasible.
    """
    if not parcel_designs:
        raise ValueError("no candidate designs")
    if Q_inj < 0:
        raise ValueError("Q_inj must be non-negative")
    points = []
    for design in parcel_designs:
        if design.H > ground.H_max:
            continue
        points.extend(solve_design(design, ground, hp, profile, Q_inj, t_nom))
    if not points:
        return None, 0.0
    best_q = max(p.Q_field for p in points)
    # near-ties in the objective are settled by the geometric preference
    tied = [p for p in points if p.Q_field >= best_q * (1.0 - rel_tol)]
    best = max(tied, key=lambda p: _preference_key(p)[1:])
    return best, best.Q_field


def to_useful_energy(Q_extr: float, Q_inj: float, hp: HpParams) -> tuple[float, float]:
    """Heat delivered to and cooling drawn from buildings (Wh/y)."""
    if Q_extr < 0 or Q_inj < 0:
        raise ValueError("energies must be non-negative")
    Q_heat = Q_extr * hp.COP_heat / (hp.COP_heat - 1.0)
    Q_cool = Q_inj * hp.COP_cool / (hp.COP_cool + 1.0)
    return Q_heat, Q_cool


def injection_from_cooling(Q_cool: float, hp: HpParams) -> float:
    """Heat rejected to the ground for a given building cooling demand."""
    return Q_cool * (hp.COP_cool + 1.0) / hp.COP_cool


def nominal_extraction_rate(H: float, ground: GroundColumn, hp: HpParams, profile: DegreeDayProfile,
                            t_nom: float, R_LT: float, R_seas: float) -> float:
    """Extraction rate (W/m) of one isolated borehole run for t_nom hours
    that just meets T_mf_min over the dimensioning horizon."""
    T_g = undisturbed_T_g(H, ground)
    seas = profile.w_hdd_max * t_nom / profile.t_m_heat * R_seas
    end = t_nom / HOURS_PER_YEAR * (R_LT - R_seas) + seas + ground.Rb
    start = seas + ground.Rb
    return (T_g - hp.T_mf_min) / max(end, start)


# -- injection capacity --------------------------------------------------------

def _affine(fn, x0, c0):
    """Coefficients (m0, dm/dx, dm/dc) of an affine vector function."""
    base = fn(x0, c0)
    dx = fn(x0 + 1.0, c0) - base
    dc = fn(x0, c0 + 1.0) - base
    return base - dx * x0 - dc * c0, dx, dc


def _max_c_on_polygon(m0, mx, mc, x_lo, x_hi, tol=1e-9):
    """Maximise c over {m0 + mx*x + mc*c >= 0, x_lo <= x <= x_hi, c >= 0}.

    Enumerates the vertices of the 2-D feasible polygon. Returns None when empty.
    """
    # rows: a_x * x + a_c * c <= b
    A = [(-mx[i], -mc[i], m0[i]) for i in range(len(m0))]
    A += [(1.0, 0.0, x_hi), (-1.0, 0.0, -x_lo), (0.0, -1.0, 0.0)]
    best = None
    for (a1, b1, r1), (a2, b2, r2) in combinations(A, 2):
        det = a1 * b2 - a2 * b1
        if abs(det) < 1e-14:
            continue
        x = (r1 * b2 - r2 * b1) / det
        c = (a1 * r2 - a2 * r1) / det
        scale = 1.0 + abs(x) + abs(c)
        if all(ax * x + ac * c <= r + tol * scale for ax, ac, r in A):
            if best is None or c > best:
                best = c
    return best


def injection_capacity(design: FieldDesign, ground: GroundColumn, hp: HpParams,
                       profile: DegreeDayProfile, t_nom: float) -> float:
    """Largest annual injection (Wh/y) for which the design keeps a feasible
    operating point in either mode.

    At the optimum the last-year cooling constraint is binding; the heating
    load that accompanies the injection is taken into account.
    """
    t_op_c = cooling_hours(profile)
    if t_op_c <= 0 or design.H > ground.H_max:
        return 0.0
    q_nom = ground.q_nom(design.H)
    per_rate = design.N_B * t_op_c * design.H  # Wh per (W/m)
    best = None

    def mode1(q, c):
        return constraint_margins(design, ground, hp, profile, q, t_nom, t_op_c, c * per_rate)

    def mode2(t, c):
        return constraint_margins(design, ground, hp, profile, q_nom, t, t_op_c, c * per_rate)

    t_max = heating_hours_bound(profile)
    cases = [(mode1, MIN_POWER_FRACTION * q_nom, q_nom, q_nom)]
    if t_max >= t_nom:
        cases.append((mode2, t_nom, t_max, t_nom))
    for fn, lo, hi, x0 in cases:
        m0, mx, mc = _affine(fn, x0, 1.0)
        c = _max_c_on_polygon(m0, mx, mc, lo, hi)
        if c is not None and (best is None or c > best):
            best = c
    if best is None or best <= 0:
        return 0.0
    # the polygon vertex may sit a rounding error outside the solvers' feasible set
    for shave in (0.0, 1e-9, 1e-7, 1e-5):
        cap = best * (1.0 - shave) * per_rate
        if solve_design(design, ground, hp, profile, cap, t_nom):
            return cap
    return 0.0
