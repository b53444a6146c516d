"""Finite line source ground response and borehole thermal resistances.

All resistances are temperature changes per unit line load (m.K/W). Time
arguments of ``fls_step_response`` are seconds; dimensioning horizons are
given in years.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve

SECONDS_PER_HOUR = 3600.0
HOURS_PER_YEAR = 8760.0
SECONDS_PER_YEAR = HOURS_PER_YEAR * SECONDS_PER_HOUR
SECONDS_PER_MONTH = SECONDS_PER_YEAR / 12.0

# Ground surface kept at the undisturbed temperature (mirror source with
# opposite sign); boreholes start at the surface unless told otherwise.
SURFACE_CONDITION = "isothermal"
BURIED_DEPTH = 0.0

DEFAULT_BOREHOLE_RADIUS = 0.06
DEFAULT_BOREHOLE_RESISTANCE = 0.10
DEFAULT_T_DIM = 50.0
MIN_SPACING = 5.0

# Composite Gauss-Legendre rule on a fixed grid in log(s).
_PANEL_EDGES = np.arange(-14.0, 14.0 + 1e-9, 0.25)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_UPPER_DECAY = 10.0  # integrand carries exp(-(r s)^2), cut at r s = 10
_CHUNK = 4096
_TABLE_THRESHOLD = 256
_TABLE_POINTS = 400


@dataclass(frozen=True)
class GroundColumn:
    conductivity: float
    diffusivity: float
    T0: float
    dTdz: float = 0.03
    q_nom_by_depth: dict = field(default_factory=dict, compare=False, hash=False)
    H_max: float = 200.0
    Rb: float = DEFAULT_BOREHOLE_RESISTANCE
    r_b: float = DEFAULT_BOREHOLE_RADIUS

    def __post_init__(self):
        for name in ("conductivity", "diffusivity", "r_b"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be finite and positive, got {value}")
        if not math.isfinite(self.Rb) or self.Rb < 0:
            raise ValueError(f"Rb must be non-negative, got {self.Rb}")
        if self.H_max < 0:
            raise ValueError("H_max must be non-negative")

    @property
    def key(self) -> tuple:
        """Hashable key of the properties the ground response depends on."""
        return (self.conductivity, self.diffusivity, self.r_b)

    def q_nom(self, H: float) -> float:
        try:
            return float(self.q_nom_by_depth[H])
        except KeyError:
            raise KeyError(f"no nominal extraction rate for depth {H} m") from None


@dataclass(frozen=True)
class ResistanceSet:
    R_LT: float
    R_field: float
    R_seas: float

    def __post_init__(self):
        if min(self.R_LT, self.R_field, self.R_seas) < 0:
            raise ValueError("resistances must be non-negative")

    @property
    def long_term(self) -> float:
        """R_LT + R_field - R_seas, the annual-mean part of the response."""
        return self.R_LT + self.R_field - self.R_seas


def _ierf(x):
    return x * special.erf(x) + np.expm1(-x * x) / math.sqrt(math.pi)


def _depth_factor(h, d):
    # mean-over-length kernel of a line source and its mirror image
    return 2.0 * _ierf(h) + 2.0 * _ierf(h + 2.0 * d) - _ierf(2.0 * h + 2.0 * d) - _ierf(2.0 * d)


def _fls_integral(r, H, t, alpha, D):
    """Integral part of the FLS response for 1-D arrays r, t (t > 0)."""
    xa = -0.5 * np.log(4.0 * alpha * t)
    xb = np.log(_UPPER_DECAY / r)
    lo_edge = _PANEL_EDGES[:-1]
    hi_edge = _PANEL_EDGES[1:]
    used = (hi_edge > xa.min()) & (lo_edge < xb.max())
    lo_edge, hi_edge = lo_edge[used], hi_edge[used]

    lo = np.maximum(lo_edge[:, None], xa[None, :])
    hi = np.minimum(hi_edge[:, None], xb[None, :])
    half = 0.5 * np.clip(hi - lo, 0.0, None)
    mid = 0.5 * (hi + lo)
    s = np.exp(mid[..., None] + half[..., None] * _GL_NODES)
    f = np.exp(-(r[None, :, None] * s) ** 2) * _depth_factor(H * s, D * s) / s
    return ((f @ _GL_WEIGHTS) * half).sum(axis=0)


def _check_finite(**values):
    for name, v in values.items():
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{name} must be finite")


def fls_step_response(r, H, t, ground: GroundColumn, *, D: float = BURIED_DEPTH):
    """Mean temperature change along a borehole of length H per unit line
    load (W/m) of a line source at radial distance r, after t seconds of
    constant extraction.

    ``r`` and ``t`` broadcast against each other. Returns a float for scalar
    input and an array otherwise.
    """
    r_arr = np.asarray(r, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    _check_finite(r=r_arr, t=t_arr, H=H, D=D)
    if np.any(r_arr <= 0):
        raise ValueError("r must be positive")
    if np.any(t_arr < 0):
        raise ValueError("t must be non-negative")
    if H <= 0:
        raise ValueError("H must be positive")

    r_b, t_b = np.broadcast_arrays(r_arr, t_arr)
    flat_r = r_b.ravel()
    flat_t = t_b.ravel()
    out = np.zeros(flat_r.shape)
    active = np.flatnonzero(flat_t > 0)
    for start in range(0, active.size, _CHUNK):
        idx = active[start:start + _CHUNK]
        out[idx] = _fls_integral(flat_r[idx], float(H), flat_t[idx], ground.diffusivity, float(D))
    out /= 4.0 * math.pi * ground.conductivity * H
    out = out.reshape(r_b.shape)
    if out.ndim == 0:
        return float(out)
    return out


def fls_time_series(r, H, times, ground: GroundColumn, *, D: float = BURIED_DEPTH) -> np.ndarray:
    """FLS responses for distances ``r`` at every time in ``times`` (s).

    Returns an array of shape (len(r), len(times)). The integrand does not
    depend on time, only the lower integration limit does, so the values are
    accumulated segment by segment between consecutive limits.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    _check_finite(r=r, times=times)
    if np.any(r <= 0) or np.any(times <= 0):
        raise ValueError("r and times must be positive")
    order = np.argsort(-times)  # longest time first = smallest lower limit
    x_lim = -0.5 * np.log(4.0 * ground.diffusivity * times[order])
    out = np.empty((r.size, times.size))
    for start in range(0, r.size, 256):
        rr = r[start:start + 256]
        xb = np.log(_UPPER_DECAY / rr)
        # tail beyond the latest (largest) limit, then segments down to the smallest
        tail = _segment_integral(rr, H, np.full(rr.size, x_lim[-1]), xb, D)
        seg = _segment_integral(rr[:, None], H, np.minimum(x_lim[:-1], xb[:, None]),
                                np.minimum(x_lim[1:], xb[:, None]), D)
        acc = np.concatenate([np.cumsum(seg[:, ::-1], axis=1)[:, ::-1], np.zeros((rr.size, 1))], axis=1)
        out[start:start + 256, order] = acc + tail[:, None]
    return out / (4.0 * math.pi * ground.conductivity * H)


def _segment_integral(r, H, x_lo, x_hi, D):
    # composite rule on [x_lo, x_hi] in log(s), split into panels of <= 0.25
    r, x_lo, x_hi = np.broadcast_arrays(r, x_lo, x_hi)
    width = np.clip(x_hi - x_lo, 0.0, None)
    n_panels = max(int(np.ceil(width.max() / 0.25)), 1)
    total = np.zeros(r.shape)
    step = width / n_panels
    for k in range(n_panels):
        lo = x_lo + k * step
        mid = lo + 0.5 * step
        s = np.exp(mid[..., None] + 0.5 * step[..., None] * _GL_NODES)
        f = np.exp(-(r[..., None] * s) ** 2) * _depth_factor(H * s, D * s) / s
        total += (f @ _GL_WEIGHTS) * 0.5 * step
    return total


def undisturbed_T_g(H: float, ground: GroundColumn) -> float:
    if H <= 0:
        raise ValueError("H must be positive")
    return ground.T0 + ground.dTdz * H / 2.0


def compute_R_LT(H: float, ground: GroundColumn, t_dim: float = DEFAULT_T_DIM) -> float:
    if t_dim < 0:
        raise ValueError("t_dim must be non-negative")
    return fls_step_response(ground.r_b, H, t_dim * SECONDS_PER_YEAR, ground)


def seasonal_load(n_months: int) -> np.ndarray:
    """Unit-amplitude sinusoidal monthly load with its peak in month 0."""
    return np.cos(2.0 * math.pi * np.arange(n_months) / 12.0)


def superpose_monthly(loads, kernel) -> np.ndarray:
    """Temperature response at the end of each month to piecewise-constant
    monthly loads, given the step response ``kernel[n]`` after n+1 months."""
    loads = np.asarray(loads, dtype=float)
    steps = np.diff(loads, prepend=0.0)
    return np.convolve(steps, kernel)[: loads.size]


def compute_R_seas(H: float, ground: GroundColumn, years: int = 3, amplitude: float = 1.0) -> float:
    """Peak borehole-wall response to a sinusoidal yearly load, per unit amplitude.

    Superposes monthly step responses over ``years`` years and takes the
    maximum over the final year. ``amplitude`` only scales the load; a zero
    amplitude gives a zero response.
    """
    n = 12 * years
    kernel = fls_step_response(ground.r_b, H, np.arange(1, n + 1) * SECONDS_PER_MONTH, ground)
    response = superpose_monthly(amplitude * seasonal_load(n), kernel)
    return float(max(response[-12:].max(), 0.0))


def grid_coordinates(n_rows: int, n_cols: int, B: float) -> np.ndarray:
    rows, cols = np.meshgrid(np.arange(n_rows), np.arange(n_cols), indexing="ij")
    return np.column_stack([cols.ravel() * B, rows.ravel() * B]).astype(float)


def _lattice_indices(xy: np.ndarray, B: float):
    ij = (xy - xy.min(axis=0)) / B
    rounded = np.rint(ij)
    if np.allclose(ij, rounded, atol=1e-6):
        return rounded.astype(int)
    return None


def pair_distances(xy, B: float | None = None):
    """Distinct inter-borehole distances and the number of unordered pairs at each.

    Coordinates on a lattice of pitch B are counted through the lattice
    autocorrelation, everything else by explicit pairwise distances.
    """
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    if len(xy) < 2:
        return np.empty(0), np.empty(0, dtype=np.int64)
    ij = _lattice_indices(xy, B) if B else None
    if ij is not None:
        occ = np.zeros(ij.max(axis=0) + 1)
        occ[ij[:, 0], ij[:, 1]] = 1.0
        corr = np.rint(fftconvolve(occ, occ[::-1, ::-1])).astype(np.int64)
        ci, cj = occ.shape[0] - 1, occ.shape[1] - 1
        di, dj = np.nonzero(corr)
        counts = corr[di, dj]
        di, dj = di - ci, dj - cj
        # keep one of each (+d, -d) offset pair, drop the zero offset
        keep = (di > 0) | ((di == 0) & (dj > 0))
        dist = B * np.hypot(di[keep], dj[keep])
        counts = counts[keep]
    else:
        from scipy.spatial.distance import pdist

        dist = pdist(xy)
        counts = np.ones(dist.size, dtype=np.int64)
    dist = np.round(dist, 9)
    uniq, inverse = np.unique(dist, return_inverse=True)
    summed = np.bincount(inverse, weights=counts).astype(np.int64)
    return uniq, summed


def _response_at(dist, H, t, ground):
    if dist.size <= _TABLE_THRESHOLD:
        return fls_step_response(dist, H, t, ground)
    # dense spline in log r; exact values at the table nodes
    nodes = np.geomspace(dist.min(), dist.max(), _TABLE_POINTS)
    table = fls_step_response(nodes, H, t, ground)
    spline = CubicSpline(np.log(nodes), table)
    return spline(np.log(dist))


def field_resistance(xy, H: float, ground: GroundColumn, t_dim: float = DEFAULT_T_DIM,
                     B: float | None = None) -> float:
    """Mean over boreholes of the summed response of all other boreholes."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    n = len(xy)
    if n < 2:
        return 0.0
    dist, counts = pair_distances(xy, B)
    if dist.min() <= 0:
        raise ValueError("coincident boreholes")
    h = _response_at(dist, H, t_dim * SECONDS_PER_YEAR, ground)
    return float(2.0 * np.dot(counts, h) / n)


def compute_R_field(B: float, H: float, n_rows: int, n_cols: int, ground: GroundColumn,
                    t_dim: float = DEFAULT_T_DIM) -> float:
    if B < MIN_SPACING:
        raise ValueError(f"spacing {B} m below the minimum of {MIN_SPACING} m")
    if n_rows < 1 or n_cols < 1:
        raise ValueError("grid needs at least one row and one column")
    return field_resistance(grid_coordinates(n_rows, n_cols, B), H, ground, t_dim, B=B)


@lru_cache(maxsize=None)
def _borehole_resistances(key, H, t_dim):
    conductivity, diffusivity, r_b = key
    ground = GroundColumn(conductivity, diffusivity, 0.0, r_b=r_b)
    return compute_R_LT(H, ground, t_dim), compute_R_seas(H, ground)


def resistance_set(xy, B: float, H: float, ground: GroundColumn,
                   t_dim: float = DEFAULT_T_DIM) -> ResistanceSet:
    R_LT, R_seas = _borehole_resistances(ground.key, float(H), float(t_dim))
    return ResistanceSet(R_LT, field_resistance(xy, H, ground, t_dim, B=B), R_seas)
