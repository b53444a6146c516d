"""Virtual borehole placement, pixel matching and cooling-injection ranking."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np
import shapely
from shapely.geometry import MultiPolygon, Polygon, box
from shapely.geometry.base import BaseGeometry

PIXEL_SIZE = 400.0
BUFFER = 3.0
AREA_TOLERANCE = 0.005


class Restriction(str, Enum):
    PERMITTED = "permitted"
    LIMITED = "limited"
    PROHIBITED = "prohibited"

    @property
    def H_max(self) -> float:
        return {"permitted": 200.0, "limited": 150.0, "prohibited": 0.0}[self.value]


@dataclass
class Parcel:
    parcel_id: str
    available_area: BaseGeometry
    restriction: Restriction = Restriction.PERMITTED
    pixel_id: tuple | None = None
    dhc_id: str | None = None
    area: float | None = None

    def __post_init__(self):
        self.restriction = Restriction(self.restriction)
        geom_area = self.available_area.area
        if self.area is None:
            self.area = geom_area
        elif geom_area > 0 and abs(self.area - geom_area) > AREA_TOLERANCE * geom_area:
            raise ValueError(f"parcel {self.parcel_id}: area {self.area} differs from polygon area {geom_area}")


@dataclass
class PixelAccount:
    pixel_id: object
    heat_demand: float = 0.0
    cool_demand: float = 0.0
    Q_inj: float = 0.0
    Q_extr: float = 0.0
    Q_heat: float = 0.0
    Q_cool: float = 0.0
    useful_heat: float = 0.0
    surplus_heat: float = 0.0
    deficit_heat: float = 0.0
    useful_cool: float = 0.0
    unmet_cool: float = 0.0
    allocated_in: float = 0.0
    allocated_out: float = 0.0
    geometry: BaseGeometry | None = field(default=None, repr=False)


def polygon_parts(geom: BaseGeometry) -> list[Polygon]:
    if geom.is_empty:
        return []
    if isinstance(geom, Polygon):
        return [geom]
    if isinstance(geom, MultiPolygon):
        return list(geom.geoms)
    return [g for g in getattr(geom, "geoms", []) if isinstance(g, Polygon)]


def _place_on_part(part: Polygon, B: float, buffer: float) -> np.ndarray:
    minx, miny, maxx, maxy = part.bounds
    xs = minx + B * np.arange(int(math.floor((maxx - minx) / B + 1e-9)) + 1)
    ys = miny + B * np.arange(int(math.floor((maxy - miny) / B + 1e-9)) + 1)
    gx, gy = np.meshgrid(xs, ys)
    gx, gy = gx.ravel(), gy.ravel()
    inside = shapely.contains_xy(part, gx, gy)
    gx, gy = gx[inside], gy[inside]
    if gx.size == 0:
        return np.empty((0, 2))
    dist = shapely.distance(part.boundary, shapely.points(gx, gy))
    keep = dist >= buffer - 1e-9
    return np.column_stack([gx[keep], gy[keep]])


def place_boreholes(parcel: Parcel | BaseGeometry, B: float, buffer: float = BUFFER) -> list[np.ndarray]:
    """Rectangular lattice of pitch B on each connected part of the available area.

    Each lattice is anchored at the lower-left corner of its part's bounding
    box; points must lie inside the polygon at least ``buffer`` from its
    boundary. Returns one (n, 2) coordinate array per polygon part.
    """
    if B < 5.0:
        raise ValueError("borehole spacing below 5 m")
    geom = parcel.available_area if isinstance(parcel, Parcel) else parcel
    if isinstance(parcel, Parcel) and parcel.restriction is Restriction.PROHIBITED:
        return []
    return [_place_on_part(part, B, buffer) for part in polygon_parts(geom)]


def representative_point(geom: BaseGeometry):
    """Centroid if it lies in the geometry, else shapely's interior point."""
    if geom.geom_type == "Point":
        return geom.x, geom.y
    c = geom.centroid
    if geom.contains(c):
        return c.x, c.y
    p = geom.representative_point()
    return p.x, p.y


def pixel_of(x: float, y: float, origin=(0.0, 0.0), pitch: float = PIXEL_SIZE) -> tuple[int, int]:
    """Index of the cell (x0, x0 + pitch] x (y0, y0 + pitch] holding the point.

    A point on a shared edge belongs to the lower-index cell.
    """
    i = math.ceil((x - origin[0]) / pitch) - 1
    j = math.ceil((y - origin[1]) / pitch) - 1
    return int(i), int(j)


def assign_pixels(geometries: dict, grid_origin=(0.0, 0.0), pitch: float = PIXEL_SIZE,
                  extent: tuple | None = None):
    """Map geometry ids to pixel ids by representative point.

    Returns (assignment, flagged) where flagged lists ids whose point falls
    outside ``extent`` = (minx, miny, maxx, maxy).
    """
    assignment, flagged = {}, []
    for gid in sorted(geometries, key=str):
        x, y = representative_point(geometries[gid])
        if extent is not None:
            minx, miny, maxx, maxy = extent
            if not (minx < x <= maxx and miny < y <= maxy):
                flagged.append(gid)
                continue
        assignment[gid] = pixel_of(x, y, grid_origin, pitch)
    return assignment, flagged


def pixel_polygon(pixel_id, origin=(0.0, 0.0), pitch: float = PIXEL_SIZE) -> Polygon:
    i, j = pixel_id
    x0 = origin[0] + i * pitch
    y0 = origin[1] + j * pitch
    return box(x0, y0, x0 + pitch, y0 + pitch)


def rank_and_inject(parcels_in_scope, cool_demand: float, injection_capacity: dict):
    """Greedy fill of the injection demand, largest parcel first.

    ``parcels_in_scope`` holds (parcel_id, area) pairs or Parcel objects.
    Returns ({parcel_id: Q_inj}, unmet).
    """
    if cool_demand < 0 or not math.isfinite(cool_demand):
        raise ValueError("cooling demand must be finite and non-negative")
    items = []
    for p in parcels_in_scope:
        if isinstance(p, Parcel):
            items.append((p.parcel_id, p.area))
        else:
            items.append((p[0], p[1]))
    items.sort(key=lambda it: (-it[1], str(it[0])))
    remaining = cool_demand
    out = {}
    for pid, _ in items:
        cap = max(injection_capacity.get(pid, 0.0), 0.0)
        take = min(remaining, cap)
        out[pid] = take
        remaining -= take
    return out, max(remaining, 0.0)


def pixel_balance(account: PixelAccount) -> PixelAccount:
    """Fill the useful/surplus/deficit entries of an aggregated account."""
    a = account
    a.useful_heat = min(a.Q_heat, a.heat_demand)
    a.surplus_heat = max(a.Q_heat - a.heat_demand, 0.0)
    a.deficit_heat = max(a.heat_demand - a.Q_heat, 0.0)
    a.useful_cool = min(a.Q_cool, a.cool_demand)
    a.unmet_cool = max(a.cool_demand - a.Q_cool, 0.0)
    return a
