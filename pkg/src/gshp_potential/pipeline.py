"""Scenario orchestration: placement, injection ranking, sizing, balances,
allocation to district heating areas and Monte Carlo aggregation."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
from pathlib import Path
import re

import numpy as np
from shapely.geometry import box

from . import formats
from .allocation import ThresholdRule, Vertex, allocate, apply_allocation
from .climate import DegreeDayProfile, profile_from_monthly
from .geospatial import (PIXEL_SIZE, Parcel, PixelAccount, Restriction, assign_pixels, pixel_balance,
                         pixel_polygon, rank_and_inject)
from .sizing import (HpParams, candidate_designs, injection_capacity, injection_from_cooling,
                     optimize_field, t_nom_for_altitude, to_useful_energy)
from .synthetic import nominal_rates
from .thermal import GroundColumn

LEVELS = ("NC", "PC", "FC")
CLIMATES = {"RCP26": "2.6", "RCP45": "4.5", "RCP85": "8.5"}
REFERENCE_CLIMATE = "REF"
WH_PER_TWH = 1e12

PARCEL_COLUMNS = ["parcel_id", "pixel_i", "pixel_j", "scope", "restriction", "area", "B", "H", "N_B", "mode",
                  "q_max", "t_op_h", "t_op_c", "Q_inj", "Q_extr", "Q_heat", "Q_cool", "T_mf_low", "T_mf_high"]
SCOPE_COLUMNS = ["scope", "heat_demand", "cool_demand", "Q_inj", "Q_extr", "Q_heat", "Q_cool", "useful_heat",
                 "surplus_heat", "deficit_heat", "useful_cool", "unmet_cool", "allocated_in", "allocated_out"]
PIXEL_COLUMNS = ["pixel_i", "pixel_j", "x0", "y0", "x1", "y1", "heat_demand", "cool_demand", "Q_inj", "Q_extr",
                 "Q_heat", "Q_cool", "useful_heat", "useful_cool", "density_kWh_m2", "coverage_heat",
                 "coverage_cool"]
FLOW_COLUMNS = ["source_id", "demand_id", "flow_Wh"]
METRICS = ["Q_inj", "Q_extr", "Q_heat", "Q_cool", "heat_demand", "cool_demand", "useful_heat", "useful_cool",
           "allocated", "unmet_injection", "coverage_heat", "coverage_cool"]
ENERGY_METRICS = METRICS[:10]


# -- scenarios -------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    cooling_level: str
    climate: str | None = None
    dhc: bool = False
    demand_runs: tuple = ()
    heat_demand_file: str | None = None

    def __post_init__(self):
        if self.cooling_level not in LEVELS:
            raise ValueError(f"unknown cooling level {self.cooling_level!r}")
        if self.cooling_level == "NC":
            if self.climate is not None or self.demand_runs:
                raise ValueError("the no-cooling scenario takes no climate and no cooling files")
        elif self.climate not in CLIMATES:
            raise ValueError(f"unknown climate {self.climate!r}")
        object.__setattr__(self, "demand_runs", tuple(self.demand_runs))

    @property
    def label(self) -> str:
        parts = [self.cooling_level, "D" if self.dhc else "ND"]
        if self.climate:
            parts.append(CLIMATES[self.climate])
        return "-".join(parts)

    @property
    def climate_key(self) -> str:
        return self.climate or REFERENCE_CLIMATE

    @classmethod
    def parse(cls, label: str, **kwargs) -> "ScenarioSpec":
        m = re.fullmatch(r"(NC|PC|FC)-(ND|D)(?:-(2\.6|4\.5|8\.5))?", label.strip())
        if not m:
            raise ValueError(f"cannot parse scenario label {label!r}")
        climate = {v: k for k, v in CLIMATES.items()}.get(m.group(3)) if m.group(3) else None
        return cls(m.group(1), climate, m.group(2) == "D", **kwargs)


# -- region ----------------------------------------------------------------------

@dataclass
class Building:
    building_id: str
    geometry: object
    heat_demand: float
    pixel_id: tuple | None = None
    dhc_id: str | None = None


@dataclass
class Region:
    parcels: list
    buildings: dict
    dhc_zones: dict
    profiles: dict
    ground: GroundColumn
    hp: HpParams = field(default_factory=HpParams)
    t_nom: float = 1850.0
    origin: tuple = (0.0, 0.0)
    pitch: float = PIXEL_SIZE
    rule: ThresholdRule = field(default_factory=ThresholdRule)
    ci_method: str = "normal"
    cooling_files: dict = field(default_factory=dict)  # "PC-4.5" -> [paths]
    ground_by_pixel: dict = field(default_factory=dict)
    flagged: list = field(default_factory=list)
    _cooling_cache: dict = field(default_factory=dict, repr=False)

    def ground_at(self, pixel_id) -> GroundColumn:
        return self.ground_by_pixel.get(pixel_id, self.ground)

    def profile(self, climate_key: str) -> DegreeDayProfile:
        try:
            return self.profiles[climate_key]
        except KeyError:
            raise formats.SchemaError("degree days", None, f"no profile for climate {climate_key}") from None

    def cooling_table(self, path) -> dict:
        path = str(path)
        if path not in self._cooling_cache:
            rows = formats.read_csv(path, {"building_id": "str", "cool_demand": "float"})
            table = {}
            for k, row in enumerate(rows):
                if row["building_id"] not in self.buildings:
                    raise formats.SchemaError(path, f"line {k + 2}", f"unknown building {row['building_id']!r}")
                if row["cool_demand"] < 0:
                    raise formats.SchemaError(path, f"line {k + 2}", "cool_demand must be >= 0")
                table[row["building_id"]] = table.get(row["building_id"], 0.0) + row["cool_demand"]
            self._cooling_cache[path] = table
        return self._cooling_cache[path]

    def scenarios(self) -> list[ScenarioSpec]:
        dhc_options = (False, True) if self.dhc_zones else (False,)
        out = [ScenarioSpec("NC", None, d) for d in dhc_options]
        for key in sorted(self.cooling_files):
            level, climate = key.split("-")
            climate = {v: k for k, v in CLIMATES.items()}[climate]
            for d in dhc_options:
                out.append(ScenarioSpec(level, climate, d, tuple(self.cooling_files[key])))
        return out


def _zone_of(geom, zones: dict):
    """First DHC zone (by id) containing the geometry's representative point."""
    from .geospatial import representative_point
    from shapely.geometry import Point

    p = Point(*representative_point(geom))
    for zid in sorted(zones, key=str):
        if zones[zid].covers(p):
            return zid
    return None


def _ground_from(section, t_nom, hp, profile, fallback=None):
    def get(name, default):
        if section is not None and name in section:
            return float(section[name])
        return default

    base = fallback or GroundColumn(2.0, 1.0e-6, 11.0)
    bare = GroundColumn(get("conductivity", base.conductivity), get("diffusivity", base.diffusivity),
                        get("T0", base.T0), get("dTdz", base.dTdz), Rb=get("Rb", base.Rb),
                        r_b=get("r_b", base.r_b))
    q_nom = nominal_rates(bare, hp, profile, t_nom, t_dim=hp.t_dim)
    return GroundColumn(bare.conductivity, bare.diffusivity, bare.T0, bare.dTdz, q_nom_by_depth=q_nom,
                        Rb=bare.Rb, r_b=bare.r_b)


def load_region(manifest_path) -> Region:
    """Read every file referenced by a run manifest."""
    manifest_path = Path(manifest_path)
    cfg = formats.read_manifest(manifest_path)
    base = manifest_path.parent
    reg = cfg["region"]

    def path_of(section, key, required=True):
        if not cfg.has_option(section, key):
            if required:
                raise formats.SchemaError(manifest_path, None, f"missing [{section}] {key}")
            return None
        return base / cfg.get(section, key)

    try:
        origin = (float(reg.get("origin_x", "0")), float(reg.get("origin_y", "0")))
        pitch = float(reg.get("pitch", str(PIXEL_SIZE)))
        extent = tuple(float(v) for v in reg["extent"].split(",")) if "extent" in reg else None
        hp_sec = cfg["heat_pump"] if cfg.has_section("heat_pump") else {}
        hp = HpParams(**{k: float(hp_sec[k]) for k in ("COP_heat", "COP_cool", "T_mf_min", "T_mf_max", "t_dim")
                         if k in hp_sec})
        model = cfg["model"] if cfg.has_section("model") else {}
        if "t_nom" in model:
            t_nom = float(model["t_nom"])
        else:
            t_nom = t_nom_for_altitude(float(model.get("altitude", "0")))
        rule = ThresholdRule(float(model.get("threshold_fraction", "0.2")), model.get("mbb_length", "longer"))
        ci_method = model.get("ci", "normal")
        if ci_method not in ("normal", "percentile"):
            raise ValueError(f"unknown ci method {ci_method!r}")
    except (ValueError, KeyError) as exc:
        raise formats.SchemaError(manifest_path, None, str(exc)) from None

    # degree days per climate
    profiles = {}
    dd_rows = formats.read_csv(path_of("region", "degree_days"),
                               {"climate": "str", "month": "int", "hdd": "float", "cdd": "float"})
    by_climate = {}
    for row in dd_rows:
        by_climate.setdefault(row["climate"], {})[row["month"]] = (row["hdd"], row["cdd"])
    for climate, months in by_climate.items():
        if sorted(months) != list(range(1, 13)):
            raise formats.SchemaError(path_of("region", "degree_days"), None,
                                      f"climate {climate} needs months 1..12")
        profiles[climate] = profile_from_monthly([months[m][0] for m in range(1, 13)],
                                                 [months[m][1] for m in range(1, 13)])
    if REFERENCE_CLIMATE not in profiles:
        raise formats.SchemaError(path_of("region", "degree_days"), None, "missing REF climate rows")
    ref_profile = profiles[REFERENCE_CLIMATE]

    ground = _ground_from(cfg["ground"] if cfg.has_section("ground") else None, t_nom, hp, ref_profile)
    ground_by_pixel = {}
    ground_file = path_of("ground", "file", required=False) if cfg.has_section("ground") else None
    if ground_file is not None:
        cols = {"pixel_i": "int", "pixel_j": "int", "conductivity": "float", "diffusivity": "float",
                "T0": "float", "dTdz": "float"}
        for row in formats.read_csv(ground_file, cols):
            ground_by_pixel[(row["pixel_i"], row["pixel_j"])] = _ground_from(row, t_nom, hp, ref_profile, ground)

    # DHC zones
    dhc_zones = {}
    dhc_path = path_of("region", "dhc", required=False)
    if dhc_path is not None:
        for geom, props in formats.read_features(dhc_path, {"dhc_id": "str"}):
            dhc_zones[props["dhc_id"]] = geom

    # parcels
    parcel_path = path_of("region", "parcels")
    raw = {}
    for k, (geom, props) in enumerate(formats.read_features(parcel_path, {"parcel_id": "str",
                                                                          "restriction": "str"})):
        if props["restriction"] not in formats.RESTRICTIONS:
            raise formats.SchemaError(parcel_path, f"feature {k}", f"bad restriction {props['restriction']!r}")
        if props["parcel_id"] in raw:
            raise formats.SchemaError(parcel_path, f"feature {k}", f"duplicate parcel {props['parcel_id']!r}")
        try:
            area = float(props["area"]) if "area" in props else None
            raw[props["parcel_id"]] = Parcel(props["parcel_id"], geom, Restriction(props["restriction"]),
                                             area=area)
        except ValueError as exc:
            raise formats.SchemaError(parcel_path, f"feature {k}", str(exc)) from None
    assignment, flagged = assign_pixels({pid: p.available_area for pid, p in raw.items()}, origin, pitch,
                                        extent)
    parcels = []
    for pid in sorted(assignment):
        p = raw[pid]
        p.pixel_id = assignment[pid]
        p.dhc_id = _zone_of(p.available_area, dhc_zones)
        parcels.append(p)

    # buildings
    bpath = path_of("region", "buildings")
    buildings = {}
    geoms = {}
    for k, (geom, props) in enumerate(formats.read_features(bpath, {"building_id": "str",
                                                                    "heat_demand": "float"})):
        bid = props["building_id"]
        if bid in buildings:
            raise formats.SchemaError(bpath, f"feature {k}", f"duplicate building {bid!r}")
        buildings[bid] = Building(bid, geom, props["heat_demand"])
        geoms[bid] = geom
    b_assign, b_flagged = assign_pixels(geoms, origin, pitch, extent)
    for bid in list(buildings):
        if bid not in b_assign:
            del buildings[bid]
            continue
        buildings[bid].pixel_id = b_assign[bid]
        buildings[bid].dhc_id = _zone_of(buildings[bid].geometry, dhc_zones)

    cooling_files = {}
    if cfg.has_section("cooling"):
        for key, value in cfg["cooling"].items():
            try:
                ScenarioSpec.parse(key.split("-")[0] + "-ND-" + key.split("-")[1])
            except (ValueError, IndexError):
                raise formats.SchemaError(manifest_path, None, f"bad cooling key {key!r}") from None
            if key.startswith("NC"):
                raise formats.SchemaError(manifest_path, None, "no-cooling scenarios take no cooling files")
            cooling_files[key] = [str(base / v.strip()) for v in value.split(",") if v.strip()]

    return Region(parcels, buildings, dhc_zones, profiles, ground, hp, t_nom, origin, pitch, rule, ci_method,
                  cooling_files, ground_by_pixel, sorted(flagged + b_flagged, key=str))


# -- per-parcel model with caches ------------------------------------------------

class SiteModel:
    """Designs, injection capacities and optima per parcel, computed once."""

    def __init__(self, region: Region, threads: int = 1):
        self.region = region
        self.threads = max(int(threads), 1)
        self._designs = {}
        self._capacity = {}
        self._optimum = {}

    def map(self, fn, items):
        items = list(items)
        if self.threads == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.threads) as ex:
            return list(ex.map(fn, items))

    def designs(self, parcel: Parcel):
        if parcel.parcel_id not in self._designs:
            if parcel.restriction is Restriction.PROHIBITED:
                self._designs[parcel.parcel_id] = []
            else:
                ground = self.region.ground_at(parcel.pixel_id)
                self._designs[parcel.parcel_id] = candidate_designs(
                    parcel.available_area, ground, parcel.restriction.H_max, self.region.hp.t_dim,
                    parcel_id=parcel.parcel_id)
        return self._designs[parcel.parcel_id]

    def capacity(self, parcel: Parcel, climate_key: str) -> float:
        key = (parcel.parcel_id, climate_key)
        if key not in self._capacity:
            r = self.region
            profile = r.profile(climate_key)
            ground = r.ground_at(parcel.pixel_id)
            caps = [injection_capacity(d, ground, r.hp, profile, r.t_nom) for d in self.designs(parcel)]
            self._capacity[key] = max(caps, default=0.0)
        return self._capacity[key]

    def optimum(self, parcel: Parcel, climate_key: str, Q_inj: float):
        key = (parcel.parcel_id, climate_key, float(Q_inj))
        if key not in self._optimum:
            designs = self.designs(parcel)
            if not designs:
                self._optimum[key] = (None, 0.0)
            else:
                r = self.region
                self._optimum[key] = optimize_field(designs, r.ground_at(parcel.pixel_id), r.hp,
                                                    r.profile(climate_key), Q_inj, r.t_nom)
        return self._optimum[key]

    def prepare(self, climate_key: str):
        self.map(lambda p: self.capacity(p, climate_key), self.region.parcels)


# -- one run ---------------------------------------------------------------------

def scope_of(pixel_id, dhc_id, dhc: bool) -> str:
    if dhc and dhc_id is not None:
        return f"dhc:{dhc_id}"
    return f"px:{pixel_id[0]}_{pixel_id[1]}"


@dataclass
class RunResult:
    label: str
    parcels: list
    scopes: dict  # scope key -> PixelAccount
    pixels: list
    flows: list
    totals: dict
    edges: list = field(default_factory=list)  # (source, demand) pairs within reach


def _assign_injection(spec, region, model, scope_parcels, inj_demand):
    """Rank parcels per scope, size them and drop parcels that cannot take
    their share, until every assigned injection is feasible."""
    climate = spec.climate_key
    caps = {p.parcel_id: model.capacity(p, climate) for ps in scope_parcels.values() for p in ps}
    while True:
        assigned = {}
        unmet = {}
        for scope in sorted(scope_parcels):
            out, rest = rank_and_inject(scope_parcels[scope], inj_demand.get(scope, 0.0), caps)
            assigned.update(out)
            unmet[scope] = rest
        parcels = [p for ps in scope_parcels.values() for p in ps]
        optima = model.map(lambda p: model.optimum(p, climate, assigned[p.parcel_id]), parcels)
        results = {p.parcel_id: r for p, r in zip(parcels, optima)}
        bad = [pid for pid, (best, _) in results.items() if best is None and assigned[pid] > 0]
        if not bad:
            return assigned, unmet, results
        for pid in bad:
            caps[pid] = 0.0


def run_once(spec: ScenarioSpec, region: Region, model: SiteModel, cooling: dict | None) -> RunResult:
    hp = region.hp
    cooling = cooling or {}
    scope_parcels = {}
    parcel_scope = {}
    for p in region.parcels:
        s = scope_of(p.pixel_id, p.dhc_id, spec.dhc)
        parcel_scope[p.parcel_id] = s
        scope_parcels.setdefault(s, []).append(p)
    heat = {}
    cool = {}
    # demand per (scope, pixel) part, used to map scope results back to pixels
    parts = {}
    for b in region.buildings.values():
        s = scope_of(b.pixel_id, b.dhc_id, spec.dhc)
        c = cooling.get(b.building_id, 0.0)
        heat[s] = heat.get(s, 0.0) + b.heat_demand
        cool[s] = cool.get(s, 0.0) + c
        h0, c0 = parts.get((s, b.pixel_id), (0.0, 0.0))
        parts[(s, b.pixel_id)] = (h0 + b.heat_demand, c0 + c)
    inj_demand = {s: injection_from_cooling(v, hp) for s, v in cool.items()}

    assigned, unmet, results = _assign_injection(spec, region, model, scope_parcels, inj_demand)

    scopes = {}
    for s in sorted(set(scope_parcels) | set(heat)):
        scopes[s] = PixelAccount(s, heat_demand=heat.get(s, 0.0), cool_demand=cool.get(s, 0.0))
    parcel_rows = []
    for p in region.parcels:
        best, Q_extr = results[p.parcel_id]
        Q_inj = assigned[p.parcel_id] if best is not None else 0.0
        Q_heat, Q_cool = to_useful_energy(Q_extr, Q_inj, hp)
        acc = scopes[parcel_scope[p.parcel_id]]
        acc.Q_inj += Q_inj
        acc.Q_extr += Q_extr
        acc.Q_heat += Q_heat
        acc.Q_cool += Q_cool
        row = {"parcel_id": p.parcel_id, "pixel_i": p.pixel_id[0], "pixel_j": p.pixel_id[1],
               "scope": parcel_scope[p.parcel_id], "restriction": p.restriction.value, "area": p.area,
               "Q_inj": Q_inj, "Q_extr": Q_extr, "Q_heat": Q_heat, "Q_cool": Q_cool}
        if best is None:
            row.update(B="", H="", N_B=0, mode="", q_max=0.0, t_op_h=0.0, t_op_c=0.0, T_mf_low="",
                       T_mf_high="")
        else:
            lo, hi = best.T_mf_extremes
            row.update(B=best.design.B, H=best.design.H, N_B=best.design.N_B, mode=best.mode.value,
                       q_max=best.q_max, t_op_h=best.t_op_h, t_op_c=best.t_op_c, T_mf_low=lo, T_mf_high=hi)
        parcel_rows.append(row)
    for acc in scopes.values():
        pixel_balance(acc)

    flows = []
    edges = []
    allocated = 0
    if spec.dhc and region.dhc_zones:
        sources, demands = [], []
        for s, acc in scopes.items():
            if s.startswith("px:") and acc.surplus_heat > 0:
                i, j = (int(v) for v in s[3:].split("_"))
                sources.append(Vertex(s, acc.surplus_heat, pixel_polygon((i, j), region.origin, region.pitch)))
            elif s.startswith("dhc:") and acc.deficit_heat > 0:
                demands.append(Vertex(s, acc.deficit_heat, region.dhc_zones[s[4:]]))
        graph, _ = allocate(sources, demands, region.rule)
        apply_allocation(scopes, graph)
        flows = [{"source_id": a, "demand_id": b, "flow_Wh": f} for (a, b), f in sorted(graph.flows.items())]
        allocated = graph.total_flow
        edges = list(graph.edges)

    pixels = _pixel_rows(region, parcel_rows, scopes, parts)
    totals = {k: 0.0 for k in METRICS}
    for acc in scopes.values():
        for k in ("Q_inj", "Q_extr", "Q_heat", "Q_cool", "heat_demand", "cool_demand", "useful_heat",
                  "useful_cool"):
            totals[k] += getattr(acc, k)
    totals["allocated"] = float(allocated)
    totals["unmet_injection"] = float(sum(unmet.values()))
    totals["coverage_heat"] = totals["useful_heat"] / totals["heat_demand"] if totals["heat_demand"] > 0 else 0.0
    totals["coverage_cool"] = totals["useful_cool"] / totals["cool_demand"] if totals["cool_demand"] > 0 else 0.0
    return RunResult(spec.label, parcel_rows, scopes, pixels, flows, totals, edges)


def _pixel_rows(region, parcel_rows, scopes, parts):
    pix = {}

    def row(pid):
        if pid not in pix:
            x0, y0, x1, y1 = pixel_polygon(pid, region.origin, region.pitch).bounds
            pix[pid] = {"pixel_i": pid[0], "pixel_j": pid[1], "x0": x0, "y0": y0, "x1": x1, "y1": y1,
                        **{k: 0.0 for k in PIXEL_COLUMNS[6:]}}
        return pix[pid]

    for r in parcel_rows:
        acc = row((r["pixel_i"], r["pixel_j"]))
        for k in ("Q_inj", "Q_extr", "Q_heat", "Q_cool"):
            acc[k] += r[k]
    for (s, pid), (h, c) in sorted(parts.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        acc = row(pid)
        sc = scopes[s]
        acc["heat_demand"] += h
        acc["cool_demand"] += c
        # a scope's useful energy is shared among its pixels in proportion to demand
        if sc.heat_demand > 0:
            acc["useful_heat"] += sc.useful_heat * h / sc.heat_demand
        if sc.cool_demand > 0:
            acc["useful_cool"] += sc.useful_cool * c / sc.cool_demand
    area = region.pitch * region.pitch
    out = []
    for pid in sorted(pix):
        r = pix[pid]
        r["density_kWh_m2"] = r["Q_extr"] / 1000.0 / area
        r["coverage_heat"] = min(r["useful_heat"] / r["heat_demand"], 1.0) if r["heat_demand"] > 0 else 0.0
        r["coverage_cool"] = min(r["useful_cool"] / r["cool_demand"], 1.0) if r["cool_demand"] > 0 else 0.0
        out.append(r)
    return out


# -- Monte Carlo -----------------------------------------------------------------

@dataclass
class RunSummary:
    label: str
    n_runs: int
    mean: dict
    half_width: dict
    ci_low: dict
    ci_high: dict


def aggregate_mc(values, method: str = "normal", z: float = 1.96):
    """Mean and 95 % interval of each metric over Monte Carlo runs.

    ``values`` is a list of metric dicts. With one run only the mean is
    reported (interval entries are None).
    """
    if not values:
        raise ValueError("no runs to aggregate")
    n = len(values)
    mean, half, lo, hi = {}, {}, {}, {}
    for k in values[0]:
        x = np.array([v[k] for v in values], dtype=float)
        m = float(np.mean(x))
        mean[k] = m
        if n < 2:
            half[k] = lo[k] = hi[k] = None
        elif method == "percentile":
            lo[k], hi[k] = (float(v) for v in np.percentile(x, [2.5, 97.5]))
            half[k] = 0.5 * (hi[k] - lo[k])
        else:
            h = z * float(np.std(x, ddof=1)) / math.sqrt(n)
            half[k], lo[k], hi[k] = h, m - h, m + h
    return mean, half, lo, hi


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    runs: list
    summary: RunSummary


def run_scenario(spec: ScenarioSpec, region: Region, model: SiteModel | None = None,
                 threads: int = 1) -> ScenarioResult:
    model = model or SiteModel(region, threads)
    model.prepare(spec.climate_key)
    if spec.cooling_level == "NC":
        runs = [run_once(spec, region, model, None)]
    else:
        if not spec.demand_runs:
            raise formats.SchemaError("manifest", None, f"scenario {spec.label} has no cooling files")
        runs = [run_once(spec, region, model, region.cooling_table(path)) for path in spec.demand_runs]
    mean, half, lo, hi = aggregate_mc([r.totals for r in runs], region.ci_method)
    return ScenarioResult(spec, runs, RunSummary(spec.label, len(runs), mean, half, lo, hi))


# -- output ----------------------------------------------------------------------

def write_scenario(result: ScenarioResult, out_dir):
    root = Path(out_dir) / result.spec.label
    root.mkdir(parents=True, exist_ok=True)
    for k, run in enumerate(result.runs):
        d = root / f"run_{k:03d}"
        d.mkdir(exist_ok=True)
        formats.write_csv(d / "parcels.csv", PARCEL_COLUMNS, run.parcels)
        scope_rows = [{"scope": s, **{c: getattr(a, c) for c in SCOPE_COLUMNS[1:]}}
                      for s, a in sorted(run.scopes.items())]
        formats.write_csv(d / "scopes.csv", SCOPE_COLUMNS, scope_rows)
        formats.write_csv(d / "pixels.csv", PIXEL_COLUMNS, run.pixels)
        formats.write_csv(d / "flows.csv", FLOW_COLUMNS, run.flows)
    s = result.summary
    rows = [{"metric": k, "mean": s.mean[k], "half_width": _blank(s.half_width[k]),
             "ci_low": _blank(s.ci_low[k]), "ci_high": _blank(s.ci_high[k]), "n_runs": s.n_runs}
            for k in METRICS]
    formats.write_csv(root / "summary.csv", ["metric", "mean", "half_width", "ci_low", "ci_high", "n_runs"], rows)
    return root


def _blank(v):
    return "" if v is None else v


def read_summary(path) -> dict:
    rows = formats.read_csv(path, {"metric": "str", "mean": "float", "half_width": "str", "n_runs": "int"})
    return {r["metric"]: (r["mean"], float(r["half_width"]) if r["half_width"] else None, r["n_runs"])
            for r in rows}


def _mean_pixels(scenario_dir: Path) -> dict:
    runs = sorted(p for p in scenario_dir.glob("run_*") if p.is_dir())
    cols = {c: ("int" if c in ("pixel_i", "pixel_j") else "float") for c in PIXEL_COLUMNS}
    acc = {}
    for d in runs:
        for r in formats.read_csv(d / "pixels.csv", cols):
            key = (r["pixel_i"], r["pixel_j"])
            acc.setdefault(key, []).append(r)
    out = {}
    for key, rows in acc.items():
        merged = dict(rows[0])
        for c in PIXEL_COLUMNS[6:]:
            merged[c] = sum(r[c] for r in rows) / len(runs)
        out[key] = merged
    return out


def report(out_dir) -> list[Path]:
    """Scenario tables (technical, useful without/with DHC) and per-pixel layers
    (extraction density, heating coverage, DHC minus no-DHC coverage)."""
    out_dir = Path(out_dir)
    scenarios = {}
    for d in sorted(out_dir.iterdir()):
        if d.is_dir() and (d / "summary.csv").exists():
            try:
                scenarios[d.name] = (ScenarioSpec.parse(d.name), read_summary(d / "summary.csv"), d)
            except ValueError:
                continue
    if not scenarios:
        raise formats.SchemaError(out_dir, None, "no scenario results to report")
    tables = out_dir / "tables"
    layers = out_dir / "layers"
    tables.mkdir(exist_ok=True)
    layers.mkdir(exist_ok=True)
    written = []

    def twh(summary, k):
        m, h, _ = summary[k]
        return m / WH_PER_TWH, ("" if h is None else h / WH_PER_TWH)

    def pct(summary, k):
        m, h, _ = summary[k]
        return 100.0 * m, ("" if h is None else 100.0 * h)

    tech_rows = []
    useful = {False: [], True: []}
    for label, (spec, summ, _) in scenarios.items():
        q_inj, q_inj_ci = twh(summ, "Q_inj")
        q_extr, q_extr_ci = twh(summ, "Q_extr")
        base = {"scenario": label, "cooling": spec.cooling_level, "climate": spec.climate or "",
                "dhc": spec.dhc, "n_runs": summ["Q_extr"][2]}
        tech_rows.append({**base, "Q_inj_TWh": q_inj, "Q_inj_ci_TWh": q_inj_ci, "Q_extr_TWh": q_extr,
                          "Q_extr_ci_TWh": q_extr_ci})
        h, h_ci = pct(summ, "coverage_heat")
        c, c_ci = pct(summ, "coverage_cool")
        uh, uh_ci = twh(summ, "useful_heat")
        uc, uc_ci = twh(summ, "useful_cool")
        useful[spec.dhc].append({**base, "heat_coverage_pct": h, "heat_coverage_ci_pct": h_ci,
                                 "cool_coverage_pct": c, "cool_coverage_ci_pct": c_ci, "useful_heat_TWh": uh,
                                 "useful_heat_ci_TWh": uh_ci, "useful_cool_TWh": uc,
                                 "useful_cool_ci_TWh": uc_ci})
    tech_cols = ["scenario", "cooling", "climate", "dhc", "n_runs", "Q_inj_TWh", "Q_inj_ci_TWh", "Q_extr_TWh",
                 "Q_extr_ci_TWh"]
    formats.write_csv(tables / "technical.csv", tech_cols, tech_rows)
    written.append(tables / "technical.csv")
    use_cols = ["scenario", "cooling", "climate", "dhc", "n_runs", "heat_coverage_pct", "heat_coverage_ci_pct",
                "cool_coverage_pct", "cool_coverage_ci_pct", "useful_heat_TWh", "useful_heat_ci_TWh",
                "useful_cool_TWh", "useful_cool_ci_TWh"]
    for dhc, name in ((False, "useful_nd.csv"), (True, "useful_d.csv")):
        if useful[dhc]:
            formats.write_csv(tables / name, use_cols, useful[dhc])
            written.append(tables / name)

    pixel_means = {label: _mean_pixels(d) for label, (_, _, d) in scenarios.items()}
    for label, pixels in pixel_means.items():
        feats = []
        for key in sorted(pixels):
            r = pixels[key]
            geom = box(r["x0"], r["y0"], r["x1"], r["y1"])
            feats.append((geom, {"pixel_i": key[0], "pixel_j": key[1], "density_kWh_m2": r["density_kWh_m2"],
                                 "coverage_heat_pct": 100.0 * r["coverage_heat"],
                                 "coverage_cool_pct": 100.0 * r["coverage_cool"]}))
        path = layers / f"pixels_{label}.geojson"
        formats.write_geojson(path, feats)
        written.append(path)
    for label, (spec, _, _) in scenarios.items():
        if not spec.dhc:
            continue
        nd = ScenarioSpec(spec.cooling_level, spec.climate, False).label
        if nd not in pixel_means:
            continue
        with_d, without = pixel_means[label], pixel_means[nd]
        feats = []
        for key in sorted(set(with_d) | set(without)):
            a, b = with_d.get(key), without.get(key)
            r = a or b
            geom = box(r["x0"], r["y0"], r["x1"], r["y1"])
            props = {"pixel_i": key[0], "pixel_j": key[1]}
            for c in ("coverage_heat", "coverage_cool"):
                props[f"delta_{c}_pp"] = 100.0 * ((a[c] if a else 0.0) - (b[c] if b else 0.0))
            feats.append((geom, props))
        path = layers / f"delta_{label}_vs_{nd}.geojson"
        formats.write_geojson(path, feats)
        written.append(path)
    return written


def validate_scenario(result: ScenarioResult, region: Region, model: SiteModel, run: int = 0) -> list[dict]:
    """Simulated excursion beyond the fluid-temperature limits for every sized parcel."""
    from .simulate import validate_operating_point

    by_id = {p.parcel_id: p for p in region.parcels}
    climate = result.spec.climate_key
    rows = []
    for row in result.runs[run].parcels:
        if row["N_B"] == 0:
            continue
        p = by_id[row["parcel_id"]]
        best, _ = model.optimum(p, climate, row["Q_inj"])
        excursion = validate_operating_point(best, best.design, region.ground_at(p.pixel_id),
                                             region.profile(climate), region.hp)
        rows.append({"parcel_id": p.parcel_id, "B": best.design.B, "H": best.design.H, "mode": best.mode.value,
                     "Q_inj": row["Q_inj"], "max_excursion_K": excursion})
    return rows
