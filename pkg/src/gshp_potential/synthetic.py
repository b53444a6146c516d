"""Reference inputs for tests, examples and the synthetic region."""
from __future__ import annotations

from .climate import DegreeDayProfile, profile_from_monthly
from .sizing import DEPTHS, HpParams, nominal_extraction_rate
from .thermal import GroundColumn, compute_R_LT, compute_R_seas

# Monthly degree days of a mid-latitude lowland site, Jan..Dec.
REFERENCE_HDD = (500.0, 430.0, 380.0, 260.0, 130.0, 40.0, 0.0, 0.0, 60.0, 220.0, 360.0, 470.0)
REFERENCE_CDD = (0.0, 0.0, 0.0, 0.0, 5.0, 40.0, 90.0, 80.0, 10.0, 0.0, 0.0, 0.0)
REFERENCE_T_NOM = 1850.0


def reference_profile() -> DegreeDayProfile:
    return profile_from_monthly(REFERENCE_HDD, REFERENCE_CDD)


def nominal_rates(ground: GroundColumn, hp: HpParams, profile: DegreeDayProfile, t_nom: float,
                  depths=DEPTHS, t_dim: float = 50.0) -> dict:
    """q_nom per depth from the isolated-borehole design rule."""
    return {float(H): nominal_extraction_rate(H, ground, hp, profile, t_nom,
                                              compute_R_LT(H, ground, t_dim), compute_R_seas(H, ground))
            for H in depths}


def reference_ground(conductivity=2.0, diffusivity=1.0e-6, T0=11.0, dTdz=0.03, hp=None,
                     profile=None, t_nom=REFERENCE_T_NOM, **kwargs) -> GroundColumn:
    """Ground column with q_nom filled in for every standard depth."""
    hp = hp or HpParams()
    profile = profile or reference_profile()
    bare = GroundColumn(conductivity, diffusivity, T0, dTdz, **kwargs)
    q_nom = nominal_rates(bare, hp, profile, t_nom, t_dim=hp.t_dim)
    return GroundColumn(conductivity, diffusivity, T0, dTdz, q_nom_by_depth=q_nom, **kwargs)


# -- synthetic region ------------------------------------------------------------

CLIMATE_SHIFT = {"REF": 0.0, "RCP26": 0.5, "RCP45": 1.0, "RCP85": 1.8}  # K warmer than reference


def _shifted_degree_days(shift: float):
    """Degree days of the reference year warmed by ``shift`` K, month by month."""
    days = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)
    hdd = [max(h - shift * d * (h > 0), 0.0) for h, d in zip(REFERENCE_HDD, days)]
    cdd = [c + shift * d * 0.5 * (c > 0) for c, d in zip(REFERENCE_CDD, days)]
    return hdd, cdd


def write_synthetic_region(out_dir, seed: int = 0, n_cols: int = 5, n_rows: int = 2, n_runs: int = 3,
                           pitch: float = 400.0):
    """Write a small self-contained region (10 pixels by default) and its manifest.

    The left two pixel columns of the bottom row form a dense district with
    a DHC zone; the remaining pixels are rural with larger parcels. Returns
    the manifest path.
    """
    import numpy as np
    from pathlib import Path
    from shapely.geometry import Point, Polygon, box

    from . import formats

    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    (out / "cooling").mkdir(parents=True, exist_ok=True)

    parcels, buildings = [], []
    urban = {(0, 0), (1, 0)}
    for j in range(n_rows):
        for i in range(n_cols):
            x0, y0 = i * pitch, j * pitch
            dense = (i, j) in urban
            cells = 4
            cell = pitch / cells
            slots = rng.permutation(cells * cells)[: (5 if dense else 4)]
            for k, slot in enumerate(sorted(slots)):
                cx, cy = x0 + (slot % cells) * cell, y0 + (slot // cells) * cell
                if dense:
                    w, h = rng.uniform(28, 45, 2)
                else:
                    w, h = rng.uniform(45, 95, 2)
                ox, oy = rng.uniform(2, cell - w - 2), rng.uniform(2, cell - h - 2)
                geom = box(cx + ox, cy + oy, cx + ox + w, cy + oy + h)
                if not dense and k == 0:
                    # an L-shaped parcel per rural pixel
                    geom = geom.difference(box(cx + ox + w / 2, cy + oy + h / 2, cx + ox + w + 1, cy + oy + h + 1))
                restriction = "permitted"
                r = rng.random()
                if r < 0.1:
                    restriction = "prohibited"
                elif r < 0.3:
                    restriction = "limited"
                pid = f"P{i}{j}{k}"
                parcels.append((geom, {"parcel_id": pid, "restriction": restriction,
                                       "area": round(geom.area, 3)}))
            n_b = 12 if dense else 3
            for k in range(n_b):
                pt = Point(x0 + rng.uniform(5, pitch - 5), y0 + rng.uniform(5, pitch - 5))
                demand = rng.uniform(0.5e9, 1.6e9) if dense else rng.uniform(0.05e9, 0.2e9)
                buildings.append((pt, {"building_id": f"b{i}{j}{k:02d}", "heat_demand": round(float(demand), 3),
                                       "service": bool(dense or k == 0)}))
    dhc = [(Polygon([(5, 5), (2 * pitch - 5, 5), (2 * pitch - 5, pitch - 5), (5, pitch - 5)]),
            {"dhc_id": "DHC1"})]
    formats.write_geojson(out / "parcels.geojson", parcels)
    formats.write_geojson(out / "buildings.geojson", buildings)
    formats.write_geojson(out / "dhc.geojson", dhc)

    dd_rows = []
    for climate, shift in CLIMATE_SHIFT.items():
        hdd, cdd = _shifted_degree_days(shift)
        for m in range(12):
            dd_rows.append({"climate": climate, "month": m + 1, "hdd": hdd[m], "cdd": cdd[m]})
    formats.write_csv(out / "degree_days.csv", ["climate", "month", "hdd", "cdd"], dd_rows)

    # cooling demand: service buildings only, scaled by penetration and climate
    level_scale = {"PC": 0.25, "FC": 0.6}
    climate_scale = {"RCP26": 0.9, "RCP45": 1.0, "RCP85": 1.2}
    labels = {"RCP26": "2.6", "RCP45": "4.5", "RCP85": "8.5"}
    cooling = {}
    for level, ls in level_scale.items():
        for climate, cs in climate_scale.items():
            files = []
            for run in range(n_runs):
                rows = []
                for _, props in buildings:
                    if not props["service"]:
                        continue
                    share = rng.lognormal(0.0, 0.3)
                    rows.append({"building_id": props["building_id"],
                                 "cool_demand": round(props["heat_demand"] * ls * cs * share, 3)})
                name = f"cooling/{level}_{labels[climate]}_run{run:03d}.csv"
                formats.write_csv(out / name, ["building_id", "cool_demand"], rows)
                files.append(name)
            cooling[f"{level}-{labels[climate]}"] = ", ".join(files)

    manifest = out / "manifest.ini"
    formats.write_manifest(manifest, {
        "region": {"name": f"synthetic-{seed}", "crs": "local metric", "origin_x": 0, "origin_y": 0,
                   "pitch": pitch, "extent": f"0,0,{n_cols * pitch},{n_rows * pitch}",
                   "parcels": "parcels.geojson", "buildings": "buildings.geojson", "dhc": "dhc.geojson",
                   "degree_days": "degree_days.csv"},
        "ground": {"conductivity": 2.0, "diffusivity": 1.0e-6, "T0": 11.0, "dTdz": 0.03, "Rb": 0.1,
                   "r_b": 0.06},
        "heat_pump": {"COP_heat": 4.5, "COP_cool": 5.5, "T_mf_min": -1.5, "T_mf_max": 50.0, "t_dim": 50},
        "model": {"t_nom": REFERENCE_T_NOM, "threshold_fraction": 0.2, "mbb_length": "longer", "ci": "normal"},
        "cooling": cooling,
    })
    return manifest
