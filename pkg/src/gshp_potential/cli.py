"""Command-line entry point: ``gshp-potential <subcommand> [options]``."""
from __future__ import annotations

import argparse
import logging
from pathlib import Path
import sys

import pandas as pd

from . import formats, pipeline as pl
from .climate import NoLoadSeason, compute_cdd, compute_hdd, load_weights
from .geospatial import place_boreholes
from .sizing import SPACINGS, InfeasibleConfigError

EXIT_OK, EXIT_SCHEMA, EXIT_INFEASIBLE = 0, 2, 3
log = logging.getLogger("gshp_potential")


def _common(parser):
    parser.add_argument("--config", help="run manifest (INI)")
    parser.add_argument("--scenario", help="scenario labels, comma separated, e.g. NC-ND,PC-D-4.5")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out-dir", default="out")
    parser.add_argument("--seed", type=int, default=0, help="only used by synth")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="gshp-potential",
                                     description="Regional technical and useful potential of ground-source heat pumps")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("degree-days", help="monthly HDD/CDD from a daily temperature CSV (date,T)")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--climate", default=pl.REFERENCE_CLIMATE)
    p = sub.add_parser("place", help="borehole counts per parcel and spacing")
    _common(p)
    p.add_argument("--spacing", type=float, help="also write coordinates for this spacing")
    for name, text in (("size", "operating points per parcel"), ("balance", "scope and pixel balances"),
                       ("allocate", "surplus flows to DHC areas"), ("run", "full pipeline and report"),
                       ("validate", "month-resolved check of every sized parcel")):
        _common(sub.add_parser(name, help=text))
    _common(sub.add_parser("report", help="tables and layers from finished runs in --out-dir"))
    _common(sub.add_parser("synth", help="write the synthetic test region to --out-dir"))
    return parser


def _need_config(args):
    if not args.config:
        raise formats.SchemaError("command line", None, "--config is required")
    return pl.load_region(args.config)


def _selected(region, args):
    specs = region.scenarios()
    if not args.scenario:
        return specs
    by_label = {s.label: s for s in specs}
    out = []
    for label in args.scenario.split(","):
        label = label.strip()
        try:
            pl.ScenarioSpec.parse(label)
        except ValueError as exc:
            raise formats.SchemaError("command line", None, str(exc)) from None
        if label not in by_label:
            raise formats.SchemaError(args.config, None, f"scenario {label} not available in this manifest")
        out.append(by_label[label])
    return out


def cmd_degree_days(args):
    rows = formats.read_csv(args.input, {"date": "str", "T": "float"})
    try:
        s = pd.Series([r["T"] for r in rows], index=pd.to_datetime([r["date"] for r in rows]))
    except (ValueError, TypeError) as exc:
        raise formats.SchemaError(args.input, None, f"bad date: {exc}") from None
    try:
        hdd, cdd = compute_hdd(s), compute_cdd(s)
    except ValueError as exc:
        raise formats.SchemaError(args.input, None, str(exc)) from None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_csv(out / "degree_days.csv", ["climate", "month", "hdd", "cdd"],
                      [{"climate": args.climate, "month": m + 1, "hdd": hdd[m], "cdd": cdd[m]} for m in range(12)])
    for name, dd in (("heating", hdd), ("cooling", cdd)):
        try:
            w, month = load_weights(dd)
            print(f"{name}: w_max={w:.6g} peak month={month + 1}")
        except NoLoadSeason:
            print(f"{name}: no season")


def cmd_place(args):
    region = _need_config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counts, coords = [], []
    for p in region.parcels:
        for B in SPACINGS:
            parts = place_boreholes(p, B)
            counts.append({"parcel_id": p.parcel_id, "B": B, "N_B": sum(len(xy) for xy in parts)})
            if args.spacing is not None and B == args.spacing:
                for k, xy in enumerate(parts):
                    coords.extend({"parcel_id": p.parcel_id, "part": k, "x": x, "y": y} for x, y in xy)
    formats.write_csv(out / "placements.csv", ["parcel_id", "B", "N_B"], counts)
    if args.spacing is not None:
        formats.write_csv(out / "boreholes.csv", ["parcel_id", "part", "x", "y"], coords)


def _run_selected(args):
    region = _need_config(args)
    model = pl.SiteModel(region, args.threads)
    for spec in _selected(region, args):
        log.info("scenario %s", spec.label)
        yield region, model, pl.run_scenario(spec, region, model)


def _write_stage(args, files):
    for _, _, result in _run_selected(args):
        root = pl.write_scenario(result, args.out_dir)
        # keep only the files belonging to the requested stage
        for run_dir in sorted(root.glob("run_*")):
            for f in run_dir.iterdir():
                if f.name not in files:
                    f.unlink()


def cmd_size(args):
    _write_stage(args, {"parcels.csv"})


def cmd_balance(args):
    _write_stage(args, {"scopes.csv", "pixels.csv"})


def cmd_allocate(args):
    _write_stage(args, {"flows.csv"})


def cmd_run(args):
    for _, _, result in _run_selected(args):
        pl.write_scenario(result, args.out_dir)
        s = result.summary
        print(f"{s.label}: Q_inj={s.mean['Q_inj'] / 1e9:.4f} GWh Q_extr={s.mean['Q_extr'] / 1e9:.4f} GWh "
              f"heat coverage={100 * s.mean['coverage_heat']:.1f}% runs={s.n_runs}")
    pl.report(args.out_dir)


def cmd_report(args):
    for path in pl.report(args.out_dir):
        print(path)


def cmd_validate(args):
    worst = 0.0
    for region, model, result in _run_selected(args):
        rows = pl.validate_scenario(result, region, model)
        d = Path(args.out_dir) / result.spec.label
        d.mkdir(parents=True, exist_ok=True)
        formats.write_csv(d / "validation.csv", ["parcel_id", "B", "H", "mode", "Q_inj", "max_excursion_K"], rows)
        w = max((r["max_excursion_K"] for r in rows), default=0.0)
        worst = max(worst, w)
        print(f"{result.spec.label}: {len(rows)} parcels, max excursion {w:.3f} K")
    return worst


def cmd_synth(args):
    from .synthetic import write_synthetic_region

    print(write_synthetic_region(args.out_dir, seed=args.seed))


COMMANDS = {"degree-days": cmd_degree_days, "place": cmd_place, "size": cmd_size, "balance": cmd_balance,
            "allocate": cmd_allocate, "run": cmd_run, "report": cmd_report, "validate": cmd_validate,
            "synth": cmd_synth}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        COMMANDS[args.command](args)
    except formats.SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except InfeasibleConfigError as exc:
        print(f"infeasible configuration: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
