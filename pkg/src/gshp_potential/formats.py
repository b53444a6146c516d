"""Readers and writers for the run manifest, GeoJSON layers and CSV tables.

Every reader raises SchemaError with the offending file and line (CSV) or
feature index (GeoJSON) so that the CLI can exit with a schema status.
"""
from __future__ import annotations

import configparser
import csv
import json
import math
import numbers
from pathlib import Path

from shapely.geometry import mapping, shape

RESTRICTIONS = ("permitted", "limited", "prohibited")


class SchemaError(ValueError):
    def __init__(self, path, where, message):
        self.path = str(path)
        self.where = where
        super().__init__(f"{path}:{where}: {message}" if where else f"{path}: {message}")


def _number(value, path, where, name, minimum=None):
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise SchemaError(path, where, f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(x):
        raise SchemaError(path, where, f"{name} must be finite")
    if minimum is not None and x < minimum:
        raise SchemaError(path, where, f"{name} must be >= {minimum}, got {x}")
    return x


# -- manifest --------------------------------------------------------------------

def read_manifest(path) -> configparser.ConfigParser:
    path = Path(path)
    cfg = configparser.ConfigParser(interpolation=None)
    cfg.optionxform = str  # keep scenario keys such as "PC-4.5" verbatim
    try:
        with path.open(encoding="utf-8") as fh:
            cfg.read_file(fh)
    except FileNotFoundError:
        raise SchemaError(path, None, "manifest not found") from None
    except configparser.Error as exc:
        raise SchemaError(path, getattr(exc, "lineno", None), str(exc).splitlines()[0]) from None
    for section in ("region",):
        if not cfg.has_section(section):
            raise SchemaError(path, None, f"missing [{section}] section")
    return cfg


def write_manifest(path, sections: dict):
    cfg = configparser.ConfigParser(interpolation=None)
    cfg.optionxform = str
    for name, values in sections.items():
        cfg[name] = {k: str(v) for k, v in values.items()}
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        cfg.write(fh)


# -- GeoJSON ---------------------------------------------------------------------

def read_features(path, required: dict):
    """Features of a FeatureCollection as (geometry, properties) pairs.

    ``required`` maps property names to "str" or "float".
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SchemaError(path, None, "file not found") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    if data.get("type") != "FeatureCollection" or not isinstance(data.get("features"), list):
        raise SchemaError(path, None, "expected a GeoJSON FeatureCollection")
    out = []
    for k, feat in enumerate(data["features"]):
        where = f"feature {k}"
        try:
            geom = shape(feat["geometry"])
        except Exception:
            raise SchemaError(path, where, "missing or invalid geometry") from None
        props = dict(feat.get("properties") or {})
        for name, kind in required.items():
            if name not in props:
                raise SchemaError(path, where, f"missing property {name!r}")
            if kind == "float":
                props[name] = _number(props[name], path, where, name, minimum=0.0)
            else:
                props[name] = str(props[name])
        out.append((geom, props))
    return out


def feature_collection(features) -> dict:
    """``features``: iterable of (geometry, properties)."""
    return {"type": "FeatureCollection",
            "features": [{"type": "Feature", "geometry": mapping(g) if g is not None else None,
                          "properties": p} for g, p in features]}


def write_geojson(path, features):
    text = json.dumps(feature_collection(features), sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


# -- CSV -------------------------------------------------------------------------

def read_csv(path, columns: dict) -> list[dict]:
    """Rows with the given columns converted ("str", "int" or "float")."""
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8", newline="")
    except FileNotFoundError:
        raise SchemaError(path, None, "file not found") from None
    with fh:
        reader = csv.DictReader(fh)
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(path, 1, f"missing columns {missing}")
        rows = []
        for row in reader:
            where = f"line {reader.line_num}"
            out = {}
            for name, kind in columns.items():
                value = row[name]
                if kind == "float":
                    out[name] = _number(value, path, where, name)
                elif kind == "int":
                    try:
                        out[name] = int(value)
                    except (TypeError, ValueError):
                        raise SchemaError(path, where, f"{name} must be an integer") from None
                else:
                    out[name] = value
            rows.append(out)
    return rows


def fmt(value) -> str:
    """Shortest round-trip text for numbers; stable across runs."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        value = float(value)
        if value == 0.0:
            return "0"
        return repr(value)
    return str(value)


def write_csv(path, header, rows):
    """``rows`` are dicts keyed by the header names."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(row[c]) for c in header])
