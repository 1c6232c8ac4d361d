"""File formats: GeoJSON zones/POIs/paths, census and weather CSV.

Geometry is stored as WGS84 lon/lat and projected into the planar frame on
load.  Writers emit ``repr`` floats and sorted keys so output is byte-stable.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from scootflow.errors import DomainError, SchemaError
from scootflow.geo import GeoPoint, LocalProjection, MultiPolygon, PathGeometry, Polygon, Polyline
from scootflow.spatial import CENSUS_COUNT_COLUMNS, Poi, Sa2Row, ZoneRecord, child_zone_counts
from scootflow.temporal import WeatherRecord
from scootflow.timeframes import format_utc, parse_utc

WEATHER_COLUMNS = ("hour_start_iso", "humidity", "precip_mm", "temp_c", "wind_mph")


def _load_features(path: Path | str) -> list[dict]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at offset {exc.pos}") from exc
    if doc.get("type") != "FeatureCollection" or not isinstance(doc.get("features"), list):
        raise SchemaError(f"{path}: expected a GeoJSON FeatureCollection")
    return doc["features"]


def _prop(path, i, feat, key):
    props = feat.get("properties") or {}
    if key not in props:
        raise SchemaError(f"{path}: feature {i} lacks property {key!r}")
    return props[key]


def _ring_xy(ring, projection: LocalProjection) -> np.ndarray:
    arr = np.asarray(ring, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise SchemaError("malformed coordinate ring")
    return projection.project_xy(arr[:, 1], arr[:, 0])


def _polygon(coords, projection) -> Polygon:
    return Polygon(_ring_xy(coords[0], projection), tuple(_ring_xy(h, projection) for h in coords[1:]))


def _region(geom, projection) -> Polygon | MultiPolygon:
    kind = geom.get("type")
    if kind == "Polygon":
        return _polygon(geom["coordinates"], projection)
    if kind == "MultiPolygon":
        return MultiPolygon(tuple(_polygon(c, projection) for c in geom["coordinates"]))
    raise SchemaError(f"zone geometry must be Polygon or MultiPolygon, got {kind}")


def features_origin(path: Path | str) -> GeoPoint:
    """Centre of the lon/lat bounding box of every coordinate in a GeoJSON file."""
    coords = []

    def walk(c):
        if c and isinstance(c[0], (int, float)):
            coords.append(c[:2])
        else:
            for x in c:
                walk(x)

    for f in _load_features(path):
        walk(f["geometry"]["coordinates"])
    if not coords:
        raise SchemaError(f"{path}: no coordinates")
    a = np.asarray(coords, dtype=float)
    return GeoPoint(float((a[:, 1].min() + a[:, 1].max()) / 2), float((a[:, 0].min() + a[:, 0].max()) / 2))


def read_zones(path: Path | str, projection: LocalProjection) -> list[ZoneRecord]:
    out, seen = [], set()
    for i, f in enumerate(_load_features(path)):
        zid = str(_prop(path, i, f, "zone_id"))
        if zid in seen:
            raise DomainError(f"{path}: duplicate zone_id {zid}")
        seen.add(zid)
        props = f.get("properties") or {}
        # ``sa2_id`` accepted as a shorter alias
        sa2 = str(props["sa2_id"] if "parent_sa2_id" not in props and "sa2_id" in props
                  else _prop(path, i, f, "parent_sa2_id"))
        out.append(ZoneRecord(zid, _region(f.get("geometry") or {}, projection), sa2))
    return sorted(out, key=lambda z: z.zone_id)


def read_pois(path: Path | str) -> list[Poi]:
    out = []
    for i, f in enumerate(_load_features(path)):
        geom = f.get("geometry") or {}
        if geom.get("type") != "Point":
            raise SchemaError(f"{path}: POI feature {i} is not a Point")
        lon, lat = geom["coordinates"][:2]
        try:
            out.append(Poi(_prop(path, i, f, "category"), GeoPoint(float(lat), float(lon))))
        except ValueError as exc:
            raise SchemaError(f"{path}: POI feature {i}: {exc}") from exc
    return out


def read_paths(path: Path | str, projection: LocalProjection) -> list[PathGeometry]:
    """Polygon surfaces and LineString centerlines (and their Multi forms),
    each tagged with a ``kind`` property and optional ``halfwidth_m``."""
    out = []
    for i, f in enumerate(_load_features(path)):
        kind = _prop(path, i, f, "kind")
        hw = float((f.get("properties") or {}).get("halfwidth_m", 1.5))
        geom = f.get("geometry") or {}
        t, c = geom.get("type"), geom.get("coordinates")
        if t == "Polygon":
            shapes = [_polygon(c, projection)]
        elif t == "MultiPolygon":
            shapes = [_polygon(p, projection) for p in c]
        elif t == "LineString":
            shapes = [Polyline(_ring_xy(c, projection))]
        elif t == "MultiLineString":
            shapes = [Polyline(_ring_xy(line, projection)) for line in c]
        else:
            raise SchemaError(f"{path}: path feature {i} has unsupported geometry {t}")
        try:
            out.extend(PathGeometry(kind, s, hw) for s in shapes)
        except ValueError as exc:
            raise SchemaError(f"{path}: path feature {i}: {exc}") from exc
    return out


def read_census(path: Path | str, zones: Sequence[ZoneRecord]) -> list[Sa2Row]:
    """SA2 census counts; each row's child-zone count comes from ``zones``."""
    n_child = child_zone_counts(zones)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        header = reader.fieldnames or []
        missing = [c for c in ("sa2_id", *CENSUS_COUNT_COLUMNS) if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        for rec in reader:
            sid = rec["sa2_id"]
            if sid not in n_child:
                continue
            rows.append(Sa2Row(sid, {c: float(rec[c]) for c in CENSUS_COUNT_COLUMNS}, n_child[sid]))
    return rows


def _opt(v: str) -> float | None:
    v = v.strip()
    return None if v == "" or v.lower() == "nan" else float(v)


def read_weather(path: Path | str) -> list[WeatherRecord]:
    """Hourly weather CSV; an empty cell is a missing reading."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        missing = [c for c in WEATHER_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        for rec in reader:
            out.append(WeatherRecord(
                parse_utc(rec["hour_start_iso"]),
                _opt(rec["humidity"]), _opt(rec["precip_mm"]), _opt(rec["temp_c"]), _opt(rec["wind_mph"]),
            ))
    return out


# --- writers ----------------------------------------------------------------


def _lonlat(xy, projection: LocalProjection) -> list[list[float]]:
    lat, lon = projection.unproject_xy(np.asarray(xy, dtype=float).reshape(-1, 2))
    return [[float(o), float(a)] for a, o in zip(lat, lon)]


def _closed(ring) -> list:
    return ring + [ring[0]]


def _polygon_coords(poly: Polygon, projection) -> list:
    return [_closed(_lonlat(r, projection)) for r in poly.rings]


def _dump(path, features) -> None:
    doc = {"type": "FeatureCollection", "features": features}
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def write_zones(path, zones: Sequence[ZoneRecord], projection: LocalProjection) -> None:
    feats = []
    for z in zones:
        if isinstance(z.polygon, Polygon):
            geom = {"type": "Polygon", "coordinates": _polygon_coords(z.polygon, projection)}
        else:
            geom = {"type": "MultiPolygon",
                    "coordinates": [_polygon_coords(p, projection) for p in z.polygon.parts]}
        feats.append({"type": "Feature", "geometry": geom,
                      "properties": {"zone_id": z.zone_id, "parent_sa2_id": z.parent_sa2_id}})
    _dump(path, feats)


def write_pois(path, pois: Sequence[Poi]) -> None:
    _dump(path, [
        {"type": "Feature", "geometry": {"type": "Point", "coordinates": [p.location.lon, p.location.lat]},
         "properties": {"category": p.category.value}}
        for p in pois
    ])


def write_paths(path, paths: Sequence[PathGeometry], projection: LocalProjection) -> None:
    feats = []
    for p in paths:
        if isinstance(p.shape, Polygon):
            geom = {"type": "Polygon", "coordinates": _polygon_coords(p.shape, projection)}
            props = {"kind": p.kind.value}
        else:
            geom = {"type": "LineString", "coordinates": _lonlat(p.shape.vertices, projection)}
            props = {"kind": p.kind.value, "halfwidth_m": p.centerline_halfwidth}
        feats.append({"type": "Feature", "geometry": geom, "properties": props})
    _dump(path, feats)


def write_census(path, census: Sequence[Sa2Row]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sa2_id", *CENSUS_COUNT_COLUMNS])
        for r in sorted(census, key=lambda r: r.sa2_id):
            w.writerow([r.sa2_id, *(repr(float(r.values[c])) for c in CENSUS_COUNT_COLUMNS)])


def write_weather(path, weather: Sequence[WeatherRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(WEATHER_COLUMNS)
        for r in sorted(weather, key=lambda r: r.hour_start):
            w.writerow([format_utc(r.hour_start), *(
                "" if v is None else repr(float(v))
                for v in (r.humidity, r.precipitation, r.temperature, r.wind_speed)
            )])
