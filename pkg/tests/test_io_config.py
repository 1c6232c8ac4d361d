import json
from dataclasses import replace
from datetime import timedelta

import numpy as np
import pytest

from scootflow import io as sio
from scootflow.config import DEFAULTS, RunConfig
from scootflow.errors import DomainError, SchemaError
from scootflow.geo import Polygon
from scootflow.synth import SynthSpec, gen_city, gen_weather


@pytest.fixture(scope="module")
def city():
    return gen_city(SynthSpec(seed=2, grid=4))


def test_zone_roundtrip(tmp_path, city):
    p = tmp_path / "zones.geojson"
    sio.write_zones(p, city.zones, city.projection)
    back = sio.read_zones(p, city.projection)
    assert [z.zone_id for z in back] == sorted(z.zone_id for z in city.zones)
    orig = {z.zone_id: z for z in city.zones}
    for z in back:
        assert z.parent_sa2_id == orig[z.zone_id].parent_sa2_id
        assert np.allclose(z.polygon.exterior, orig[z.zone_id].polygon.exterior, atol=1e-6)
        assert z.area_km2 == pytest.approx(orig[z.zone_id].area_km2, rel=1e-9)
    sio.write_zones(tmp_path / "again.geojson", back, city.projection)
    assert (tmp_path / "again.geojson").read_bytes() == p.read_bytes()


def test_zone_sa2_alias_and_missing_property(tmp_path, city):
    p = tmp_path / "zones.geojson"
    sio.write_zones(p, city.zones[:2], city.projection)
    doc = json.loads(p.read_text())
    for f in doc["features"]:
        f["properties"]["sa2_id"] = f["properties"].pop("parent_sa2_id")
    p.write_text(json.dumps(doc))
    back = sio.read_zones(p, city.projection)
    assert [z.parent_sa2_id for z in back] == [z.parent_sa2_id for z in sorted(city.zones[:2], key=lambda z: z.zone_id)]
    del doc["features"][1]["properties"]["sa2_id"]
    p.write_text(json.dumps(doc))
    with pytest.raises(SchemaError, match="parent_sa2_id"):
        sio.read_zones(p, city.projection)


def test_duplicate_zone_and_bad_json(tmp_path, city):
    p = tmp_path / "zones.geojson"
    sio.write_zones(p, [city.zones[0], city.zones[0]], city.projection)
    with pytest.raises(DomainError, match="duplicate"):
        sio.read_zones(p, city.projection)
    p.write_text("{not json")
    with pytest.raises(SchemaError):
        sio.read_zones(p, city.projection)


def test_poi_and_path_roundtrip(tmp_path, city):
    sio.write_pois(tmp_path / "pois.geojson", city.pois)
    pois = sio.read_pois(tmp_path / "pois.geojson")
    assert [p.category for p in pois] == [p.category for p in city.pois]
    assert all(abs(a.location.lat - b.location.lat) < 1e-12 for a, b in zip(pois, city.pois))

    sio.write_paths(tmp_path / "paths.geojson", city.paths, city.projection)
    paths = sio.read_paths(tmp_path / "paths.geojson", city.projection)
    assert [p.kind for p in paths] == [p.kind for p in city.paths]
    for a, b in zip(paths, city.paths):
        va = a.shape.exterior if isinstance(a.shape, Polygon) else a.shape.vertices
        vb = b.shape.exterior if isinstance(b.shape, Polygon) else b.shape.vertices
        assert np.allclose(va, vb, atol=1e-6)


def test_poi_bad_category_is_schema_error(tmp_path):
    p = tmp_path / "pois.geojson"
    p.write_text(json.dumps({"type": "FeatureCollection", "features": [
        {"type": "Feature", "geometry": {"type": "Point", "coordinates": [144.9, -37.8]},
         "properties": {"category": "volcano"}}]}))
    with pytest.raises(SchemaError, match="feature 0"):
        sio.read_pois(p)


def test_census_roundtrip_and_missing_column(tmp_path, city):
    p = tmp_path / "census.csv"
    sio.write_census(p, city.census)
    back = sio.read_census(p, city.zones)
    assert {r.sa2_id: dict(r.values) for r in back} == {r.sa2_id: dict(r.values) for r in city.census}
    lines = p.read_text().splitlines()
    header = lines[0].split(",")
    drop = header.index("population")
    p.write_text("\n".join(",".join(c for i, c in enumerate(ln.split(",")) if i != drop) for ln in lines))
    with pytest.raises(SchemaError, match="population"):
        sio.read_census(p, city.zones)


def test_weather_roundtrip_with_gaps(tmp_path):
    recs, _ = gen_weather(SynthSpec(seed=1), 30)
    recs[4] = replace(recs[4], humidity=None, wind_speed=None)
    p = tmp_path / "weather.csv"
    sio.write_weather(p, recs)
    back = sio.read_weather(p)
    assert len(back) == 30
    assert back[4].humidity is None and back[4].wind_speed is None
    assert back[5].hour_start - back[4].hour_start == timedelta(hours=1)
    for a, b in zip(back, recs):
        assert a.hour_start == b.hour_start
        assert a.temperature == pytest.approx(b.temperature)
    p.write_text("hour_start_iso,humidity\n2022-08-01T00:00:00Z,50\n")
    with pytest.raises(SchemaError, match="precip_mm"):
        sio.read_weather(p)


# --- configuration ------------------------------------------------------------------


def test_defaults_without_file():
    cfg = RunConfig.load()
    assert cfg.seed == DEFAULTS["seed"] and cfg["buffers"]["poi_radius"] == 60.0


def test_precedence_defaults_file_flags(tmp_path):
    f = tmp_path / "run.toml"
    f.write_text('seed = 3\n[buffers]\npoi_radius = 40.0\npath_radius = 8.0\n')
    cfg = RunConfig.load(f, {"seed": 9, "buffers": {"poi_radius": None}})
    assert cfg.seed == 9
    assert cfg["buffers"]["poi_radius"] == 40.0
    assert cfg["buffers"]["path_radius"] == 8.0
    assert cfg["buffers"]["pairing"] == "day"


def test_unknown_key_and_bad_values(tmp_path):
    f = tmp_path / "run.toml"
    f.write_text("[fit]\nmodelz = ['RFR']\n")
    with pytest.raises(DomainError, match="fit.modelz"):
        RunConfig.load(f)
    with pytest.raises(DomainError, match="SVR"):
        RunConfig.load(overrides={"fit": {"models": ["SVR"]}})
    with pytest.raises(DomainError, match="pairing"):
        RunConfig.load(overrides={"buffers": {"pairing": "week"}})
    f.write_text("seed = [")
    with pytest.raises(DomainError):
        RunConfig.load(f)
    with pytest.raises(DomainError, match="not found"):
        RunConfig.load(tmp_path / "absent.toml")


def test_relative_paths_resolve_against_file(tmp_path):
    sub = tmp_path / "cfg"
    sub.mkdir()
    (sub / "run.toml").write_text('out = "results"\n[inputs]\nzones = "data/z.geojson"\n')
    cfg = RunConfig.load(sub / "run.toml")
    assert cfg["inputs"]["zones"] == str(sub / "data" / "z.geojson")
    assert cfg.out == sub / "results"


def test_hash_ignores_locations_but_not_settings(tmp_path):
    a = RunConfig.load(overrides={"out": str(tmp_path / "a")})
    b = RunConfig.load(overrides={"out": str(tmp_path / "b"), "inputs": {"zones": "elsewhere.geojson"}})
    c = RunConfig.load(overrides={"out": str(tmp_path / "a"), "seed": 1})
    assert a.hash() == b.hash() != c.hash()
    assert len(a.hash()) == 12
    assert a.provenance().startswith("scootflow ") and f"config={a.hash()} seed=0" in a.provenance()


def test_input_path_error_names_key(tmp_path):
    cfg = RunConfig.load(overrides={"out": str(tmp_path)})
    with pytest.raises(DomainError, match=r"inputs\.weather"):
        cfg.input_path("weather")
    (tmp_path / "events.csv").write_text("")
    assert cfg.input_path("events") == tmp_path / "events.csv"
