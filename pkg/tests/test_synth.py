from collections import Counter
from datetime import timedelta

import numpy as np
import pytest

from scootflow.ingest import EventKind, PollerConfig, bucket_events, derive_trips
from scootflow.regress import FeatureMatrix, ForestParams, feature_importance, fit_rfr
from scootflow.synth import (
    SynthSpec,
    gen_city,
    gen_hourly_trip_counts,
    gen_snapshots,
    gen_trip_events,
    gen_weather,
)
from scootflow.temporal import WEATHER_FIELDS


def test_grid_of_three_gives_nine_zones():
    city = gen_city(SynthSpec(seed=1, grid=3))
    assert len(city.zones) == 9
    assert len({z.zone_id for z in city.zones}) == 9
    assert sum(z.area_km2 for z in city.zones) == pytest.approx(9 * 0.25, rel=1e-3)


def test_grid_below_two_rejected():
    with pytest.raises(ValueError):
        SynthSpec(grid=1)


def test_same_seed_same_output():
    spec = SynthSpec(seed=9, n_vehicles=20)
    a = gen_snapshots(spec, gen_city(spec), timedelta(hours=3))
    b = gen_snapshots(spec, gen_city(spec), timedelta(hours=3))
    assert a == b
    other = SynthSpec(seed=10, n_vehicles=20)
    assert gen_snapshots(other, gen_city(other), timedelta(hours=3))[1] != a[1]


def test_zero_trip_rate_still_rotates_ids():
    spec = SynthSpec(seed=2, n_vehicles=10, trips_per_vehicle_hour=0.0, rotation_interval=15)
    snaps, truth = gen_snapshots(spec, gen_city(spec), timedelta(hours=1))
    assert truth == []
    assert all(len(s.observations) == 10 for s in snaps)
    first = {o.vehicle_id for o in snaps[0].observations}
    assert first == {o.vehicle_id for o in snaps[14].observations}
    assert first.isdisjoint({o.vehicle_id for o in snaps[15].observations})
    events = derive_trips(snaps, PollerConfig("http://fixture.invalid", rotation_radius=15.0))
    assert events == []


def test_derivation_recovers_truth_and_buckets():
    spec = SynthSpec(seed=4, n_vehicles=40)
    snaps, truth = gen_snapshots(spec, gen_city(spec), timedelta(hours=12))
    events = derive_trips(snaps, PollerConfig("http://fixture.invalid", rotation_radius=15.0))
    key = lambda e: (e.kind, e.raw_time, e.location)
    assert Counter(map(key, events)) == Counter(map(key, truth))
    assert bucket_events(events) == bucket_events(truth)


def test_weather_has_one_record_per_hour():
    spec = SynthSpec(seed=3)
    recs, effects = gen_weather(spec, 50)
    assert len(recs) == 50
    assert [r.hour_start for r in recs] == [spec.start + timedelta(hours=h) for h in range(50)]
    assert effects.humidity < 0
    assert all(0 <= r.humidity <= 100 and r.precipitation >= 0 for r in recs)


def test_stop_path_bias_only_moves_stops():
    spec = SynthSpec(seed=5, grid=4)
    city = gen_city(spec)
    ev = gen_trip_events(spec, city, days=3, starts_per_day=100.0, stop_path_bias=1.0)
    starts = sum(e.kind is EventKind.START for e in ev)
    assert starts == sum(e.kind is EventKind.STOP for e in ev) > 0


def test_planted_humidity_outranks_noise():
    """Humidity carries a planted effect on hourly counts; a pure noise column
    should rank below it in nearly every seed."""
    wins, n_seeds = 0, 20
    names = (*WEATHER_FIELDS, "noise")
    for seed in range(n_seeds):
        spec = SynthSpec(seed=seed)
        recs, _ = gen_weather(spec, 24 * 28)
        y = gen_hourly_trip_counts(spec, recs).astype(float)
        X = np.column_stack([[getattr(r, f) for r in recs] for f in WEATHER_FIELDS]
                            + [np.random.default_rng(seed).normal(size=len(recs))])
        m = FeatureMatrix(names, X, y)
        scores = {e.feature: e.score for e in feature_importance(fit_rfr(m, ForestParams(), seed=seed), m)}
        wins += scores["humidity"] > scores["noise"]
    assert wins >= 0.9 * n_seeds
