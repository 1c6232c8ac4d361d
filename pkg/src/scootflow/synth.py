"""Seeded synthetic city, fleet simulation and weather.

Everything here exists to give the rest of the pipeline ground truth: a grid
city whose zone trip intensity is driven by planted census and land-use
features, a minute-by-minute fleet simulation that emits availability
snapshots (with periodic ID rotation and optional GPS jitter) alongside the
true trip events, and an hourly weather series with planted effects on
demand.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from scootflow.geo import (
    GeoPoint,
    LocalProjection,
    PathGeometry,
    PathKind,
    PlanarPoint,
    Polygon,
    Polyline,
)
from scootflow.ingest.feed import Snapshot, VehicleObservation
from scootflow.ingest.trips import EventKind, TripEvent
from scootflow.spatial import CENSUS_COUNT_COLUMNS, Poi, PoiCategory, Sa2Row, ZoneRecord
from scootflow.temporal import WEATHER_FIELDS, WeatherRecord
from scootflow.timeframes import DEFAULT_TZ, as_zone

MELBOURNE_CBD = GeoPoint(-37.8136, 144.9631)
# 2022-08-01 00:00 in Melbourne (AEST, UTC+10)
STUDY_START = datetime(2022, 7, 31, 14, 0, tzinfo=timezone.utc)

# centring/scaling for the planted weather effects (Melbourne winter-spring hourly stats)
WEATHER_REFERENCE = {
    "humidity": (75.1, 13.5),
    "precipitation": (0.1, 0.2),
    "temperature": (12.9, 2.6),
    "wind_speed": (5.9, 2.7),
}

# relative hourly demand, local time
WEEKDAY_PROFILE = np.array(
    [0.35, 0.25, 0.2, 0.15, 0.15, 0.3, 0.7, 1.3, 1.8, 1.1, 0.9, 1.0,
     1.2, 1.2, 1.2, 1.4, 1.8, 2.0, 1.6, 1.3, 1.2, 1.1, 0.9, 0.6]
)
WEEKEND_PROFILE = np.array(
    [0.8, 0.7, 0.55, 0.35, 0.25, 0.2, 0.3, 0.45, 0.7, 1.0, 1.3, 1.6,
     1.8, 1.9, 1.9, 1.8, 1.7, 1.6, 1.5, 1.5, 1.4, 1.3, 1.2, 1.0]
)


@dataclass(frozen=True)
class WeatherEffects:
    """Log-rate change per reference standard deviation of each variable."""

    humidity: float = -0.35
    precipitation: float = -0.2
    temperature: float = 0.15
    wind_speed: float = 0.1

    def multiplier(self, rec: WeatherRecord) -> float:
        s = 0.0
        for f in WEATHER_FIELDS:
            mean, sd = WEATHER_REFERENCE[f]
            s += getattr(self, f) * (getattr(rec, f) - mean) / sd
        return math.exp(s)


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 7
    grid: int = 6
    zone_side_m: float = 500.0
    sa2_block: int = 2
    origin: GeoPoint = MELBOURNE_CBD
    tz: str = DEFAULT_TZ
    start: datetime = STUDY_START
    n_vehicles: int = 50
    trips_per_vehicle_hour: float = 0.3
    rotation_interval: int = 15
    rotation_radius: float = 15.0
    gps_jitter: float = 0.0
    min_trip_minutes: int = 2
    max_trip_minutes: int = 40
    stop_path_bias: float = 0.0
    weather: WeatherEffects = field(default_factory=WeatherEffects)

    def __post_init__(self):
        if self.grid < 2:
            raise ValueError("grid must be >= 2")
        if self.trips_per_vehicle_hour < 0 or self.stop_path_bias < 0:
            raise ValueError("rates must be >= 0")


@dataclass(eq=False)
class City:
    projection: LocalProjection
    zones: list[ZoneRecord]
    pois: list[Poi]
    paths: list[PathGeometry]
    census: list[Sa2Row]
    intensity: dict[str, float]
    planted: dict[str, dict[str, float]]

    @property
    def zone_squares(self) -> np.ndarray:
        """(n, 4) array of x0, y0, x1, y1 per zone, ordered like ``zones``."""
        return np.array([z.polygon.bounds for z in self.zones])

    @property
    def footpaths(self) -> list[PathGeometry]:
        return [p for p in self.paths if p.kind is PathKind.FOOTPATH]


def _rng(spec: SynthSpec, stream: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, stream])


def _zscore(v):
    v = np.asarray(v, dtype=float)
    sd = v.std()
    return (v - v.mean()) / sd if sd > 0 else v * 0.0


def _rect(x0, y0, x1, y1):
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def gen_city(spec: SynthSpec) -> City:
    """Grid city of ``grid x grid`` square zones centred on ``spec.origin``."""
    rng = _rng(spec, 1)
    g, s, b = spec.grid, spec.zone_side_m, spec.sa2_block
    half = g * s / 2
    proj = LocalProjection(spec.origin)

    cells = [(r, c) for r in range(g) for c in range(g)]
    sa2_of = {rc: f"SA2_{rc[0] // b:02d}{rc[1] // b:02d}" for rc in cells}
    sa2_ids = sorted(set(sa2_of.values()))
    n_child = {k: sum(1 for v in sa2_of.values() if v == k) for k in sa2_ids}

    # census, drawn per SA2
    log_dens = rng.normal(math.log(11_000), 0.6, len(sa2_ids))
    car_share = 1 / (1 + np.exp(-(0.3 - 0.9 * _zscore(log_dens) + rng.normal(0, 0.4, len(sa2_ids)))))
    census = []
    for k, sid in enumerate(sa2_ids):
        area = n_child[sid] * s * s / 1e6
        pop = round(math.exp(log_dens[k]) * area)
        female = rng.uniform(0.47, 0.51)
        male = rng.uniform(0.46, 0.99 - female)
        ages = rng.dirichlet([3, 40, 26, 10, 10, 8]) * rng.uniform(0.94, 0.99)
        fam = max(1.0, round(pop / 2.6))
        no_child = rng.beta(7, 2.5)
        with_child = (1 - no_child) * rng.uniform(0.85, 1.0)
        vals = dict(zip(CENSUS_COUNT_COLUMNS, [
            float(pop), round(pop * female), round(pop * male),
            *(float(round(pop * a)) for a in ages),
            float(pop), float(round(pop * car_share[k])),
            fam, float(round(fam * no_child)), float(round(fam * with_child)),
        ]))
        census.append(Sa2Row(sid, vals, n_child[sid]))

    # zones and POIs
    base_mix = np.array([6.0, 5.0, 1.0, 2.0, 0.6, 0.15, 1.5])  # land-use categories
    land_cats = [PoiCategory.RESIDENTIAL, PoiCategory.CAFE, PoiCategory.SHOP, PoiCategory.OFFICE,
                 PoiCategory.RECREATION, PoiCategory.CAMPUS, PoiCategory.OTHER]
    zones, pois, cafe_share = [], [], []
    for r, c in cells:
        x0, y0 = -half + c * s, -half + r * s
        zones.append(ZoneRecord(f"Z{r:02d}{c:02d}", Polygon(_rect(x0, y0, x0 + s, y0 + s)), sa2_of[(r, c)]))
        mix = rng.dirichlet(base_mix)
        n_land = rng.poisson(rng.uniform(5, 40))
        cats = rng.choice(len(land_cats), size=n_land, p=mix)
        cafe_share.append(np.mean(cats == 1) if n_land else 0.0)
        zone_pois = [land_cats[i] for i in cats]
        zone_pois += [PoiCategory.TRAM_STOP] * rng.poisson(1.2)
        zone_pois += [PoiCategory.BUS_STOP] * rng.poisson(1.5)
        zone_pois += [PoiCategory.TRAIN_STATION] * int(rng.random() < 0.08)
        # keep POIs off the zone edges so zone membership is unambiguous
        xy = rng.uniform([x0 + 1, y0 + 1], [x0 + s - 1, y0 + s - 1], size=(len(zone_pois), 2))
        lat, lon = proj.unproject_xy(xy)
        pois += [Poi(cat, GeoPoint(float(a), float(o))) for cat, a, o in zip(zone_pois, lat, lon)]

    # planted demand intensity per zone
    sa2_index = {sid: k for k, sid in enumerate(sa2_ids)}
    zone_logdens = np.array([log_dens[sa2_index[z.parent_sa2_id]] for z in zones])
    zone_car = np.array([car_share[sa2_index[z.parent_sa2_id]] for z in zones])
    log_i = (1.0 * _zscore(zone_logdens) - 0.5 * _zscore(zone_car) + 0.3 * _zscore(cafe_share)
             + rng.normal(0, 0.15, len(zones)))
    inten = np.exp(log_i)
    inten /= inten.mean()
    intensity = {z.zone_id: float(v) for z, v in zip(zones, inten)}
    planted = {
        z.zone_id: {"log_population_density": float(d), "car_share": float(cs), "cafe_share": float(cf)}
        for z, d, cs, cf in zip(zones, zone_logdens, zone_car, cafe_share)
    }

    # paths: footpath strips along every street, cycle lanes along zone edges,
    # shared-path loops in the two most recreational zones
    paths = []
    for k in range(2 * g + 1):
        v = -half + k * s / 2
        paths.append(PathGeometry(PathKind.FOOTPATH, Polygon(_rect(-half, v - 1.5, half, v + 1.5))))
        paths.append(PathGeometry(PathKind.FOOTPATH, Polygon(_rect(v - 1.5, -half, v + 1.5, half))))
    for k in range(1, g):
        v = -half + k * s + 6.0
        paths.append(PathGeometry(PathKind.CYCLE_LANE, Polyline([(-half, v), (half, v)])))
        paths.append(PathGeometry(PathKind.CYCLE_LANE, Polyline([(v, -half), (v, half)])))
    rec_counts = {}
    for p in pois:
        if p.category is PoiCategory.RECREATION:
            q = proj.project(p.location)
            col, row = int((q.x + half) // s), int((q.y + half) // s)
            rec_counts[(row, col)] = rec_counts.get((row, col), 0) + 1
    parks = sorted(cells, key=lambda rc: (-rec_counts.get(rc, 0), rc))[:2]
    for r, c in parks:
        x0, y0 = -half + c * s + 60, -half + r * s + 60
        x1, y1 = x0 + s - 120, y0 + s - 120
        paths.append(PathGeometry(
            PathKind.SHARED_PATH, Polyline([(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0 + 1)]), 1.5
        ))
    return City(proj, zones, pois, paths, census, intensity, planted)


# --- sampling helpers -------------------------------------------------------


def _sample_points(rng, city: City, n: int, path_bias: float = 0.0) -> np.ndarray:
    """Intensity-weighted locations; with prob ``path_bias`` snapped within 5 m of a footpath."""
    sq = city.zone_squares
    w = np.array([city.intensity[z.zone_id] for z in city.zones])
    zi = rng.choice(len(sq), size=n, p=w / w.sum())
    u = rng.random((n, 2))
    pts = sq[zi, :2] + u * (sq[zi, 2:] - sq[zi, :2])
    if path_bias > 0:
        snap = rng.random(n) < path_bias
        foot = city.footpaths
        for i in np.nonzero(snap)[0]:
            strip = foot[rng.integers(len(foot))].shape.bounds
            horizontal = (strip[2] - strip[0]) > (strip[3] - strip[1])
            along = rng.uniform(0, 1)
            off = rng.uniform(-6.5, 6.5)
            if horizontal:
                pts[i] = (strip[0] + along * (strip[2] - strip[0]), 0.5 * (strip[1] + strip[3]) + off)
            else:
                pts[i] = (0.5 * (strip[0] + strip[2]) + off, strip[1] + along * (strip[3] - strip[1]))
    return pts


def _jitter(rng, n: int, radius: float) -> np.ndarray:
    if radius <= 0:
        return np.zeros((n, 2))
    r = radius * np.sqrt(rng.random(n))
    th = rng.uniform(0, 2 * np.pi, n)
    return np.c_[r * np.cos(th), r * np.sin(th)]


def demand_profile(ts: datetime, tz=DEFAULT_TZ) -> float:
    local = ts.astimezone(as_zone(tz))
    prof = WEEKEND_PROFILE if local.weekday() >= 5 else WEEKDAY_PROFILE
    return float(prof[local.hour])


def _vehicle_id(seed: int, vehicle: int, epoch: int) -> str:
    return hashlib.blake2b(f"{seed}:{vehicle}:{epoch}".encode(), digest_size=8).hexdigest()


# --- weather ----------------------------------------------------------------


def gen_weather(spec: SynthSpec, hours: int) -> tuple[list[WeatherRecord], WeatherEffects]:
    """Hourly diurnal weather with AR(1) noise, and the planted effects."""
    rng = _rng(spec, 3)
    zone = as_zone(spec.tz)
    recs = []
    t_noise = h_noise = w_noise = 0.0
    raining = False
    for h in range(hours):
        ts = spec.start + timedelta(hours=h)
        lh = ts.astimezone(zone).hour
        t_noise = 0.85 * t_noise + rng.normal(0, 0.8)
        h_noise = 0.85 * h_noise + rng.normal(0, 4.5)
        w_noise = 0.8 * w_noise + rng.normal(0, 1.4)
        raining = rng.random() < (0.6 if raining else 0.06)
        temp = 12.9 + 3.0 * math.sin(2 * math.pi * (lh - 9) / 24) + t_noise
        hum = 75.1 - 2.0 * (temp - 12.9) + h_noise + (12.0 if raining else 0.0)
        precip = float(rng.exponential(0.5)) if raining else 0.0
        wind = max(0.0, 5.9 + 1.2 * math.sin(2 * math.pi * (lh - 12) / 24) + w_noise)
        recs.append(WeatherRecord(ts, round(min(100.0, max(30.0, hum)), 2), round(precip, 2),
                                  round(temp, 2), round(wind, 2)))
    return recs, spec.weather


def gen_hourly_trip_counts(spec: SynthSpec, weather: list[WeatherRecord],
                           base_per_hour: float = 80.0) -> np.ndarray:
    """Poisson hourly start counts driven by the demand profile and weather."""
    rng = _rng(spec, 4)
    lam = np.array([
        base_per_hour * demand_profile(w.hour_start, spec.tz) * spec.weather.multiplier(w)
        for w in weather
    ])
    return rng.poisson(lam)


# --- fleet simulation -------------------------------------------------------


def gen_snapshots(
    spec: SynthSpec,
    city: City,
    duration: timedelta = timedelta(hours=24),
    weather: list[WeatherRecord] | None = None,
) -> tuple[list[Snapshot], list[TripEvent]]:
    """Minute-by-minute fleet simulation.

    Returns one snapshot per minute and the true trip events. A trip started
    at minute ``m`` hides the vehicle from snapshot ``m`` onwards until it
    reappears at the destination; IDs of visible vehicles change at every
    ``rotation_interval`` boundary. The simulation never lets a trip end
    within ``rotation_radius + 2 * gps_jitter`` of a trip start in the same
    minute, which is the condition under which starts and stops are
    distinguishable from ID rotation.
    """
    rng = _rng(spec, 2)
    n_min = int(duration.total_seconds() // 60)
    n_v = spec.n_vehicles
    if weather is None:
        weather, _ = gen_weather(spec, n_min // 60 + 1)
    wmult = np.array([spec.weather.multiplier(w) for w in weather])
    proj = city.projection
    exclusion = spec.rotation_radius + 2 * spec.gps_jitter

    pos = _sample_points(rng, city, n_v)
    geo = [proj.unproject(_pp(p)) for p in pos]
    riding_until = np.full(n_v, -1)
    battery = rng.uniform(40, 100, n_v).round(0)
    snapshots, truth = [], []

    for m in range(n_min):
        ts = spec.start + timedelta(minutes=m)
        if m > 0:
            hazard = (spec.trips_per_vehicle_hour / 60.0 * demand_profile(ts, spec.tz)
                      * wmult[min(m // 60, len(wmult) - 1)])
            u = rng.random(n_v)
            starting = np.nonzero((riding_until < 0) & (u < hazard))[0]
            for v in starting:
                truth.append(TripEvent(EventKind.START, geo[v], ts, float(battery[v])))
                dur = int(rng.integers(spec.min_trip_minutes, spec.max_trip_minutes + 1))
                riding_until[v] = m + dur
                battery[v] = max(5.0, battery[v] - round(0.5 * dur))
            start_xy = pos[starting]
            for v in np.nonzero(riding_until == m)[0]:
                for _ in range(1000):
                    dest = _sample_points(rng, city, 1, spec.stop_path_bias)[0]
                    if not len(start_xy) or np.hypot(*(start_xy - dest).T).min() > exclusion:
                        break
                pos[v] = dest
                geo[v] = proj.unproject(_pp(dest))
                riding_until[v] = -1
                truth.append(TripEvent(EventKind.STOP, geo[v], ts, float(battery[v])))

        parked = np.nonzero(riding_until < 0)[0]
        epoch = m // spec.rotation_interval
        jit = _jitter(rng, len(parked), spec.gps_jitter)
        obs = []
        for v, dj in zip(parked, jit):
            loc = geo[v] if spec.gps_jitter <= 0 else proj.unproject(_pp(pos[v] + dj))
            obs.append(VehicleObservation(_vehicle_id(spec.seed, int(v), epoch), loc, ts,
                                          float(battery[v])))
        snapshots.append(Snapshot(ts, tuple(obs)))
    return snapshots, truth


def _pp(xy) -> PlanarPoint:
    return PlanarPoint(float(xy[0]), float(xy[1]))


def gen_trip_events(
    spec: SynthSpec,
    city: City,
    days: int,
    starts_per_day: float = 200.0,
    stop_path_bias: float | None = None,
) -> list[TripEvent]:
    """Start/stop events drawn directly (no fleet simulation).

    Each hour gets Poisson(profile-scaled) starts and as many stops, at
    intensity-weighted locations; ``stop_path_bias`` snaps that fraction of
    stops to within 5 m of a footpath.
    """
    rng = _rng(spec, 5)
    bias = spec.stop_path_bias if stop_path_bias is None else stop_path_bias
    proj = city.projection
    mean_profile = 0.5 * (WEEKDAY_PROFILE.mean() + WEEKEND_PROFILE.mean())
    events = []
    for h in range(days * 24):
        hour = spec.start + timedelta(hours=h)
        lam = starts_per_day / 24 * demand_profile(hour, spec.tz) / mean_profile
        n = int(rng.poisson(lam))
        for kind, b in ((EventKind.START, 0.0), (EventKind.STOP, bias)):
            xy = _sample_points(rng, city, n, b)
            secs = np.sort(rng.integers(0, 3600, n))
            lat, lon = proj.unproject_xy(xy)
            events += [
                TripEvent(kind, GeoPoint(float(a), float(o)), hour + timedelta(seconds=int(t)))
                for a, o, t in zip(lat, lon, secs)
            ]
    return events
