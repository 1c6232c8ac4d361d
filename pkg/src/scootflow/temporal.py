"""Hourly design matrix: trip counts joined to weather and calendar dummies."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Mapping, Sequence

import numpy as np

from scootflow.errors import DomainError
from scootflow.events import EventTable, epoch_to_datetime
from scootflow.geo import MultiPolygon, Polygon, region_contains_xy
from scootflow.regress.matrix import FeatureMatrix
from scootflow.timeframes import DEFAULT_TZ, HOUR_TO_BAND, HourBand, format_utc, to_local

logger = logging.getLogger(__name__)

WEATHER_FIELDS = ("humidity", "precipitation", "temperature", "wind_speed")
# Friday and the 0-5 band are the omitted reference levels
DAY_DUMMIES = ("mon", "tue", "wed", "thu", "sat", "sun")
_WEEKDAY_TO_DUMMY = {0: 0, 1: 1, 2: 2, 3: 3, 5: 4, 6: 5}
BAND_DUMMIES = ("h6_10", "h11_15", "h16_18", "h19_23")
_BAND_TO_DUMMY = {HourBand.H6_10: 0, HourBand.H11_15: 1, HourBand.H16_18: 2, HourBand.H19_23: 3}
TEMPORAL_COLUMNS = WEATHER_FIELDS + DAY_DUMMIES + BAND_DUMMIES

MPH_PER_KMH = 0.621371192
MPH_PER_MS = 2.236936292


def kmh_to_mph(v: float) -> float:
    return v * MPH_PER_KMH


def ms_to_mph(v: float) -> float:
    return v * MPH_PER_MS


@dataclass(frozen=True)
class WeatherRecord:
    """One hour of weather; ``None`` marks a missing reading."""

    hour_start: datetime
    humidity: float | None
    precipitation: float | None
    temperature: float | None
    wind_speed: float | None

    def __post_init__(self):
        if self.hour_start.tzinfo is None:
            raise DomainError("weather hour_start must be timezone-aware")
        if self.hour_start.minute or self.hour_start.second or self.hour_start.microsecond:
            raise DomainError(f"weather hour {self.hour_start} not aligned to the hour")
        if self.humidity is not None and not 0 <= self.humidity <= 100:
            raise DomainError(f"humidity {self.humidity} outside [0, 100]")
        if self.precipitation is not None and self.precipitation < 0:
            raise DomainError(f"negative precipitation {self.precipitation}")


@dataclass(frozen=True)
class HourlyRow:
    hour_start: datetime
    trip_count: int
    humidity: float
    precipitation: float
    temperature: float
    wind_speed: float
    day_dummies: tuple[int, ...]
    band_dummies: tuple[int, ...]

    def __post_init__(self):
        if self.trip_count < 0:
            raise DomainError("negative trip count")
        if sum(self.day_dummies) > 1 or sum(self.band_dummies) > 1:
            raise DomainError("more than one calendar dummy set")


def _floor_hour_epoch(epoch: np.ndarray) -> np.ndarray:
    return epoch - epoch % 3600


def hourly_counts(
    events: EventTable,
    zone_filter: Polygon | MultiPolygon | None = None,
    hours: tuple[datetime, datetime] | None = None,
) -> dict[datetime, int]:
    """Trip starts per clock hour, optionally only those inside ``zone_filter``.

    The series covers ``hours`` (inclusive) or, by default, every hour from
    the first to the last event in ``events``, so a filter that matches
    nothing yields an all-zero series.
    """
    starts = events.select(events.is_start)
    if hours is None:
        if not len(starts):
            return {}
        first, last = int(starts.epoch.min()), int(starts.epoch.max())
    else:
        first, last = (int(h.timestamp()) for h in hours)
    first -= first % 3600
    last -= last % 3600
    if zone_filter is not None and len(starts):
        starts = starts.select(region_contains_xy(starts.xy, zone_filter))
    keys = np.arange(first, last + 3600, 3600, dtype=np.int64)
    counts = np.zeros(len(keys), dtype=np.int64)
    if len(starts):
        h = _floor_hour_epoch(starts.epoch)
        inside = (h >= first) & (h <= last)
        np.add.at(counts, (h[inside] - first) // 3600, 1)
    return {epoch_to_datetime(k): int(c) for k, c in zip(keys, counts)}


def _fill_short_gaps(values: np.ndarray, max_gap: int) -> np.ndarray:
    out = values.copy()
    isnan = np.isnan(out)
    i, n = 0, len(out)
    while i < n:
        if not isnan[i]:
            i += 1
            continue
        j = i
        while j < n and isnan[j]:
            j += 1
        if i > 0 and j < n and j - i <= max_gap:
            lo, hi = out[i - 1], out[j]
            for k in range(i, j):
                out[k] = lo + (hi - lo) * (k - i + 1) / (j - i + 1)
        i = j
    return out


def encode_calendar(hour_start: datetime, tz=DEFAULT_TZ) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """One-hot day-of-week (Friday reference) and hour band (0-5 reference)."""
    local = to_local(hour_start, tz)
    day = [0] * len(DAY_DUMMIES)
    idx = _WEEKDAY_TO_DUMMY.get(local.weekday())
    if idx is not None:
        day[idx] = 1
    band = [0] * len(BAND_DUMMIES)
    bidx = _BAND_TO_DUMMY.get(HOUR_TO_BAND[local.hour])
    if bidx is not None:
        band[bidx] = 1
    return tuple(day), tuple(band)


def decode_calendar(day_dummies, band_dummies) -> tuple[str, HourBand]:
    """Inverse of :func:`encode_calendar` up to the (day name, band) level."""
    day = DAY_DUMMIES[day_dummies.index(1)] if 1 in day_dummies else "fri"
    band = HourBand.H0_5
    if 1 in band_dummies:
        band = next(b for b, i in _BAND_TO_DUMMY.items() if i == band_dummies.index(1))
    return day, band


def join_weather(
    counts: Mapping[datetime, int],
    weather: Sequence[WeatherRecord],
    tz=DEFAULT_TZ,
    max_gap: int = 3,
) -> list[HourlyRow]:
    """Inner-join hourly counts with weather.

    Missing weather (absent hours or ``None`` fields) is linearly
    interpolated across runs of at most ``max_gap`` hours; hours inside
    longer gaps are dropped and the number dropped is logged.
    """
    seen = set()
    for w in weather:
        key = w.hour_start.astimezone(timezone.utc)
        if key in seen:
            raise DomainError(f"duplicate weather hour {format_utc(key)}")
        seen.add(key)
    if not weather:
        return []
    ordered = sorted(weather, key=lambda w: w.hour_start)
    t0 = int(ordered[0].hour_start.timestamp())
    t1 = int(ordered[-1].hour_start.timestamp())
    n = (t1 - t0) // 3600 + 1
    grid = {f: np.full(n, np.nan) for f in WEATHER_FIELDS}
    for w in ordered:
        i = (int(w.hour_start.timestamp()) - t0) // 3600
        for f in WEATHER_FIELDS:
            v = getattr(w, f)
            if v is not None and not (isinstance(v, float) and math.isnan(v)):
                grid[f][i] = v
    grid = {f: _fill_short_gaps(v, max_gap) for f, v in grid.items()}

    rows, dropped = [], 0
    for hour in sorted(counts):
        i = (int(hour.timestamp()) - t0) // 3600
        if not 0 <= i < n:
            continue
        vals = [grid[f][i] for f in WEATHER_FIELDS]
        if any(np.isnan(v) for v in vals):
            dropped += 1
            continue
        day, band = encode_calendar(hour, tz)
        rows.append(HourlyRow(hour, int(counts[hour]), *map(float, vals), day, band))
    if dropped:
        logger.info("dropped %d hour(s) inside weather gaps longer than %d h", dropped, max_gap)
    return rows


def build_temporal_matrix(rows: Sequence[HourlyRow]) -> FeatureMatrix:
    if not rows:
        raise DomainError("no hourly rows to build a matrix from")
    X = np.array(
        [
            [r.humidity, r.precipitation, r.temperature, r.wind_speed, *r.day_dummies, *r.band_dummies]
            for r in rows
        ],
        dtype=float,
    )
    return FeatureMatrix(
        TEMPORAL_COLUMNS, X, [r.trip_count for r in rows], tuple(format_utc(r.hour_start) for r in rows)
    )


def count_days(first: date, last: date) -> tuple[int, int]:
    """(weekdays, weekend days) in the inclusive date range."""
    wd = we = 0
    d = first
    while d <= last:
        if d.weekday() >= 5:
            we += 1
        else:
            wd += 1
        d += timedelta(days=1)
    return wd, we


def per_day(total: float, n_days: int) -> float:
    if n_days < 1:
        raise DomainError("n_days must be >= 1")
    return total / n_days
