"""Weekday/weekend x hour-band time frames, evaluated in local civil time."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from zoneinfo import ZoneInfo

import numpy as np

DEFAULT_TZ = "Australia/Melbourne"


class DayClass(str, enum.Enum):
    WEEKDAY = "weekday"
    WEEKEND = "weekend"


class HourBand(str, enum.Enum):
    H0_5 = "0-5"
    H6_10 = "6-10"
    H11_15 = "11-15"
    H16_18 = "16-18"
    H19_23 = "19-23"

    @property
    def hours(self) -> range:
        lo, hi = (int(v) for v in self.value.split("-"))
        return range(lo, hi + 1)


HOUR_TO_BAND = tuple(b for h in range(24) for b in HourBand if h in b.hours)


@dataclass(frozen=True)
class TimeFrame:
    """A (day class, hour band) cell; both None is the whole study period."""

    day_class: DayClass | None = None
    hour_band: HourBand | None = None

    @property
    def label(self) -> str:
        if self.day_class is None and self.hour_band is None:
            return "all"
        parts = [p.value for p in (self.day_class, self.hour_band) if p is not None]
        return "_".join(parts)

    @classmethod
    def parse(cls, label: str) -> "TimeFrame":
        if label == "all":
            return WHOLE_PERIOD
        day, _, band = label.partition("_")
        return cls(DayClass(day), HourBand(band) if band else None)

    def mask(self, weekday: np.ndarray, hour: np.ndarray) -> np.ndarray:
        """Membership for arrays of local weekday (Mon=0) and local hour."""
        weekday = np.asarray(weekday)
        hour = np.asarray(hour)
        m = np.ones(weekday.shape, dtype=bool)
        if self.day_class is not None:
            weekend = weekday >= 5
            m &= weekend if self.day_class is DayClass.WEEKEND else ~weekend
        if self.hour_band is not None:
            r = self.hour_band.hours
            m &= (hour >= r.start) & (hour < r.stop)
        return m

    def contains(self, ts: datetime, tz: ZoneInfo | str = DEFAULT_TZ) -> bool:
        local = to_local(ts, tz)
        return bool(self.mask(np.array([local.weekday()]), np.array([local.hour]))[0])


WHOLE_PERIOD = TimeFrame()
TEN_FRAMES = tuple(TimeFrame(d, b) for d in DayClass for b in HourBand)


def as_zone(tz) -> ZoneInfo:
    return tz if isinstance(tz, ZoneInfo) else ZoneInfo(tz)


def to_local(ts: datetime, tz) -> datetime:
    if ts.tzinfo is None:
        raise ValueError("naive datetime; timestamps must be timezone-aware UTC")
    return ts.astimezone(as_zone(tz))


def local_calendar(times, tz) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(weekday, hour, local date ordinal) arrays for aware datetimes."""
    zone = as_zone(tz)
    n = len(times)
    wd = np.empty(n, dtype=np.int64)
    hr = np.empty(n, dtype=np.int64)
    day = np.empty(n, dtype=np.int64)
    for i, t in enumerate(times):
        loc = t.astimezone(zone)
        wd[i] = loc.weekday()
        hr[i] = loc.hour
        day[i] = loc.toordinal()
    return wd, hr, day


def floor_time(ts: datetime, minutes: int) -> datetime:
    """Floor an aware UTC datetime to a multiple of ``minutes``."""
    ts = ts.astimezone(timezone.utc)
    step = minutes * 60
    epoch = int(ts.timestamp())
    return datetime.fromtimestamp(epoch - epoch % step, tz=timezone.utc)


def parse_utc(text: str) -> datetime:
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_utc(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def hour_range(start: datetime, end: datetime) -> list[datetime]:
    """Hour starts from ``start`` to ``end`` inclusive (both floored)."""
    cur, stop = floor_time(start, 60), floor_time(end, 60)
    out = []
    while cur <= stop:
        out.append(cur)
        cur += timedelta(hours=1)
    return out
