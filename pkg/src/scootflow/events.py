"""Columnar view of trip events: planar coordinates plus local calendar fields."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from scootflow.geo import LocalProjection
from scootflow.ingest.trips import EventKind, TripEvent
from scootflow.timeframes import DEFAULT_TZ, TimeFrame, local_calendar


@dataclass(frozen=True, eq=False)
class EventTable:
    xy: np.ndarray  # (n, 2) meters
    is_start: np.ndarray
    epoch: np.ndarray  # UTC seconds
    weekday: np.ndarray  # local, Mon=0
    hour: np.ndarray  # local
    day: np.ndarray  # local date ordinal

    @classmethod
    def from_events(cls, events: list[TripEvent], projection: LocalProjection, tz=DEFAULT_TZ):
        lat = np.array([e.location.lat for e in events], dtype=float)
        lon = np.array([e.location.lon for e in events], dtype=float)
        times = [e.raw_time for e in events]
        wd, hr, day = local_calendar(times, tz)
        return cls(
            xy=projection.project_xy(lat, lon),
            is_start=np.array([e.kind is EventKind.START for e in events], dtype=bool),
            epoch=np.array([int(t.timestamp()) for t in times], dtype=np.int64),
            weekday=wd,
            hour=hr,
            day=day,
        )

    def __len__(self):
        return len(self.epoch)

    def select(self, mask) -> "EventTable":
        return EventTable(
            self.xy[mask], self.is_start[mask], self.epoch[mask],
            self.weekday[mask], self.hour[mask], self.day[mask],
        )

    def kind(self, kind: EventKind | str) -> "EventTable":
        kind = EventKind(kind)
        return self.select(self.is_start if kind is EventKind.START else ~self.is_start)

    def frame_mask(self, frame: TimeFrame) -> np.ndarray:
        return frame.mask(self.weekday, self.hour)

    def in_frame(self, frame: TimeFrame) -> "EventTable":
        return self.select(self.frame_mask(frame))


def epoch_to_datetime(sec: int) -> datetime:
    return datetime.fromtimestamp(int(sec), tz=timezone.utc)
