"""Trip-start / trip-stop inference from consecutive availability snapshots.

A vehicle that vanishes from the available list has started a trip; one that
appears has ended one. The feed re-issues vehicle IDs periodically, which
shows up as a vanish/appear pair at (nearly) the same spot in the same
transition; such pairs are matched and dropped.
"""

from __future__ import annotations

import csv
import enum
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from scootflow.errors import DomainError, SchemaError
from scootflow.geo import EARTH_RADIUS_M, GeoPoint
from scootflow.ingest.feed import PollerConfig, Snapshot
from scootflow.timeframes import floor_time, format_utc, parse_utc

BUCKET_MINUTES = 15


class EventKind(str, enum.Enum):
    START = "start"
    STOP = "stop"


@dataclass(frozen=True)
class TripEvent:
    kind: EventKind
    location: GeoPoint
    raw_time: datetime
    battery_pct: float | None = field(default=None, compare=False)
    bucket_start: datetime = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", EventKind(self.kind))
        object.__setattr__(self, "bucket_start", floor_time(self.raw_time, BUCKET_MINUTES))


def match_rotations(gone: dict, new: dict, radius: float) -> list[tuple[str, str]]:
    """Greedy nearest pairing of vanished and appeared IDs within ``radius``.

    ``gone`` and ``new`` map vehicle_id -> GeoPoint. Candidate pairs are
    taken in order of increasing distance (ties by ID) and each ID is used
    at most once.
    """
    if not gone or not new:
        return []
    gids, nids = sorted(gone), sorted(new)
    glat = np.radians([gone[g].lat for g in gids])[:, None]
    glon = np.radians([gone[g].lon for g in gids])[:, None]
    nlat = np.radians([new[n].lat for n in nids])[None, :]
    nlon = np.radians([new[n].lon for n in nids])[None, :]
    dx = (nlon - glon) * np.cos(0.5 * (glat + nlat))
    dist = EARTH_RADIUS_M * np.hypot(dx, nlat - glat)
    gi, ni = np.nonzero(dist <= radius)
    # lexsort keys: last is primary -> distance, then gone id, then new id
    order = np.lexsort((ni, gi, dist[gi, ni]))
    used_g, used_n, pairs = set(), set(), []
    for gid, nid in ((gids[gi[o]], nids[ni[o]]) for o in order):
        if gid in used_g or nid in used_n:
            continue
        used_g.add(gid)
        used_n.add(nid)
        pairs.append((gid, nid))
    return pairs


def derive_trips(snapshots: Sequence[Snapshot], config: PollerConfig) -> list[TripEvent]:
    """Infer trip events from an ordered snapshot sequence.

    A start is stamped with the first snapshot the vehicle is missing from
    and located at its last observed position; a stop is stamped and located
    at the reappearance. A vehicle absent for fewer than
    ``config.min_absence`` snapshots before reappearing under the same ID is
    treated as GPS flicker and yields nothing. Vehicles still absent when
    the log ends yield a start only.
    """
    for a, b in zip(snapshots, snapshots[1:]):
        if b.taken_at <= a.taken_at:
            raise DomainError(
                f"snapshots not strictly increasing at {format_utc(b.taken_at)}"
            )

    present = [s.by_id() for s in snapshots]
    k_total = len(snapshots)
    events: list[TripEvent] = []
    flicker_returns: set[tuple[str, int]] = set()

    for k in range(1, k_total):
        prev, cur = present[k - 1], present[k]
        gone = {vid: prev[vid].location for vid in prev.keys() - cur.keys()}
        new = {vid: cur[vid].location for vid in cur.keys() - prev.keys()}
        for gid, nid in match_rotations(gone, new, config.rotation_radius):
            del gone[gid]
            del new[nid]

        for vid in sorted(gone):
            back = None
            for j in range(k + 1, min(k + config.min_absence, k_total)):
                if vid in present[j]:
                    back = j
                    break
            if back is not None:
                flicker_returns.add((vid, back))
                continue
            obs = prev[vid]
            events.append(
                TripEvent(EventKind.START, obs.location, snapshots[k].taken_at, obs.battery_pct)
            )
        for vid in sorted(new):
            if (vid, k) in flicker_returns:
                continue
            obs = cur[vid]
            events.append(
                TripEvent(EventKind.STOP, obs.location, snapshots[k].taken_at, obs.battery_pct)
            )

    if config.battery_filter:
        events = drop_recharged_stops(events, config.battery_jump, config.battery_window_min)
    return events


def drop_recharged_stops(
    events: list[TripEvent], jump: float = 30.0, window_min: float = 60.0
) -> list[TripEvent]:
    """Drop stops whose battery exceeds every recent start's battery by > ``jump``.

    A ridden vehicle comes back with less charge than it left with; one that
    reappears far fuller than anything that left in the preceding window was
    most likely collected for charging. Events without battery data are kept.
    """
    starts = sorted(
        (e.raw_time, e.battery_pct) for e in events
        if e.kind is EventKind.START and e.battery_pct is not None
    )
    window = timedelta(minutes=window_min)
    keep = []
    for e in events:
        if e.kind is EventKind.STOP and e.battery_pct is not None:
            prior = [b for t, b in starts if e.raw_time - window <= t < e.raw_time]
            if prior and e.battery_pct > max(prior) + jump:
                continue
        keep.append(e)
    return keep


def bucket_events(events: Iterable[TripEvent]) -> dict[tuple[datetime, EventKind], int]:
    """Count events per (15-minute bucket, kind)."""
    return dict(Counter((e.bucket_start, e.kind) for e in events))


EVENT_FIELDS = ("kind", "lat", "lon", "raw_time", "bucket_start")


def write_events_csv(path: Path | str, events: Iterable[TripEvent], header_comment: str = "") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_FIELDS)
        for e in events:
            w.writerow(
                [e.kind.value, repr(e.location.lat), repr(e.location.lon),
                 format_utc(e.raw_time), format_utc(e.bucket_start)]
            )


def read_events_csv(path: Path | str) -> list[TripEvent]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        missing = set(EVENT_FIELDS[:4]) - set(rows.fieldnames or ())
        if missing:
            raise SchemaError(f"{path}: events CSV missing column(s) {sorted(missing)}")
        return [
            TripEvent(EventKind(r["kind"]), GeoPoint(float(r["lat"]), float(r["lon"])),
                      parse_utc(r["raw_time"]))
            for r in rows
        ]
