"""Append-only NDJSON snapshot log and the scheduled poller that feeds it.

One line per snapshot::

    {"ts": "2022-08-01T00:00:00Z", "bikes": [{"id": ..., "lat": ..., "lon": ..., "battery": ...}]}

A line is only complete once its trailing newline is written, so readers can
tail the file while the poller appends, and a crash mid-write leaves a
detectable partial record.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Callable, Iterable, Iterator

from scootflow.errors import FeedError, FeedParseError
from scootflow.geo import GeoPoint
from scootflow.ingest.feed import (
    PollerConfig,
    Snapshot,
    VehicleObservation,
    http_fetch,
    poll_once,
    utc_now,
)
from scootflow.timeframes import format_utc, parse_utc

logger = logging.getLogger(__name__)


def snapshot_to_line(snap: Snapshot) -> str:
    bikes = [
        {"id": o.vehicle_id, "lat": o.location.lat, "lon": o.location.lon, "battery": o.battery_pct}
        for o in snap.observations
    ]
    return json.dumps({"ts": format_utc(snap.taken_at), "bikes": bikes}, separators=(",", ":"))


def snapshot_from_line(line: str) -> Snapshot:
    rec = json.loads(line)
    ts = parse_utc(rec["ts"])
    return Snapshot(
        ts,
        tuple(
            VehicleObservation(b["id"], GeoPoint(b["lat"], b["lon"]), ts, b.get("battery"))
            for b in rec["bikes"]
        ),
    )


class SnapshotLog:
    def __init__(self, path: Path | str):
        self.path = Path(path)

    def repair(self) -> int:
        """Truncate a partial trailing record; returns bytes removed."""
        if not self.path.exists():
            return 0
        with open(self.path, "rb+") as fh:
            fh.seek(0, os.SEEK_END)
            size = fh.tell()
            if size == 0:
                return 0
            fh.seek(size - 1)
            if fh.read(1) == b"\n":
                return 0
            # scan backwards for the last complete record
            pos = size
            chunk = 4096
            keep = 0
            while pos > 0:
                start = max(0, pos - chunk)
                fh.seek(start)
                buf = fh.read(pos - start)
                idx = buf.rfind(b"\n")
                if idx >= 0:
                    keep = start + idx + 1
                    break
                pos = start
            fh.truncate(keep)
        removed = size - keep
        logger.warning("repaired snapshot log %s: dropped %d byte partial record", self.path, removed)
        return removed

    def append(self, snap: Snapshot) -> None:
        data = (snapshot_to_line(snap) + "\n").encode("utf-8")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "ab") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())

    def __iter__(self) -> Iterator[Snapshot]:
        if not self.path.exists():
            return
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.endswith("\n"):
                    break  # writer is mid-record
                if line.strip():
                    yield snapshot_from_line(line)

    def read(self) -> list[Snapshot]:
        return list(self)


def write_snapshots(path: Path | str, snapshots: Iterable[Snapshot]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for snap in snapshots:
            fh.write(snapshot_to_line(snap) + "\n")


@dataclass
class PollerStats:
    ticks: int = 0
    records: int = 0
    failures: int = 0
    missed: int = 0


def run_poller(
    config: PollerConfig,
    *,
    fetch: Callable[[PollerConfig], bytes] = http_fetch,
    clock: Callable[[], datetime] = utc_now,
    sleep: Callable[[float], None] = time.sleep,
    max_ticks: int | None = None,
    stop: threading.Event | None = None,
) -> PollerStats:
    """Poll ``config.endpoint_url`` every ``config.interval`` seconds.

    Transient fetch/parse failures are logged and the next tick proceeds.
    Ticks missed because a poll overran are skipped, never back-filled.
    Errors writing the log propagate.
    """
    log = SnapshotLog(config.snapshot_log_path)
    log.repair()
    stats = PollerStats()
    step = timedelta(seconds=config.interval)
    next_tick = clock()
    while not (stop is not None and stop.is_set()):
        try:
            snap = poll_once(config, fetch=fetch, clock=clock)
        except (FeedError, FeedParseError) as exc:
            stats.failures += 1
            logger.warning("poll failed: %s", exc)
        else:
            log.append(snap)
            stats.records += 1
        stats.ticks += 1
        if max_ticks is not None and stats.ticks >= max_ticks:
            break
        next_tick += step
        now = clock()
        if now > next_tick:
            skipped = int((now - next_tick) / step) + 1
            stats.missed += skipped
            logger.warning("poll overran; skipping %d tick(s)", skipped)
            next_tick += skipped * step
        sleep((next_tick - now).total_seconds())
    return stats
