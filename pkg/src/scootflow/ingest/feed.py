"""GBFS ``free_bike_status`` fetching and parsing."""

from __future__ import annotations

import json
import logging
import socket
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from scootflow.errors import DomainError, FeedError, FeedParseError
from scootflow.geo import GeoPoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VehicleObservation:
    vehicle_id: str
    location: GeoPoint
    observed_at: datetime
    battery_pct: float | None = None

    def __post_init__(self):
        if not self.vehicle_id:
            raise DomainError("empty vehicle_id")


@dataclass(frozen=True)
class Snapshot:
    taken_at: datetime
    observations: tuple[VehicleObservation, ...] = ()

    def __post_init__(self):
        ids = [o.vehicle_id for o in self.observations]
        if len(set(ids)) != len(ids):
            raise DomainError("duplicate vehicle_id within snapshot")

    def by_id(self) -> dict[str, VehicleObservation]:
        return {o.vehicle_id: o for o in self.observations}


@dataclass(frozen=True)
class PollerConfig:
    endpoint_url: str
    snapshot_log_path: Path | str = "snapshots.ndjson"
    interval: float = 60.0
    rotation_radius: float = 15.0
    min_absence: int = 1
    timeout: float = 20.0
    battery_filter: bool = False
    battery_jump: float = 30.0
    battery_window_min: float = 60.0
    extra_headers: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.interval < 10:
            raise DomainError("poll interval must be at least 10 s")
        if self.rotation_radius < 0:
            raise DomainError("rotation_radius must be >= 0")
        if self.min_absence < 1:
            raise DomainError("min_absence must be >= 1")


def _number(bike: dict, key: str, index: int) -> float:
    if key not in bike:
        raise FeedParseError(f"bikes[{index}] is missing '{key}'", index=index)
    value = bike[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise FeedParseError(f"bikes[{index}].{key} is not numeric", index=index) from None
    return float(value)


def _battery(bike: dict) -> float | None:
    if "current_fuel_percent" in bike:
        # GBFS 2.3 expresses fuel as a 0-1 fraction
        v = float(bike["current_fuel_percent"])
        return v * 100.0 if v <= 1.0 else v
    for key in ("battery_pct", "battery_level", "battery"):
        if key in bike and bike[key] is not None:
            return float(bike[key])
    return None


def parse_free_bike_status(body: bytes | str, taken_at: datetime) -> Snapshot:
    """Parse a ``free_bike_status`` document into a Snapshot.

    Disabled vehicles are skipped; unknown fields are ignored.
    """
    text = body.decode("utf-8") if isinstance(body, (bytes, bytearray)) else body
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise FeedParseError(f"invalid JSON at byte {offset}: {exc.msg}", offset=offset) from None
    try:
        bikes = doc["data"]["bikes"]
    except (KeyError, TypeError):
        raise FeedParseError("document has no data.bikes array") from None
    if not isinstance(bikes, list):
        raise FeedParseError("data.bikes is not an array")

    seen = set()
    obs = []
    for i, bike in enumerate(bikes):
        if not isinstance(bike, dict):
            raise FeedParseError(f"bikes[{i}] is not an object", index=i)
        bike_id = bike.get("bike_id")
        if not bike_id:
            raise FeedParseError(f"bikes[{i}] is missing 'bike_id'", index=i)
        bike_id = str(bike_id)
        if bike_id in seen:
            raise FeedParseError(f"duplicate bike_id {bike_id!r} at bikes[{i}]", index=i)
        seen.add(bike_id)
        lat = _number(bike, "lat", i)
        lon = _number(bike, "lon", i)
        if bike.get("is_disabled") in (True, 1, "true"):
            continue
        try:
            loc = GeoPoint(lat, lon)
        except DomainError as exc:
            raise FeedParseError(f"bikes[{i}]: {exc}", index=i) from None
        obs.append(VehicleObservation(bike_id, loc, taken_at, _battery(bike)))
    return Snapshot(taken_at, tuple(obs))


def http_fetch(config: PollerConfig) -> bytes:
    req = urllib.request.Request(
        config.endpoint_url, headers={"Accept": "application/json", **config.extra_headers}
    )
    try:
        with urllib.request.urlopen(req, timeout=config.timeout) as resp:
            return resp.read()
    except (urllib.error.URLError, socket.timeout, ConnectionError) as exc:
        raise FeedError(f"fetch of {config.endpoint_url} failed: {exc}") from exc


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def poll_once(
    config: PollerConfig,
    fetch: Callable[[PollerConfig], bytes] = http_fetch,
    clock: Callable[[], datetime] = utc_now,
) -> Snapshot:
    """Fetch and parse one snapshot, stamped with the local poll time."""
    taken_at = clock().replace(microsecond=0)
    body = fetch(config)
    return parse_free_bike_status(body, taken_at)
