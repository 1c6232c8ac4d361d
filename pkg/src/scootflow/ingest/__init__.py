"""GBFS polling, snapshot persistence, and trip-event inference."""

from scootflow.ingest.feed import (
    PollerConfig,
    Snapshot,
    VehicleObservation,
    parse_free_bike_status,
    poll_once,
)
from scootflow.ingest.snapshot_log import SnapshotLog, run_poller, write_snapshots
from scootflow.ingest.trips import (
    EventKind,
    TripEvent,
    bucket_events,
    derive_trips,
    read_events_csv,
    write_events_csv,
)

__all__ = [
    "EventKind",
    "PollerConfig",
    "Snapshot",
    "SnapshotLog",
    "TripEvent",
    "VehicleObservation",
    "bucket_events",
    "derive_trips",
    "parse_free_bike_status",
    "poll_once",
    "read_events_csv",
    "run_poller",
    "write_events_csv",
    "write_snapshots",
]
