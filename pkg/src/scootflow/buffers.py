"""Buffer analysis around trip endpoints.

Percentages are events of one kind in a time frame that have a target
within the buffer radius, over all events of that kind in the frame.
Buffers are exact planar distance tests, not buffer polygons.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Sequence

import numpy as np

from scootflow.errors import DomainError
from scootflow.events import EventTable
from scootflow.geo import BAND_ORDER, Band, PathGeometry, PathKind, bands_from_distance, path_distance_xy
from scootflow.ingest.trips import EventKind
from scootflow.spatial import PoiCategory, PoiIndex
from scootflow.stats import TTestResult, paired_t_test
from scootflow.timeframes import TEN_FRAMES, WHOLE_PERIOD, DayClass, HourBand, TimeFrame

logger = logging.getLogger(__name__)

POI_RADIUS_M = 60.0
PATH_RADIUS_M = 10.0


# --- spatial joins ------------------------------------------------------------


class GridIndex:
    """Uniform-grid bucket index over planar points for radius queries."""

    def __init__(self, xy: np.ndarray, cell: float):
        if not cell > 0:
            raise DomainError("grid cell size must be positive")
        self.xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        self.cell = float(cell)
        keys = np.floor(self.xy / self.cell).astype(np.int64)
        self._buckets: dict[tuple[int, int], np.ndarray] = {}
        if len(keys):
            order = np.lexsort((keys[:, 1], keys[:, 0]))
            k = keys[order]
            breaks = np.flatnonzero(np.any(k[1:] != k[:-1], axis=1)) + 1
            for grp in np.split(order, breaks):
                self._buckets[(int(keys[grp[0], 0]), int(keys[grp[0], 1]))] = grp

    def _neighbours(self, cx: int, cy: int, reach: int) -> np.ndarray:
        parts = [
            self._buckets[(cx + dx, cy + dy)]
            for dx in range(-reach, reach + 1)
            for dy in range(-reach, reach + 1)
            if (cx + dx, cy + dy) in self._buckets
        ]
        return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)

    def any_within(self, query: np.ndarray, radius: float) -> np.ndarray:
        """For each query point, whether some indexed point lies within ``radius``."""
        query = np.asarray(query, dtype=float).reshape(-1, 2)
        out = np.zeros(len(query), dtype=bool)
        if not len(query) or not self._buckets:
            return out
        reach = max(1, math.ceil(radius / self.cell))
        qkeys = np.floor(query / self.cell).astype(np.int64)
        order = np.lexsort((qkeys[:, 1], qkeys[:, 0]))
        k = qkeys[order]
        breaks = np.flatnonzero(np.any(k[1:] != k[:-1], axis=1)) + 1
        for grp in np.split(order, breaks):
            cand = self._neighbours(int(qkeys[grp[0], 0]), int(qkeys[grp[0], 1]), reach)
            if not len(cand):
                continue
            diff = query[grp, None, :] - self.xy[None, cand, :]
            d = np.hypot(diff[..., 0], diff[..., 1])
            out[grp] = (d <= radius).any(axis=1)
        return out


def presence_mask(event_xy: np.ndarray, target_xy: np.ndarray, radius: float) -> np.ndarray:
    """Whether each event has at least one target point within ``radius`` meters."""
    if radius < 0:
        raise DomainError("radius must be >= 0")
    return GridIndex(target_xy, 2.0 * max(radius, 1e-9)).any_within(event_xy, radius)


def nearest_path_distance(
    xy: np.ndarray, paths: Sequence[PathGeometry], kind: PathKind | str, cutoff: float | None = None
) -> np.ndarray:
    """Distance from each point to the nearest path surface of ``kind``.

    With ``cutoff``, points farther than that from a path's bounding box skip
    the exact test, so values above ``cutoff`` may be reported as inf.
    """
    kind = PathKind(kind)
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    best = np.full(len(xy), np.inf)
    for path in paths:
        if path.kind is not kind:
            continue
        if cutoff is None:
            sel = np.arange(len(xy))
        else:
            x0, y0, x1, y1 = path.shape.bounds
            pad = cutoff + path.centerline_halfwidth
            sel = np.flatnonzero(
                (xy[:, 0] >= x0 - pad) & (xy[:, 0] <= x1 + pad)
                & (xy[:, 1] >= y0 - pad) & (xy[:, 1] <= y1 + pad)
            )
        if len(sel):
            best[sel] = np.minimum(best[sel], path_distance_xy(xy[sel], path))
    return best


# --- percentage rows ----------------------------------------------------------


@dataclass(frozen=True)
class BufferRow:
    frame: TimeFrame
    target: str
    event_kind: EventKind
    numerator: int
    denominator: int
    radius: float

    @property
    def defined(self) -> bool:
        return self.denominator > 0

    @property
    def percentage(self) -> float:
        """100 * numerator / denominator; NaN when the frame has no events."""
        return 100.0 * self.numerator / self.denominator if self.denominator else math.nan


def _frame_counts(events: EventTable, hit: np.ndarray, frame: TimeFrame, kind: EventKind):
    sel = events.frame_mask(frame) & (events.is_start if kind is EventKind.START else ~events.is_start)
    return int((hit & sel).sum()), int(sel.sum())


def _poi_xy(pois, category) -> np.ndarray:
    if isinstance(pois, PoiIndex):
        return pois.xy(category)
    return np.asarray(pois, dtype=float).reshape(-1, 2)


def poi_presence_pct(
    events: EventTable,
    pois: PoiIndex | np.ndarray,
    category: PoiCategory | str,
    radius: float = POI_RADIUS_M,
    frame: TimeFrame = WHOLE_PERIOD,
    kind: EventKind | str = EventKind.START,
) -> BufferRow:
    """Share of ``kind`` events in ``frame`` with a POI of ``category`` within ``radius``."""
    kind = EventKind(kind)
    hit = presence_mask(events.xy, _poi_xy(pois, category), radius)
    num, den = _frame_counts(events, hit, frame, kind)
    return BufferRow(frame, str(getattr(category, "value", category)), kind, num, den, radius)


def path_trip_pct(
    events: EventTable,
    paths: Sequence[PathGeometry],
    kind: PathKind | str,
    radius: float = PATH_RADIUS_M,
    frame: TimeFrame = WHOLE_PERIOD,
    event_kind: EventKind | str = EventKind.STOP,
) -> BufferRow:
    """Share of events within ``radius`` of the nearest path of ``kind``
    (distance 0 on a polygon path surface)."""
    event_kind = EventKind(event_kind)
    d = nearest_path_distance(events.xy, paths, kind, cutoff=radius)
    num, den = _frame_counts(events, d <= radius, frame, event_kind)
    return BufferRow(frame, PathKind(kind).value, event_kind, num, den, radius)


def presence_rows(
    events: EventTable,
    hit: np.ndarray,
    target: str,
    radius: float,
    frames: Sequence[TimeFrame] = (WHOLE_PERIOD, *TEN_FRAMES),
) -> list[BufferRow]:
    """Rows for precomputed per-event hit flags, starts then stops per frame."""
    return [
        BufferRow(f, target, k, *_frame_counts(events, hit, f, k), radius)
        for f in frames
        for k in (EventKind.START, EventKind.STOP)
    ]


@dataclass(frozen=True)
class FrameBands:
    """Band counts in BAND_ORDER for one frame and event kind."""

    frame: TimeFrame
    path_kind: PathKind
    event_kind: EventKind
    counts: tuple[int, int, int, int]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def percentages(self) -> dict[Band, float]:
        t = self.total
        return {b: (100.0 * c / t if t else math.nan) for b, c in zip(BAND_ORDER, self.counts)}


@dataclass(frozen=True)
class BandRow:
    """Band share for one day class.  ``mean_of_frames`` averages the five
    hour-band percentages; ``pooled`` counts every event of the day class."""

    path_kind: PathKind
    event_kind: EventKind
    day_class: DayClass
    band: Band
    mean_of_frames: float
    pooled: float
    n_frames: int


def frame_bands(
    events: EventTable,
    paths: Sequence[PathGeometry],
    kind: PathKind | str,
    frames: Sequence[TimeFrame] = TEN_FRAMES,
    event_kinds: Sequence[EventKind] = (EventKind.START, EventKind.STOP),
) -> list[FrameBands]:
    kind = PathKind(kind)
    band = bands_from_distance(nearest_path_distance(events.xy, paths, kind, cutoff=10.0))
    out = []
    for ek in event_kinds:
        is_kind = events.is_start if ek is EventKind.START else ~events.is_start
        for f in frames:
            b = band[is_kind & events.frame_mask(f)]
            counts = np.bincount(b, minlength=len(BAND_ORDER))
            out.append(FrameBands(f, kind, ek, tuple(int(c) for c in counts)))
    return out


def band_percentages(
    events: EventTable,
    paths: Sequence[PathGeometry],
    kind: PathKind | str,
    frames: Sequence[TimeFrame] = TEN_FRAMES,
) -> list[BandRow]:
    """Band shares per day class (OUTSIDE included, so each group sums to 100).

    Frames without events of a kind are left out of ``mean_of_frames``.
    """
    per_frame = frame_bands(events, paths, kind, frames)
    rows = []
    for ek in (EventKind.START, EventKind.STOP):
        for dc in DayClass:
            group = [fb for fb in per_frame if fb.event_kind is ek and fb.frame.day_class is dc]
            defined = [fb for fb in group if fb.total]
            if len(defined) < len(group):
                logger.info("%s %s %s: %d frame(s) without events left out of the mean",
                            PathKind(kind).value, ek.value, dc.value, len(group) - len(defined))
            pooled = np.sum([fb.counts for fb in group], axis=0) if group else np.zeros(4)
            total = pooled.sum()
            for i, b in enumerate(BAND_ORDER):
                mean = (float(np.mean([fb.percentages()[b] for fb in defined]))
                        if defined else math.nan)
                pool = 100.0 * pooled[i] / total if total else math.nan
                rows.append(BandRow(PathKind(kind), ek, dc, b, mean, float(pool), len(defined)))
    return rows


@dataclass(frozen=True)
class PresenceSummary:
    """Day-class summary of one presence percentage under both readings of
    "mean": over the five hour-band frames, and over calendar days."""

    target: str
    event_kind: EventKind
    day_class: DayClass
    mean_of_frames: float
    mean_of_days: float


def _unit_percentages(hit, is_kind, units):
    """Percentage of hits per unit value, for units with at least one event."""
    keys = np.unique(units[is_kind])
    return {int(k): 100.0 * float(hit[is_kind & (units == k)].mean()) for k in keys}


def presence_summary(
    events: EventTable, hit: np.ndarray, target: str, day_class: DayClass, event_kind: EventKind
) -> PresenceSummary:
    is_kind = events.is_start if event_kind is EventKind.START else ~events.is_start
    frames = [TimeFrame(day_class, b) for b in HourBand]
    fp = [_frame_counts(events, hit, f, event_kind) for f in frames]
    by_frame = [100.0 * n / d for n, d in fp if d]
    dc_mask = is_kind & TimeFrame(day_class).mask(events.weekday, events.hour)
    by_day = list(_unit_percentages(hit, dc_mask, events.day).values())
    return PresenceSummary(
        target, event_kind, day_class,
        float(np.mean(by_frame)) if by_frame else math.nan,
        float(np.mean(by_day)) if by_day else math.nan,
    )


# --- start vs stop tests --------------------------------------------------------


@dataclass(frozen=True)
class StartStopTest:
    """Paired test of start- against stop-percentages; negative t means stops
    exceed starts."""

    target: str
    radius: float
    pairing: str
    units: tuple[str, ...]
    start_pct: tuple[float, ...]
    stop_pct: tuple[float, ...]
    dropped: tuple[str, ...]
    ttest: TTestResult


def target_hits(
    events: EventTable,
    target: PoiCategory | PathKind | str,
    radius: float,
    pois: PoiIndex | None = None,
    paths: Sequence[PathGeometry] | None = None,
) -> tuple[str, np.ndarray]:
    """Resolve a POI category or path kind name to per-event hit flags."""
    value = target.value if hasattr(target, "value") else str(target)
    if value in {k.value for k in PathKind}:
        if paths is None:
            raise DomainError(f"target {value!r} is a path kind but no paths were given")
        return value, nearest_path_distance(events.xy, paths, value, cutoff=radius) <= radius
    if value in {c.value for c in PoiCategory}:
        if pois is None:
            raise DomainError(f"target {value!r} is a POI category but no POIs were given")
        return value, presence_mask(events.xy, pois.xy(value), radius)
    raise DomainError(f"unknown buffer target {value!r}")


def compare_start_stop(
    events: EventTable,
    target: PoiCategory | PathKind | str,
    radius: float,
    pairing: str = "day",
    pois: PoiIndex | None = None,
    paths: Sequence[PathGeometry] | None = None,
) -> StartStopTest:
    """Pair start and stop percentages per calendar day (``"day"``) or per
    time frame (``"frame"``) and run a paired t-test.

    Units lacking starts or stops are dropped and listed in ``dropped``.
    """
    name, hit = target_hits(events, target, radius, pois, paths)
    starts, stops = events.is_start, ~events.is_start
    if pairing == "day":
        s = _unit_percentages(hit, starts, events.day)
        e = _unit_percentages(hit, stops, events.day)
        all_units = sorted(set(s) | set(e))
        label = {u: _day_label(u) for u in all_units}
    elif pairing == "frame":
        s, e, label = {}, {}, {}
        for i, f in enumerate(TEN_FRAMES):
            label[i] = f.label
            ns, ds = _frame_counts(events, hit, f, EventKind.START)
            ne, de = _frame_counts(events, hit, f, EventKind.STOP)
            if ds:
                s[i] = 100.0 * ns / ds
            if de:
                e[i] = 100.0 * ne / de
        all_units = list(range(len(TEN_FRAMES)))
    else:
        raise DomainError(f"pairing must be 'day' or 'frame', got {pairing!r}")
    kept = [u for u in all_units if u in s and u in e]
    dropped = tuple(label[u] for u in all_units if u not in kept)
    if dropped:
        logger.info("%s: dropped %d unit(s) with undefined percentages", name, len(dropped))
    if len(kept) < 2:
        raise DomainError(f"{name}: need at least 2 {pairing} units with both starts and stops")
    a = [s[u] for u in kept]
    b = [e[u] for u in kept]
    return StartStopTest(name, radius, pairing, tuple(label[u] for u in kept), tuple(a), tuple(b),
                         dropped, paired_t_test(a, b))


def _day_label(ordinal: int) -> str:
    return date.fromordinal(int(ordinal)).isoformat()


# --- reports ------------------------------------------------------------------


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else f"{v:.4f}"


def write_buffer_csv(path: Path | str, rows: Sequence[BufferRow], header_comment: str = "") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "target", "kind", "percentage", "numerator", "denominator", "radius_m"])
        for r in rows:
            w.writerow([r.frame.label, r.target, r.event_kind.value, _fmt(r.percentage),
                        r.numerator, r.denominator, f"{r.radius:g}"])


def write_band_csv(path: Path | str, rows: Sequence[BandRow], header_comment: str = "") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_kind", "kind", "day_class", "band", "mean_of_frames", "pooled", "n_frames"])
        for r in rows:
            w.writerow([r.path_kind.value, r.event_kind.value, r.day_class.value, r.band.value,
                        _fmt(r.mean_of_frames), _fmt(r.pooled), r.n_frames])


def write_summary_csv(path: Path | str, rows: Sequence[PresenceSummary], header_comment: str = "") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["target", "kind", "day_class", "mean_of_frames", "mean_of_days"])
        for r in rows:
            w.writerow([r.target, r.event_kind.value, r.day_class.value,
                        _fmt(r.mean_of_frames), _fmt(r.mean_of_days)])


def write_ttest_csv(
    path: Path | str,
    tests: Sequence[StartStopTest],
    header_comment: str = "",
    skipped: Sequence[tuple[str, str]] = (),
) -> None:
    """One row per test; ``skipped`` (target, reason) pairs get a note instead of numbers."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["target", "radius_m", "pairing", "n_pairs", "t", "df", "p_two_tailed",
                    "mean_start_pct", "mean_stop_pct", "dropped", "note"])
        for t in tests:
            w.writerow([t.target, f"{t.radius:g}", t.pairing, t.ttest.n_pairs,
                        f"{t.ttest.t_statistic:.4f}", t.ttest.df, f"{t.ttest.p_two_tailed:.6g}",
                        f"{np.mean(t.start_pct):.4f}", f"{np.mean(t.stop_pct):.4f}", len(t.dropped), ""])
        for target, reason in skipped:
            w.writerow([target, "", "", "", "", "", "", "", "", "", reason])
