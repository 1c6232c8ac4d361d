"""Per-zone spatial design matrix: trip density plus demographic, land-use,
design-index and transit-access features."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from scootflow.errors import DomainError, SchemaError
from scootflow.events import EventTable
from scootflow.geo import (
    GeoPoint,
    LocalProjection,
    MultiPolygon,
    Polygon,
    region_area_km2,
    region_contains_xy,
)
from scootflow.regress.matrix import FeatureMatrix
from scootflow.timeframes import WHOLE_PERIOD, TimeFrame


class PoiCategory(str, enum.Enum):
    RESIDENTIAL = "residential"
    CAFE = "cafe"
    SHOP = "shop"
    OFFICE = "office"
    RECREATION = "recreation"
    CAMPUS = "campus"
    TRAM_STOP = "tram_stop"
    BUS_STOP = "bus_stop"
    TRAIN_STATION = "train_station"
    OTHER = "other"


TRANSIT_CATEGORIES = frozenset(
    {PoiCategory.TRAM_STOP, PoiCategory.BUS_STOP, PoiCategory.TRAIN_STATION}
)
# land-use mix (percentages, entropy, MXI) is measured over non-transit POIs
LAND_USE_CATEGORIES = tuple(c for c in PoiCategory if c not in TRANSIT_CATEGORIES)


@dataclass(frozen=True)
class Poi:
    category: PoiCategory
    location: GeoPoint

    def __post_init__(self):
        object.__setattr__(self, "category", PoiCategory(self.category))


CENSUS_COUNT_COLUMNS = (
    "population",
    "female",
    "male",
    "age_5_14",
    "age_15_29",
    "age_30_39",
    "age_40_49",
    "age_50_64",
    "age_65_plus",
    "dwellers",
    "dwellers_with_vehicle",
    "families",
    "families_no_children",
    "families_with_children",
)


@dataclass(frozen=True)
class Sa2Row:
    sa2_id: str
    values: Mapping[str, float]
    n_child_zones: int

    def __post_init__(self):
        if self.n_child_zones < 1:
            raise DomainError(f"SA2 {self.sa2_id}: n_child_zones must be >= 1")
        missing = [c for c in CENSUS_COUNT_COLUMNS if c not in self.values]
        if missing:
            raise SchemaError(f"SA2 {self.sa2_id}: missing census column(s) {missing}")
        bad = [k for k, v in self.values.items() if v < 0]
        if bad:
            raise DomainError(f"SA2 {self.sa2_id}: negative count(s) {bad}")


SPATIAL_COLUMNS = (
    "population_density",
    "female_pct",
    "male_pct",
    "age_5_14_pct",
    "age_15_29_pct",
    "age_30_39_pct",
    "age_40_49_pct",
    "age_50_64_pct",
    "age_65_plus_pct",
    "car_ownership_pct",
    "without_children_pct",
    "with_children_pct",
    "cafe_pct",
    "shop_pct",
    "office_pct",
    "recreation_count",
    "campus_count",
    "entropy",
    "mxi",
    "tram_density",
    "bus_density",
    "train_density",
)

PERCENT_COLUMNS = tuple(c for c in SPATIAL_COLUMNS if c.endswith("_pct"))


@dataclass(frozen=True, eq=False)
class ZoneRecord:
    zone_id: str
    polygon: Polygon | MultiPolygon
    parent_sa2_id: str = ""
    features: Mapping[str, float] = field(default_factory=dict)
    trip_density: float | None = None
    area_km2: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "area_km2", region_area_km2(self.polygon))
        for c in PERCENT_COLUMNS:
            v = self.features.get(c)
            if v is not None and not 0.0 <= v <= 100.0 + 1e-9:
                raise DomainError(f"zone {self.zone_id}: {c}={v} outside [0, 100]")


def _ratio_pct(num: float, den: float) -> float:
    return 100.0 * num / den if den > 0 else 0.0


def disaggregate_sa2(row: Sa2Row) -> dict[str, float]:
    """Split SA2 census counts equally across its child zones."""
    return {k: v / row.n_child_zones for k, v in row.values.items()}


def demographic_features(child: Mapping[str, float], area_km2: float) -> dict[str, float]:
    """Census-derived columns from one child zone's (disaggregated) counts."""
    if area_km2 <= 0:
        raise DomainError("zone area must be positive")
    pop = child["population"]
    out = {"population_density": pop / area_km2}
    for col in ("female", "male", "age_5_14", "age_15_29", "age_30_39",
                "age_40_49", "age_50_64", "age_65_plus"):
        out[f"{col}_pct"] = _ratio_pct(child[col], pop)
    out["car_ownership_pct"] = _ratio_pct(child["dwellers_with_vehicle"], child["dwellers"])
    out["without_children_pct"] = _ratio_pct(child["families_no_children"], child["families"])
    out["with_children_pct"] = _ratio_pct(child["families_with_children"], child["families"])
    return out


def _counts(zone_pois) -> list[float]:
    vals = list(zone_pois.values()) if isinstance(zone_pois, Mapping) else list(zone_pois)
    if any(v < 0 for v in vals):
        raise DomainError("POI counts must be non-negative")
    return vals


def entropy(zone_pois: Mapping | Sequence[float]) -> float:
    """Shannon entropy (nats) of the POI category mix; 0 for an empty zone."""
    counts = _counts(zone_pois)
    total = sum(counts)
    if total == 0:
        return 0.0
    return -sum((c / total) * math.log(c / total) for c in counts if c > 0) + 0.0


def mxi(residential_pct: float) -> float:
    """Mixed-use index: distance of the residential share from an even mix."""
    if not 0.0 <= residential_pct <= 100.0:
        raise DomainError(f"residential percentage {residential_pct} outside [0, 100]")
    return abs(residential_pct - 50.0)


def poi_percentage(zone_pois: Mapping, category) -> float:
    counts = _counts(zone_pois)
    total = sum(counts)
    if total == 0:
        return 0.0
    # PoiCategory is a str enum, so plain-string keys match too
    return 100.0 * zone_pois.get(category, 0) / total


class PoiIndex:
    """Projected POI coordinates grouped by category."""

    def __init__(self, pois: Sequence[Poi], projection: LocalProjection):
        self.by_category: dict[PoiCategory, np.ndarray] = {}
        for cat in PoiCategory:
            pts = [p.location for p in pois if p.category is cat]
            self.by_category[cat] = projection.project_xy(
                [q.lat for q in pts], [q.lon for q in pts]
            )

    def xy(self, category) -> np.ndarray:
        return self.by_category[PoiCategory(category)]

    def counts_in(self, region) -> dict[PoiCategory, int]:
        return {
            cat: int(region_contains_xy(xy, region).sum()) if len(xy) else 0
            for cat, xy in self.by_category.items()
        }


def stop_density(zone: ZoneRecord, pois: PoiIndex, category) -> float:
    if zone.area_km2 <= 0:
        raise DomainError(f"zone {zone.zone_id} has zero area")
    xy = pois.xy(category)
    n = int(region_contains_xy(xy, zone.polygon).sum()) if len(xy) else 0
    return n / zone.area_km2


def land_use_features(counts: Mapping[PoiCategory, int], area_km2: float) -> dict[str, float]:
    land = {c: counts.get(c, 0) for c in LAND_USE_CATEGORIES}
    res_pct = poi_percentage(land, PoiCategory.RESIDENTIAL)
    return {
        "cafe_pct": poi_percentage(land, PoiCategory.CAFE),
        "shop_pct": poi_percentage(land, PoiCategory.SHOP),
        "office_pct": poi_percentage(land, PoiCategory.OFFICE),
        "recreation_count": float(land[PoiCategory.RECREATION]),
        "campus_count": float(land[PoiCategory.CAMPUS]),
        "entropy": entropy(land),
        "mxi": mxi(res_pct),
        "tram_density": counts.get(PoiCategory.TRAM_STOP, 0) / area_km2,
        "bus_density": counts.get(PoiCategory.BUS_STOP, 0) / area_km2,
        "train_density": counts.get(PoiCategory.TRAIN_STATION, 0) / area_km2,
    }


def build_zone_records(
    zones: Sequence[ZoneRecord],
    census: Sequence[Sa2Row],
    pois: Sequence[Poi] | PoiIndex,
    projection: LocalProjection,
) -> list[ZoneRecord]:
    """Attach the full feature map to bare zone geometries, ordered by zone_id."""
    by_sa2 = {r.sa2_id: r for r in census}
    index = pois if isinstance(pois, PoiIndex) else PoiIndex(pois, projection)
    out = []
    for z in sorted(zones, key=lambda z: z.zone_id):
        row = by_sa2.get(z.parent_sa2_id)
        if row is None:
            raise SchemaError(f"zone {z.zone_id}: no census row for SA2 {z.parent_sa2_id!r}")
        feats = demographic_features(disaggregate_sa2(row), z.area_km2)
        feats.update(land_use_features(index.counts_in(z.polygon), z.area_km2))
        out.append(ZoneRecord(z.zone_id, z.polygon, z.parent_sa2_id, feats))
    return out


def child_zone_counts(zones: Sequence[ZoneRecord]) -> dict[str, int]:
    return dict(Counter(z.parent_sa2_id for z in zones))


def trip_density(zone: ZoneRecord, events: EventTable, frame: TimeFrame = WHOLE_PERIOD) -> float:
    """Trip starts inside the zone during ``frame`` per square km."""
    if zone.area_km2 <= 0:
        raise DomainError(f"zone {zone.zone_id} has zero area")
    sel = events.select(events.is_start & events.frame_mask(frame))
    if not len(sel):
        return 0.0
    return int(region_contains_xy(sel.xy, zone.polygon).sum()) / zone.area_km2


def build_spatial_matrix(
    zones: Sequence[ZoneRecord], events: EventTable, frame: TimeFrame = WHOLE_PERIOD
) -> FeatureMatrix:
    """One row per zone (sorted by zone_id), the 22 feature columns, trip density target."""
    zones = sorted(zones, key=lambda z: z.zone_id)
    rows = []
    for z in zones:
        missing = [c for c in SPATIAL_COLUMNS if c not in z.features]
        if missing:
            raise SchemaError(f"zone {z.zone_id}: missing feature column(s) {missing}")
        rows.append([float(z.features[c]) for c in SPATIAL_COLUMNS])
    target = [trip_density(z, events, frame) for z in zones]
    return FeatureMatrix(
        SPATIAL_COLUMNS,
        np.array(rows, dtype=float).reshape(len(zones), len(SPATIAL_COLUMNS)),
        target,
        tuple(z.zone_id for z in zones),
    )
