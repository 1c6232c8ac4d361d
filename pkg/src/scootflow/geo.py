"""Planar geometry kernel.

All metric work happens in a local equirectangular frame centred on the
study area. At city scale the distortion is far below the 5-60 m radii the
buffer analysis uses, and the projection is exactly invertible.

Scalar functions take :class:`GeoPoint` / :class:`PlanarPoint`; the
``*_xy`` variants take ``(n, 2)`` arrays and are what the batch code uses.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from scootflow.errors import DomainError

EARTH_RADIUS_M = 6_371_008.8
MAX_PROJECTION_DISTANCE_M = 100_000.0
BOUNDARY_EPS_M = 1e-9


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise DomainError(f"non-finite coordinate {self}")
        if not -90.0 <= self.lat <= 90.0:
            raise DomainError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise DomainError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class PlanarPoint:
    x: float
    y: float


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


class LocalProjection:
    """Equirectangular projection about a fixed origin.

    x = R * dlon * cos(lat0), y = R * dlat (angles in radians).
    """

    def __init__(self, origin: GeoPoint):
        self.origin = origin
        self._kx = EARTH_RADIUS_M * math.cos(math.radians(origin.lat)) * math.pi / 180.0
        self._ky = EARTH_RADIUS_M * math.pi / 180.0
        if self._kx <= 0:
            raise DomainError("projection origin at a pole")

    def project(self, p: GeoPoint) -> PlanarPoint:
        if haversine(p, self.origin) >= MAX_PROJECTION_DISTANCE_M:
            raise DomainError(f"{p} is more than 100 km from projection origin")
        return PlanarPoint(
            self._kx * (p.lon - self.origin.lon),
            self._ky * (p.lat - self.origin.lat),
        )

    def unproject(self, q: PlanarPoint) -> GeoPoint:
        return GeoPoint(
            self.origin.lat + q.y / self._ky,
            self.origin.lon + q.x / self._kx,
        )

    def project_xy(self, lat, lon) -> np.ndarray:
        """Project arrays of lat/lon to an ``(n, 2)`` array of meters."""
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        if lat.size and (np.abs(lat).max() > 90 or np.abs(lon).max() > 180):
            raise DomainError("coordinates out of range")
        out = np.empty((lat.size, 2))
        out[:, 0] = self._kx * (lon.ravel() - self.origin.lon)
        out[:, 1] = self._ky * (lat.ravel() - self.origin.lat)
        return out

    def unproject_xy(self, xy) -> tuple[np.ndarray, np.ndarray]:
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        lat = self.origin.lat + xy[:, 1] / self._ky
        lon = self.origin.lon + xy[:, 0] / self._kx
        return lat, lon


def project(p: GeoPoint, origin: GeoPoint) -> PlanarPoint:
    return LocalProjection(origin).project(p)


def unproject(q: PlanarPoint, origin: GeoPoint) -> GeoPoint:
    return LocalProjection(origin).unproject(q)


def _as_ring(vertices) -> np.ndarray:
    ring = np.asarray(
        [(v.x, v.y) if isinstance(v, PlanarPoint) else v for v in vertices], dtype=float
    ).reshape(-1, 2)
    if len(ring) > 1 and np.array_equal(ring[0], ring[-1]):
        ring = ring[:-1]
    if len(ring) < 3:
        raise DomainError(f"ring needs at least 3 distinct vertices, got {len(ring)}")
    if not np.all(np.isfinite(ring)):
        raise DomainError("ring has non-finite vertices")
    return ring


def _signed_area(ring: np.ndarray) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class Polygon:
    """Polygon in the planar frame.

    Rings are stored open (first vertex not repeated). The exterior is
    normalized counter-clockwise and holes clockwise.
    """

    exterior: np.ndarray
    holes: tuple = ()
    bounds: tuple = field(init=False)

    def __post_init__(self):
        ext = _as_ring(self.exterior)
        if _signed_area(ext) == 0:
            raise DomainError("degenerate polygon with zero area")
        if _signed_area(ext) < 0:
            ext = ext[::-1].copy()
        holes = []
        for h in self.holes:
            h = _as_ring(h)
            if _signed_area(h) > 0:
                h = h[::-1].copy()
            holes.append(h)
        object.__setattr__(self, "exterior", ext)
        object.__setattr__(self, "holes", tuple(holes))
        object.__setattr__(
            self, "bounds", (*ext.min(axis=0).tolist(), *ext.max(axis=0).tolist())
        )

    @property
    def rings(self):
        return (self.exterior, *self.holes)


@dataclass(frozen=True, eq=False)
class Polyline:
    vertices: np.ndarray
    bounds: tuple = field(init=False)

    def __post_init__(self):
        v = np.asarray(
            [(p.x, p.y) if isinstance(p, PlanarPoint) else p for p in self.vertices],
            dtype=float,
        ).reshape(-1, 2)
        if len(v) < 2:
            raise DomainError("polyline needs at least 2 vertices")
        if np.any(np.all(v[1:] == v[:-1], axis=1)):
            raise DomainError("polyline has repeated consecutive vertices")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "bounds", (*v.min(axis=0).tolist(), *v.max(axis=0).tolist()))


class PathKind(str, enum.Enum):
    FOOTPATH = "footpath"
    CYCLE_LANE = "cycle_lane"
    SHARED_PATH = "shared_path"


class Band(str, enum.Enum):
    ON_PATH = "on_path"
    WITHIN_5M = "within_5m"
    BAND_5_TO_10M = "band_5_to_10m"
    OUTSIDE = "outside"


DEFAULT_HALFWIDTH_M = 1.5


@dataclass(frozen=True, eq=False)
class PathGeometry:
    kind: PathKind
    shape: Polygon | Polyline
    centerline_halfwidth: float = DEFAULT_HALFWIDTH_M

    def __post_init__(self):
        object.__setattr__(self, "kind", PathKind(self.kind))
        if not isinstance(self.shape, (Polygon, Polyline)):
            raise DomainError("path shape must be a Polygon or Polyline")
        if isinstance(self.shape, Polyline) and not self.centerline_halfwidth > 0:
            raise DomainError("polyline paths need a positive centerline halfwidth")


# --- vectorized kernels -----------------------------------------------------


def _segment_distances(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Min distance from each point to the segments a[i]-b[i]."""
    best = np.full(len(pts), np.inf)
    for (ax, ay), (bx, by) in zip(a, b):
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        px = pts[:, 0] - ax
        py = pts[:, 1] - ay
        if seg2 == 0:
            t = np.zeros(len(pts))
        else:
            t = np.clip((px * dx + py * dy) / seg2, 0.0, 1.0)
        d = np.hypot(px - t * dx, py - t * dy)
        np.minimum(best, d, out=best)
    return best


def _ring_boundary_distance(pts, ring):
    return _segment_distances(pts, ring, np.roll(ring, -1, axis=0))


def _ring_odd_crossings(pts, ring) -> np.ndarray:
    px, py = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    nxt = np.roll(ring, -1, axis=0)
    for (x1, y1), (x2, y2) in zip(ring, nxt):
        straddles = (y1 > py) != (y2 > py)
        if not straddles.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= straddles & (px < xint)
    return inside


def _as_xy(pts) -> np.ndarray:
    return np.asarray(pts, dtype=float).reshape(-1, 2)


def points_in_polygon_xy(pts, poly: Polygon) -> np.ndarray:
    """Even-odd containment; points on any ring boundary count as inside."""
    pts = _as_xy(pts)
    out = np.zeros(len(pts), dtype=bool)
    if not len(pts):
        return out
    x0, y0, x1, y1 = poly.bounds
    cand = (
        (pts[:, 0] >= x0 - BOUNDARY_EPS_M)
        & (pts[:, 0] <= x1 + BOUNDARY_EPS_M)
        & (pts[:, 1] >= y0 - BOUNDARY_EPS_M)
        & (pts[:, 1] <= y1 + BOUNDARY_EPS_M)
    )
    if not cand.any():
        return out
    sub = pts[cand]
    inside = _ring_odd_crossings(sub, poly.exterior)
    for hole in poly.holes:
        inside &= ~_ring_odd_crossings(sub, hole)
    on_edge = polygon_boundary_distance_xy(sub, poly) <= BOUNDARY_EPS_M
    out[cand] = inside | on_edge
    return out


def polygon_boundary_distance_xy(pts, poly: Polygon) -> np.ndarray:
    pts = _as_xy(pts)
    return np.min([_ring_boundary_distance(pts, r) for r in poly.rings], axis=0)


def polyline_distance_xy(pts, line: Polyline) -> np.ndarray:
    v = line.vertices
    return _segment_distances(_as_xy(pts), v[:-1], v[1:])


def path_distance_xy(pts, path: PathGeometry) -> np.ndarray:
    """Distance from each point to the edge of the path surface.

    Zero inside a polygon path; for a line path, the distance beyond the
    centerline halfwidth.
    """
    pts = _as_xy(pts)
    if isinstance(path.shape, Polygon):
        d = polygon_boundary_distance_xy(pts, path.shape)
        d[points_in_polygon_xy(pts, path.shape)] = 0.0
        return d
    return np.maximum(0.0, polyline_distance_xy(pts, path.shape) - path.centerline_halfwidth)


BAND_ORDER = (Band.ON_PATH, Band.WITHIN_5M, Band.BAND_5_TO_10M, Band.OUTSIDE)


def bands_from_distance(d) -> np.ndarray:
    """Band index (position in BAND_ORDER) for an array of path distances."""
    d = np.asarray(d, dtype=float)
    return np.select([d <= 0.0, d <= 5.0, d <= 10.0], [0, 1, 2], default=3)


# --- scalar API -------------------------------------------------------------


def point_in_polygon(p: PlanarPoint, poly: Polygon) -> bool:
    return bool(points_in_polygon_xy([(p.x, p.y)], poly)[0])


def polygon_area_km2(poly: Polygon) -> float:
    area = _signed_area(poly.exterior) - sum(-_signed_area(h) for h in poly.holes)
    if area <= 0:
        raise DomainError("polygon has non-positive area after subtracting holes")
    return area / 1e6


def dist_to_polyline(p: PlanarPoint, line: Polyline) -> float:
    return float(polyline_distance_xy([(p.x, p.y)], line)[0])


def classify_band(p: PlanarPoint, path: PathGeometry) -> Band:
    d = path_distance_xy([(p.x, p.y)], path)[0]
    return BAND_ORDER[int(bands_from_distance(d))]


@dataclass(frozen=True, eq=False)
class MultiPolygon:
    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts or not all(isinstance(p, Polygon) for p in parts):
            raise DomainError("MultiPolygon needs at least one Polygon part")
        object.__setattr__(self, "parts", parts)

    @property
    def bounds(self):
        b = np.array([p.bounds for p in self.parts])
        return (b[:, 0].min(), b[:, 1].min(), b[:, 2].max(), b[:, 3].max())


def region_contains_xy(pts, region: Polygon | MultiPolygon) -> np.ndarray:
    if isinstance(region, Polygon):
        return points_in_polygon_xy(pts, region)
    out = np.zeros(len(_as_xy(pts)), dtype=bool)
    for part in region.parts:
        out |= points_in_polygon_xy(pts, part)
    return out


def region_area_km2(region: Polygon | MultiPolygon) -> float:
    if isinstance(region, Polygon):
        return polygon_area_km2(region)
    return sum(polygon_area_km2(p) for p in region.parts)
