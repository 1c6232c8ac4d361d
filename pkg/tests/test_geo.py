import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scootflow.errors import DomainError
from scootflow.geo import (
    Band,
    GeoPoint,
    LocalProjection,
    PathGeometry,
    PathKind,
    PlanarPoint,
    Polygon,
    Polyline,
    classify_band,
    dist_to_polyline,
    haversine,
    point_in_polygon,
    points_in_polygon_xy,
    polygon_area_km2,
    project,
)

MELBOURNE = GeoPoint(-37.8136, 144.9631)


def winding_number(pt, ring):
    """Independent containment oracle (non-zero winding rule, open ring)."""
    x, y = pt
    wn = 0
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        cross = (x2 - x1) * (y - y1) - (x - x1) * (y2 - y1)
        if y1 <= y:
            if y2 > y and cross > 0:
                wn += 1
        elif y2 <= y and cross < 0:
            wn -= 1
    return wn != 0


def square(x0, y0, side):
    return [(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)]


def test_project_origin_is_zero():
    q = project(MELBOURNE, MELBOURNE)
    assert q == PlanarPoint(0.0, 0.0)


def test_project_pure_east_has_zero_y():
    proj = LocalProjection(MELBOURNE)
    dlon = 100.0 / proj._kx
    q = proj.project(GeoPoint(MELBOURNE.lat, MELBOURNE.lon + dlon))
    assert q.y == 0.0
    assert q.x == pytest.approx(100.0)


def test_project_matches_haversine_within_5km():
    rng = np.random.default_rng(1)
    proj = LocalProjection(MELBOURNE)
    for _ in range(500):
        r = rng.uniform(10, 5000)
        th = rng.uniform(0, 2 * np.pi)
        dlat = r * np.sin(th) / proj._ky
        dlon = r * np.cos(th) / proj._kx
        p = GeoPoint(MELBOURNE.lat + dlat, MELBOURNE.lon + dlon)
        q = proj.project(p)
        planar = math.hypot(q.x, q.y)
        assert planar == pytest.approx(haversine(p, MELBOURNE), rel=1e-3)


def test_round_trip_within_50km():
    rng = np.random.default_rng(2)
    proj = LocalProjection(MELBOURNE)
    for _ in range(500):
        q = PlanarPoint(*rng.uniform(-35000, 35000, size=2))
        back = proj.project(proj.unproject(q))
        assert math.hypot(back.x - q.x, back.y - q.y) < 0.01


def test_project_rejects_far_points_and_bad_coords():
    with pytest.raises(DomainError):
        project(GeoPoint(-33.86, 151.2), MELBOURNE)
    with pytest.raises(DomainError):
        GeoPoint(91.0, 0.0)
    with pytest.raises(DomainError):
        GeoPoint(0.0, 181.0)


def test_haversine_basics():
    a = GeoPoint(10.0, 20.0)
    assert haversine(a, a) == 0.0
    for lon in (-170.0, 0.0, 33.3, 144.9):
        d = haversine(GeoPoint(-37.0, lon), GeoPoint(-36.0, lon))
        assert abs(d - 6_371_008.8 * math.pi / 180) < 1.0
        assert d == pytest.approx(111_194.9, abs=1.0)


coords = st.tuples(st.floats(-60, 60), st.floats(-179, 179)).map(lambda t: GeoPoint(*t))


@given(coords, coords, coords)
@settings(max_examples=300, deadline=None)
def test_haversine_symmetric_and_triangle(a, b, c):
    assert haversine(a, b) == pytest.approx(haversine(b, a), abs=1e-6)
    assert haversine(a, c) <= haversine(a, b) + haversine(b, c) + 1e-6


def test_point_in_polygon_unit_square_and_hole():
    poly = Polygon(square(0, 0, 1))
    assert point_in_polygon(PlanarPoint(0.5, 0.5), poly)
    holed = Polygon(square(0, 0, 10), holes=(square(4, 4, 2),))
    assert not point_in_polygon(PlanarPoint(5, 5), holed)
    assert point_in_polygon(PlanarPoint(1, 1), holed)
    # boundary convention: on-edge counts as inside, including hole edges
    assert point_in_polygon(PlanarPoint(0.0, 0.5), poly)
    assert point_in_polygon(PlanarPoint(4.0, 5.0), holed)


def test_degenerate_polygon_rejected():
    with pytest.raises(DomainError):
        Polygon([(0, 0), (1, 1)])
    with pytest.raises(DomainError):
        Polygon([(0, 0), (1, 1), (2, 2)])


def random_star(rng, n=12, r0=50.0):
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    rad = rng.uniform(0.3 * r0, r0, n)
    return np.c_[rad * np.cos(ang), rad * np.sin(ang)]


def test_point_in_polygon_vs_winding_number_oracle():
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(20):
        ring = random_star(rng)
        poly = Polygon(ring)
        pts = rng.uniform(-60, 60, size=(600, 2))
        got = points_in_polygon_xy(pts, poly)
        want = np.array([winding_number(p, ring) for p in pts])
        np.testing.assert_array_equal(got, want)
        checked += len(pts)
    assert checked >= 10_000


def test_area_squares_and_holes():
    assert polygon_area_km2(Polygon(square(0, 0, 1000))) == pytest.approx(1.0)
    holed = Polygon(square(0, 0, 1000), holes=(square(250, 250, 500),))
    assert polygon_area_km2(holed) == pytest.approx(0.75)


def test_area_vs_triangulation_oracle():
    rng = np.random.default_rng(4)
    for _ in range(50):
        ang = np.sort(rng.uniform(0, 2 * np.pi, 9))
        ring = np.c_[300 * np.cos(ang), 200 * np.sin(ang)] + rng.uniform(-1e3, 1e3, 2)
        # fan triangulation from vertex 0 (ring is convex)
        tri = 0.0
        for i in range(1, len(ring) - 1):
            a, b, c = ring[0], ring[i], ring[i + 1]
            tri += abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])) / 2
        assert polygon_area_km2(Polygon(ring)) == pytest.approx(tri / 1e6, rel=1e-9)


def test_area_invariant_under_reversal_and_rotation():
    rng = np.random.default_rng(5)
    ring = random_star(rng)
    base = polygon_area_km2(Polygon(ring))
    assert polygon_area_km2(Polygon(ring[::-1])) == pytest.approx(base, rel=1e-12)
    for k in range(1, len(ring)):
        assert polygon_area_km2(Polygon(np.roll(ring, k, axis=0))) == pytest.approx(
            base, rel=1e-12
        )


def test_dist_to_polyline_basics():
    line = Polyline([(0, 0), (10, 0), (10, 10)])
    assert dist_to_polyline(PlanarPoint(10, 0), line) == 0.0
    assert dist_to_polyline(PlanarPoint(5, 5), line) == pytest.approx(5.0)
    assert dist_to_polyline(PlanarPoint(5, -5), line) == pytest.approx(5.0)


def test_dist_to_polyline_vs_dense_sampling():
    rng = np.random.default_rng(6)
    verts = np.array([(0, 0), (3, 1), (4, -2), (7, 0)], dtype=float)
    line = Polyline(verts)
    samples = []
    for a, b in zip(verts[:-1], verts[1:]):
        n = int(np.ceil(np.hypot(*(b - a)) / 0.01)) + 1
        t = np.linspace(0, 1, n)[:, None]
        samples.append(a + t * (b - a))
    samples = np.vstack(samples)
    for p in rng.uniform(-3, 9, size=(200, 2)):
        oracle = np.min(np.hypot(*(samples - p).T))
        got = dist_to_polyline(PlanarPoint(*p), line)
        assert abs(got - oracle) < 0.02
        assert got <= oracle + 1e-12


def test_classify_band_polygon():
    path = PathGeometry(PathKind.FOOTPATH, Polygon(square(0, 0, 100)))
    assert classify_band(PlanarPoint(50, 50), path) is Band.ON_PATH
    assert classify_band(PlanarPoint(107, 50), path) is Band.BAND_5_TO_10M
    assert classify_band(PlanarPoint(103, 50), path) is Band.WITHIN_5M
    assert classify_band(PlanarPoint(105, 50), path) is Band.WITHIN_5M
    assert classify_band(PlanarPoint(110, 50), path) is Band.BAND_5_TO_10M
    assert classify_band(PlanarPoint(110.01, 50), path) is Band.OUTSIDE


def test_classify_band_polyline_uses_halfwidth():
    path = PathGeometry(PathKind.CYCLE_LANE, Polyline([(0, 0), (100, 0)]), 1.5)
    assert classify_band(PlanarPoint(50, 1.0), path) is Band.ON_PATH
    assert classify_band(PlanarPoint(50, 6.5), path) is Band.WITHIN_5M
    assert classify_band(PlanarPoint(50, 6.6), path) is Band.BAND_5_TO_10M
    with pytest.raises(DomainError):
        PathGeometry(PathKind.CYCLE_LANE, Polyline([(0, 0), (1, 0)]), 0.0)


def test_classify_band_vs_brute_force():
    rng = np.random.default_rng(7)
    poly_path = PathGeometry(PathKind.FOOTPATH, Polygon(square(0, 0, 40)))
    line_path = PathGeometry(PathKind.SHARED_PATH, Polyline([(0, 0), (30, 30), (60, 0)]), 2.0)
    pts = rng.uniform(-20, 70, size=(10_000, 2))
    for path in (poly_path, line_path):
        counts = {b: 0 for b in Band}
        oracle = {b: 0 for b in Band}
        for p in pts:
            counts[classify_band(PlanarPoint(*p), path)] += 1
            if isinstance(path.shape, Polygon):
                inside = winding_number(p, path.shape.exterior)
                ring = path.shape.exterior
                edge = min(
                    _pt_seg(p, ring[i], ring[(i + 1) % len(ring)]) for i in range(len(ring))
                )
                d = 0.0 if inside else edge
            else:
                v = path.shape.vertices
                d = max(0.0, min(_pt_seg(p, v[i], v[i + 1]) for i in range(len(v) - 1)) - 2.0)
            band = (
                Band.ON_PATH if d == 0 else Band.WITHIN_5M if d <= 5
                else Band.BAND_5_TO_10M if d <= 10 else Band.OUTSIDE
            )
            oracle[band] += 1
        assert counts == oracle
        assert sum(counts.values()) == len(pts)


def _pt_seg(p, a, b):
    ab = b - a
    t = max(0.0, min(1.0, float(np.dot(p - a, ab) / np.dot(ab, ab))))
    return float(np.hypot(*(p - (a + t * ab))))
