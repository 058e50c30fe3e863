import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plkit.errors import EmptyInput, InvalidCurve, PointOnCurve
from plkit.geometry import (GridSet, JordanCurve, Nesting, circle, curve_distance, curve_intersections,
                            ellipse, hausdorff_distance, nesting_relation, outer_contour,
                            rasterize_curves, rasterize_points, topological_hull, winding_number)
from plkit.io import grid_from_json, grid_to_json, load_curve, read_ppm, render_grid, save_curve, write_ppm


# -- curves ------------------------------------------------------------------

def test_winding_examples():
    c = circle(0j, 1.0, 64)
    assert winding_number(c, 0) == 1
    assert winding_number(c, 3) == 0
    assert winding_number(c, 0.5 + 0.5j) == 1
    assert winding_number(c.reversed(), 0) == -1


def test_winding_on_curve_raises():
    c = circle(0j, 1.0, 64)
    with pytest.raises(PointOnCurve):
        winding_number(c, c.vertices[3])


@pytest.mark.parametrize("verts", [
    np.exp(2j * np.pi * np.arange(5) / 5),                       # too few vertices
    np.array([0, 1, 1, 2, 3, 4, 5, 6], dtype=complex),           # repeated vertex
    np.array([0, 2, 2 + 2j, 1j, 1 - 1j, 3 - 1j, 3 + 1j, -1 + 1j]),  # self-intersecting
])
def test_invalid_curves(verts):
    with pytest.raises(InvalidCurve):
        JordanCurve(verts)


def test_orientation_follows_signed_area():
    c = circle(0j, 1.0, 32)
    assert c.orientation == 1
    assert c.reversed().orientation == -1
    with pytest.raises(InvalidCurve):
        JordanCurve(c.vertices, orientation=-1)


def test_curve_distance_examples():
    a, b = circle(0j, 1.0, 512), circle(0j, 2.0, 512)
    assert curve_distance(a, b) == pytest.approx(1.0, abs=1e-4)
    assert curve_distance(a, a) == 0.0
    # segment-pair oracle: nearest vertices are 1 and 2 (both circles have a vertex on the real axis)
    assert curve_distance(circle(0j, 1.0, 256), circle(3 + 0j, 1.0, 256)) == pytest.approx(1.0, abs=1e-12)


def test_nesting_examples():
    r1, r2 = circle(0j, 1.0, 128), circle(0j, 2.0, 128)
    assert nesting_relation(r1, r2) == Nesting.B_INSIDE
    assert nesting_relation(r2, r1) == Nesting.C_OUTSIDE
    assert nesting_relation(r1, circle(1 + 0j, 1.0, 128)) == Nesting.A_INTERSECT
    assert nesting_relation(r1, circle(5 + 0j, 1.0, 128)) == Nesting.DISJOINT_SIDE_BY_SIDE


def test_intersections_of_unit_circles():
    pts = curve_intersections(circle(0j, 1.0, 2048), circle(1 + 0j, 1.0, 2048))
    pts = sorted(pts, key=lambda z: z.imag)
    expect = [0.5 - math.sqrt(3) / 2 * 1j, 0.5 + math.sqrt(3) / 2 * 1j]
    assert len(pts) == 2
    for p, q in zip(pts, expect):
        assert abs(p - q) < 1e-5


def test_hausdorff_concentric():
    assert hausdorff_distance(circle(0j, 1.0, 256), circle(0j, 1.5, 256)) == pytest.approx(0.5, abs=1e-3)


radii = st.floats(0.2, 5.0)
centers = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(r=radii, c=centers, k=st.integers(0, 63), z=centers)
def test_winding_invariant_under_rotation(r, c, k, z):
    cur = circle(c, r, 64)
    if cur.distance_to(np.array([z]))[0] < 1e-6:
        return
    assert winding_number(cur, z) == winding_number(cur.rotated(k), z)


@settings(max_examples=40, deadline=None)
@given(r1=radii, r2=radii, c1=centers, c2=centers)
def test_nesting_duality(r1, r2, c1, c2):
    a, b = circle(c1, r1, 64), circle(c2, r2, 64)
    ab, ba = nesting_relation(a, b), nesting_relation(b, a)
    assert (ab == Nesting.B_INSIDE) == (ba == Nesting.C_OUTSIDE)
    assert (ab == Nesting.A_INTERSECT) == (ba == Nesting.A_INTERSECT)


@settings(max_examples=30, deadline=None)
@given(r=st.lists(radii, min_size=3, max_size=3), c=st.lists(centers, min_size=3, max_size=3))
def test_curve_distance_metric_like(r, c):
    a, b, d = (circle(ci, ri, 64) for ci, ri in zip(c, r))
    eps = 2e-9 * max(a.diameter, b.diameter, d.diameter)
    assert curve_distance(a, b) == pytest.approx(curve_distance(b, a), abs=1e-12)
    assert curve_distance(a, d) <= curve_distance(a, b) + b.diameter + curve_distance(b, d) + eps


def test_ellipse_area():
    e = ellipse(0j, 2.0, 0.5, 2048)
    assert e.area == pytest.approx(math.pi, rel=1e-4)


# -- grids -------------------------------------------------------------------

def test_hull_fills_circle_annulus():
    g = GridSet.square(0j, 2.0, 128)
    ring = rasterize_points(g, np.exp(2j * np.pi * np.arange(8192) / 8192))
    assert not ring.contains(np.array([0j]))[0]
    hull = topological_hull(ring)
    assert hull.contains(np.array([0j]))[0]
    assert hull.count > ring.count
    assert hull.area == pytest.approx(math.pi, rel=0.06)


def test_hull_single_cell_and_two_squares():
    g = GridSet.square(0j, 1.0, 32)
    one = g.like(np.zeros((32, 32), bool))
    one.cells[10, 10] = True
    assert topological_hull(one) == one
    two = np.zeros((32, 32), bool)
    two[2:6, 2:6] = True
    two[20:25, 20:25] = True
    sq = g.like(two)
    assert topological_hull(sq) == sq
    assert len(sq.components()) == 2


def test_hull_empty_raises():
    with pytest.raises(EmptyInput):
        topological_hull(GridSet.square(0j, 1.0, 16))


masks = st.integers(0, 2**31 - 1).map(
    lambda s: np.random.default_rng(s).random((24, 24)) < np.random.default_rng(s + 1).uniform(0.05, 0.6))


@settings(max_examples=40, deadline=None)
@given(m=masks)
def test_hull_properties(m):
    if not m.any():
        return
    g = GridSet.empty(-1 - 1j, 1 + 1j, 24).like(m)
    h = topological_hull(g)
    assert g.issubset(h)
    assert topological_hull(h) == h
    # every empty component of a full set reaches the rectangle border
    from scipy import ndimage
    lab, n = ndimage.label(~h.cells, structure=ndimage.generate_binary_structure(2, 1))
    border = set(np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]]).tolist())
    assert set(range(1, n + 1)) <= border


@settings(max_examples=40, deadline=None)
@given(m1=masks, m2=masks)
def test_set_algebra(m1, m2):
    g = GridSet.empty(-1 - 1j, 1 + 1j, 24)
    a, b = g.like(m1), g.like(m2)
    assert (a | b).count == a.count + b.count - (a & b).count
    assert (a - b).issubset(a)
    assert ((a - b) & b).count == 0
    assert a.issubset(a.dilate(1))


def test_closed_cell_rasterization_marks_both_sides_of_an_edge():
    g = GridSet.empty(-1 - 1j, 1 + 1j, 16)
    # x = 0 is the shared edge between columns 7 and 8
    hit = rasterize_points(g, np.array([0.0 + 0.3j]))
    assert hit.count == 2
    assert hit.mirror_conj().count == 2


def test_grid_json_roundtrip(tmp_path):
    g = GridSet.square(0.5j, 1.5, 40)
    m = np.random.default_rng(3).random((40, 40)) < 0.3
    g = g.like(m)
    d = json.loads(json.dumps(grid_to_json(g)))
    assert d["nx"] == 40 and d["ny"] == 40 and "bitmask" in d
    assert grid_from_json(d) == g


def test_curve_json_roundtrip(tmp_path):
    c = ellipse(1 + 1j, 2.0, 1.0, 64)
    save_curve(tmp_path / "c.json", c)
    assert np.array_equal(load_curve(tmp_path / "c.json").vertices, c.vertices)
    raw = json.loads((tmp_path / "c.json").read_text())
    assert all(len(p) == 2 for p in raw)


def test_ppm_one_pixel_per_cell(tmp_path):
    g = GridSet.empty(-1 - 1j, 1 + 1j, 20, 20)
    m = np.zeros((20, 20), bool)
    m[0, 0] = True                       # bottom-left cell
    img = render_grid(g.like(m))
    write_ppm(tmp_path / "g.ppm", img)
    back = read_ppm(tmp_path / "g.ppm")
    assert back.shape == (20, 20, 3)
    assert (back[-1, 0] == 0).all() and (back[0, 0] == 255).all()
    assert (tmp_path / "g.ppm").read_bytes().startswith(b"P6\n20 20\n255\n")


def test_outer_contour_of_disk():
    g = GridSet.square(0j, 2.0, 128)
    disk = topological_hull(rasterize_curves(g, [circle(0j, 1.0, 512)]))
    c = outer_contour(disk)
    assert c.contains(np.array([0j]))[0]
    assert not c.contains(np.array([1.2 + 0j]))[0]
    assert c.area == pytest.approx(disk.area, rel=0.05)


@settings(max_examples=20, deadline=None)
@given(cx=st.floats(-1, 1), cy=st.floats(-1, 1), a=st.floats(0.3, 2), b=st.floats(0.3, 2))
def test_hausdorff_matches_shapely(cx, cy, a, b):
    import shapely
    c1 = circle(0j, 1.0, 64)
    c2 = ellipse(complex(cx, cy), a, b, 64)

    def ring(c):
        v = np.append(c.vertices, c.vertices[0])
        return shapely.LineString(np.c_[v.real, v.imag])

    ref = shapely.hausdorff_distance(ring(c1), ring(c2), densify=0.002)
    assert hausdorff_distance(c1, c2) == pytest.approx(ref, abs=0.01 * max(ref, 1e-3) + 1e-3)
