"""Plane primitives: Jordan polylines, grid bitmasks, hulls and predicates.

Points are plain Python/numpy ``complex`` values.  Curves are closed
polylines (the last vertex joins the first).  Heavy polyline predicates
(distance, intersection, simplicity) are delegated to shapely/GEOS; the
winding number and grid algorithms are implemented here.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import EmptyInput, InvalidCurve, PointOnCurve

GEOM_EPS_REL = 1e-9

_FOUR = ndimage.generate_binary_structure(2, 1)
_EIGHT = ndimage.generate_binary_structure(2, 2)


def as_cpoint(z) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"non-finite point {z!r}")
    return z


# --------------------------------------------------------------------------
# curves
# --------------------------------------------------------------------------

def _signed_area(v: np.ndarray) -> float:
    x, y = v.real, v.imag
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


class JordanCurve:
    """Closed simple polyline with a fixed orientation (+1 ccw, -1 cw)."""

    __slots__ = ("vertices", "orientation", "_ring")

    def __init__(self, vertices, orientation: int | None = None, validate: bool = True):
        v = np.ascontiguousarray(np.asarray(vertices, dtype=complex).ravel())
        if len(v) > 1 and v[0] == v[-1]:
            v = v[:-1]
        area = _signed_area(v) if len(v) >= 3 else 0.0
        sign = 1 if area > 0 else -1
        if validate:
            if len(v) < 8:
                raise InvalidCurve(f"need at least 8 vertices, got {len(v)}")
            if not np.all(np.isfinite(v)):
                raise InvalidCurve("non-finite vertex")
            if np.any(v == np.roll(v, -1)):
                raise InvalidCurve("consecutive vertices coincide")
            if area == 0.0:
                raise InvalidCurve("degenerate curve (zero area)")
            if orientation is not None and orientation != sign:
                raise InvalidCurve("orientation does not match signed area")
        v.setflags(write=False)
        self.vertices = v
        self.orientation = sign
        self._ring = None
        if validate and not shapely.is_simple(self.ring):
            raise InvalidCurve("polyline is not simple")

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return f"JordanCurve(n={len(self)}, orientation={self.orientation:+d}, diameter={self.diameter:.4g})"

    @property
    def ring(self):
        if self._ring is None:
            v = self.vertices
            self._ring = shapely.linearrings(np.column_stack([v.real, v.imag]))
        return self._ring

    @property
    def polygon(self):
        return shapely.Polygon(self.ring)

    @property
    def area(self) -> float:
        return abs(_signed_area(self.vertices))

    @property
    def diameter(self) -> float:
        v = self.vertices
        return float(max(np.ptp(v.real), np.ptp(v.imag)) * math.sqrt(2))

    @property
    def eps(self) -> float:
        return GEOM_EPS_REL * self.diameter

    def bounds(self):
        v = self.vertices
        return complex(v.real.min(), v.imag.min()), complex(v.real.max(), v.imag.max())

    def centroid(self) -> complex:
        c = self.polygon.centroid
        return complex(c.x, c.y)

    def rotated(self, k: int) -> "JordanCurve":
        return JordanCurve(np.roll(self.vertices, -k), validate=False)

    def reversed(self) -> "JordanCurve":
        return JordanCurve(self.vertices[::-1], validate=False)

    def contains(self, z) -> np.ndarray:
        """Vectorized strict interior test (shapely ``contains_xy``)."""
        z = np.asarray(z, dtype=complex)
        return shapely.contains_xy(self.polygon, z.real, z.imag)

    def distance_to(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return _point_polyline_distance(z, self.vertices)

    def segment_points(self, s) -> np.ndarray:
        """Points at (fractional) vertex parameter ``s``; s in [0, n)."""
        s = np.asarray(s, dtype=float)
        n = len(self.vertices)
        k = np.floor(s).astype(int) % n
        t = s - np.floor(s)
        a = self.vertices[k]
        b = self.vertices[(k + 1) % n]
        return a + t * (b - a)

    def to_json(self):
        return [[float(z.real), float(z.imag)] for z in self.vertices]

    @classmethod
    def from_json(cls, data):
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise InvalidCurve("curve JSON must be a list of [re, im] pairs")
        return cls(arr[:, 0] + 1j * arr[:, 1])


def circle(center=0j, radius: float = 1.0, n: int = 256) -> JordanCurve:
    t = 2 * np.pi * np.arange(n) / n
    return JordanCurve(complex(center) + radius * np.exp(1j * t))


def ellipse(center=0j, a: float = 1.0, b: float = 0.5, n: int = 256) -> JordanCurve:
    t = 2 * np.pi * np.arange(n) / n
    return JordanCurve(complex(center) + a * np.cos(t) + 1j * b * np.sin(t))


def _point_polyline_distance(z: np.ndarray, v: np.ndarray, chunk: int = 2048) -> np.ndarray:
    z = np.atleast_1d(z)
    a = v
    d = np.roll(v, -1) - v
    dd = np.maximum((d * d.conjugate()).real, 1e-300)
    out = np.empty(z.shape, dtype=float)
    flat = z.ravel()
    res = out.ravel()
    for i in range(0, len(flat), chunk):
        p = flat[i:i + chunk, None]
        t = np.clip(((p - a) * d.conjugate()).real / dd, 0.0, 1.0)
        res[i:i + chunk] = np.abs(p - (a + t * d)).min(axis=1)
    return out


def winding_number(curve: JordanCurve, z, eps: float | None = None) -> int:
    """Winding number of ``curve`` around ``z`` (crossing-rule algorithm)."""
    z = as_cpoint(z)
    eps = curve.eps if eps is None else eps
    if float(_point_polyline_distance(np.array([z]), curve.vertices)[0]) <= eps:
        raise PointOnCurve(f"{z} within {eps:.3g} of the curve")
    p0 = curve.vertices - z
    p1 = np.roll(p0, -1)
    cross = p0.real * p1.imag - p1.real * p0.imag
    up = (p0.imag <= 0) & (p1.imag > 0) & (cross > 0)
    down = (p0.imag > 0) & (p1.imag <= 0) & (cross < 0)
    return int(up.sum()) - int(down.sum())


def curve_distance(a: JordanCurve, b: JordanCurve) -> float:
    """Minimum Euclidean distance between two closed polylines (0 if they meet)."""
    return float(shapely.distance(a.ring, b.ring))


def curve_intersections(a: JordanCurve, b: JordanCurve, limit: int = 64) -> list[complex]:
    inter = shapely.intersection(a.ring, b.ring)
    pts = shapely.get_coordinates(inter)
    out = [complex(x, y) for x, y in pts[:limit]]
    return out


def _directed_polyline_distance(a, b) -> float:
    """max over vertices of ``a`` of the distance to the polylines ``b``.

    The nearest vertex of ``b`` (KD-tree) is refined to the two segments
    incident to it."""
    va = np.concatenate([c.vertices for c in a])
    starts, segs_a, segs_b = [], [], []
    off = 0
    for c in b:
        v = c.vertices
        segs_a.append(v)
        segs_b.append(np.roll(v, -1))
        starts.append(np.full(len(v), off))
        off += len(v)
    vb = np.concatenate(segs_a)
    nb = np.concatenate(segs_b)
    first = np.concatenate(starts)
    lens = np.concatenate([np.full(len(c.vertices), len(c.vertices)) for c in b])
    _, j = cKDTree(np.column_stack([vb.real, vb.imag])).query(np.column_stack([va.real, va.imag]))
    prev = first[j] + (j - first[j] - 1) % lens[j]

    def seg_dist(p, s0, s1):
        d = s1 - s0
        t = np.clip(((p - s0) * d.conj()).real / np.maximum(np.abs(d) ** 2, 1e-300), 0, 1)
        return np.abs(p - (s0 + t * d))

    dist = np.minimum(seg_dist(va, vb[j], nb[j]), seg_dist(va, vb[prev], nb[prev]))
    return float(dist.max())


def multicurve_hausdorff(a, b) -> float:
    """Hausdorff distance between two families of closed polylines (vertex-to-segment)."""
    return max(_directed_polyline_distance(a, b), _directed_polyline_distance(b, a))


def hausdorff_distance(a: JordanCurve, b: JordanCurve) -> float:
    return multicurve_hausdorff([a], [b])


class Nesting(str, enum.Enum):
    A_INTERSECT = "A_INTERSECT"
    B_INSIDE = "B_INSIDE"
    C_OUTSIDE = "C_OUTSIDE"
    DISJOINT_SIDE_BY_SIDE = "DISJOINT_SIDE_BY_SIDE"


def nesting_relation(a: JordanCurve, b: JordanCurve) -> Nesting:
    """Relative position of curve ``a`` with respect to curve ``b``.

    ``B_INSIDE`` means ``a`` lies strictly inside ``b``; ``C_OUTSIDE`` means
    ``b`` lies strictly inside ``a``.
    """
    eps = GEOM_EPS_REL * max(a.diameter, b.diameter)
    if curve_distance(a, b) <= eps:
        return Nesting.A_INTERSECT
    # no contact: each curve is entirely on one side of the other
    if winding_number(b, a.vertices[0], eps) != 0:
        return Nesting.B_INSIDE
    if winding_number(a, b.vertices[0], eps) != 0:
        return Nesting.C_OUTSIDE
    return Nesting.DISJOINT_SIDE_BY_SIDE


def polygon_offset_outward(curve: JordanCurve, idx: np.ndarray, amount: float) -> JordanCurve:
    """Move the listed vertices along the outward normal by ``amount``."""
    v = curve.vertices.copy()
    tangent = np.roll(v, -1) - np.roll(v, 1)
    normal = -1j * tangent * curve.orientation
    normal /= np.maximum(np.abs(normal), 1e-300)
    v[idx] = v[idx] + amount * normal[idx]
    return JordanCurve(v)


# --------------------------------------------------------------------------
# grids
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GridSet:
    """Bitmask over the rectangle [lo, hi] with square cells.

    ``cells[iy, ix]`` is cell ``(ix, iy)``; cell centres are placed
    symmetrically about the rectangle centre so that grids centred on the
    real axis are exactly conjugation-symmetric.
    """

    lo: complex
    hi: complex
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=bool)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "lo", complex(self.lo))
        object.__setattr__(self, "hi", complex(self.hi))
        ny, nx = cells.shape
        if nx < 16 or ny < 16:
            raise ValueError("grid needs at least 16x16 cells")
        w, h = self.hi.real - self.lo.real, self.hi.imag - self.lo.imag
        if not (w > 0 and h > 0):
            raise ValueError("grid rectangle must have positive width and height")
        if abs(w / nx - h / ny) > 1e-9 * max(w / nx, h / ny):
            raise ValueError("grid cells must be square")

    # -- construction --------------------------------------------------
    @classmethod
    def empty(cls, lo, hi, nx: int, ny: int | None = None) -> "GridSet":
        ny = nx if ny is None else ny
        return cls(lo, hi, np.zeros((ny, nx), dtype=bool))

    @classmethod
    def square(cls, center=0j, half_width: float = 2.0, n: int = 1024) -> "GridSet":
        c = complex(center)
        d = complex(half_width, half_width)
        return cls.empty(c - d, c + d, n, n)

    def like(self, cells) -> "GridSet":
        return GridSet(self.lo, self.hi, cells)

    # -- geometry -----------------------------------------------------
    @property
    def nx(self) -> int:
        return self.cells.shape[1]

    @property
    def ny(self) -> int:
        return self.cells.shape[0]

    @property
    def cell_size(self) -> float:
        return (self.hi.real - self.lo.real) / self.nx

    @property
    def center(self) -> complex:
        return 0.5 * (self.lo + self.hi)

    def axes(self):
        h = self.cell_size
        c = self.center
        xs = c.real + (np.arange(self.nx) - (self.nx - 1) / 2) * h
        ys = c.imag + (np.arange(self.ny) - (self.ny - 1) / 2) * h
        return xs, ys

    def centers(self) -> np.ndarray:
        xs, ys = self.axes()
        return xs[None, :] + 1j * ys[:, None]

    def occupied_centers(self) -> np.ndarray:
        iy, ix = np.nonzero(self.cells)
        xs, ys = self.axes()
        return xs[ix] + 1j * ys[iy]

    def index_of(self, z):
        """Cell indices ``(iy, ix, inside)`` for points ``z``."""
        z = np.asarray(z, dtype=complex)
        h = self.cell_size
        with np.errstate(invalid="ignore"):
            fx = np.floor((z.real - self.lo.real) / h)
            fy = np.floor((z.imag - self.lo.imag) / h)
        ok = np.isfinite(fx) & np.isfinite(fy) & (fx >= 0) & (fx < self.nx) & (fy >= 0) & (fy < self.ny)
        ix = np.where(ok, fx, 0).astype(np.int64)
        iy = np.where(ok, fy, 0).astype(np.int64)
        return iy, ix, ok

    def contains(self, z, tol_cells: int = 0) -> np.ndarray:
        cells = self.dilate(tol_cells).cells if tol_cells else self.cells
        iy, ix, ok = self.index_of(z)
        return ok & cells[iy, ix]

    @property
    def count(self) -> int:
        return int(self.cells.sum())

    @property
    def area(self) -> float:
        return self.count * self.cell_size ** 2

    def is_empty(self) -> bool:
        return not self.cells.any()

    # -- set algebra ----------------------------------------------------
    def same_grid(self, other: "GridSet") -> bool:
        return self.lo == other.lo and self.hi == other.hi and self.cells.shape == other.cells.shape

    def _check(self, other):
        if not self.same_grid(other):
            raise ValueError("grids differ")

    def __or__(self, other):
        self._check(other)
        return self.like(self.cells | other.cells)

    def __and__(self, other):
        self._check(other)
        return self.like(self.cells & other.cells)

    def __sub__(self, other):
        self._check(other)
        return self.like(self.cells & ~other.cells)

    def __eq__(self, other):
        return isinstance(other, GridSet) and self.same_grid(other) and bool(np.array_equal(self.cells, other.cells))

    __hash__ = None

    def issubset(self, other: "GridSet") -> bool:
        self._check(other)
        return not (self.cells & ~other.cells).any()

    def dilate(self, k: int = 1) -> "GridSet":
        if k <= 0:
            return self
        return self.like(ndimage.binary_dilation(self.cells, structure=_EIGHT, iterations=k))

    def distance_cells(self) -> np.ndarray:
        """Euclidean distance (in cells) from every cell centre to the set."""
        if not self.cells.any():
            return np.full(self.cells.shape, np.inf)
        return ndimage.distance_transform_edt(~self.cells)

    def hausdorff_cells(self, other: "GridSet") -> float:
        self._check(other)
        if self.is_empty() or other.is_empty():
            return 0.0 if self.is_empty() and other.is_empty() else math.inf
        d1 = other.distance_cells()[self.cells].max()
        d2 = self.distance_cells()[other.cells].max()
        return float(max(d1, d2))

    def components(self):
        """8-connected components of the occupied cells: (labels, count)."""
        return ndimage.label(self.cells, structure=_EIGHT)

    def boundary(self) -> "GridSet":
        inner = ndimage.binary_erosion(self.cells, structure=_FOUR, border_value=0)
        return self.like(self.cells & ~inner)

    def mirror_conj(self) -> "GridSet":
        """Image under complex conjugation (requires a real-axis-centred grid)."""
        return self.like(self.cells[::-1, :])

    def mirror_neg(self) -> "GridSet":
        """Image under z -> -z (requires an origin-centred grid)."""
        return self.like(self.cells[::-1, ::-1])

    # -- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        from .io import grid_to_json
        return grid_to_json(self)


def topological_hull(s: GridSet) -> GridSet:
    """Fill every cell not 4-connected to the rectangle border through empty cells."""
    if s.is_empty():
        raise EmptyInput("topological hull of an empty grid set")
    labels, _ = ndimage.label(~s.cells, structure=_FOUR)
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    border = border[border > 0]
    outside = np.isin(labels, border)
    return s.like(~outside)


def rasterize_curves(grid: GridSet, curves, mark_vertices: bool = True) -> GridSet:
    """Union of the closed interiors of ``curves`` on ``grid``'s lattice.

    A cell is occupied when its centre is inside a curve (even-odd rule along
    scanlines) or, with ``mark_vertices``, when the curve itself passes
    through it (edges sampled every half cell).  The latter keeps components
    and slivers thinner than a cell visible.
    """
    xs, ys = grid.axes()
    h = grid.cell_size
    ny, nx = grid.cells.shape
    out = np.zeros((ny, nx), dtype=bool)
    y0c = ys[0]
    x0c = xs[0]
    for c in curves:
        v = c.vertices
        a, b = v, np.roll(v, -1)
        ya, yb = a.imag, b.imag
        lo_y = np.minimum(ya, yb)
        hi_y = np.maximum(ya, yb)
        # rows whose centre y satisfies lo_y <= y < hi_y
        r0 = np.ceil((lo_y - y0c) / h).astype(np.int64)
        r1 = np.ceil((hi_y - y0c) / h).astype(np.int64)
        r0 = np.clip(r0, 0, ny)
        r1 = np.clip(r1, 0, ny)
        span = np.maximum(r1 - r0, 0)
        toggles = np.zeros((ny, nx + 1), dtype=np.int64)
        if span.sum():
            e = np.repeat(np.arange(len(v)), span)
            offs = np.arange(span.sum()) - np.repeat(np.cumsum(span) - span, span)
            rows = r0[e] + offs
            yc = ys[rows]
            t = (yc - ya[e]) / (yb[e] - ya[e])
            xcross = a.real[e] + t * (b.real[e] - a.real[e])
            col = np.ceil((xcross - x0c) / h).astype(np.int64)
            col = np.clip(col, 0, nx)
            np.add.at(toggles, (rows, col), 1)
        inside = (np.cumsum(toggles, axis=1)[:, :nx] & 1).astype(bool)
        out |= inside
        if mark_vertices:
            m = np.maximum(np.ceil(np.abs(b - a) / (0.5 * h)).astype(np.int64), 1)
            e = np.repeat(np.arange(len(v)), m)
            t = (np.arange(m.sum()) - np.repeat(np.cumsum(m) - m, m)) / m[e]
            iy, ix, ok = grid.index_of(a[e] + t * (b[e] - a[e]))
            out[iy[ok], ix[ok]] = True
    return grid.like(out)


def closed_cell_hits(grid: GridSet, pts):
    """(iy, ix, k) for every cell whose closure contains ``pts[k]``.

    A point on a cell edge belongs to both neighbours, which keeps
    mirror-symmetric point sets symmetric on the lattice."""
    pts = np.asarray(pts, dtype=complex).ravel()
    h = grid.cell_size
    fin = np.isfinite(pts)
    fx = np.where(fin, (pts.real - grid.lo.real) / h, -1.0)
    fy = np.where(fin, (pts.imag - grid.lo.imag) / h, -1.0)
    out_y, out_x, out_k = [], [], []
    for dx in (0, 1):
        for dy in (0, 1):
            if dx or dy:
                sel = ((fx == np.floor(fx)) | (dx == 0)) & ((fy == np.floor(fy)) | (dy == 0))
            else:
                sel = np.ones(len(pts), dtype=bool)
            ix = np.floor(fx).astype(np.int64) - dx
            iy = np.floor(fy).astype(np.int64) - dy
            ok = sel & fin & (ix >= 0) & (ix < grid.nx) & (iy >= 0) & (iy < grid.ny)
            k = np.nonzero(ok)[0]
            out_y.append(iy[k]); out_x.append(ix[k]); out_k.append(k)
    return np.concatenate(out_y), np.concatenate(out_x), np.concatenate(out_k)


def rasterize_points(grid: GridSet, pts) -> GridSet:
    """Cells whose closure contains one of ``pts``."""
    iy, ix, _ = closed_cell_hits(grid, pts)
    cells = np.zeros(grid.cells.shape, dtype=bool)
    cells[iy, ix] = True
    return grid.like(cells)


def outer_contour(mask: GridSet) -> JordanCurve:
    """Outer boundary of the largest component of ``hull(mask)`` as a polyline.

    Marching squares at level 1/2 on the cell-centre lattice; the returned
    curve passes between occupied and empty centres.
    """
    from skimage import measure

    filled = topological_hull(mask).cells
    padded = np.pad(filled.astype(float), 1)
    contours = measure.find_contours(padded, 0.5)
    if not contours:
        raise EmptyInput("no contour")
    xs, ys = mask.axes()
    h = mask.cell_size
    best, best_area = None, -1.0
    for c in contours:
        if len(c) < 9 or np.any(c[0] != c[-1]):
            continue
        z = (xs[0] + (c[:-1, 1] - 1) * h) + 1j * (ys[0] + (c[:-1, 0] - 1) * h)
        ar = abs(_signed_area(z))
        if ar > best_area:
            best, best_area = z, ar
    if best is None:
        raise EmptyInput("no closed contour")
    keep = np.abs(best - np.roll(best, 1)) > 0
    return JordanCurve(best[keep])
