"""Grid approximations of K, K* and maximal completely invariant subsets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import EmptyInput, NotForwardInvariant, ResolutionTooCoarse
from .geometry import (GridSet, JordanCurve, closed_cell_hits, multicurve_hausdorff, rasterize_curves,
                       rasterize_points, topological_hull)
from .maps import ESCAPED_AT, Disk, forward_orbit
from .pullback import _g_dg, _kernel_args, iterate_pullback, pullback_curve


@dataclass(frozen=True, eq=False)
class InvariantSetReport:
    K: GridSet
    full: bool
    forward_ok: bool
    backward_ok: bool
    contains_critical: bool
    cell_size: float
    forward_rate: float = 1.0
    backward_rate: float = 1.0
    escape_time: np.ndarray | None = field(default=None, repr=False)
    representatives: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {"cells": self.K.count, "area": self.K.area, "full": self.full,
                "forward_ok": self.forward_ok, "backward_ok": self.backward_ok,
                "contains_critical": self.contains_critical, "cell_size": self.cell_size,
                "forward_rate": self.forward_rate, "backward_rate": self.backward_rate}


def analysis_grid(pm, resolution: int = 1024, pad: float = 0.02) -> GridSet:
    """Square grid over the bounding box of U′, centred on the box centre."""
    if pm.preimage_components:
        lo = min(c.bounds()[0].real for c in pm.preimage_components), \
            min(c.bounds()[0].imag for c in pm.preimage_components)
        hi = max(c.bounds()[1].real for c in pm.preimage_components), \
            max(c.bounds()[1].imag for c in pm.preimage_components)
        lo, hi = complex(*lo), complex(*hi)
    else:
        lo, hi = pm.range.bounds()
    c = 0.5 * (lo + hi)
    # snap the centre so that grids of maps with real coefficients stay real-symmetric
    if np.all(np.abs(np.imag(pm.map.num)) == 0) and np.all(np.abs(np.imag(pm.map.den)) == 0):
        c = complex(c.real, 0.0)
    half = 0.5 * max(hi.real - lo.real, hi.imag - lo.imag) * (1 + pad) + abs(c - 0.5 * (lo + hi))
    return GridSet.square(c, half, resolution)


# --------------------------------------------------------------------------
# escape time
# --------------------------------------------------------------------------

@numba.njit(cache=True, parallel=True)
def _escape_disk(num, dnum, den, dden, poly, zs, center, radius, horizon):
    out = np.empty(zs.shape[0], dtype=np.int32)
    r2 = radius * radius
    for k in numba.prange(zs.shape[0]):
        z = zs[k]
        n = horizon
        for i in range(horizon):
            w = z - center
            if w.real * w.real + w.imag * w.imag >= r2:
                n = i
                break
            if not poly:
                if _horner_abs_small(den, z):
                    n = i
                    break
            g, _ = _g_dg(num, dnum, den, dden, poly, z)
            z = g
        out[k] = n
    return out


@numba.njit(cache=True)
def _horner_abs_small(den, z):
    acc = den[den.shape[0] - 1]
    for k in range(den.shape[0] - 2, -1, -1):
        acc = acc * z + den[k]
    return abs(acc) < 1e-300


def escape_times(pm, z, horizon: int = 200, vprime=None) -> np.ndarray:
    """Number of iterates that stay in the domain (``horizon`` = survived).

    An orbit stays in U′ = g^{-1}(U) exactly when every iterate stays in U,
    so for a disk range the test is a single radius comparison per step.
    """
    z = np.ascontiguousarray(np.asarray(z, dtype=complex).ravel())
    dom = pm.range if vprime is None else vprime
    if isinstance(dom, Disk):
        return _escape_disk(*_kernel_args(pm.map), z, complex(dom.center), float(dom.radius), int(horizon))
    # generic Jordan domain: vectorized numpy with shapely containment
    n = np.full(z.shape, horizon, dtype=np.int32)
    live = np.ones(z.shape, dtype=bool)
    w = z.copy()
    inside = dom.contains if hasattr(dom, "contains") else (lambda p: np.ones(p.shape, bool))
    for i in range(horizon):
        idx = np.nonzero(live)[0]
        if len(idx) == 0:
            break
        ok = np.asarray(inside(w[idx]), dtype=bool)
        n[idx[~ok]] = i
        live[idx[~ok]] = False
        idx = idx[ok]
        with np.errstate(all="ignore"):
            w[idx] = pm.map.eval(w[idx])
    return n


# --------------------------------------------------------------------------
# boundary samples by inverse iteration
# --------------------------------------------------------------------------

def _symmetries(m):
    real = np.all(np.imag(m.num) == 0) and np.all(np.imag(m.den) == 0)
    even = np.all(m.num[1::2] == 0) and np.all(m.den[1::2] == 0)
    return real, even


def julia_samples(pm, grid: GridSet, max_levels: int = 80, max_points: int = 400_000) -> np.ndarray:
    """Points of the backward tree of a repelling fixed point, one per quarter cell.

    Each level keeps every preimage inside U′, deduplicated on a lattice four
    times finer than ``grid``; iteration stops when a level adds no new keys.
    """
    m = pm.map
    fix = _fixed_points(m)
    rep = fix[(np.abs(m.deriv(fix)) > 1 + pm.tol.mult_tol) & pm.in_domain(fix)]
    if len(rep) == 0:
        return np.empty(0, dtype=complex)
    q = grid.cell_size / 4
    seen = set()
    level = np.array(sorted(rep, key=lambda z: (z.real, z.imag)), dtype=complex)
    out = [level]
    for _ in range(max_levels):
        pre = m.preimages_batch(level).ravel()
        pre = pre[np.isfinite(pre)]
        pre = pre[pm.in_domain(pre)]
        if len(pre) == 0:
            break
        keys = np.round(pre.real / q).astype(np.int64) * 1_000_003 + np.round(pre.imag / q).astype(np.int64)
        _, first = np.unique(keys, return_index=True)
        fresh = [i for i in first if keys[i] not in seen]
        if not fresh:
            break
        seen.update(keys[fresh].tolist())
        level = pre[np.sort(np.asarray(fresh))]
        out.append(level)
        if len(seen) > max_points:
            break
    pts = np.concatenate(out)
    real, even = _symmetries(m)
    if real:
        pts = np.concatenate([pts, pts.conj()])
    if even:
        pts = np.concatenate([pts, -pts])
    return pts


def _fixed_points(m) -> np.ndarray:
    from numpy.polynomial import polynomial as P
    c = P.polysub(m.num, P.polymul(m.den, [0, 1]))
    return np.roots(np.trim_zeros(c, "b")[::-1]).astype(complex)


# --------------------------------------------------------------------------
# flags
# --------------------------------------------------------------------------

def _sample_cells(K: GridSet, n: int, seed: int, reps=None) -> np.ndarray:
    pts = K.occupied_centers()
    if reps is not None:
        r = reps[K.cells]
        pts = np.where(np.isfinite(r), r, pts)
    if len(pts) <= n:
        return pts
    rng = np.random.default_rng(seed)
    return pts[np.sort(rng.choice(len(pts), n, replace=False))]


def invariance_rates(pm, K: GridSet, n_samples: int = 200, seed: int | None = None, tol_cells: int = 1,
                     representatives=None):
    """Fractions of sampled occupied cells passing the forward and backward tests.

    Each cell is tested at its centre, or at ``representatives[iy, ix]``
    where that is finite (a known point of K inside the cell).
    """
    seed = pm.tol.seed if seed is None else seed
    pts = _sample_cells(K, n_samples, seed, representatives)
    if len(pts) == 0:
        return 0.0, 0.0
    fat = K.dilate(tol_cells)
    fwd = fat.contains(pm.map.eval(pts))
    pre = pm.map.preimages_batch(pts)
    bwd = np.ones(len(pts), dtype=bool)
    for j in range(pre.shape[1]):
        col = pre[:, j]
        rel = np.isfinite(col) & pm.in_domain(np.where(np.isfinite(col), col, 0))
        bwd &= ~rel | fat.contains(col)
    return float(fwd.mean()), float(bwd.mean())


def _critical_bounded(pm) -> bool:
    return all(rec.outcome != ESCAPED_AT for rec in pm.critical_orbits)


def invariance_flags(pm, K: GridSet, n_samples: int = 200, seed: int | None = None,
                     pass_rate: float = 0.99, representatives=None) -> InvariantSetReport:
    if K.count < 10:
        raise ResolutionTooCoarse(f"K occupies only {K.count} cells")
    f, b = invariance_rates(pm, K, n_samples, seed, representatives=representatives)
    crit_in = _critical_bounded(pm)
    if crit_in and len(pm.critical_points):
        crit_in = bool(np.all(K.contains(pm.critical_points, tol_cells=1)))
    full = topological_hull(K) == K
    return InvariantSetReport(K, bool(full), f >= pass_rate, b >= pass_rate, bool(crit_in),
                              K.cell_size, f, b, None, representatives)


def nonescaping_set(pm, vprime=None, resolution: int = 1024, horizon: int = 200,
                    boundary_samples: bool = True, n_samples: int = 200,
                    grid: GridSet | None = None) -> InvariantSetReport:
    """Cells whose centre survives ``horizon`` iterates inside the domain.

    Cells containing inverse-iteration samples of ∂K are added as well, so
    thin parts of K (and totally disconnected K, which cell centres almost
    never hit) are represented: the result approximates the set of cells
    meeting K.
    """
    grid = analysis_grid(pm, resolution) if grid is None else grid
    zs = grid.centers()
    t = escape_times(pm, zs, horizon, vprime).reshape(grid.cells.shape)
    K = grid.like(t >= horizon)
    reps = None
    if boundary_samples:
        js = julia_samples(pm, grid)
        extra = rasterize_points(grid, js) - K
        K = K | extra
        reps = np.full(grid.cells.shape, np.nan, dtype=complex)
        iy, ix, k = closed_cell_hits(grid, js)
        reps[iy, ix] = js[k]
        reps[~extra.cells] = np.nan
    rep = invariance_flags(pm, K, n_samples, representatives=reps)
    return InvariantSetReport(rep.K, rep.full, rep.forward_ok, rep.backward_ok, rep.contains_critical,
                              rep.cell_size, rep.forward_rate, rep.backward_rate, t, reps)


# --------------------------------------------------------------------------
# maximal completely invariant subset
# --------------------------------------------------------------------------

def _forward_allowance(pm, pts, h):
    return (np.abs(pm.map.deriv(pts)) + 2.0) * h / math.sqrt(2)


def maximal_invariant_subset(pm, X: GridSet, horizon: int = 8, check_forward: bool = True,
                             max_rounds: int = 200) -> GridSet:
    """Largest completely invariant full set inside hull(X), at grid resolution.

    Each round removes cells whose image leaves the current set and cells
    with a preimage in U′ outside it (``horizon`` backward levels per round),
    then re-hulls; rounds repeat until nothing changes.  Distances to the set
    are compared against a per-cell allowance covering the spread of a cell
    under g (forward) or g^{-1} (backward).
    """
    if X.is_empty():
        raise EmptyInput("empty X")
    h = X.cell_size
    S = topological_hull(X)
    if check_forward:
        pts = X.occupied_centers()
        d = S.distance_cells()
        iy, ix, ok = S.index_of(pm.map.eval(pts))
        dist = np.where(ok, d[iy, ix] * h, np.inf)
        bad = dist > _forward_allowance(pm, pts, h)
        if bad.mean() > 0.01:
            raise NotForwardInvariant(f"{int(bad.sum())} of {len(pts)} cells map outside hull(X)")
    for _ in range(max_rounds):
        before = S.count
        # forward pruning to a fixpoint
        while True:
            pts = S.occupied_centers()
            if len(pts) == 0:
                return S
            d = S.distance_cells()
            iy, ix, ok = S.index_of(pm.map.eval(pts))
            dist = np.where(ok, d[iy, ix] * h, np.inf)
            drop = dist > _forward_allowance(pm, pts, h)
            if not drop.any():
                break
            cells = S.cells.copy()
            jy, jx, _ = S.index_of(pts[drop])
            cells[jy, jx] = False
            S = S.like(cells)
        # backward pruning, several levels per round
        for _ in range(horizon):
            pts = S.occupied_centers()
            if len(pts) == 0:
                return S
            d = S.distance_cells()
            pre = pm.map.preimages_batch(pts)
            drop = np.zeros(len(pts), dtype=bool)
            for j in range(pre.shape[1]):
                y = pre[:, j]
                fin = np.isfinite(y)
                y = np.where(fin, y, 0)
                rel = fin & pm.in_domain(y)
                iy, ix, ok = S.index_of(y)
                dist = np.where(ok, d[iy, ix] * h, np.inf)
                with np.errstate(divide="ignore"):
                    allow = h / math.sqrt(2) * (1 + 1 / np.abs(pm.map.deriv(y)))
                drop |= rel & (dist > allow)
            if not drop.any():
                break
            cells = S.cells.copy()
            jy, jx, _ = S.index_of(pts[drop])
            cells[jy, jx] = False
            S = S.like(cells)
        if S.is_empty():
            return S
        S = topological_hull(S)
        if S.count == before:
            break
    return S


def postcritical_invariant_subset(pm) -> GridSet:
    """X* for X = the postcritical grid (may well be empty)."""
    if pm.postcritical is None or pm.postcritical.is_empty():
        raise EmptyInput("no postcritical cells")
    try:
        # padded P_g cells near repelling spots spill over the hull, so skip the precondition
        return maximal_invariant_subset(pm, pm.postcritical, check_forward=False)
    except EmptyInput:
        return pm.postcritical.like(np.zeros_like(pm.postcritical.cells))


# --------------------------------------------------------------------------
# K* as nested pullbacks of a certificate
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KStarResult:
    grid: GridSet
    levels: int
    converged: bool
    changes: tuple
    curves: tuple = field(default=(), repr=False)


def compute_kstar(pm, cert, k_max: int = 60, resolution: int = 1024, grid: GridSet | None = None,
                  return_info: bool = False, tail_bound: bool = True):
    """∩_k g^{-k}(V) rasterized, V bounded by ``cert.outer``.

    Successive stages are compared by the Hausdorff distance of their curves
    (in cells).  Iteration stops once that change is below one cell and, with
    ``tail_bound``, once the geometric extrapolation of the remaining
    movement, change·ρ/(1−ρ) with ρ the observed ratio of successive changes,
    is below one cell as well (a median ratio ρ ≥ 0.9 means the change has
    reached the resampling noise floor); otherwise after ``k_max`` levels.
    """
    grid = analysis_grid(pm, resolution) if grid is None else grid
    h = grid.cell_size
    curves = list(cert.inner_components)
    prev_curves = [cert.outer]
    changes = [multicurve_hausdorff(prev_curves, curves) / h]
    converged = False
    k = 1
    while k < k_max:
        nxt = []
        for c in curves:
            r = pullback_curve(pm, c, refine_step=h, level=k + 1, decimate=0.5 * h)
            nxt += r.components
        k += 1
        changes.append(multicurve_hausdorff(curves, nxt) / h)
        curves = nxt
        if changes[-1] < 1:
            if not tail_bound or len(changes) < 4:
                converged = not tail_bound
                if converged:
                    break
                continue
            c3 = np.asarray(changes[-4:])
            rho = float(np.median(c3[1:] / np.maximum(c3[:-1], 1e-300)))
            # ρ near 1: the change is resampling jitter, not systematic movement
            if rho >= 0.9 or changes[-1] * rho / (1 - rho) < 1:
                converged = True
                break
    res = KStarResult(rasterize_curves(grid, curves), k, converged, tuple(changes), tuple(curves))
    return res if return_info else res.grid


# --------------------------------------------------------------------------
# outside points
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OutsideVerdict:
    kind: str
    n: int | None = None

    def __str__(self):
        return f"{self.kind}({self.n})" if self.n is not None else self.kind


ESCAPES = "ESCAPES_THROUGH_FUNDAMENTAL_ANNULUS"
OMEGA_ON_BOUNDARY = "OMEGA_ON_BOUNDARY"
IN_KSTAR = "IN_KSTAR"
UNDECIDED = "UNDECIDED"


def _boundary_distance(pm, z) -> np.ndarray:
    dom = pm.range
    if isinstance(dom, Disk):
        return np.abs(dom.radius - np.abs(np.asarray(z) - dom.center))
    return dom.distance_to(z)


def classify_outside_point(pm, kstar: GridSet, x, horizon: int = 10_000, boundary_tol: float | None = None,
                           tail: int = 50) -> OutsideVerdict:
    """First n with gⁿ(x) ∈ U∖U′; otherwise membership in K* or ω-limit on ∂U."""
    z = complex(x)
    if not pm.in_range(z):
        return OutsideVerdict(UNDECIDED)
    boundary_tol = 1e-3 * pm.diameter if boundary_tol is None else boundary_tol
    rec = forward_orbit(pm, z, horizon)
    pts = np.asarray(rec.points, dtype=complex)
    if rec.outcome == ESCAPED_AT:
        out = np.nonzero(~pm.in_domain(pts))[0]
        return OutsideVerdict(ESCAPES, int(out[0]))
    if kstar.contains(z):
        return OutsideVerdict(IN_KSTAR)
    late = pts[-tail:]
    if np.all(_boundary_distance(pm, late) < boundary_tol):
        return OutsideVerdict(OMEGA_ON_BOUNDARY)
    return OutsideVerdict(UNDECIDED)
