"""Preimage curves g^{-1}(γ) by predictor-corrector continuation.

All preimage strands of t ↦ γ(t) are tracked together along the polyline
γ; after one full turn the strand endpoints are matched back to the
starting roots, and each cycle of that permutation (the monodromy) closes
into one component whose local degree is the cycle length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import (ConfigError, ContinuationDiverged, CriticalValueOnCurve, InvalidCurve,
                     StitchFailure)
from .geometry import JordanCurve, polygon_offset_outward

OK, NEAR_CRITICAL, DIVERGED, CAPPED = 0, 1, 2, 3


@dataclass(frozen=True, eq=False)
class PullbackResult:
    level: int
    components: list
    local_degrees: list
    residual: float
    parents: list = field(default_factory=list)
    perturbed: bool = False

    @property
    def degree_sum(self) -> int:
        return int(sum(self.local_degrees))


# --------------------------------------------------------------------------
# compiled continuation kernel
# --------------------------------------------------------------------------

@numba.njit(cache=True)
def _horner(c, z):
    acc = c[c.shape[0] - 1]
    for k in range(c.shape[0] - 2, -1, -1):
        acc = acc * z + c[k]
    return acc


@numba.njit(cache=True)
def _g_dg(num, dnum, den, dden, poly, z):
    if poly:
        return _horner(num, z), _horner(dnum, z)
    n = _horner(num, z)
    d = _horner(den, z)
    return n / d, (_horner(dnum, z) * d - n * _horner(dden, z)) / (d * d)


@numba.njit(cache=True)
def _trace(num, dnum, den, dden, poly, targets, z0, tol, refine_step, cv_margin, max_pts):
    """Track all strands along the closed polyline ``targets``.

    Returns (points[count, d], count, status, where, residual).
    """
    d = z0.shape[0]
    n = targets.shape[0]                # targets[n-1] == targets[0]
    out = np.empty((max_pts, d), dtype=np.complex128)
    out[0, :] = z0
    count = 1
    z = z0.copy()
    zp = np.empty(d, dtype=np.complex128)
    resid = 0.0
    seg = 0
    t = 0.0
    h = 1.0
    while seg < n - 1:
        t_new = min(t + h, 1.0)
        a = targets[seg]
        b = targets[seg + 1]
        w_old = a + t * (b - a)
        w_new = a + t_new * (b - a)
        ok = True
        # separation of the current strands
        for i in range(d):
            gi, dgi = _g_dg(num, dnum, den, dden, poly, z[i])
            if abs(dgi) < cv_margin:
                return out, count, NEAR_CRITICAL, w_old, resid
            zi = z[i] + (w_new - w_old) / dgi
            for _ in range(8):
                gv, dgv = _g_dg(num, dnum, den, dden, poly, zi)
                if dgv == 0:
                    break
                step = (gv - w_new) / dgv
                zi = zi - step
                if abs(step) <= 1e-15 * (1.0 + abs(zi)):
                    break
            gv, dgv = _g_dg(num, dnum, den, dden, poly, zi)
            r = abs(gv - w_new)
            if not (r <= tol) or abs(zi - z[i]) > refine_step:
                ok = False
                break
            sep = np.inf
            for j in range(d):
                if j != i:
                    s = abs(z[i] - z[j])
                    if s < sep:
                        sep = s
            pred = z[i] + (w_new - w_old) / dgi
            if d > 1 and (abs(zi - pred) > 0.1 * sep or abs(zi - z[i]) > 0.3 * sep):
                ok = False
                break
            zp[i] = zi
        if ok and d > 1:
            for i in range(d):
                for j in range(i + 1, d):
                    if abs(zp[i] - zp[j]) < 0.25 * abs(z[i] - z[j]):
                        ok = False
        if not ok:
            h *= 0.5
            if h < 1e-13:
                return out, count, DIVERGED, w_new, resid
            continue
        for i in range(d):
            z[i] = zp[i]
            gv, dgv = _g_dg(num, dnum, den, dden, poly, z[i])
            r = abs(gv - w_new)
            if r > resid:
                resid = r
        if count >= max_pts:
            return out, count, CAPPED, w_new, resid
        out[count, :] = z
        count += 1
        t = t_new
        if t >= 1.0:
            seg += 1
            t = 0.0
        h = min(2.0 * h, 1.0)
    return out, count, OK, targets[0], resid


def _kernel_args(m):
    num = np.ascontiguousarray(m.num, dtype=np.complex128)
    den = np.ascontiguousarray(m.den, dtype=np.complex128)
    dnum = np.ascontiguousarray(m._dnum, dtype=np.complex128)
    dden = np.ascontiguousarray(m._dden, dtype=np.complex128)
    return num, dnum, den, dden, bool(m.is_polynomial)


class _NearCritical(Exception):
    def __init__(self, w):
        self.w = w


def _bump_near(gamma: JordanCurve, v: complex, margin: float) -> JordanCurve:
    """Push the vertices around value ``v`` outward by 2·margin."""
    verts = gamma.vertices
    seg = np.abs(np.roll(verts, -1) - verts)
    reach = max(float(seg.max()), 4 * margin)
    idx = np.nonzero(np.abs(verts - v) <= reach + 2 * margin)[0]
    if len(idx) == 0:
        idx = np.array([int(np.argmin(np.abs(verts - v)))])
    return polygon_offset_outward(gamma, idx, 2 * margin)


def _decimate(z: np.ndarray, spacing: float, min_keep: int = 16) -> np.ndarray:
    if spacing <= 0 or len(z) <= min_keep:
        return z
    keep = [0]
    last = z[0]
    for k in range(1, len(z)):
        if abs(z[k] - last) >= spacing:
            keep.append(k)
            last = z[k]
    if len(keep) < min_keep:
        step = max(1, len(z) // min_keep)
        keep = list(range(0, len(z), step))
    return z[np.array(keep)]


def _trace_once(pm, gamma: JordanCurve, refine_step: float):
    m = pm.map
    v = gamma.vertices
    z0 = m.preimages(v[0])
    z0 = z0[pm.in_range(z0)]
    if len(z0) == 0:
        raise ContinuationDiverged("no preimage of the curve inside U")
    z0 = z0[np.lexsort((z0.imag, z0.real))]
    targets = np.append(v, v[0]).astype(np.complex128)
    max_pts = pm.tol.max_vertices
    pts, count, status, where, resid = _trace(*_kernel_args(m), targets, z0.astype(np.complex128),
                                              pm.pb_tol, refine_step, pm.cv_margin * 1e-3, max_pts)
    if status == NEAR_CRITICAL:
        raise _NearCritical(complex(where))
    if status == DIVERGED:
        raise ContinuationDiverged(f"step halving exhausted near w={complex(where):.6g}")
    if status == CAPPED:
        raise ContinuationDiverged(f"vertex cap {max_pts} exceeded")
    return pts[:count], float(resid)


def _stitch(pm, pts: np.ndarray, gamma: JordanCurve):
    start, end = pts[0], pts[-1]
    d = len(start)
    thr = max(10 * pm.pb_tol, 1e-12)
    # greedy endpoint matching by distance
    dist = np.abs(end[:, None] - start[None, :])
    perm = -np.ones(d, dtype=int)
    used = np.zeros(d, dtype=bool)
    for flat in np.argsort(dist, axis=None):
        i, j = divmod(int(flat), d)
        if perm[i] >= 0 or used[j]:
            continue
        if dist[i, j] > thr:
            raise StitchFailure(f"strand {i} does not close (gap {dist[i, j]:.3g})")
        perm[i] = j
        used[j] = True
    comps, degs = [], []
    seen = np.zeros(d, dtype=bool)
    for i0 in range(d):
        if seen[i0]:
            continue
        chain = []
        i = i0
        while not seen[i]:
            seen[i] = True
            chain.append(pts[:-1, i])
            i = perm[i]
        comps.append(np.concatenate(chain))
        degs.append(len(chain))
    return comps, degs


def pullback_curve(pm, gamma: JordanCurve, refine_step: float | None = None, level: int = 1,
                   decimate: float = 0.0, max_retries: int = 3) -> PullbackResult:
    """Components of g^{-1}(γ) inside U with their local degrees."""
    refine_step = pm.tol.refine_step_rel * pm.diameter if refine_step is None else refine_step
    cvals = pm.critical_values()
    margin = pm.cv_margin
    g = gamma
    perturbed = False
    for attempt in range(max_retries + 1):
        if len(cvals):
            dist = g.distance_to(cvals)
            close = np.nonzero(dist <= margin)[0]
            if len(close):
                if attempt == max_retries:
                    break
                for k in close:
                    g = _bump_near(g, complex(cvals[k]), margin)
                perturbed = True
                continue
        try:
            pts, resid = _trace_once(pm, g, refine_step)
        except _NearCritical as e:
            if attempt == max_retries:
                break
            g = _bump_near(g, e.w, margin)
            perturbed = True
            continue
        raw, degs = _stitch(pm, pts, g)
        comps = []
        for z in raw:
            if decimate:
                z = _decimate(z, decimate)
            try:
                comps.append(JordanCurve(z))
            except InvalidCurve as e:
                if decimate:
                    try:
                        comps.append(JordanCurve(raw[len(comps)]))
                        continue
                    except InvalidCurve:
                        pass
                raise StitchFailure(f"preimage component is not a Jordan curve: {e}") from None
        order = np.argsort([c.vertices.real.min() for c in comps], kind="stable")
        comps = [comps[i] for i in order]
        degs = [degs[i] for i in order]
        return PullbackResult(level, comps, degs, resid, [0] * len(comps), perturbed)
    raise CriticalValueOnCurve("curve passes through a critical value after perturbation retries")


def iterate_pullback(pm, gamma0, n_max: int, refine_step: float | None = None,
                     decimate: float | None = None, check_enclosure: bool = True) -> list:
    """Γ_1 … Γ_{n_max}; a multi-curve input is pulled back component-wise."""
    curves = [gamma0] if isinstance(gamma0, JordanCurve) else list(gamma0)
    if check_enclosure and pm.mode == "SINGLE" and pm.postcritical is not None:
        pc = pm.postcritical.occupied_centers()
        if len(pc) and not all(np.all(c.contains(pc)) for c in curves[:1]):
            raise ConfigError("gamma0 does not enclose the postcritical set")
    refine_step = pm.tol.refine_step_rel * pm.diameter if refine_step is None else refine_step
    spacing = 0.5 * refine_step if decimate is None else decimate
    out = []
    for n in range(1, n_max + 1):
        comps, degs, parents, resid = [], [], [], 0.0
        perturbed = False
        for k, c in enumerate(curves):
            r = pullback_curve(pm, c, refine_step, level=n, decimate=spacing)
            comps += r.components
            degs += r.local_degrees
            parents += [k] * len(r.components)
            resid = max(resid, r.residual)
            perturbed |= r.perturbed
        out.append(PullbackResult(n, comps, degs, resid, parents, perturbed))
        curves = comps
    return out


def push_forward(pm, curve: JordanCurve) -> np.ndarray:
    return pm.map.eval(curve.vertices)


def max_pushforward_error(pm, comps, gamma: JordanCurve) -> float:
    """max over vertices of |g(v) − nearest point of γ|."""
    err = 0.0
    for c in comps:
        err = max(err, float(gamma.distance_to(pm.map.eval(c.vertices)).max()))
    return err
