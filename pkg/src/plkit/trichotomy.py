"""Pullback trichotomy: crossing forever (A), nesting inward (B), nesting outward (C).

On (B) a polynomial-like restriction g: V′ → V is built and its containment
checked numerically; on (C) the attracting fixed point is located.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy import ndimage

from .errors import CertificationFailed, InvalidCurve, NoConvergence, PLKitError
from .geometry import (GridSet, JordanCurve, Nesting, curve_distance, curve_intersections,
                       hausdorff_distance, nesting_relation, outer_contour, rasterize_curves,
                       rasterize_points, topological_hull)
from .periodic import dedup_points, iterate_with_derivative, newton_periodic
from .pullback import PullbackResult, iterate_pullback, pullback_curve

A, B, C, UNRESOLVED = "A", "B", "C", "UNRESOLVED"


@dataclass(frozen=True, eq=False)
class PLCertificate:
    outer: JordanCurve
    inner_components: tuple
    margin: float
    degree: int
    n_used: int
    j_used: int = 0
    thickening: float = 0.0

    def to_json(self) -> dict:
        return {"margin": self.margin, "degree": self.degree, "n_used": self.n_used,
                "j_used": self.j_used, "thickening": self.thickening,
                "outer_vertices": len(self.outer), "outer_area": self.outer.area,
                "inner_components": len(self.inner_components),
                "inner_vertices": [len(c) for c in self.inner_components]}


@dataclass(frozen=True)
class AttractingEvidence:
    a: complex
    multiplier: complex
    trace: tuple


@dataclass(frozen=True, eq=False)
class TrichotomyVerdict:
    verdict: str
    witness_n: int
    evidence: object
    gamma0: JordanCurve | None = field(default=None, repr=False)
    levels: tuple = field(default=(), repr=False)

    def to_json(self) -> dict:
        out = {"verdict": self.verdict, "witness_n": self.witness_n}
        ev = self.evidence
        if self.verdict == A:
            out["evidence"] = [{"n": n, "intersections": [[p.real, p.imag] for p in pts]} for n, pts in ev]
        elif self.verdict == B and isinstance(ev, PLCertificate):
            out["evidence"] = ev.to_json()
        elif self.verdict == C and isinstance(ev, AttractingEvidence):
            out["evidence"] = {"a": [ev.a.real, ev.a.imag],
                               "multiplier": [ev.multiplier.real, ev.multiplier.imag],
                               "steps": len(ev.trace)}
        else:
            out["evidence"] = ev
        return out


def _components(level) -> list:
    if isinstance(level, PullbackResult):
        return list(level.components)
    if isinstance(level, JordanCurve):
        return [level]
    return list(level)


def _default_provider(pm, gamma0, n_max):
    curves = [gamma0]
    for n in range(1, n_max + 1):
        comps, degs, parents, resid = [], [], [], 0.0
        for k, c in enumerate(curves):
            r = pullback_curve(pm, c, level=n, decimate=0.5 * pm.tol.refine_step_rel * pm.diameter)
            comps += r.components
            degs += r.local_degrees
            parents += [k] * len(r.components)
            resid = max(resid, r.residual)
        yield PullbackResult(n, comps, degs, resid, parents)
        curves = comps


def classify(pm, gamma0: JordanCurve, n_max: int = 12, provider: Callable | None = None,
             locate: bool = True, certify: bool = True) -> TrichotomyVerdict:
    """Compare Γ_n with Γ₀ level by level.

    ``provider(pm, gamma0, n_max)`` yields the levels (PullbackResult or a
    list of curves); the default traces pullbacks.  A B verdict carries a
    PLCertificate (built when ``certify``), a C verdict the attracting point.
    """
    provider = _default_provider if provider is None else provider
    evidence_a = []
    levels = []
    all_cross = True
    for n, level in enumerate(provider(pm, gamma0, n_max), start=1):
        if n > n_max:
            break
        comps = _components(level)
        levels.append(level)
        rel = [nesting_relation(c, gamma0) for c in comps]
        if comps and all(r == Nesting.B_INSIDE for r in rel):
            v = TrichotomyVerdict(B, n, None, gamma0, tuple(levels))
            if certify:
                v = TrichotomyVerdict(B, n, certify_pl_restriction(pm, v), gamma0, tuple(levels))
            return v
        if any(r == Nesting.C_OUTSIDE for r in rel):
            v = TrichotomyVerdict(C, n, None, gamma0, tuple(levels))
            if locate:
                a, lam, trace = _attracting_point(pm, gamma0)
                v = TrichotomyVerdict(C, n, AttractingEvidence(a, lam, trace), gamma0, tuple(levels))
            return v
        crossing = [c for c, r in zip(comps, rel) if r == Nesting.A_INTERSECT]
        if crossing:
            pts = []
            for c in crossing:
                pts += curve_intersections(c, gamma0, limit=16)
            evidence_a.append((n, tuple(pts)))
        else:
            all_cross = False
    if all_cross and len(evidence_a) == n_max:
        return TrichotomyVerdict(A, 0, evidence_a, gamma0, tuple(levels))
    return TrichotomyVerdict(UNRESOLVED, 0, {"n_max": n_max, "crossing_levels": [n for n, _ in evidence_a]},
                             gamma0, tuple(levels))


# --------------------------------------------------------------------------
# case C
# --------------------------------------------------------------------------

def _attracting_point(pm, gamma0: JordanCurve, horizon: int | None = None):
    horizon = pm.tol.horizon if horizon is None else horizon
    g = pm.map
    z = gamma0.centroid()
    trace = []
    for _ in range(horizon):
        w = complex(g.eval(z))
        step = abs(w - z)
        trace.append(step)
        z = w
        if not pm.in_range(z):
            raise NoConvergence("orbit of the centre left U")
        if step < 1e-6 * max(1.0, abs(z)):
            break
    else:
        raise NoConvergence("centre orbit did not settle within the horizon")
    # Newton polish on g(z) − z
    for _ in range(50):
        dz = (complex(g.eval(z)) - z) / (complex(g.deriv(z)) - 1)
        z -= dz
        if abs(dz) < 1e-16 * max(1.0, abs(z)):
            break
    lam = complex(g.deriv(z))
    if abs(complex(g.eval(z)) - z) >= pm.tol.cycle_tol or abs(lam) >= 1:
        raise NoConvergence(f"limit {z} is not an attracting fixed point (|λ| = {abs(lam):.4g})")
    return z, lam, tuple(trace)


def locate_attracting_fixed_point(pm, verdict: TrichotomyVerdict):
    """(a, multiplier) of the attracting fixed point behind a C verdict."""
    if verdict.verdict != C:
        raise ValueError("verdict is not C")
    if isinstance(verdict.evidence, AttractingEvidence):
        return verdict.evidence.a, verdict.evidence.multiplier
    a, lam, _ = _attracting_point(pm, verdict.gamma0)
    return a, lam


# --------------------------------------------------------------------------
# case B: certification
# --------------------------------------------------------------------------

def _check_restriction(pm, outer: JordanCurve, refine_step: float):
    """Pull ``outer`` back once; return (inner components, margin) or None."""
    try:
        r = pullback_curve(pm, outer, refine_step=refine_step, decimate=0.5 * refine_step)
    except PLKitError:
        return None
    comps = r.components
    if sum(r.local_degrees) != pm.degree:
        return None
    if not all(nesting_relation(c, outer) == Nesting.B_INSIDE for c in comps):
        return None
    margin = min(curve_distance(c, outer) for c in comps)
    crit = pm.critical_points
    if len(crit):
        inside = np.zeros(len(crit), dtype=bool)
        for c in comps:
            inside |= c.contains(crit)
        if not inside.all():
            return None
    return comps, margin


def _level_curves(pm, gamma0, n_total: int, refine_step: float) -> list:
    levels = [[gamma0]]
    for r in iterate_pullback(pm, gamma0, n_total, refine_step=refine_step, check_enclosure=False):
        levels.append(list(r.components))
    return levels


def certify_pl_restriction(pm, verdict: TrichotomyVerdict, resolution: int = 1024, j_max: int = 8,
                           thickenings=(0.3, 0.15, 0.08, 0.04)) -> PLCertificate:
    """Build V with g^{-1}(V) ⋐ V from a B verdict at level n.

    n = 1: V = V₀.  n ≥ 2: V is the outer boundary of a thickened hull of
    Ω_j = V₋ⱼ ∪ … ∪ V₋(j+n−1), swept over j and the thickening ratio r; the
    thickening adds points whose distance to the hull is below r times their
    distance to the postcritical set and to ∂U (a quasi-hyperbolic collar).
    """
    if verdict.verdict != B:
        raise ValueError("certification needs a B verdict")
    n = verdict.witness_n
    gamma0 = verdict.gamma0
    refine_step = pm.tol.refine_step_rel * pm.diameter
    if n == 1:
        res = _check_restriction(pm, gamma0, refine_step)
        if res is None:
            raise CertificationFailed("Γ₁ is not compactly inside Γ₀", best_margin=-math.inf)
        comps, margin = res
        return PLCertificate(gamma0, tuple(comps), float(margin), pm.degree, 1)

    from .invariants import _boundary_distance
    # span the whole of V₀ so that Ω_0 fits on the grid
    b_lo, b_hi = gamma0.bounds()
    half = 0.55 * max(b_hi.real - b_lo.real, b_hi.imag - b_lo.imag)
    ctr = 0.5 * (b_lo + b_hi)
    if np.all(np.imag(pm.map.num) == 0):
        ctr = complex(ctr.real, 0.0)
        half += abs(0.5 * (b_lo + b_hi).imag)
    grid = GridSet.square(ctr, half, resolution)
    h = grid.cell_size
    levels = _level_curves(pm, gamma0, j_max + n, refine_step)
    rasters = [rasterize_curves(grid, lv) for lv in levels]
    pc = rasterize_points(grid, pm.postcritical_points) if len(pm.postcritical_points) else None
    if pc is not None and not pc.is_empty():
        d_pc = ndimage.distance_transform_edt(~topological_hull(pc).cells) * h
    else:
        d_pc = np.full(grid.cells.shape, np.inf)
    centers = grid.centers()
    d_bd = np.asarray(_boundary_distance(pm, centers.ravel())).reshape(grid.cells.shape)
    d_bd = np.where(pm.in_range(centers), d_bd, 0.0)
    best = -math.inf
    for j in range(0, j_max + 1):
        omega = rasters[j]
        for i in range(j + 1, j + n):
            omega = omega | rasters[i]
        Y = topological_hull(omega)
        d_y = ndimage.distance_transform_edt(~Y.cells) * h
        for r in thickenings:
            fat = Y.like(Y.cells | (d_y < r * np.minimum(d_pc, d_bd)))
            try:
                outer = outer_contour(fat)
            except (InvalidCurve, ValueError):
                continue
            res = _check_restriction(pm, outer, refine_step)
            if res is None:
                continue
            comps, margin = res
            best = max(best, margin)
            if margin > 0:
                return PLCertificate(outer, tuple(comps), float(margin), pm.degree, n, j, r)
    raise CertificationFailed(f"no nested V found for j ≤ {j_max}", best_margin=best)


def recheck_certificate(pm, cert: PLCertificate) -> dict:
    """Pull the outer curve back again and compare with the stored inner curves."""
    r = pullback_curve(pm, cert.outer, decimate=0.5 * pm.tol.refine_step_rel * pm.diameter)
    comps = r.components
    dist = max(min(hausdorff_distance(a, b) for b in cert.inner_components) for a in comps)
    margin = min(curve_distance(c, cert.outer) for c in comps)
    return {"hausdorff": dist, "margin": margin,
            "margin_rel_change": abs(margin - cert.margin) / cert.margin}


# --------------------------------------------------------------------------
# repelling points near a curve
# --------------------------------------------------------------------------

def scan_repelling_near_curve(pm, gamma0: JordanCurve, eps: float, n_range: Iterable[int],
                              n_offsets: int = 5, max_seeds: int = 4096) -> list:
    """Repelling solutions of gⁿ(z) = z within ``eps`` of Γ₀, for n in ``n_range``."""
    v = gamma0.vertices
    nxt = np.roll(v, -1) - np.roll(v, 1)
    normal = -1j * nxt / np.maximum(np.abs(nxt), 1e-300)
    out = []
    for n in n_range:
        per_offset = min(len(v), max(64, 8 * pm.degree ** n), max_seeds // n_offsets)
        idx = np.unique(np.linspace(0, len(v) - 1, per_offset).astype(int))
        offs = np.linspace(-eps, eps, n_offsets)
        seeds = (v[idx][None, :] + offs[:, None] * normal[idx][None, :]).ravel()
        roots = newton_periodic(pm.map, seeds, n)
        if len(roots) == 0:
            continue
        roots = roots[gamma0.distance_to(roots) <= eps]
        roots = roots[pm.in_domain(roots)] if len(roots) else roots
        roots = dedup_points(roots, pm.dedup_tol)
        if len(roots) == 0:
            continue
        _, lam = iterate_with_derivative(pm.map, roots, n)
        keep = np.abs(lam) > 1 + pm.tol.mult_tol
        out += [(n, complex(z), complex(l)) for z, l in zip(roots[keep], lam[keep])]
    out.sort(key=lambda t: (t[0], t[1].real, t[1].imag))
    return out
