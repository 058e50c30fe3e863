"""Periodic points, multipliers, backward orbits and linearizing charts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import BranchLost, ExtensionFailed, HypothesesNotMet, NoConvergence, PreimageSolveFailure
from .geometry import GridSet


class Kind(str, Enum):
    REPELLING = "REPELLING"
    ATTRACTING = "ATTRACTING"
    SUPERATTRACTING = "SUPERATTRACTING"
    INDIFFERENT = "INDIFFERENT"


def classify_multiplier(lam: complex, mult_tol: float = 1e-6) -> Kind:
    r = abs(lam)
    if r <= mult_tol:
        return Kind.SUPERATTRACTING
    if r < 1 - mult_tol:
        return Kind.ATTRACTING
    if r > 1 + mult_tol:
        return Kind.REPELLING
    return Kind.INDIFFERENT


@dataclass(frozen=True)
class PeriodicOrbit:
    points: tuple
    period: int
    multiplier: complex
    kind: Kind

    @property
    def repelling(self) -> bool:
        return self.kind == Kind.REPELLING

    def to_json(self) -> dict:
        return {"period": self.period,
                "points": [[p.real, p.imag] for p in self.points],
                "multiplier": [self.multiplier.real, self.multiplier.imag],
                "abs_multiplier": abs(self.multiplier), "kind": self.kind.value}


def iterate_with_derivative(m, z, p: int):
    """(g^p(z), (g^p)'(z)) by the chain rule, vectorized over ``z``."""
    z = np.asarray(z, dtype=complex)
    dz = np.ones_like(z)
    with np.errstate(all="ignore"):
        for _ in range(p):
            dz = dz * m.deriv(z)
            z = m.eval(z)
    return z, dz


def newton_periodic(m, seeds, p: int, iters: int = 80, tol: float = 1e-12):
    """Newton on g^p(z) − z from every seed; returns converged roots only."""
    z = np.array(seeds, dtype=complex).ravel()
    live = np.ones(z.shape, dtype=bool)
    done = np.zeros(z.shape, dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(iters):
            idx = np.nonzero(live & ~done)[0]
            if len(idx) == 0:
                break
            w, dw = iterate_with_derivative(m, z[idx], p)
            step = (w - z[idx]) / (dw - 1)
            bad = ~np.isfinite(step) | (np.abs(z[idx]) > 1e8)
            live[idx[bad]] = False
            step = np.where(bad, 0, step)
            z[idx] = z[idx] - step
            done[idx] = np.abs(step) <= tol * (1 + np.abs(z[idx]))
        w, _ = iterate_with_derivative(m, z, p)
        ok = done & live & np.isfinite(z) & (np.abs(w - z) <= 1e-8 * (1 + np.abs(z)))
    return z[ok]


def dedup_points(z, tol: float) -> np.ndarray:
    """Deterministic dedup: lexicographic sort, then greedy cluster by distance."""
    z = np.asarray(z, dtype=complex)
    if len(z) == 0:
        return z
    z = z[np.lexsort((z.imag, z.real))]
    keep = []
    for p in z:
        if not keep or np.min(np.abs(np.asarray(keep) - p)) > tol:
            keep.append(p)
    return np.array(keep, dtype=complex)


def _iterated_poly_coeffs(m, p: int):
    # composition g∘…∘g by Horner in polynomial arithmetic
    c = np.array([0, 1], dtype=complex)
    for _ in range(p):
        acc = np.array([m.num[-1]], dtype=complex)
        for k in range(len(m.num) - 2, -1, -1):
            acc = P.polyadd(P.polymul(acc, c), [m.num[k]])
        c = acc
    return c


def _companion_seeds(m, p: int, max_degree: int = 1100) -> np.ndarray:
    """Roots of the iterated polynomial g^p(z) − z (polynomials only)."""
    if not m.is_polynomial or m.degree ** p > max_degree:
        return np.empty(0, dtype=complex)
    c = _iterated_poly_coeffs(m, p)
    c = P.polysub(c, [0, 1])
    with np.errstate(all="ignore"):
        r = np.roots(c[::-1])
    return r[np.isfinite(r)]


def _region_seeds(region, n: int) -> np.ndarray:
    lo, hi = region.bounds()
    x = np.linspace(lo.real, hi.real, n)
    y = np.linspace(lo.imag, hi.imag, n)
    z = (x[None, :] + 1j * y[:, None]).ravel()
    return z[np.asarray(region.contains(z), dtype=bool)]


def _exact_period(m, z: complex, p: int, tol: float) -> bool:
    w = z
    for k in range(1, p):
        w = complex(m.eval(w))
        if p % k == 0 and abs(w - z) <= tol:
            return False
    return True


def period_dividing_roots(pm, p: int, region, seed_res: int = 64, refine_levels: int = 3):
    """All distinct solutions of g^p(z) = z in ``region`` found by Newton.

    Seeds: a ``seed_res``² grid over the region, refined ×2 while fewer than
    d^p roots are known, plus companion-matrix roots of the iterated polynomial.
    Returns (roots, exhausted) where ``exhausted`` flags a short count.
    """
    m = pm.map
    tol = pm.dedup_tol
    target = pm.degree ** p
    roots = np.empty(0, dtype=complex)
    comp = _companion_seeds(m, p)
    if len(comp):
        roots = newton_periodic(m, comp, p)
    roots = roots[np.asarray(region.contains(roots), dtype=bool)] if len(roots) else roots
    roots = dedup_points(roots, tol)
    res = seed_res
    for _ in range(refine_levels):
        if len(roots) >= target:
            break
        found = newton_periodic(m, _region_seeds(region, res), p)
        found = found[np.asarray(region.contains(found), dtype=bool)] if len(found) else found
        roots = dedup_points(np.concatenate([roots, found]), tol)
        res *= 2
    return roots, len(roots) < target


def find_periodic(pm, period: int, region=None, seed_res: int = 64) -> list:
    """Periodic orbits of exact period ``period`` meeting ``region``."""
    if period < 1:
        raise ValueError("period must be >= 1")
    region = pm.range if region is None else region
    m = pm.map
    tol = pm.dedup_tol
    roots, _ = period_dividing_roots(pm, period, region, seed_res)
    orbits, seen = [], []
    for z in roots:
        z = complex(z)
        if not _exact_period(m, z, period, 10 * tol):
            continue
        if seen and np.min(np.abs(np.asarray(seen) - z)) <= 10 * tol:
            continue
        pts = [z]
        for _ in range(period - 1):
            pts.append(complex(m.eval(pts[-1])))
        # snap orbit members to polished roots where available
        for i in range(1, period):
            if len(roots):
                j = int(np.argmin(np.abs(roots - pts[i])))
                if abs(roots[j] - pts[i]) <= 10 * tol:
                    pts[i] = complex(roots[j])
        seen.extend(pts)
        start = min(range(period), key=lambda i: (pts[i].real, pts[i].imag))
        pts = pts[start:] + pts[:start]
        lam = complex(np.prod(m.deriv(np.array(pts))))
        orbits.append(PeriodicOrbit(tuple(pts), period, lam, classify_multiplier(lam, pm.tol.mult_tol)))
    orbits.sort(key=lambda o: (o.points[0].real, o.points[0].imag))
    return orbits


@dataclass
class MainstepReport:
    status: str
    p_max: int
    counts: dict
    bounds: dict
    repelling_checked: int
    witness: PeriodicOrbit | None = None
    exhausted: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    def to_json(self) -> dict:
        return {"status": self.status, "p_max": self.p_max,
                "period_dividing_counts": {str(k): v for k, v in self.counts.items()},
                "bounds": {str(k): v for k, v in self.bounds.items()},
                "repelling_checked": self.repelling_checked,
                "witness": None if self.witness is None else self.witness.to_json(),
                "newton_budget_exhausted": self.exhausted}


def verify_mainstep(pm, K, p_max: int = 8, region=None, dilate_cells: int = 2) -> MainstepReport:
    """Check that no repelling periodic point of period ≤ p_max lies outside K.

    ``K`` is an invariant-set report (or a GridSet, whose flags are then
    recomputed).  The hypotheses gate raises HypothesesNotMet.
    """
    from .invariants import InvariantSetReport, invariance_flags
    report = K if isinstance(K, InvariantSetReport) else invariance_flags(pm, K)
    failed = [name for name in ("contains_critical", "backward_ok") if not getattr(report, name)]
    if failed:
        raise HypothesesNotMet("hypotheses not met: " + ", ".join(f"{f}=false" for f in failed), failed)
    grid: GridSet = report.K
    fat = grid.dilate(dilate_cells)
    region = pm.range if region is None else region
    counts, bounds, exhausted = {}, {}, []
    checked = 0
    for p in range(1, p_max + 1):
        roots, short = period_dividing_roots(pm, p, region)
        counts[p] = int(len(roots))
        bounds[p] = int(pm.degree ** p)
        if short:
            exhausted.append(p)
        if len(roots) == 0:
            continue
        _, lam = iterate_with_derivative(pm.map, roots, p)
        rep = np.abs(lam) > 1 + pm.tol.mult_tol
        checked += int(rep.sum())
        inside = fat.contains(roots[rep])
        if not np.all(inside):
            z = complex(roots[rep][~inside][0])
            pts = [z]
            for _ in range(p - 1):
                pts.append(complex(pm.map.eval(pts[-1])))
            lam_w = complex(np.prod(pm.map.deriv(np.array(pts))))
            wit = PeriodicOrbit(tuple(pts), p, lam_w, classify_multiplier(lam_w, pm.tol.mult_tol))
            return MainstepReport("FAIL", p_max, counts, bounds, checked, wit, exhausted)
    return MainstepReport("PASS", p_max, counts, bounds, checked, None, exhausted)


# --------------------------------------------------------------------------
# inverse branches
# --------------------------------------------------------------------------

def _preimages(g, w) -> np.ndarray:
    z = np.atleast_1d(np.asarray(g.preimages(w), dtype=complex))
    z = z[np.isfinite(z)]
    if len(z) == 0:
        raise PreimageSolveFailure(f"no preimage of {w}")
    return z


def _as_orbit(a):
    if isinstance(a, PeriodicOrbit):
        return np.asarray(a.points, dtype=complex), a.multiplier
    return np.atleast_1d(np.asarray(a, dtype=complex)), None


def backward_orbit_to_repeller(pm, a, z, steps: int = 20) -> np.ndarray:
    """Pull ``z`` back along the inverse branches that fix the orbit of ``a``."""
    pts, lam = _as_orbit(a)
    g = pm.map if hasattr(pm, "map") else pm
    p = len(pts)
    if lam is None:
        lam = complex(np.prod(g.deriv(pts)))
    if abs(lam) <= 1:
        raise ValueError("orbit is not repelling")
    dpts = g.deriv(pts)
    traj = [complex(z)]
    i = int(np.argmin(np.abs(pts - z)))
    w = complex(z)
    for _ in range(steps):
        j = (i - 1) % p
        seed = pts[j] + (w - pts[i]) / dpts[j]
        pre = _preimages(g, w)
        w = complex(pre[np.argmin(np.abs(pre - seed))])
        traj.append(w)
        i = j
    traj = np.array(traj)
    d0 = np.min(np.abs(pts - traj[0]))
    d1 = np.min(np.abs(pts - traj[-1]))
    if d0 > 0 and d1 >= abs(lam) ** (-steps / (2 * p)) * d0:
        raise BranchLost(f"backward orbit did not approach the cycle (start {d0:.3g}, end {d1:.3g})")
    return traj


def contraction_ratios(traj: np.ndarray, a: complex) -> np.ndarray:
    d = np.abs(np.asarray(traj) - a)
    with np.errstate(divide="ignore", invalid="ignore"):
        return d[1:] / d[:-1]


# --------------------------------------------------------------------------
# Koenigs linearization at a repelling fixed point
# --------------------------------------------------------------------------

def _taylor_at(g, a: complex, n_terms: int, rho: float) -> np.ndarray:
    """Taylor coefficients of u ↦ g(a+u) − a from samples on |u| = rho."""
    m = 4 * n_terms
    u = rho * np.exp(2j * np.pi * np.arange(m) / m)
    vals = np.asarray(g.eval(a + u), dtype=complex) - a
    c = np.fft.fft(vals) / m
    return c[:n_terms] / rho ** np.arange(n_terms)


def _koenigs_series(h: np.ndarray, lam: complex, n_terms: int) -> np.ndarray:
    """b with Σ b_k h(u)^k = λ Σ b_k u^k, b_1 = 1 (truncated power series)."""
    b = np.zeros(n_terms, dtype=complex)
    b[1] = 1.0
    h = h.copy()
    h[0] = 0
    # powers[j] = coefficients of h^j truncated
    powers = [np.zeros(n_terms, dtype=complex) for _ in range(n_terms)]
    powers[0][0] = 1
    for j in range(1, n_terms):
        powers[j] = np.convolve(powers[j - 1], h)[:n_terms]
    for k in range(2, n_terms):
        s = sum(b[j] * powers[j][k] for j in range(1, k))
        b[k] = s / (lam - lam ** k)
    return b


@dataclass(eq=False)
class KoenigsChart:
    a: complex
    lam: complex
    radius: float
    points: np.ndarray
    values: np.ndarray
    n_used: int
    coeffs: np.ndarray
    series_radius: float
    g: object = field(repr=False, default=None)
    tol: float = 1e-8

    @property
    def samples(self) -> dict:
        return dict(zip(self.points.tolist(), self.values.tolist()))

    def inverse_branch(self, w):
        """ψ: the preimage of w nearest the linearized guess a + (w − a)/λ."""
        pre = _preimages(self.g, w)
        return complex(pre[np.argmin(np.abs(pre - (self.a + (w - self.a) / self.lam)))])

    def series(self, u):
        return np.polynomial.polynomial.polyval(u, self.coeffs)

    def evaluate(self, z, max_steps: int = 200):
        """S(z) = λⁿ·S_series(ψⁿ(z) − a), n grown until approximants settle."""
        z = complex(z)
        n, w = 0, z
        prev = None
        lam_n = 1.0 + 0j
        for n in range(max_steps + 1):
            u = w - self.a
            if abs(u) <= self.series_radius:
                val = lam_n * self.series(u)
                if prev is not None and abs(val - prev) <= self.tol * abs(self.lam) * max(1.0, abs(val)):
                    return complex(val), n
                prev = val
            w = self.inverse_branch(w)
            lam_n *= self.lam
        raise NoConvergence(f"Koenigs approximants did not settle at z={z}")

    def __call__(self, z):
        return self.evaluate(z)[0]

    def functional_residual(self) -> float:
        """max |S(g(z)) − λ·S(z)| over the tabulated validity disk."""
        gz = np.asarray(self.g.eval(self.points), dtype=complex)
        return float(max(abs(self(w) - self.lam * s) for w, s in zip(gz, self.values)))

    def to_json(self) -> dict:
        return {"a": [self.a.real, self.a.imag], "lambda": [self.lam.real, self.lam.imag],
                "radius": self.radius, "n_used": self.n_used,
                "samples": [[p.real, p.imag, v.real, v.imag] for p, v in zip(self.points, self.values)]}


def koenigs_chart(pm, a: complex, lam: complex | None = None, radius: float = 0.2,
                  n_terms: int = 40, n_rings: int = 5, n_angles: int = 24, tol: float | None = None) -> KoenigsChart:
    g = pm.map if hasattr(pm, "map") else pm
    a = complex(a)
    lam = complex(g.deriv(a)) if lam is None else complex(lam)
    mult_tol = pm.tol.mult_tol if hasattr(pm, "tol") else 1e-6
    if abs(lam) <= 1 + mult_tol:
        raise ValueError(f"fixed point is not repelling (|λ| = {abs(lam):.6g})")
    tol = (pm.tol.koe_tol if hasattr(pm, "tol") else 1e-8) if tol is None else tol
    scale = max(1.0, abs(a))
    rho = 0.25 * scale
    h = _taylor_at(g, a, n_terms, rho)
    b = _koenigs_series(h, lam, n_terms)
    # truncated series is trusted where its tail is negligible
    mags = np.abs(b[1:]) + 1e-300
    k = np.arange(1, n_terms)
    tail_ok = 1e-3 * scale
    series_radius = tail_ok
    for r in (1e-2 * scale, 3e-3 * scale, 1e-3 * scale):
        if np.max(mags[-8:] * r ** k[-8:]) < 1e-18:
            series_radius = r
            break
    rings = np.linspace(0, radius, n_rings + 1)[1:]
    ang = 2 * np.pi * np.arange(n_angles) / n_angles
    pts = np.concatenate([[a], (a + rings[:, None] * np.exp(1j * ang)[None, :]).ravel()])
    chart = KoenigsChart(a, lam, float(radius), pts, np.zeros(len(pts), dtype=complex), 0, b,
                         float(series_radius), g, tol)
    vals, n_used = [], 0
    for z in pts:
        v, n = chart.evaluate(z)
        vals.append(v)
        n_used = max(n_used, n)
    chart.values = np.array(vals, dtype=complex)
    chart.n_used = n_used
    return chart


@dataclass
class GrowthRow:
    z: complex
    m: int
    e: int
    S: complex
    envelope: float

    def to_json(self):
        return {"z": [self.z.real, self.z.imag], "m": self.m, "e": self.e,
                "abs_S": abs(self.S), "envelope": self.envelope}


def koenigs_growth_probe(chart: KoenigsChart, pm, z_seq, inside_k=None, horizon: int = 500,
                         max_steps: int = 400) -> list:
    """Extended chart values S(z) = λ^m·S(ψ_m(z)) along ``z_seq``.

    m counts inverse steps to reach the validity disk Z, e counts forward
    steps that leave Z (zero for points outside Z).  The envelope is
    min_{∂Z}|S|·|λ|^{m−e}.  Points in K are refused.
    """
    g = chart.g
    if inside_k is None:
        if pm is None:
            raise ValueError("need pm or inside_k to gate points in K")

        def inside_k(z):
            from .maps import forward_orbit, ESCAPED_AT
            return forward_orbit(pm, z, horizon).outcome != ESCAPED_AT
    ring = chart.a + chart.radius * np.exp(2j * np.pi * np.arange(32) / 32)
    s_min = min(abs(chart(w)) for w in ring)
    rows = []
    for z in z_seq:
        z = complex(z)
        if inside_k(z):
            raise ExtensionFailed(f"{z} is not outside K")
        m, w = 0, z
        while abs(w - chart.a) > chart.radius:
            if m >= max_steps:
                raise ExtensionFailed(f"backward orbit of {z} does not reach the chart disk")
            w = chart.inverse_branch(w)
            m += 1
        e, v = 0, z
        if m == 0:
            while abs(v - chart.a) <= chart.radius and e < max_steps:
                v = complex(g.eval(v))
                e += 1
        S = chart.lam ** m * chart(w)
        rows.append(GrowthRow(z, m, e, complex(S), float(s_min * abs(chart.lam) ** (m - e))))
    return rows


def envelope_ratios(rows) -> np.ndarray:
    env = np.array([r.envelope for r in rows])
    return env[1:] / env[:-1]
