"""Entropy, Lyapunov exponent, capacity and Green's function estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DerivativeZeroHit, NonHyperbolicSample, OrbitEscaped, PreimageSolveFailure,
                     TooFewCells)
from .geometry import GridSet, topological_hull

FEKETE = "FEKETE"
GREEN_ESCAPE = "GREEN_ESCAPE"


@dataclass(frozen=True)
class EntropyEstimate:
    delta: float
    k: int
    counts: tuple
    rate: float
    target: float

    def to_json(self) -> dict:
        return {"delta": self.delta, "k": self.k, "counts": list(self.counts),
                "rate": self.rate, "target": self.target}


@dataclass(frozen=True, eq=False)
class CapacityEstimate:
    method: str
    value: float
    n_points: int
    residual: float
    transfinite_diameter: float | None = None
    points: np.ndarray | None = field(default=None, repr=False)
    too_few_points: bool = False

    def to_json(self) -> dict:
        out = {"method": self.method, "value": self.value, "n_points": self.n_points,
               "residual": self.residual}
        if self.method == FEKETE:
            out["transfinite_diameter"] = self.transfinite_diameter
            out["too_few_points"] = self.too_few_points
        return out


# --------------------------------------------------------------------------
# entropy
# --------------------------------------------------------------------------

def _pairwise_separated(z: np.ndarray, delta: float) -> np.ndarray:
    """Row-wise: are all entries of each row pairwise more than ``delta`` apart?"""
    n = z.shape[1]
    ok = np.ones(z.shape[0], dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            ok &= np.abs(z[:, i] - z[:, j]) > delta
    return ok


def backward_tree(pm, X: GridSet, delta: float, k: int, x0, collar_cells: int = 2):
    """Levels Q_0 … Q_k of the separated backward tree rooted at ``x0``.

    Every node keeps all of its preimages near X when they are pairwise more
    than δ apart, and otherwise only the lexicographically first one.
    """
    collar = X.dilate(collar_cells)
    N = pm.degree
    levels = [np.array([complex(x0)])]
    for _ in range(k):
        y = levels[-1]
        pre = pm.map.preimages_batch(y)
        if pre.shape[1] == 0 or not np.all(np.isfinite(pre)):
            raise PreimageSolveFailure("preimage solve returned non-finite roots")
        near = collar.contains(pre)
        full = near.all(axis=1) & (near.sum(axis=1) == N) & _pairwise_separated(pre, delta)
        nxt = [pre[full].ravel()]
        part = np.nonzero(~full)[0]
        if len(part):
            cand = pre[part]
            # singleton: first preimage near X in lexicographic order
            pick = []
            for r in range(len(part)):
                row = cand[r]
                inx = near[part[r]]
                if not inx.any():
                    raise PreimageSolveFailure(f"no preimage of {y[part[r]]} near X")
                choices = row[inx]
                pick.append(choices[np.lexsort((choices.imag, choices.real))][0])
            nxt.append(np.array(pick, dtype=complex))
        levels.append(np.concatenate(nxt))
    return levels


def entropy_lower_bound(pm, X: GridSet, delta: float, k: int, x0) -> EntropyEstimate:
    """(1/k)·log #Q_k from the separated backward tree."""
    target = math.log(pm.degree)
    if k == 0:
        return EntropyEstimate(float(delta), 0, (1,), 0.0, target)
    levels = backward_tree(pm, X, delta, k, x0)
    counts = tuple(len(q) for q in levels)
    return EntropyEstimate(float(delta), int(k), counts, math.log(counts[-1]) / k, target)


def separation_check(pm, points, k: int, delta: float) -> bool:
    """Every pair is (k, δ)-separated: some iterate j ≤ k moves them > δ apart."""
    z = np.asarray(points, dtype=complex)
    n = len(z)
    if n < 2:
        return True
    sep = np.zeros((n, n), dtype=bool)
    w = z.copy()
    for _ in range(k + 1):
        sep |= np.abs(w[:, None] - w[None, :]) > delta
        w = pm.map.eval(w)
    np.fill_diagonal(sep, True)
    return bool(sep.all())


# --------------------------------------------------------------------------
# Lyapunov exponent and dimension proxy
# --------------------------------------------------------------------------

def lyapunov_exponent(pm, z, n: int) -> float:
    """Birkhoff average (1/n)·Σ log|g′(gⁱ(z))| along one orbit."""
    if n < 1:
        raise ValueError("n must be >= 1")
    z = complex(z)
    total = 0.0
    for i in range(n):
        if not pm.in_domain(z):
            raise OrbitEscaped(f"orbit left U′ at step {i}")
        d = abs(complex(pm.map.deriv(z)))
        if d < 1e-14:
            raise DerivativeZeroHit(f"orbit passes a critical point at step {i}")
        total += math.log(d)
        z = complex(pm.map.eval(z))
    return total / n


def dimension_positivity_proxy(h: float, chi: float) -> float:
    if not chi > 0:
        raise NonHyperbolicSample(f"Lyapunov exponent {chi} is not positive")
    return h / chi


# --------------------------------------------------------------------------
# capacity
# --------------------------------------------------------------------------

def _greedy_fekete(cand: np.ndarray, n: int) -> np.ndarray:
    # deterministic start: farthest candidate from the centroid, lexicographic tie-break
    order = np.lexsort((cand.imag, cand.real))
    cand = cand[order]
    c0 = cand.mean()
    first = int(np.argmax(np.abs(cand - c0)))
    chosen = [first]
    score = np.log(np.maximum(np.abs(cand - cand[first]), 1e-300))
    score[first] = -np.inf
    for _ in range(n - 1):
        j = int(np.argmax(score))
        chosen.append(j)
        score += np.log(np.maximum(np.abs(cand - cand[j]), 1e-300))
        score[j] = -np.inf
    return cand[np.array(chosen)]


def capacity_fekete(X: GridSet, n_points: int = 128, candidates: np.ndarray | None = None) -> CapacityEstimate:
    """Greedy Fekete points on the outer boundary cells of X.

    ``transfinite_diameter`` is the raw geometric mean (Π|zᵢ − zⱼ|)^{2/(n(n−1))};
    ``value`` divides out the finite-n factor n^{1/(n−1)} that the raw mean
    carries even for exact Fekete points of a circle.  ``residual`` is the
    relative gap to the Chebyshev upper bound (max_X Π|z − zᵢ|)^{1/n}.
    """
    if candidates is None:
        if X.count < 2:
            raise TooFewCells("capacity needs at least two occupied cells")
        hull = topological_hull(X)
        cand = hull.boundary().occupied_centers()
    else:
        cand = np.unique(np.asarray(candidates, dtype=complex))
    if len(cand) < n_points or n_points < 2:
        raise TooFewCells(f"{len(cand)} candidate cells for {n_points} points")
    pts = _greedy_fekete(cand, n_points)
    n = n_points
    iu = np.triu_indices(n, 1)
    logs = np.log(np.abs(pts[:, None] - pts[None, :])[iu])
    raw = math.exp(2 * logs.sum() / (n * (n - 1)))
    value = raw * n ** (-1.0 / (n - 1))
    cheb = np.log(np.maximum(np.abs(cand[:, None] - pts[None, :]), 1e-300)).sum(axis=1).max() / n
    tau = math.exp(cheb)
    return CapacityEstimate(FEKETE, value, n, abs(tau - value) / value, raw, pts, n < 8)


def green_escape(pm, z, n: int | None = None, radius: float = 1e6, horizon: int = 2000,
                 tol: float = 1e-10) -> float:
    """G(z) ≈ d^{-n}·log|gⁿ(z)|; 0 for orbits that stay bounded."""
    if not pm.map.is_polynomial:
        raise ValueError("escape-rate Green's function needs a polynomial")
    d = pm.map.degree
    z = complex(z)
    prev = None
    scale = 1.0
    for i in range(horizon if n is None else n):
        if abs(z) > radius:
            val = math.log(abs(z)) * scale
            if n is None and prev is not None and abs(val - prev) < tol:
                return val
            prev = val
        nz = complex(pm.map.eval(z))
        if not math.isfinite(abs(nz)):
            return prev if prev is not None else math.log(abs(z)) * scale
        z = nz
        scale /= d
    if abs(z) > radius or n is not None:
        return math.log(abs(z)) * scale if abs(z) > 1 else 0.0
    return 0.0


def capacity_green(pm, r: float = 1e3, n_angles: int = 16) -> CapacityEstimate:
    """Capacity from the escape-rate asymptotics exp(log|z| − G(z)) at |z| = r."""
    vals = []
    for t in 2 * np.pi * (np.arange(n_angles) + 0.5) / n_angles:
        z = r * complex(math.cos(t), math.sin(t))
        vals.append(math.exp(math.log(r) - green_escape(pm, z)))
    vals = np.array(vals)
    return CapacityEstimate(GREEN_ESCAPE, float(vals.mean()), n_angles,
                            float((vals.max() - vals.min()) / vals.mean()))
