"""The dynamical generator: polynomial/rational maps and their restriction
to a range domain U with preimage U' = U ∩ g^{-1}(U)."""
from __future__ import annotations

import ast
import json
import math
import re
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import (AssumptionViolated, ConfigError, LemmaViolation, NotProper, PoleHit,
                     RootSolveFailure, SingletonDegenerate)
from .geometry import GridSet, JordanCurve, circle, rasterize_points


@dataclass(frozen=True)
class Tolerances:
    """Named numerical constants shared by every module.

    Relative tolerances are multiplied by the diameter of the range U.
    """

    eval_eps: float = 1e-14
    root_tol: float = 1e-8
    cycle_tol: float = 1e-10
    max_period: int = 64
    horizon: int = 10_000
    pc_pad: int = 2
    pc_res: int = 1024
    pb_tol_rel: float = 1e-8
    cv_margin_rel: float = 1e-6
    refine_step_rel: float = 1.0 / 400
    max_vertices: int = 200_000
    mult_tol: float = 1e-6
    dedup_tol_rel: float = 1e-7
    koe_tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not v > 0 and k != "seed":
                raise ConfigError(f"tolerance {k} must be positive, got {v}")


DEFAULT_TOL = Tolerances()


# --------------------------------------------------------------------------
# MapSpec
# --------------------------------------------------------------------------

def _trim(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    nz = np.nonzero(c)[0]
    return c[: nz[-1] + 1] if len(nz) else np.zeros(1, dtype=complex)


def _horner(c: np.ndarray, z):
    acc = np.zeros_like(z, dtype=complex) + c[-1]
    for a in c[-2::-1]:
        acc = acc * z + a
    return acc


@dataclass(frozen=True, eq=False)
class MapSpec:
    """Rational map num(z)/den(z); coefficients in ascending degree."""

    num: np.ndarray
    den: np.ndarray = field(default_factory=lambda: np.ones(1, dtype=complex))
    formula: str = ""

    def __post_init__(self):
        num, den = _trim(self.num), _trim(self.den)
        if not np.any(den):
            raise ConfigError("zero denominator")
        if len(den) == 1:
            num, den = num / den[0], np.ones(1, dtype=complex)
        else:
            lead = den[-1]
            num, den = num / lead, den / lead
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        if self.degree < 2:
            raise ConfigError(f"map degree must be >= 2, got {self.degree}")
        if not self.is_polynomial:
            common = [r for r in np.roots(den[::-1]) if abs(_horner(num, r)) < 1e-10 * max(1.0, np.abs(num).max())]
            if common:
                raise ConfigError("numerator and denominator share a root; reduce the fraction")
        dn = P.polyder(num) if len(num) > 1 else np.zeros(1, dtype=complex)
        dd = P.polyder(den) if len(den) > 1 else np.zeros(1, dtype=complex)
        object.__setattr__(self, "_dnum", _trim(dn))
        object.__setattr__(self, "_dden", _trim(dd))

    # -- structure ----------------------------------------------------
    @property
    def is_polynomial(self) -> bool:
        return len(self.den) == 1

    @property
    def degree(self) -> int:
        return max(len(self.num), len(self.den)) - 1

    def __repr__(self):
        return f"MapSpec({self.formula or self.describe()})"

    def describe(self) -> str:
        def poly(c):
            terms = []
            for k, a in enumerate(c):
                if a == 0:
                    continue
                coef = f"({a.real:g}{a.imag:+g}i)" if a.imag else f"{a.real:g}"
                terms.append(coef if k == 0 else f"{coef}*z^{k}")
            return " + ".join(terms) or "0"
        return poly(self.num) if self.is_polynomial else f"({poly(self.num)})/({poly(self.den)})"

    # -- evaluation ---------------------------------------------------
    def __call__(self, z):
        return self.eval(z)

    def eval(self, z):
        """g(z), vectorized.  Scalars that hit a pole raise PoleHit."""
        if self.is_polynomial:
            return _horner(self.num, z)
        d = _horner(self.den, z)
        if np.ndim(z) == 0:
            if abs(d) <= self.eval_eps_at(z):
                raise PoleHit(f"pole at {z}")
            return complex(_horner(self.num, z) / d)
        with np.errstate(divide="ignore", invalid="ignore"):
            return _horner(self.num, z) / d

    def deriv(self, z):
        if self.is_polynomial:
            return _horner(self._dnum, z)
        d = _horner(self.den, z)
        if np.ndim(z) == 0 and abs(d) <= self.eval_eps_at(z):
            raise PoleHit(f"pole at {z}")
        with np.errstate(divide="ignore", invalid="ignore"):
            return (_horner(self._dnum, z) * d - _horner(self.num, z) * _horner(self._dden, z)) / (d * d)

    def eval_eps_at(self, z) -> float:
        return DEFAULT_TOL.eval_eps * max(1.0, abs(z)) ** (len(self.den) - 1)

    def poles(self) -> np.ndarray:
        if self.is_polynomial:
            return np.zeros(0, dtype=complex)
        return np.roots(self.den[::-1]).astype(complex)

    def critical_numerator(self) -> np.ndarray:
        """Ascending coefficients of num'·den − num·den'."""
        if self.is_polynomial:
            return self._dnum
        return _trim(P.polysub(P.polymul(self._dnum, self.den), P.polymul(self.num, self._dden)))

    # -- inverse images -------------------------------------------------
    def preimages(self, w) -> np.ndarray:
        """All finite solutions of g(z) = w, Newton-polished."""
        c = _trim(P.polysub(self.num, complex(w) * self.den))
        if len(c) < 2:
            return np.zeros(0, dtype=complex)
        z = np.roots(c[::-1]).astype(complex)
        return self._polish(z, complex(w))

    def preimages_batch(self, w) -> np.ndarray:
        """Solutions of g(z) = w for an array of targets; shape (len(w), degree).

        Uses stacked companion matrices; rows whose leading coefficient
        vanishes (a root at infinity) are padded with NaN.
        """
        w = np.asarray(w, dtype=complex).ravel()
        D = self.degree
        num = np.zeros(D + 1, dtype=complex)
        den = np.zeros(D + 1, dtype=complex)
        num[: len(self.num)] = self.num
        den[: len(self.den)] = self.den
        coeffs = num[None, :] - w[:, None] * den[None, :]   # ascending
        lead = coeffs[:, -1]
        bad = np.abs(lead) < 1e-13 * np.abs(coeffs).max(axis=1)
        lead = np.where(bad, 1.0, lead)
        mon = coeffs[:, :-1] / lead[:, None]
        if D == 1:
            roots = -mon
        else:
            comp = np.zeros((len(w), D, D), dtype=complex)
            comp[:, 1:, :-1] = np.eye(D - 1)
            comp[:, :, -1] = -mon
            roots = np.linalg.eigvals(comp)
        roots = self._polish(roots, w[:, None])
        roots[bad] = np.nan
        return roots

    def _polish(self, z, w, steps: int = 2):
        with np.errstate(all="ignore"):
            for _ in range(steps):
                d = self.deriv(z)
                step = (self.eval(z) - w) / d
                ok = np.isfinite(step) & (np.abs(step) < 1e-3 * (1 + np.abs(z)))
                z = np.where(ok, z - step, z)
        return z

    # -- serialization ---------------------------------------------------
    def to_json(self) -> dict:
        return {
            "formula": self.formula,
            "numerator": [[a.real, a.imag] for a in self.num],
            "denominator": [[a.real, a.imag] for a in self.den],
        }

    @classmethod
    def from_json(cls, d) -> "MapSpec":
        if isinstance(d, str):
            d = json.loads(d)
        def arr(x):
            a = np.asarray(x, dtype=float)
            if a.ndim == 1:
                return a.astype(complex)
            return a[:, 0] + 1j * a[:, 1]
        den = arr(d.get("denominator", [[1.0, 0.0]]))
        return cls(arr(d["numerator"]), den, d.get("formula", ""))


def evaluate(m: MapSpec, z):
    return m.eval(z)


def derivative(m: MapSpec, z):
    return m.deriv(z)


# --------------------------------------------------------------------------
# formula parsing
# --------------------------------------------------------------------------

_IMAG = re.compile(r"(?<![\w.])((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*i(?![A-Za-y_\d])")
_BARE_I = re.compile(r"(?<![\w.])i(?![A-Za-y_\d])")
_IMPLICIT = re.compile(r"(?<=[\dj)])\s*(?=[z(])|(?<=[z)])\s*(?=\()")


class _Rat:
    __slots__ = ("n", "d")

    def __init__(self, n, d=None):
        self.n = _trim(np.atleast_1d(np.asarray(n, dtype=complex)))
        self.d = _trim(np.atleast_1d(np.asarray(d if d is not None else [1.0], dtype=complex)))

    def __add__(self, o):
        return _Rat(P.polyadd(P.polymul(self.n, o.d), P.polymul(o.n, self.d)), P.polymul(self.d, o.d))

    def __sub__(self, o):
        return _Rat(P.polysub(P.polymul(self.n, o.d), P.polymul(o.n, self.d)), P.polymul(self.d, o.d))

    def __mul__(self, o):
        return _Rat(P.polymul(self.n, o.n), P.polymul(self.d, o.d))

    def __truediv__(self, o):
        if not np.any(o.n):
            raise ConfigError("division by zero in formula")
        return _Rat(P.polymul(self.n, o.d), P.polymul(self.d, o.n))

    def __neg__(self):
        return _Rat(-self.n, self.d)

    def power(self, k: int):
        out = _Rat([1.0])
        base = self if k >= 0 else _Rat([1.0]) / self
        for _ in range(abs(k)):
            out = out * base
        return out


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
        return _Rat([complex(node.value)])
    if isinstance(node, ast.Name) and node.id == "z":
        return _Rat([0.0, 1.0])
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            e = node.right
            neg = False
            if isinstance(e, ast.UnaryOp) and isinstance(e.op, ast.USub):
                e, neg = e.operand, True
            if not (isinstance(e, ast.Constant) and isinstance(e.value, int)):
                raise ConfigError("exponents must be integer literals")
            if e.value > 64:
                raise ConfigError("exponent too large")
            return _eval_node(node.left).power(-e.value if neg else e.value)
        a, b = _eval_node(node.left), _eval_node(node.right)
        ops = {ast.Add: _Rat.__add__, ast.Sub: _Rat.__sub__, ast.Mult: _Rat.__mul__, ast.Div: _Rat.__truediv__}
        for t, fn in ops.items():
            if isinstance(node.op, t):
                return fn(a, b)
    raise ConfigError(f"unsupported syntax in formula: {ast.dump(node)[:60]}")


def parse_formula(text: str) -> MapSpec:
    """Parse ``z``, complex literals ``a+bi``, ``+ - * / ^`` and parentheses."""
    if not text or not text.strip():
        raise ConfigError("empty formula")
    src = _IMAG.sub(r"\1j", text.replace("^", "**"))
    src = _BARE_I.sub("1j", src)
    src = _IMPLICIT.sub("*", src)      # 0.5z, 2(z+1), (z+1)(z-1)
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as e:
        raise ConfigError(f"cannot parse formula {text!r}: {e.msg}") from None
    r = _eval_node(tree)
    return MapSpec(r.n, r.d, formula=text.strip())


def parse_map(spec) -> MapSpec:
    """Accept a MapSpec, a formula string, or JSON coefficient arrays."""
    if isinstance(spec, MapSpec):
        return spec
    if isinstance(spec, dict):
        return MapSpec.from_json(spec)
    s = str(spec).strip()
    if s.startswith("{"):
        try:
            return MapSpec.from_json(json.loads(s))
        except (KeyError, ValueError) as e:
            raise ConfigError(f"bad JSON map: {e}") from None
    return parse_formula(s)


def critical_points(m: MapSpec, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Zeros of g' with multiplicity, sorted lexicographically."""
    c = m.critical_numerator()
    if len(c) < 2:
        return np.zeros(0, dtype=complex)
    roots = np.roots(c[::-1]).astype(complex)
    scale = np.abs(c).sum() * np.maximum(1.0, np.abs(roots)) ** (len(c) - 1)
    resid = np.abs(_horner(c, roots))
    if np.any(resid > tol.root_tol * scale):
        raise RootSolveFailure(f"critical point residual {resid.max():.3g} too large")
    return roots[np.lexsort((roots.imag, roots.real))]


# --------------------------------------------------------------------------
# domains
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Disk:
    """Open disk |z - center| < radius (the UNBOUNDED_DISK(R) range tag)."""

    radius: float
    center: complex = 0j

    def contains(self, z):
        return np.abs(np.asarray(z) - self.center) < self.radius

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def bounds(self):
        d = complex(self.radius, self.radius)
        return self.center - d, self.center + d

    def boundary(self, n: int = 512) -> JordanCurve:
        return circle(self.center, self.radius, n)

    def to_json(self):
        return {"disk": {"center": [self.center.real, self.center.imag], "radius": self.radius}}


def domain_boundary(dom, n: int = 512) -> JordanCurve:
    return dom.boundary(n) if isinstance(dom, Disk) else dom


def domain_to_json(dom):
    return dom.to_json() if isinstance(dom, Disk) else {"curve": dom.to_json()}


# --------------------------------------------------------------------------
# orbits
# --------------------------------------------------------------------------

ESCAPED_AT = "ESCAPED_AT"
CONVERGED_TO_CYCLE = "CONVERGED_TO_CYCLE"
HORIZON_REACHED = "HORIZON_REACHED"


@dataclass(frozen=True, eq=False)
class OrbitRecord:
    start: complex
    points: np.ndarray
    outcome: str
    n: int = 0                  # escape index for ESCAPED_AT
    period: int = 0
    multiplier: complex = 0j

    @property
    def cycle(self) -> np.ndarray:
        if self.outcome != CONVERGED_TO_CYCLE:
            return np.zeros(0, dtype=complex)
        return self.points[-self.period - 1:-1]

    def describe(self) -> str:
        if self.outcome == ESCAPED_AT:
            return f"ESCAPED_AT({self.n})"
        if self.outcome == CONVERGED_TO_CYCLE:
            return f"CONVERGED_TO_CYCLE({self.period}, {self.multiplier:.6g})"
        return HORIZON_REACHED


# --------------------------------------------------------------------------
# proper map domain
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProperMapDomain:
    """g: U' -> U.  ``range`` is a :class:`Disk` or a :class:`JordanCurve`."""

    map: MapSpec
    range: object
    mode: str = "SINGLE"
    degree: int = 0
    preimage_components: tuple = ()
    local_degrees: tuple = ()
    critical_points: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    critical_orbits: tuple = ()
    postcritical: GridSet | None = None
    postcritical_points: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    cycles: tuple = ()
    flags: dict = field(default_factory=dict)
    tol: Tolerances = DEFAULT_TOL

    # -- geometry of U and U' --------------------------------------------
    @property
    def diameter(self) -> float:
        return float(self.range.diameter)

    @property
    def pb_tol(self) -> float:
        return self.tol.pb_tol_rel * self.diameter

    @property
    def cv_margin(self) -> float:
        return self.tol.cv_margin_rel * self.diameter

    @property
    def dedup_tol(self) -> float:
        return self.tol.dedup_tol_rel * self.diameter

    def in_range(self, z):
        return self.range.contains(z)

    def in_domain(self, z):
        """z in U' = U ∩ g^{-1}(U)."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(all="ignore"):
            w = self.map.eval(z)
        return self.in_range(z) & np.isfinite(w) & self.in_range(np.where(np.isfinite(w), w, 0)) & np.isfinite(w)

    def critical_values(self) -> np.ndarray:
        return self.map.eval(self.critical_points) if len(self.critical_points) else np.zeros(0, dtype=complex)

    def preimages_in_domain(self, w) -> np.ndarray:
        z = self.map.preimages(w)
        return z[self.in_range(z)] if len(z) else z

    def eval(self, z):
        return self.map.eval(z)

    def deriv(self, z):
        return self.map.deriv(z)

    def preimages(self, w):
        return self.map.preimages(w)

    def grid(self, n: int, pad: float = 0.0) -> GridSet:
        """Square grid covering the bounding box of U."""
        lo, hi = self.range.bounds()
        c = 0.5 * (lo + hi)
        half = 0.5 * max(hi.real - lo.real, hi.imag - lo.imag) * (1 + pad)
        return GridSet.square(c, half, n)

    @property
    def singleton_degenerate(self) -> bool:
        return bool(self.flags.get("singleton_degenerate"))

    @property
    def assumption_violated(self) -> bool:
        return bool(self.flags.get("assumption_violated"))


def forward_orbit(pm: ProperMapDomain, z, horizon: int | None = None) -> OrbitRecord:
    """Iterate until the orbit leaves U (after its last point in U \\ U'),
    settles on a cycle, or the horizon runs out."""
    horizon = pm.tol.horizon if horizon is None else horizon
    tol = pm.tol
    z = complex(z)
    pts = [z]
    g = pm.map
    in_u = pm.range.contains
    maxp = tol.max_period
    buf = np.empty(horizon + 1, dtype=complex)
    buf[0] = z
    for k in range(horizon):
        try:
            w = complex(g.eval(pts[-1]))
        except PoleHit:
            return OrbitRecord(z, np.array(pts), ESCAPED_AT, n=k + 1)
        pts.append(w)
        buf[k + 1] = w
        if not (math.isfinite(w.real) and math.isfinite(w.imag)) or not in_u(w):
            return OrbitRecord(z, np.array(pts), ESCAPED_AT, n=k + 1)
        m = k + 1
        if m >= 1:
            lo = max(0, m - maxp)
            d = np.abs(buf[lo:m][::-1] - w)          # d[p-1] = |z_m - z_{m-p}|
            hit = np.nonzero(d < tol.cycle_tol)[0]
            if len(hit):
                p = int(hit[0]) + 1
                cyc = buf[m - p:m]
                mult = complex(np.prod(g.deriv(cyc)))
                # a slow orbit near a repelling cycle is still on its way out
                if abs(mult) > 1 + tol.mult_tol and k + 1 < horizon:
                    continue
                return OrbitRecord(z, np.array(pts), CONVERGED_TO_CYCLE, period=p, multiplier=mult)
    return OrbitRecord(z, np.array(pts), HORIZON_REACHED)


def _count_preimages(pm: ProperMapDomain, w: complex) -> int:
    z = pm.map.preimages(w)
    return int(np.count_nonzero(pm.in_range(z)))


def build_proper_map(m, range_, mode: str = "SINGLE", tol: Tolerances = DEFAULT_TOL,
                     strict: bool = False, n_boundary: int = 512, n_degree_samples: int = 24) -> ProperMapDomain:
    """Restrict ``m`` to the range domain and collect critical/postcritical data.

    Standing-assumption failures (critical orbit leaving U', singleton P_g)
    are recorded in ``flags``; with ``strict=True`` they raise instead.
    """
    m = parse_map(m)
    if isinstance(range_, (int, float)):
        range_ = Disk(float(range_))
    mode = mode.upper()
    if mode not in ("SINGLE", "MULTI"):
        raise ConfigError(f"mode must be SINGLE or MULTI, got {mode}")
    poles = m.poles()
    if len(poles) and np.any(range_.contains(poles)):
        raise PoleHit("rational map has a pole inside the range U")

    pm = ProperMapDomain(m, range_, mode, tol=tol)
    crit_all = critical_points(m, tol)
    pm = replace(pm, critical_points=crit_all[pm.in_domain(crit_all)] if len(crit_all) else crit_all)

    # degree by counting preimages of regular sample points
    rng = np.random.default_rng(tol.seed)
    lo, hi = range_.bounds()
    cvals = pm.critical_values()
    counts = []
    tries = 0
    while len(counts) < n_degree_samples and tries < 50 * n_degree_samples:
        tries += 1
        w = complex(rng.uniform(lo.real, hi.real), rng.uniform(lo.imag, hi.imag))
        if not range_.contains(w):
            continue
        if len(cvals) and np.min(np.abs(cvals - w)) < 1e-3 * range_.diameter:
            continue
        counts.append(_count_preimages(pm, w))
    if not counts:
        raise NotProper("could not sample regular points of U")
    if len(set(counts)) != 1:
        raise NotProper(f"preimage counts vary across U: {sorted(set(counts))}")
    d = counts[0]
    if d < 2:
        raise NotProper(f"restriction has degree {d} < 2")
    pm = replace(pm, degree=d)

    # boundary of U' by pulling back the boundary of U
    from .pullback import pullback_curve
    res = pullback_curve(pm, domain_boundary(range_, n_boundary))
    comps = tuple(res.components)
    if mode == "SINGLE":
        from .geometry import Nesting, nesting_relation
        if len(comps) != 1:
            raise NotProper(f"SINGLE mode needs a connected U', found {len(comps)} components")
        if nesting_relation(comps[0], domain_boundary(range_, n_boundary)) != Nesting.B_INSIDE:
            raise NotProper("U' is not compactly contained in U")
    pm = replace(pm, preimage_components=comps, local_degrees=tuple(res.local_degrees))

    # postcritical set
    flags = {"assumption_violated": False, "witness": None, "singleton_degenerate": False,
             "horizon_reached": False}
    orbits, pc_points, cycles = [], [], []
    for c in pm.critical_points:
        rec = forward_orbit(pm, c, tol.horizon)
        orbits.append(rec)
        if rec.outcome == ESCAPED_AT:
            flags["assumption_violated"] = True
            if flags["witness"] is None:
                flags["witness"] = [[p.real, p.imag] for p in rec.points[:32]]
            pc_points.extend(rec.points[1:-1])
        else:
            pc_points.extend(rec.points[1:])
            if rec.outcome == CONVERGED_TO_CYCLE:
                cycles.append((tuple(rec.cycle), rec.period, rec.multiplier))
            else:
                flags["horizon_reached"] = True
    pc = np.array(pc_points, dtype=complex)
    grid = pm.grid(tol.pc_res)
    pcg = rasterize_points(grid, pc).dilate(tol.pc_pad) if len(pc) else grid
    pm = replace(pm, critical_orbits=tuple(orbits), postcritical=pcg, postcritical_points=pc,
                 cycles=tuple(cycles))

    if len(pc):
        spread = np.abs(pc - pc[0]).max()
        if spread < tol.cycle_tol * 10 and len(pm.critical_points):
            c0 = pc[0]
            near_crit = np.min(np.abs(pm.critical_points - c0)) < 1e-8
            pre = pm.preimages_in_domain(c0)
            if near_crit and np.all(np.abs(pre - c0) < 1e-4):
                flags["singleton_degenerate"] = True
    pm = replace(pm, flags=flags)
    if strict:
        if flags["assumption_violated"]:
            raise AssumptionViolated("critical orbit leaves U'", witness=flags["witness"])
        if flags["singleton_degenerate"]:
            raise SingletonDegenerate("P_g is a fixed critical point with no other preimage")
    return pm


def verify_basin_critical(pm: ProperMapDomain, cycle, parabolic: bool = False,
                          horizon: int | None = None) -> complex:
    """Critical point whose orbit is attracted to ``cycle``.

    Every attracting cycle of a proper map attracts a critical point, so a
    failure here means a bug or a broken standing assumption.
    """
    cycle = np.atleast_1d(np.asarray(cycle, dtype=complex))
    mult = complex(np.prod(pm.map.deriv(cycle)))
    if abs(mult) >= 1 - pm.tol.mult_tol and not parabolic:
        raise ValueError(f"cycle is not attracting (|multiplier| = {abs(mult):.6g})")
    horizon = pm.tol.horizon if horizon is None else horizon
    tol = 1e-3 if parabolic else max(1e-8, 10 * np.abs(pm.map.eval(cycle) - np.roll(cycle, -1)).max())
    for c in pm.critical_points:
        z = complex(c)
        for _ in range(horizon):
            if np.min(np.abs(cycle - z)) < tol:
                return complex(c)
            z = complex(pm.map.eval(z))
            if not pm.in_range(z):
                break
    raise LemmaViolation("no critical point is attracted to the given cycle")
