"""Run configuration: flat ``key = value`` files with command-line overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import JordanCurve, circle, ellipse
from .io import load_curve
from .maps import DEFAULT_TOL, Disk, Tolerances, build_proper_map

_TOL_KEYS = [f.name for f in fields(Tolerances)]


@dataclass
class RunConfig:
    map: str = ""
    range_disk: float | None = 4.0
    range_center: str = "0,0"
    range_curve: str | None = None
    mode: str = "SINGLE"
    gamma0: str = "auto"
    resolution: int = 1024
    n_max: int = 12
    p_max: int = 8
    k_max: int = 60
    escape_horizon: int = 200
    n_samples: int = 200
    entropy_delta: float = 0.05
    entropy_k: int = 12
    capacity_points: int = 128
    out: str = "plkit-out"
    # Tolerances, flattened so every one is a config key
    tol: Tolerances = field(default_factory=Tolerances)

    def validate(self) -> "RunConfig":
        if not self.map.strip():
            raise ConfigError("config key 'map' is required")
        if self.range_curve is None and not (self.range_disk and self.range_disk > 0):
            raise ConfigError("need range_disk > 0 or range_curve")
        for k in ("resolution", "n_max", "p_max", "k_max", "escape_horizon", "n_samples",
                  "entropy_k", "capacity_points"):
            if getattr(self, k) < 1:
                raise ConfigError(f"{k} must be >= 1")
        if self.resolution < 16:
            raise ConfigError("resolution must be >= 16")
        if not self.entropy_delta > 0:
            raise ConfigError("entropy_delta must be positive")
        if self.mode.upper() not in ("SINGLE", "MULTI"):
            raise ConfigError(f"mode must be SINGLE or MULTI, got {self.mode}")
        return self

    @property
    def seed(self) -> int:
        return self.tol.seed

    def echo(self) -> dict:
        """Flat dict of every key, in declaration order."""
        out = {}
        for f in fields(self):
            if f.name == "tol":
                out.update(dataclasses.asdict(self.tol))
            else:
                out[f.name] = getattr(self, f.name)
        return out

    # -- derived objects -------------------------------------------------

    def range_domain(self):
        if self.range_curve:
            return load_curve(self.range_curve)
        return Disk(float(self.range_disk), parse_point(self.range_center))

    def proper_map(self):
        return build_proper_map(self.map, self.range_domain(), self.mode, tol=self.tol)

    def gamma0_curve(self, pm=None) -> JordanCurve:
        return parse_curve_spec(self.gamma0, pm)


def keys() -> list[str]:
    return [f.name for f in fields(RunConfig) if f.name != "tol"] + _TOL_KEYS


def _coerce(name: str, raw):
    if name in _TOL_KEYS:
        proto = getattr(DEFAULT_TOL, name)
    else:
        proto = getattr(RunConfig(), name)
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = raw.strip()
        if raw.lower() in ("none", "null", "") and proto is None:
            return None
    try:
        if isinstance(proto, bool):
            return str(raw).lower() in ("1", "true", "yes", "on")
        if isinstance(proto, int):
            return int(raw)
        if isinstance(proto, float) or name == "range_disk":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return str(raw)


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; later keys win."""
    out = {}
    valid = set(keys())
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.replace("-", "_")
        if k not in valid:
            raise ConfigError(f"line {lineno}: unknown key {k!r}")
        out[k] = v
    return out


def make_config(file: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the config file, then explicit overrides."""
    raw = {}
    if file:
        try:
            raw.update(parse_config_text(Path(file).read_text()))
        except OSError as e:
            raise ConfigError(f"cannot read config {file}: {e}") from None
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k.replace("-", "_")] = v
    unknown = set(raw) - set(keys())
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    run_kw = {k: _coerce(k, v) for k, v in raw.items() if k not in _TOL_KEYS}
    tol_kw = {k: _coerce(k, v) for k, v in raw.items() if k in _TOL_KEYS}
    if "range_curve" in run_kw and "range_disk" not in run_kw:
        run_kw["range_disk"] = None
    return RunConfig(**run_kw, tol=Tolerances(**tol_kw)).validate()


# --------------------------------------------------------------------------
# small text grammars for points, curves and regions
# --------------------------------------------------------------------------

def _floats(s: str, n: tuple, what: str) -> list[float]:
    try:
        vals = [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad {what}: {s!r}") from None
    if len(vals) not in n:
        raise ConfigError(f"bad {what}: {s!r}")
    return vals


def parse_point(s) -> complex:
    if isinstance(s, (int, float, complex)):
        return complex(s)
    v = _floats(str(s), (1, 2), "point")
    return complex(v[0], v[1] if len(v) == 2 else 0.0)


def parse_curve_spec(spec: str, pm=None, n: int = 512) -> JordanCurve:
    """``circle:r``, ``circle:cx,cy,r``, ``ellipse:cx,cy,a,b``, a JSON file, or ``auto``.

    ``auto`` is the circle of 0.9 times the range radius (disk ranges only).
    """
    spec = str(spec).strip()
    kind, _, body = spec.partition(":")
    kind = kind.lower()
    if kind == "auto":
        if pm is None or not isinstance(pm.range, Disk):
            raise ConfigError("gamma0=auto needs a disk range; give circle:/ellipse: or a file")
        return circle(pm.range.center, 0.9 * pm.range.radius, n)
    if kind == "circle" and body:
        v = _floats(body, (1, 3), "circle")
        return circle(0j, v[0], n) if len(v) == 1 else circle(complex(v[0], v[1]), v[2], n)
    if kind == "ellipse" and body:
        v = _floats(body, (4,), "ellipse")
        return ellipse(complex(v[0], v[1]), v[2], v[3], n)
    p = Path(spec)
    if p.is_file():
        return load_curve(p)
    raise ConfigError(f"cannot interpret curve {spec!r}")


def parse_region(spec, pm=None):
    """``disk:cx,cy,r`` or ``disk:r``; None means the whole range."""
    if spec is None:
        return None if pm is None else pm.range
    kind, _, body = str(spec).partition(":")
    if kind.lower() != "disk":
        raise ConfigError(f"unsupported region {spec!r}")
    v = _floats(body, (1, 3), "region")
    return Disk(v[0]) if len(v) == 1 else Disk(v[2], complex(v[0], v[1]))


def to_jsonable(x):
    """Recursively convert numpy scalars/complex numbers for json.dumps."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        x = float(x)
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    return x
