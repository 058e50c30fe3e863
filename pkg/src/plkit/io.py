"""Serialization: curve/grid JSON and binary PPM (P6) renders."""
from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from .geometry import GridSet, JordanCurve

GRID_FORMAT = "plkit-gridset/1"


def grid_to_json(g: GridSet) -> dict:
    packed = np.packbits(g.cells.ravel())
    return {
        "format": GRID_FORMAT,
        "rect": [[g.lo.real, g.lo.imag], [g.hi.real, g.hi.imag]],
        "nx": g.nx,
        "ny": g.ny,
        "bitmask": base64.b64encode(packed.tobytes()).decode("ascii"),
    }


def grid_from_json(d: dict) -> GridSet:
    (x0, y0), (x1, y1) = d["rect"]
    nx, ny = int(d["nx"]), int(d["ny"])
    raw = np.frombuffer(base64.b64decode(d["bitmask"]), dtype=np.uint8)
    bits = np.unpackbits(raw)[: nx * ny].astype(bool)
    return GridSet(complex(x0, y0), complex(x1, y1), bits.reshape(ny, nx))


def save_grid(path, g: GridSet):
    Path(path).write_text(json.dumps(grid_to_json(g)))


def load_grid(path) -> GridSet:
    return grid_from_json(json.loads(Path(path).read_text()))


def save_curve(path, c: JordanCurve):
    Path(path).write_text(json.dumps(c.to_json()))


def load_curve(path) -> JordanCurve:
    return JordanCurve.from_json(json.loads(Path(path).read_text()))


def write_ppm(path, rgb: np.ndarray):
    """Write an (h, w, 3) uint8 array as binary PPM.  Row 0 is the top."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(rgb.tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError("only 8-bit PPM supported")
    return np.frombuffer(parts[4][: w * h * 3], dtype=np.uint8).reshape(h, w, 3)


def render_grid(g: GridSet, fg=(0, 0, 0), bg=(255, 255, 255)) -> np.ndarray:
    """One pixel per cell; imaginary axis points up."""
    img = np.empty((g.ny, g.nx, 3), dtype=np.uint8)
    img[:] = bg
    img[g.cells] = fg
    return img[::-1]


def overlay_curves(img: np.ndarray, g: GridSet, curves, color=(220, 30, 30)) -> np.ndarray:
    """Draw curve vertices (densified) onto a render of grid ``g``."""
    img = img.copy()
    h = g.cell_size
    for c in curves:
        v = c.vertices
        w = np.roll(v, -1)
        steps = np.maximum(np.ceil(np.abs(w - v) / (0.5 * h)).astype(int), 1)
        t = np.concatenate([np.arange(s) / s for s in steps])
        base = np.repeat(v, steps)
        pts = base + t * (np.repeat(w, steps) - base)
        iy, ix, ok = g.index_of(pts)
        img[g.ny - 1 - iy[ok], ix[ok]] = color
    return img
