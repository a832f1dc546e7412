"""Persistence: field CSVs, point-cloud CSVs, P6/PNG heatmaps, JSON reports and run manifests.

Every encoder is deterministic: identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import ScanField, ScanGrid

FIELD_HEADER = ("re", "im", "value", "mask")
CLOUD_HEADER = ("re", "im", "mult", "word_id")
MASK_RGB = (96, 96, 96)

# anchor colours for the piecewise-linear colour maps, from 0 to 1
COLORMAPS = {
    "gray": ((0, 0, 0), (255, 255, 255)),
    "heat": ((0, 0, 0), (128, 0, 0), (230, 80, 0), (255, 200, 40), (255, 255, 255)),
    "blue": ((255, 255, 255), (120, 170, 230), (20, 40, 140), (0, 0, 0)),
}


def fmt(x: float) -> str:
    """17 significant digits: exact round trip for doubles."""
    return format(float(x), ".17g")


# -- CSV --------------------------------------------------------------------------

def encode_field_csv(fld: ScanField) -> bytes:
    """``re,im,value,mask`` rows in row-major node order (Im outer, Re inner)."""
    lam = fld.grid.nodes()
    out = io.StringIO()
    out.write(",".join(FIELD_HEADER) + "\n")
    for j in range(fld.grid.ny):
        for i in range(fld.grid.nx):
            z = lam[j, i]
            if fld.mask[j, i]:
                out.write(f"{fmt(z.real)},{fmt(z.imag)},,1\n")
            else:
                out.write(f"{fmt(z.real)},{fmt(z.imag)},{fmt(fld.values[j, i])},0\n")
    return out.getvalue().encode("ascii")


def decode_field_csv(data: bytes | str, grid: ScanGrid | None = None) -> ScanField:
    """Inverse of :func:`encode_field_csv`.

    Without ``grid`` the grid is rebuilt from the node coordinates (needs at
    least two nodes per axis).
    """
    text = data.decode("ascii") if isinstance(data, bytes) else data
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != FIELD_HEADER:
        raise ValueError("not a field CSV: bad header")
    rows = rows[1:]
    re_ = np.array([float(r[0]) for r in rows])
    im_ = np.array([float(r[1]) for r in rows])
    mask = np.array([r[3] == "1" for r in rows])
    vals = np.array([math.nan if m else float(r[2]) for r, m in zip(rows, mask)])
    if grid is None:
        xs, ys = np.unique(re_), np.unique(im_)
        if xs.size < 2 or ys.size < 2:
            raise ValueError("cannot infer the grid from fewer than two nodes per axis")
        hx, hy = (xs[-1] - xs[0]) / (xs.size - 1), (ys[-1] - ys[0]) / (ys.size - 1)
        grid = ScanGrid(xs[0] - hx / 2, xs[-1] + hx / 2, ys[0] - hy / 2, ys[-1] + hy / 2,
                        xs.size, ys.size, strict=False)
    if len(rows) != grid.nx * grid.ny:
        raise ValueError(f"expected {grid.nx * grid.ny} rows, found {len(rows)}")
    return ScanField(grid, vals.reshape(grid.shape), mask.reshape(grid.shape))


def encode_divisor_csv(cloud) -> bytes:
    """``re,im,mult,word_id`` rows of a DivisorCloud."""
    out = io.StringIO()
    out.write(",".join(CLOUD_HEADER) + "\n")
    for z, m, w in zip(cloud.locations, cloud.multiplicities, cloud.word_ids):
        out.write(f"{fmt(z.real)},{fmt(z.imag)},{int(m)},{int(w)}\n")
    return out.getvalue().encode("ascii")


def encode_points_csv(cloud) -> bytes:
    """Point cloud rows ``chain,re0,im0,re1,im1,…`` (unit vectors)."""
    d = cloud.dimension
    out = io.StringIO()
    out.write("chain," + ",".join(f"re{k},im{k}" for k in range(d)) + "\n")
    for c, p in zip(cloud.chain, cloud.points):
        out.write(f"{int(c)}," + ",".join(f"{fmt(z.real)},{fmt(z.imag)}" for z in p) + "\n")
    return out.getvalue().encode("ascii")


# -- images -------------------------------------------------------------------------

def _colormap_table(name: str) -> np.ndarray:
    if name not in COLORMAPS:
        raise ValueError(f"unknown colormap {name!r}; choose from {sorted(COLORMAPS)}")
    anchors = np.array(COLORMAPS[name], dtype=float)
    pos = np.linspace(0.0, 1.0, len(anchors))
    t = np.linspace(0.0, 1.0, 256)
    return np.stack([np.interp(t, pos, anchors[:, c]) for c in range(3)], axis=-1).round().astype(np.uint8)


def normalize_values(values: np.ndarray, valid: np.ndarray, scale: str = "linear") -> np.ndarray:
    """Map valid values to [0, 1]. ``log`` uses log(1 + x/x₉₀) on the positive part."""
    v = np.where(valid, values, 0.0).astype(float)
    out = np.zeros(v.shape)
    if not valid.any():
        return out
    if scale == "linear":
        lo, hi = v[valid].min(), v[valid].max()
        if hi > lo:
            out = (v - lo) / (hi - lo)
    elif scale == "log":
        pos = np.clip(v, 0.0, None)
        ref = pos[valid & (pos > 0)]
        if ref.size:
            x90 = np.percentile(ref, 90)
            y = np.log1p(pos / x90)
            top = y[valid].max()
            out = y / top if top > 0 else y
    else:
        raise ValueError(f"scale must be 'linear' or 'log', not {scale!r}")
    return np.clip(np.where(valid, out, 0.0), 0.0, 1.0)


def render_rgb(data, colormap: str = "heat", scale: str = "linear") -> np.ndarray:
    """``(height, width, 3)`` uint8 image; the top row is the largest Im.

    ``data`` is a ScanField or a 2-D array (histogram) in grid orientation.
    """
    if isinstance(data, ScanField):
        values, valid = data.values, data.valid
    else:
        values = np.asarray(data, dtype=float)
        valid = np.isfinite(values)
    idx = np.rint(255 * normalize_values(values, valid, scale)).astype(int)
    rgb = _colormap_table(colormap)[idx]
    rgb[~valid] = MASK_RGB
    return np.ascontiguousarray(rgb[::-1])


def encode_ppm(rgb: np.ndarray) -> bytes:
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.asarray(rgb, dtype=np.uint8).tobytes()


def decode_ppm(data: bytes) -> np.ndarray:
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6" or parts[2] != b"255":
        raise ValueError("not a binary PPM with max value 255")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)


def _png_chunk(kind: bytes, payload: bytes) -> bytes:
    return (struct.pack(">I", len(payload)) + kind + payload
            + struct.pack(">I", zlib.crc32(kind + payload) & 0xFFFFFFFF))


def encode_png(rgb: np.ndarray) -> bytes:
    """8-bit RGB PNG without ancillary chunks (no timestamps)."""
    h, w, _ = rgb.shape
    raw = b"".join(b"\x00" + row.tobytes() for row in np.asarray(rgb, dtype=np.uint8))
    return (b"\x89PNG\r\n\x1a\n"
            + _png_chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0))
            + _png_chunk(b"IDAT", zlib.compress(raw, 9))
            + _png_chunk(b"IEND", b""))


def encode_image(data, colormap: str = "heat", scale: str = "linear", image_format: str = "ppm") -> bytes:
    """Heatmap of a field or histogram as P6 PPM (default) or PNG bytes."""
    rgb = render_rgb(data, colormap, scale)
    if image_format == "ppm":
        return encode_ppm(rgb)
    if image_format == "png":
        return encode_png(rgb)
    raise ValueError(f"image format must be 'ppm' or 'png', not {image_format!r}")


# -- JSON ---------------------------------------------------------------------------

def jsonable(obj):
    """Plain JSON types; NaN and infinities become null, complex numbers [re, im]."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "as_dict"):
        return jsonable(obj.as_dict())
    return str(obj)


def encode_json(obj) -> bytes:
    return (json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n").encode("utf-8")


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class RunManifest:
    """Everything needed to replay a run, plus digests of what it wrote.

    ``argv`` is the command line without the output prefix; ``wall_clock``
    is informative and excluded from the determinism contract.
    """

    command: str
    argv: list
    config: dict | None
    seed: object
    version: str
    tolerances: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    outputs: dict = field(default_factory=dict)
    threads: int = 1

    def as_dict(self) -> dict:
        return {"command": self.command, "argv": list(self.argv), "config": self.config,
                "seed": self.seed, "version": self.version, "tolerances": self.tolerances,
                "wall_clock": self.wall_clock, "outputs": dict(self.outputs),
                "threads": self.threads}

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(d["command"], list(d["argv"]), d.get("config"), d.get("seed"),
                   d.get("version", ""), d.get("tolerances", {}), d.get("wall_clock", 0.0),
                   d.get("outputs", {}), d.get("threads", 1))


class OutputWriter:
    """Writes files named ``prefix + suffix`` and records their digests by suffix."""

    def __init__(self, prefix: str | Path):
        self.prefix = str(prefix)
        self.digests: dict[str, str] = {}
        parent = Path(self.prefix).parent
        parent.mkdir(parents=True, exist_ok=True)

    def path(self, suffix: str) -> Path:
        return Path(f"{self.prefix}{suffix}")

    def write(self, suffix: str, data: bytes) -> Path:
        p = self.path(suffix)
        p.write_bytes(data)
        self.digests[suffix] = sha256(data)
        return p
