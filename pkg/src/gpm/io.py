"""File formats: snapshots, metrics CSV, JSON helpers and PPM rendering.

Snapshot text format (colours 0-based on disk, 1-based in memory)::

    GPM <L> <q>
    <L space-separated colours of row y=0>
    ...
    <row y=L-1>
"""

from __future__ import annotations

import colorsys
import csv
import json
from pathlib import Path

import numpy as np

from .lattice import TorusLattice
from .model import Configuration


class SnapshotError(ValueError):
    pass


def format_snapshot(sigma: Configuration) -> str:
    L = sigma.L
    lines = [f"GPM {L} {sigma.q}"]
    g = sigma.grid() - 1
    for y in range(L):
        lines.append(" ".join(str(int(c)) for c in g[y]))
    return "\n".join(lines) + "\n"


def parse_snapshot(text: str) -> Configuration:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SnapshotError("empty snapshot")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "GPM":
        raise SnapshotError("first line must be 'GPM <L> <q>'")
    try:
        L, q = int(head[1]), int(head[2])
    except ValueError as exc:
        raise SnapshotError("L and q must be integers") from exc
    if L < 3 or q < 1:
        raise SnapshotError(f"bad header values L={L}, q={q}")
    if len(lines) != L + 1:
        raise SnapshotError(f"expected {L} grid rows, found {len(lines) - 1}")
    try:
        grid = np.array([[int(t) for t in ln.split()] for ln in lines[1:]], dtype=np.int64)
    except ValueError as exc:
        raise SnapshotError("grid entries must be integers") from exc
    if grid.shape != (L, L):
        raise SnapshotError(f"every grid row must have {L} entries")
    if grid.min() < 0 or grid.max() >= q:
        raise SnapshotError(f"colours must lie in [0, {q - 1}]")
    return Configuration(TorusLattice(L), grid.reshape(-1) + 1, q)


def write_snapshot(path, sigma: Configuration):
    Path(path).write_text(format_snapshot(sigma), encoding="utf-8", newline="\n")


def read_snapshot(path) -> Configuration:
    return parse_snapshot(Path(path).read_text(encoding="utf-8"))


def metrics_header(q: int) -> list[str]:
    return ["step", "sweep", "energy"] + [f"n_{k}" for k in range(1, q + 1)] + ["boundary_size"]


class MetricsWriter:
    def __init__(self, path, q: int):
        self._f = open(path, "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._f, lineterminator="\r\n")
        self._w.writerow(metrics_header(q))

    def write(self, sample):
        self._w.writerow([sample.step, repr(float(sample.sweep)), repr(float(sample.energy))]
                         + [int(c) for c in sample.counts] + [sample.boundary_size])

    def close(self):
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------- rendering

def default_palette(q: int) -> np.ndarray:
    """q evenly spaced hues at fixed saturation and value."""
    out = np.empty((q, 3), dtype=np.uint8)
    for k in range(q):
        rgb = colorsys.hsv_to_rgb(k / q, 0.85, 0.95)
        out[k] = [int(round(255 * c)) for c in rgb]
    return out


def parse_palette(obj) -> np.ndarray:
    """Palette from a JSON list of ``[r, g, b]`` triples or ``"#rrggbb"`` strings."""
    rows = []
    for item in obj:
        if isinstance(item, str):
            s = item.lstrip("#")
            if len(s) != 6:
                raise ValueError(f"bad colour {item!r}")
            rows.append([int(s[i:i + 2], 16) for i in (0, 2, 4)])
        else:
            r = [int(v) for v in item]
            if len(r) != 3 or min(r) < 0 or max(r) > 255:
                raise ValueError(f"bad colour {item!r}")
            rows.append(r)
    return np.array(rows, dtype=np.uint8).reshape(-1, 3)


def raster(sigma: Configuration, palette: np.ndarray | None = None, scale: int = 4) -> np.ndarray:
    """(H, W, 3) image of the lattice in its rhombic embedding.

    Vertex (x, y) becomes a ``scale`` x ``scale`` block in raster row
    ``L-1-y`` (y = 0 at the bottom), shifted right by ``(y * scale) // 2``
    pixels with horizontal wraparound, so each row sits half a cell from
    its neighbours as on the triangular lattice.
    """
    if scale < 1:
        raise ValueError("scale must be >= 1")
    pal = default_palette(sigma.q) if palette is None else np.asarray(palette, dtype=np.uint8)
    if pal.shape[0] < sigma.q:
        raise ValueError(f"palette has {pal.shape[0]} colours, need {sigma.q}")
    L = sigma.L
    W = L * scale
    g = sigma.grid() - 1
    img = np.empty((L * scale, W, 3), dtype=np.uint8)
    for y in range(L):
        row = np.repeat(pal[g[y]], scale, axis=0)
        row = np.roll(row, (y * scale) // 2, axis=0)
        r0 = (L - 1 - y) * scale
        img[r0:r0 + scale] = row[None, :, :]
    return img


def ppm_bytes(img: np.ndarray) -> bytes:
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def write_ppm(path, sigma: Configuration, palette=None, scale: int = 4):
    Path(path).write_bytes(ppm_bytes(raster(sigma, palette, scale)))
