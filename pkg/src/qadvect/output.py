"""Plain-text artifacts: 8-bit PGM heatmaps and JSON manifests."""
from __future__ import annotations

import json
import platform
import sys
from pathlib import Path

import numpy as np


def write_pgm(table: np.ndarray, path) -> Path:
    """Write ``table`` (rows bottom-to-top in y) as an ASCII P2 greyscale image.

    Values are mapped linearly from [min, max] onto [0, 255]; the range is
    recorded in a ``<name>.pgm.json`` sidecar.  Row 0 of ``table`` becomes the
    bottom row of the image.
    """
    path = Path(path)
    data = np.asarray(table, dtype=float)
    lo, hi = float(np.min(data)), float(np.max(data))
    span = hi - lo
    scaled = np.zeros(data.shape, dtype=int) if span == 0 else np.rint((data - lo) / span * 255).astype(int)
    rows = scaled[::-1]
    with path.open("w", encoding="ascii") as fh:
        fh.write(f"P2\n{data.shape[1]} {data.shape[0]}\n255\n")
        for row in rows:
            fh.write(" ".join(str(v) for v in row) + "\n")
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(
        json.dumps({"scaling": "linear", "min": lo, "max": hi, "levels": 255, "origin": "bottom-left"}, indent=2)
    )
    return path


def read_pgm(path) -> np.ndarray:
    """Read back a P2 image as written by :func:`write_pgm` (top row first)."""
    tokens = Path(path).read_text(encoding="ascii").split()
    if tokens[0] != "P2":
        raise ValueError(f"{path}: not an ASCII PGM")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pixels = np.array(tokens[4:], dtype=int)
    if pixels.size != width * height or pixels.max(initial=0) > maxval:
        raise ValueError(f"{path}: malformed pixel data")
    return pixels.reshape(height, width)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if np.isfinite(value) else str(value)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(payload: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def versions() -> dict:
    import scipy

    from . import __version__

    return {
        "qadvect": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
    }
