"""Writers for the canonical dataset artifacts the pipeline consumes.

The binary layout is the pipeline's documented interchange format: three
little-endian int64 (magic, T, d), then T*d float64 row-major. CSV rows use
repr() floats so text files round-trip bit-exactly too.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

FEATURE_MAGIC = int.from_bytes(b"FEATMAT\0", "little")
_HEADER = struct.Struct("<qqq")


def write_features(matrix: np.ndarray, path) -> None:
    path = Path(path)
    m = np.ascontiguousarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"feature matrix must be non-empty 2-D, got {m.shape}")
    if path.suffix == ".csv":
        with open(path, "w") as fh:
            for row in m:
                fh.write(",".join(repr(v) for v in row.tolist()) + "\n")
    else:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(FEATURE_MAGIC, m.shape[0], m.shape[1]))
            fh.write(m.tobytes())


def write_manifest(entries: list[dict], d: int, path) -> None:
    """Header line {"d": N}, then one JSON entry per video."""
    with open(path, "w") as fh:
        fh.write(json.dumps({"d": d}) + "\n")
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")
