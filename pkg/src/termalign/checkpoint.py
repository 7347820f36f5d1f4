"""Stage checkpoints: named parameter matrices plus metadata, as text.

Layout:
    termalign-checkpoint
    META <key> <value>          (repeated)
    PARAM <name> <rows> <cols>  followed by <rows> lines of floats
Floats use 17 significant digits, so save/load round-trips bit-exactly.
"""

from __future__ import annotations

import numpy as np

from .linalg import as_matrix, format_float

MAGIC = "termalign-checkpoint"


def save_checkpoint(path, params: dict[str, np.ndarray], meta: dict[str, str] | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(MAGIC + "\n")
        for k, v in (meta or {}).items():
            fh.write(f"META {k} {v}\n")
        for name in sorted(params):
            m = as_matrix(params[name])
            fh.write(f"PARAM {name} {m.shape[0]} {m.shape[1]}\n")
            for row in m:
                fh.write(" ".join(format_float(x) for x in row) + "\n")


def load_checkpoint(path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    meta: dict[str, str] = {}
    params: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        if fh.readline().strip() != MAGIC:
            raise ValueError(f"{path}: not a termalign checkpoint")
        line = fh.readline()
        while line:
            parts = line.split()
            if parts[0] == "META":
                meta[parts[1]] = " ".join(parts[2:])
            elif parts[0] == "PARAM":
                name, rows, cols = parts[1], int(parts[2]), int(parts[3])
                m = np.empty((rows, cols), dtype=np.float64)
                for i in range(rows):
                    m[i] = [float(v) for v in fh.readline().split()]
                params[name] = m
            else:
                raise ValueError(f"{path}: unexpected line {line!r}")
            line = fh.readline()
    return meta, params
