"""CSV and manifest serialization for matrices and weight sequences.

Matrices are headerless row-major CSV with 17-significant-digit decimals,
which round-trips float64 exactly.  A weight sequence is one CSV per
support entry (the generator vector, one value per line) plus a JSON
manifest {"n", "d", "support": [[l1, l2], ...], "files": [...]} with
1-based support indices and file names relative to the manifest.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .structured import ToeplitzGenerator
from .weights import SupportSet, WeightSequence

__all__ = [
    "save_matrix",
    "load_matrix",
    "save_weights",
    "load_weights",
    "MANIFEST_NAME",
]

MANIFEST_NAME = "manifest.json"
_FMT = "%.17g"


def save_matrix(path, matrix: np.ndarray):
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {matrix.shape}")
    np.savetxt(path, matrix, fmt=_FMT, delimiter=",")


def load_matrix(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)


def save_weights(directory, weights: WeightSequence) -> Path:
    """Write the generator CSVs and manifest into `directory`; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for idx, gen in enumerate(weights.gens):
        name = f"w_{idx:03d}.csv"
        np.savetxt(directory / name, gen.a, fmt=_FMT)
        files.append(name)
    manifest = {
        "n": weights.n,
        "d": weights.d,
        "support": [list(entry) for entry in weights.support.entries],
        "files": files,
    }
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def load_weights(manifest_path) -> WeightSequence:
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    n = int(manifest["n"])
    d = int(manifest["d"])
    support = SupportSet(tuple((int(a), int(b)) for a, b in manifest["support"]))
    gens = []
    for name in manifest["files"]:
        vec = np.loadtxt(manifest_path.parent / name, dtype=np.float64, ndmin=1)
        gens.append(ToeplitzGenerator(n, vec))
    return WeightSequence(n, d, support, tuple(gens))
