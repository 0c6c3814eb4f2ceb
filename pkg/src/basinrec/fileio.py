"""Deterministic CSV/JSON writers shared by the pipeline stages.

Floats are serialized with round-trip precision (shortest repr that parses
back to the same double), so identical results produce byte-identical
files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


FORMAT_VERSIONS = {
    "dataset": "basinrec-dataset-1",
    "model": "basinrec-model-1",
    "entropy": "basinrec-entropy-1",
    "slice": "basinrec-slice-1",
    "sphere": "basinrec-sphere-1",
    "boundary": "basinrec-boundary-1",
    "sweep": "basinrec-sweep-1",
    "fit": "basinrec-fit-1",
}


def fmt(value) -> str:
    """Render a cell: floats at round-trip precision, ints verbatim."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header: list[str], rows) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_json(path, obj) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with Path(path).open("r", encoding="utf-8") as fh:
        return json.load(fh)


def sidecar_path(path, kind: str = "meta") -> Path:
    """dataset.csv -> dataset.<kind>.json next to the primary output."""
    path = Path(path)
    return path.with_name(path.stem + f".{kind}.json")
