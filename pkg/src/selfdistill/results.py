"""Result rows and their fixed-schema CSV serialisation."""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

HEADER = (
    "scheme", "generation", "seed", "T", "alpha", "beta/epsilon/g",
    "accuracy", "nll", "ece", "avg_pred_uncertainty", "confidence_diversity",
    "degenerate_fraction", "wall_seconds", "config_hash",
)


@dataclass
class Record:
    """One results row.

    ``accuracy``, ``nll`` and ``ece`` are test-set metrics of the trained
    model. ``avg_pred_uncertainty`` and ``confidence_diversity`` are
    training-set entropies of the model that supplied the targets: the
    (tempered) teacher for distillation rows, the model itself otherwise.
    ``smoothing`` fills the ``beta/epsilon/g`` column with whichever of those
    the scheme uses.
    """

    scheme: str
    generation: int
    seed: int
    T: float
    alpha: float
    smoothing: float
    accuracy: float
    nll: float
    ece: float
    avg_pred_uncertainty: float
    confidence_diversity: float
    degenerate_fraction: float = 0.0
    wall_seconds: float = 0.0
    config_hash: str = ""

    def values(self) -> tuple:
        return tuple(getattr(self, f.name) for f in dataclasses.fields(self))


_FLOAT_FIELDS = {f.name for f in dataclasses.fields(Record) if f.type in ("float", float)}
_INT_FIELDS = {f.name for f in dataclasses.fields(Record) if f.type in ("int", int)}


def format_float(x: float) -> str:
    """17 significant digits: parses back to the identical double."""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _cells(rec: Record) -> list:
    out = []
    for f in dataclasses.fields(Record):
        v = getattr(rec, f.name)
        if f.name in _FLOAT_FIELDS:
            out.append(format_float(float(v)))
        else:
            out.append(str(v))
    return out


def write_results(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for rec in records:
            w.writerow(_cells(rec))


def read_results(path) -> list:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != HEADER:
        raise ValueError(f"{path}: unexpected results header")
    names = [f.name for f in dataclasses.fields(Record)]
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(HEADER):
            raise ValueError(f"{path}:{lineno}: expected {len(HEADER)} cells")
        kw = {}
        for name, cell in zip(names, row):
            if name in _FLOAT_FIELDS:
                kw[name] = float(cell)
            elif name in _INT_FIELDS:
                kw[name] = int(cell)
            else:
                kw[name] = cell
        out.append(Record(**kw))
    return out


def write_table(rows, columns, path) -> None:
    """Generic CSV writer for auxiliary tables (sweep summaries and the like)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, float) else v for v in
                        (row[c] for c in columns)])
