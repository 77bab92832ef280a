"""Datasets: seeded Gaussian mixtures and numeric CSV files."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, DatasetSpec
from .nn import Batch


@dataclass
class DataSplits:
    train: Batch
    val: Batch | None
    test: Batch
    n_classes: int

    @property
    def n_features(self) -> int:
        return self.train.features.shape[1]


def batch_hash(batch: Batch | None) -> str:
    if batch is None:
        return "none"
    h = hashlib.sha256()
    for arr in (batch.features, batch.labels, batch.indices):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


def synth_dataset(spec: DatasetSpec) -> tuple[Batch, Batch]:
    """Seeded Gaussian-mixture classification data.

    Each class owns ``subclusters`` component means drawn from
    ``N(0, cluster_spread^2 I)``; samples add ``N(0, overlap^2 I)`` noise to
    a uniformly chosen component of their class. Labels are uniform. The
    first ``n_train`` draws form the training set and the rest the test set,
    so the two are disjoint by construction. ``label_noise`` resamples that
    share of training labels uniformly at random.
    """
    spec.validate()
    if spec.source != "synthetic":
        raise ConfigError("dataset.source: synth_dataset needs 'synthetic'")
    rng = np.random.default_rng(spec.seed)
    k, d = spec.k, spec.d
    means = rng.standard_normal((k, spec.subclusters, d)) * spec.cluster_spread
    if spec.superclasses > 0:
        offsets = rng.standard_normal((spec.superclasses, d)) * spec.superclass_spread
        means += offsets[np.arange(k) % spec.superclasses][:, None, :]
    n = spec.n_train + spec.n_test
    labels = rng.integers(0, k, size=n)
    comp = rng.integers(0, spec.subclusters, size=n)
    x = means[labels, comp] + spec.overlap * rng.standard_normal((n, d))
    noisy = rng.random(n) < spec.label_noise
    resampled = rng.integers(0, k, size=n)
    train_labels = np.where(noisy, resampled, labels)[: spec.n_train]
    train = Batch(x[: spec.n_train], train_labels, np.arange(spec.n_train))
    test = Batch(x[spec.n_train:], labels[spec.n_train:], np.arange(spec.n_test))
    return train, test


def load_csv(path, label_col: str = "label") -> tuple[Batch, list]:
    """Read a header-first numeric CSV.

    Returns the batch and the original label values in first-appearance
    order (index ``i`` of the list is class ``i``).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    if label_col not in header:
        raise ValueError(f"{path}: no label column {label_col!r} in header {header}")
    li = header.index(label_col)
    feats, raw_labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        vals = []
        for j, cell in enumerate(row):
            if j == li:
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric cell {cell!r} in column {header[j]!r}") from None
        feats.append(vals)
        raw_labels.append(row[li].strip())
    if not feats:
        raise ValueError(f"{path}: no data rows")
    classes = list(dict.fromkeys(raw_labels))
    lookup = {c: i for i, c in enumerate(classes)}
    labels = np.array([lookup[c] for c in raw_labels], dtype=np.int64)
    x = np.array(feats, dtype=np.float64).reshape(len(feats), len(header) - 1)
    return Batch(x, labels, np.arange(len(labels))), classes


def write_csv(batch: Batch, path, label_col: str = "label", feature_names=None) -> None:
    d = batch.features.shape[1]
    names = list(feature_names) if feature_names else [f"x{j}" for j in range(d)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + [label_col])
        for x, y in zip(batch.features, batch.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def load_dataset(spec: DatasetSpec) -> tuple[Batch, Batch, int]:
    """``(train, test, n_classes)`` for either source."""
    spec.validate()
    if spec.source == "synthetic":
        train, test = synth_dataset(spec)
        return train, test, spec.k
    full, classes = load_csv(spec.path, spec.label_col)
    if spec.test_path:
        test, test_classes = load_csv(spec.test_path, spec.label_col)
        lookup = {c: i for i, c in enumerate(classes)}
        for c in test_classes:
            if c not in lookup:
                lookup[c] = len(lookup)
                classes.append(c)
        remap = np.array([lookup[c] for c in test_classes])
        test = Batch(test.features, remap[test.labels], test.indices)
        return full, test, len(classes)
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(len(full))
    n_test = max(1, int(round(spec.test_fraction * len(full))))
    test = full.take(np.sort(perm[:n_test]))
    train = full.take(np.sort(perm[n_test:]))
    train = Batch(train.features, train.labels, np.arange(len(train)))
    test = Batch(test.features, test.labels, np.arange(len(test)))
    return train, test, len(classes)


def split_validation(train: Batch, fraction: float, seed: int) -> tuple[Batch, Batch | None]:
    """Hold out ``fraction`` of ``train``; indices are renumbered from 0."""
    if fraction <= 0:
        return train, None
    rng = np.random.default_rng([seed, 0x5EED])
    perm = rng.permutation(len(train))
    n_val = max(1, int(round(fraction * len(train))))
    val_rows = np.sort(perm[:n_val])
    fit_rows = np.sort(perm[n_val:])
    fit = Batch(train.features[fit_rows], train.labels[fit_rows], np.arange(len(fit_rows)))
    val = Batch(train.features[val_rows], train.labels[val_rows], np.arange(len(val_rows)))
    return fit, val


def standardize(train: Batch, *others: Batch | None) -> tuple:
    """Z-score every batch with the mean and std of ``train``.

    Constant columns keep unit scale so they map to zero rather than nan.
    """
    mu = train.features.mean(axis=0)
    sd = train.features.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    out = []
    for b in (train, *others):
        out.append(None if b is None else Batch((b.features - mu) / sd, b.labels, b.indices))
    return tuple(out)


def make_splits(spec: DatasetSpec, validation_fraction: float, seed: int,
                n_train: int | None = None) -> DataSplits:
    """Load data, optionally subsample, split validation, then standardize.

    Standardization statistics come from the fitting portion only.
    """
    train, test, k = load_dataset(spec)
    if n_train is not None:
        if not 1 <= n_train <= len(train):
            raise ValueError(f"n_train={n_train} outside [1, {len(train)}]")
        rows = np.sort(np.random.default_rng([seed, 0xD47A]).permutation(len(train))[:n_train])
        train = Batch(train.features[rows], train.labels[rows], np.arange(n_train))
    fit, val = split_validation(train, validation_fraction, seed)
    if spec.standardize:
        fit, val, test = standardize(fit, val, test)
    return DataSplits(fit, val, test, k)
