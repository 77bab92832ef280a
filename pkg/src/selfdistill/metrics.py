"""Evaluation metrics: accuracy, NLL, predictive uncertainty, confidence
diversity (1-D Kozachenko-Leonenko entropy) and expected calibration error.

All entropies are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

PROB_FLOOR = 1e-300
DISTANCE_FLOOR = 1e-15


@dataclass
class MetricsRecord:
    accuracy: float
    nll: float
    avg_pred_uncertainty: float
    confidence_diversity: float
    ece: float
    n_samples: int
    degenerate_fraction: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class CalibrationBins:
    n_bins: int
    counts: np.ndarray
    confidence_sums: np.ndarray
    correct_sums: np.ndarray

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_bins + 1)

    def gaps(self) -> np.ndarray:
        """Per-bin ``|accuracy - confidence|`` (0 for empty bins)."""
        with np.errstate(invalid="ignore", divide="ignore"):
            gap = np.abs(self.correct_sums - self.confidence_sums) / self.counts
        return np.where(self.counts > 0, gap, 0.0)


def _probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 1:
        raise ValueError(f"probs must be a nonempty (m, k) array, got shape {p.shape}")
    return p


def accuracy(probs, labels) -> float:
    """Fraction of rows whose argmax (lowest index on ties) equals the label."""
    p = _probs(probs)
    return float(np.mean(p.argmax(axis=1) == np.asarray(labels)))


def true_class_confidences(probs, labels) -> np.ndarray:
    p = _probs(probs)
    y = np.asarray(labels)
    return p[np.arange(p.shape[0]), y]


def nll(probs, labels) -> float:
    c = true_class_confidences(probs, labels)
    return float(np.mean(-np.log(np.maximum(c, PROB_FLOOR))))


def avg_predictive_uncertainty(probs) -> float:
    """Mean Shannon entropy of the rows."""
    p = _probs(probs)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    return float(terms.sum(axis=1).mean())


def digamma(x: float) -> float:
    """psi(x) for x > 0: recurrence up to x >= 6, then the asymptotic series."""
    if not x > 0:
        raise ValueError(f"digamma implemented for x > 0 only, got {x}")
    acc = 0.0
    while x < 6.0:
        acc -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (
        1.0 / 240 - inv2 * (1.0 / 132)))))
    return acc + math.log(x) - 0.5 * inv - series


def kth_neighbor_distances_1d(samples, k_nn: int) -> np.ndarray:
    """Distance from each sample to its ``k_nn``-th nearest other sample.

    Sorts once; the k-th neighbour of a point lies among the ``k_nn``
    closest points on either side, so a partition over ``2 * k_nn``
    candidates per point suffices. Returned in sorted-sample order.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.shape[0]
    cand = np.full((n, 2 * k_nn), np.inf)
    for j in range(1, k_nn + 1):
        cand[j:, j - 1] = x[j:] - x[:-j]
        cand[:-j, k_nn + j - 1] = x[j:] - x[:-j]
    return np.partition(cand, k_nn - 1, axis=1)[:, k_nn - 1]


def knn_entropy_1d(samples, k_nn: int = 3, return_degenerate: bool = False):
    """Kozachenko-Leonenko differential entropy estimate of 1-D samples.

    ``psi(n) - psi(k) + mean(log(2 * eps_i))`` with ``eps_i`` the distance
    to the k-th neighbour, clamped below at 1e-15. With
    ``return_degenerate`` also returns the fraction of clamped distances.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    n = x.shape[0]
    if k_nn < 1:
        raise ValueError("k_nn must be >= 1")
    if n <= k_nn:
        raise ValueError(f"need more than k_nn={k_nn} samples, got {n}")
    eps = kth_neighbor_distances_1d(x, k_nn)
    clamped = eps < DISTANCE_FLOOR
    eps = np.maximum(eps, DISTANCE_FLOOR)
    h = digamma(n) - digamma(k_nn) + float(np.mean(np.log(2.0 * eps)))
    if return_degenerate:
        return h, float(clamped.mean())
    return h


def confidence_diversity(probs, labels, k_nn: int = 3, return_degenerate: bool = False):
    """Differential entropy of the true-class probabilities."""
    return knn_entropy_1d(true_class_confidences(probs, labels), k_nn, return_degenerate)


def calibration_bins(probs, labels, n_bins: int = 15) -> CalibrationBins:
    """Bin max-confidences into equal-width bins over (0, 1].

    A confidence on an interior edge goes to the lower bin.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    p = _probs(probs)
    conf = p.max(axis=1)
    correct = (p.argmax(axis=1) == np.asarray(labels)).astype(np.float64)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, conf, side="left") - 1, 0, n_bins - 1)
    return CalibrationBins(
        n_bins,
        np.bincount(idx, minlength=n_bins),
        np.bincount(idx, weights=conf, minlength=n_bins),
        np.bincount(idx, weights=correct, minlength=n_bins),
    )


def ece(probs, labels, n_bins: int = 15) -> float:
    bins = calibration_bins(probs, labels, n_bins)
    return float(np.sum(np.abs(bins.correct_sums - bins.confidence_sums)) / bins.counts.sum())


def evaluate(probs, labels, k_nn: int = 3, n_bins: int = 15) -> MetricsRecord:
    p = _probs(probs)
    labels = np.asarray(labels)
    if p.shape[0] > k_nn:
        div, degenerate = confidence_diversity(p, labels, k_nn, return_degenerate=True)
    else:
        div, degenerate = float("nan"), 1.0
    return MetricsRecord(
        accuracy=accuracy(p, labels),
        nll=nll(p, labels),
        avg_pred_uncertainty=avg_predictive_uncertainty(p),
        confidence_diversity=div,
        ece=ece(p, labels, n_bins),
        n_samples=int(p.shape[0]),
        degenerate_fraction=degenerate,
    )
