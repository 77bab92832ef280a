"""Dirichlet-categorical MAP estimates and the priors built from teachers."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp


class NonInteriorMAPError(ValueError):
    """Some ``c_i + alpha_i - 1`` is negative, so the MAP leaves the simplex."""


class NonPositiveConcentrationError(ValueError):
    """A Dirichlet concentration came out ``<= 0``."""


def dirichlet_map(counts, alpha) -> np.ndarray:
    """Mode of the Dirichlet posterior ``Dir(counts + alpha)``.

    >>> dirichlet_map([1, 0, 0], [2, 2, 2]).tolist()
    [0.5, 0.25, 0.25]
    """
    c = np.asarray(counts, dtype=np.float64)
    a = np.asarray(alpha, dtype=np.float64)
    if c.shape != a.shape or c.ndim != 1:
        raise ValueError(f"counts {c.shape} and alpha {a.shape} must be equal-length vectors")
    if np.any(c < 0):
        raise ValueError("counts must be nonnegative")
    if np.any(a <= 0):
        raise NonPositiveConcentrationError("alpha entries must be positive")
    num = c + a - 1.0
    if np.any(num < 0):
        bad = np.flatnonzero(num < 0).tolist()
        raise NonInteriorMAPError(f"c_i + alpha_i < 1 at indices {bad}; prune those classes")
    total = num.sum()
    if not total > 0:
        raise NonInteriorMAPError("posterior mode is undefined (all c_i + alpha_i == 1)")
    return num / total


def build_alpha(teacher_logits, beta: float, T: float = 1.0, gamma: float = 1.0) -> np.ndarray:
    """Instance-specific concentration ``beta * exp(f / T) + gamma``.

    Works row-wise on a (m, k) array as well as on a single logit vector.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")
    f = np.asarray(teacher_logits, dtype=np.float64)
    with np.errstate(over="raise"):
        try:
            alpha = beta * np.exp(f / T) + gamma
        except FloatingPointError as exc:
            raise OverflowError("exp(f / T) overflowed") from exc
    if np.any(alpha <= 0):
        raise NonPositiveConcentrationError(
            f"gamma={gamma} gives nonpositive concentrations; use pruned targets instead"
        )
    return alpha


def normalize_alpha(alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=np.float64)
    if np.any(a <= 0):
        raise NonPositiveConcentrationError("alpha entries must be positive")
    return a / a.sum(axis=-1, keepdims=True)


def log_omega(teacher_logits, T: float = 1.0):
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")
    return logsumexp(np.asarray(teacher_logits, dtype=np.float64) / T, axis=-1)


def omega(teacher_logits, T: float = 1.0):
    """Total prior mass ``sum_j exp(f_j / T)``, via log-sum-exp."""
    lw = log_omega(teacher_logits, T)
    if np.any(lw > np.log(np.finfo(np.float64).max)):
        raise OverflowError(f"omega overflows float64 (log omega = {np.max(lw):.1f})")
    return np.exp(lw)


def lambert_w(x: float, tol: float = 1e-15, max_iter: int = 100) -> float:
    """Principal branch of the Lambert W function by Halley iteration."""
    x = float(x)
    branch = -1.0 / math.e
    if math.isnan(x) or x < branch:
        raise ValueError(f"lambert_w is real only for x >= -1/e, got {x}")
    if x == 0.0:
        return 0.0
    if x == math.inf:
        return math.inf
    if x < 0.25:
        if x - branch < 1e-3:
            # series about the branch point
            p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
            w = -1.0 + p - p * p / 3.0
        else:
            w = x * (1.0 - x)
    elif x < 3.0:
        w = math.log1p(x) * 0.75
    else:
        lx = math.log(x)
        w = lx - math.log(lx)
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= tol * (1.0 + abs(w)):
            break
    return w


def pu_optimum(beta: float, k: int) -> np.ndarray:
    """Minimiser of single-sample cross-entropy plus ``beta`` * negative entropy.

    The true class sits at index 0; the other ``k - 1`` entries share the
    remaining mass equally.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if k < 2:
        raise ValueError("need k >= 2")
    # exp(-1/beta) underflows for tiny beta; then W(.) ~ its argument ~ 0
    arg = math.exp(-1.0 / beta) * (k - 1) / beta
    z_true = 1.0 / (beta * lambert_w(arg) + 1.0)
    out = np.full(k, (1.0 - z_true) / (k - 1))
    out[0] = z_true
    return out


def ls_optimum(beta: float, k: int) -> np.ndarray:
    """Minimiser of single-sample cross-entropy plus ``beta`` * CE to uniform."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    if k < 2:
        raise ValueError("need k >= 2")
    out = np.full(k, beta / (k * (1.0 + beta)))
    out[0] = (k + beta) / (k * (1.0 + beta))
    return out
