"""Training objectives as ``(loss, gradient at logits)`` pairs.

Every loss is the per-sample mean over the batch, and the returned gradient
is the gradient of that mean, so it can be fed straight to
:func:`selfdistill.nn.backward`. Targets with zero mass contribute nothing
(the ``0 * log 0 = 0`` convention).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

LOG_FLOOR = np.log(1e-300)


class LossKind(str, enum.Enum):
    CCE = "cce"
    DISTILL = "distill"
    COMBINED = "combined"
    LABEL_SMOOTH = "label_smooth"
    PRED_UNCERTAINTY = "pred_uncertainty"
    WEIGHTED_SD = "weighted_sd"


@dataclass(frozen=True)
class LossSpec:
    kind: LossKind = LossKind.CCE
    alpha: float = 1.0
    temperature: float = 1.0
    beta: float = 0.0
    student_scaling: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")


def _check_temperature(T):
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")


def log_softmax_t(logits, T: float = 1.0) -> np.ndarray:
    _check_temperature(T)
    z = np.asarray(logits, dtype=np.float64) / T
    with np.errstate(over="ignore"):  # -inf gaps give probability 0
        z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax_t(logits, T: float = 1.0) -> np.ndarray:
    """Tempered softmax along the last axis, max-subtracted for stability."""
    _check_temperature(T)
    z = np.asarray(logits, dtype=np.float64) / T
    with np.errstate(over="ignore"):  # -inf gaps give probability 0
        z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _as_logits(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError(f"logits must be (m, k), got shape {z.shape}")
    return z


def _one_hot(labels, k: int, m: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != (m,):
        raise ValueError(f"expected {m} labels, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        raise ValueError("labels must be integers")
    if y.size and (y.min() < 0 or y.max() >= k):
        raise ValueError(f"labels must lie in [0, {k}), got range [{y.min()}, {y.max()}]")
    out = np.zeros((m, k))
    out[np.arange(m), y] = 1.0
    return out


def _cross_entropy_terms(targets: np.ndarray, log_probs: np.ndarray) -> np.ndarray:
    """Per-sample ``-sum_c t_c log p_c`` with zero-target terms dropped."""
    lp = np.maximum(log_probs, LOG_FLOOR)
    return -np.where(targets > 0, targets * lp, 0.0).sum(axis=1)


def cce_loss(logits, labels):
    z = _as_logits(logits)
    m, k = z.shape
    onehot = _one_hot(labels, k, m)
    lp = log_softmax_t(z)
    loss = _cross_entropy_terms(onehot, lp).mean()
    return loss, (np.exp(lp) - onehot) / m


def soft_target_ce(logits, targets):
    """Cross-entropy against per-sample probability vectors."""
    z = _as_logits(logits)
    t = np.asarray(targets, dtype=np.float64)
    if t.shape != z.shape:
        raise ValueError(f"targets shape {t.shape} does not match logits {z.shape}")
    if np.any(t < 0) or not np.allclose(t.sum(axis=1), 1.0, rtol=0, atol=1e-9):
        raise ValueError("targets must be nonnegative rows summing to 1")
    m = z.shape[0]
    lp = log_softmax_t(z)
    loss = _cross_entropy_terms(t, lp).mean()
    return loss, (np.exp(lp) - t) / m


def distill_loss(student_logits, teacher_logits, T: float = 1.0, student_scaling: bool = False):
    """Cross-entropy from the tempered teacher to the student.

    Only the teacher is tempered unless ``student_scaling`` is set, in which
    case the student logits are divided by ``T`` as well.
    """
    s = _as_logits(student_logits)
    t = _as_logits(teacher_logits)
    if s.shape != t.shape:
        raise ValueError(f"student {s.shape} and teacher {t.shape} shapes differ")
    _check_temperature(T)
    Ts = T if student_scaling else 1.0
    m = s.shape[0]
    target = softmax_t(t, T)
    lp = log_softmax_t(s, Ts)
    loss = _cross_entropy_terms(target, lp).mean()
    return loss, (np.exp(lp) - target) / (Ts * m)


def combined_loss(student_logits, labels, teacher_logits, spec: LossSpec):
    """``alpha * CE + (1 - alpha) * distillation``."""
    if spec.kind is not LossKind.COMBINED:
        raise ValueError(f"combined_loss needs a COMBINED spec, got {spec.kind}")
    a = spec.alpha
    l1, g1 = cce_loss(student_logits, labels)
    if a == 1.0:
        return l1, g1
    l2, g2 = distill_loss(student_logits, teacher_logits, spec.temperature, spec.student_scaling)
    if a == 0.0:
        return l2, g2
    return a * l1 + (1 - a) * l2, a * g1 + (1 - a) * g2


def ls_loss(logits, labels, beta: float):
    """Cross-entropy plus ``beta`` times cross-entropy to the uniform vector."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    z = _as_logits(logits)
    m, k = z.shape
    onehot = _one_hot(labels, k, m)
    lp = log_softmax_t(z)
    per = _cross_entropy_terms(onehot, lp) - beta * lp.mean(axis=1)
    p = np.exp(lp)
    grad = (p - onehot) + beta * (p - 1.0 / k)
    return per.mean(), grad / m


def pu_loss(logits, labels, beta: float):
    """Cross-entropy plus ``beta`` times the negative Shannon entropy.

    ``beta`` weights each sample's entropy term directly (one regulariser
    per sample), which is the form whose optimum has a Lambert-W closed form.
    """
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    z = _as_logits(logits)
    m, k = z.shape
    onehot = _one_hot(labels, k, m)
    lp = log_softmax_t(z)
    p = np.exp(lp)
    neg_entropy = (p * lp).sum(axis=1)
    per = _cross_entropy_terms(onehot, lp) + beta * neg_entropy
    grad = (p - onehot) + beta * p * (lp - neg_entropy[:, None])
    return per.mean(), grad / m


def weighted_sd_loss(student_logits, labels, teacher_logits, beta: float, T: float = 1.0):
    """Cross-entropy plus distillation weighted per sample by ``omega``.

    ``omega_i = sum_j exp(f_j(x_i) / T)`` is the total mass of the
    unnormalised Dirichlet prior built from the teacher logits.
    """
    s = _as_logits(student_logits)
    t = _as_logits(teacher_logits)
    if s.shape != t.shape:
        raise ValueError(f"student {s.shape} and teacher {t.shape} shapes differ")
    _check_temperature(T)
    m, k = s.shape
    onehot = _one_hot(labels, k, m)
    with np.errstate(over="ignore"):
        w = np.exp(logsumexp(t / T, axis=1))
    if not np.all(np.isfinite(w)):
        raise OverflowError("sample weight exp(logsumexp(f/T)) overflowed")
    target = softmax_t(t, T)
    lp = log_softmax_t(s)
    p = np.exp(lp)
    per = _cross_entropy_terms(onehot, lp) + beta * w * _cross_entropy_terms(target, lp)
    grad = (p - onehot) + (beta * w)[:, None] * (p - target)
    return per.mean(), grad / m


def dirichlet_prior_loss(logits, labels, alpha):
    """Negative MAP objective ``-log z_y - sum_c (alpha_c - 1) log z_c``.

    Classes whose ``alpha_c - 1`` is negative are pruned (given weight 0),
    since leaving them in makes the objective unbounded below.
    """
    z = _as_logits(logits)
    m, k = z.shape
    a = np.asarray(alpha, dtype=np.float64)
    if a.shape != (m, k):
        raise ValueError(f"alpha shape {a.shape} does not match logits {z.shape}")
    onehot = _one_hot(labels, k, m)
    w = np.maximum(a - 1.0, 0.0)
    lp = log_softmax_t(z)
    p = np.exp(lp)
    per = _cross_entropy_terms(onehot, lp) + _cross_entropy_terms(w, lp)
    grad = p * (1.0 + w.sum(axis=1, keepdims=True)) - onehot - w
    return per.mean(), grad / m


def evaluate_loss(spec: LossSpec, logits, labels, teacher_logits=None):
    """Dispatch on ``spec.kind``."""
    kind = spec.kind
    if kind is LossKind.CCE:
        return cce_loss(logits, labels)
    if kind is LossKind.DISTILL:
        return distill_loss(logits, teacher_logits, spec.temperature, spec.student_scaling)
    if kind is LossKind.COMBINED:
        return combined_loss(logits, labels, teacher_logits, spec)
    if kind is LossKind.LABEL_SMOOTH:
        return ls_loss(logits, labels, spec.beta)
    if kind is LossKind.PRED_UNCERTAINTY:
        return pu_loss(logits, labels, spec.beta)
    if kind is LossKind.WEIGHTED_SD:
        return weighted_sd_loss(logits, labels, teacher_logits, spec.beta, spec.temperature)
    raise ValueError(f"unknown loss kind {kind!r}")
