"""Per-sample soft targets: label smoothing, Beta smoothing, EMA and pruning."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .losses import softmax_t
from .nn import Batch, MlpModel, forward


@dataclass
class EmaState:
    shadow: MlpModel
    decay: float = 0.99

    def __post_init__(self):
        if not 0.0 <= self.decay < 1.0:
            raise ValueError(f"EMA decay must lie in [0, 1), got {self.decay}")

    @classmethod
    def from_model(cls, model: MlpModel, decay: float = 0.99) -> "EmaState":
        return cls(model.copy(), decay)


@dataclass(frozen=True)
class BetaSmoothingConfig:
    a: float
    alpha_mix: float = 0.0
    g: float = 0.85
    use_ema_ranking: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"Beta parameter a must be positive, got {self.a}")
        if not 0.0 <= self.alpha_mix <= 1.0:
            raise ValueError(f"alpha_mix must lie in [0, 1], got {self.alpha_mix}")
        if not self.alpha_mix < self.g < 1.0:
            raise ValueError(f"need alpha_mix < g < 1, got g={self.g}")

    @classmethod
    def matched(cls, g: float, alpha_mix: float = 0.0, **kw) -> "BetaSmoothingConfig":
        """Config whose mean effective ground-truth mass equals ``g``."""
        return cls(a=solve_beta_a(g, alpha_mix), alpha_mix=alpha_mix, g=g, **kw)


def _labels(labels) -> np.ndarray:
    if isinstance(labels, Batch):
        return labels.labels
    return np.asarray(labels, dtype=np.int64)


def ls_targets(labels, epsilon: float, k: int) -> np.ndarray:
    """``1 - epsilon`` on the true class, ``epsilon / (k - 1)`` elsewhere."""
    if k < 2:
        raise ValueError("label smoothing needs k >= 2")
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon}")
    y = _labels(labels)
    if y.size and (y.min() < 0 or y.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    out = np.full((y.shape[0], k), epsilon / (k - 1))
    out[np.arange(y.shape[0]), y] = 1.0 - epsilon
    return out


def ema_update(state: EmaState, model: MlpModel) -> EmaState:
    """``shadow <- decay * shadow + (1 - decay) * model``, in place."""
    shadow = state.shadow.parameters()
    live = model.parameters()
    if len(shadow) != len(live):
        raise ValueError("EMA shadow and model have different architectures")
    d = state.decay
    for s, p in zip(shadow, live):
        if s.shape != p.shape:
            raise ValueError(f"EMA shape mismatch {s.shape} vs {p.shape}")
        s *= d
        s += (1.0 - d) * p
    return state


def model_confidences(model: MlpModel, features) -> np.ndarray:
    return softmax_t(forward(model, features)).max(axis=1)


def ema_confidences(state: EmaState, batch) -> np.ndarray:
    """Largest softmax entry of the shadow model, per sample."""
    return model_confidences(state.shadow, batch)


def ema_self_targets(state: EmaState, batch) -> np.ndarray:
    return softmax_t(forward(state.shadow, batch))


def solve_beta_a(g: float, alpha_mix: float = 0.0) -> float:
    """Beta(a, 1) parameter giving ``alpha_mix + (1 - alpha_mix) E[b] = g``."""
    if not alpha_mix < g < 1.0:
        raise ValueError(f"need alpha_mix < g < 1, got g={g}, alpha_mix={alpha_mix}")
    r = (g - alpha_mix) / (1.0 - alpha_mix)
    return r / (1.0 - r)


def sample_beta_a1(a: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Beta(a, 1) draws by inverting the CDF ``x**a``."""
    return rng.random(size) ** (1.0 / a)


def beta_targets(batch: Batch, confidences, cfg: BetaSmoothingConfig, k: int,
                 rng: np.random.Generator | None = None) -> np.ndarray:
    """Beta-smoothed soft labels, ranked so confident samples get large ``b``.

    Sorted Beta(a, 1) draws are paired rank-for-rank with samples sorted by
    confidence (ties broken by ``batch.indices``). With
    ``cfg.use_ema_ranking`` off, the pairing is a random permutation.
    Returns the targets; ``alpha_mix`` is applied by the caller.
    """
    if k < 2:
        raise ValueError("Beta smoothing needs k >= 2")
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    m = len(batch)
    conf = np.asarray(confidences, dtype=np.float64)
    if conf.shape != (m,):
        raise ValueError(f"expected {m} confidences, got shape {conf.shape}")
    b = np.sort(sample_beta_a1(cfg.a, m, rng))
    if cfg.use_ema_ranking:
        order = np.lexsort((batch.indices, conf))
    else:
        order = rng.permutation(m)
    assigned = np.empty(m)
    assigned[order] = b
    out = np.repeat(((1.0 - assigned) / (k - 1))[:, None], k, axis=1)
    out[np.arange(m), batch.labels] = assigned
    return out


def pruned_teacher_targets(teacher_logits, T: float, keep_fraction: float) -> np.ndarray:
    """Tempered softmax over each row's top ``ceil(keep_fraction * k)`` logits.

    Pruned classes get exactly zero; among equal logits the lower class
    index is kept first.
    """
    f = np.asarray(teacher_logits, dtype=np.float64)
    if f.ndim != 2:
        raise ValueError("teacher logits must be (m, k)")
    m, k = f.shape
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must lie in (0, 1], got {keep_fraction}")
    n_keep = math.ceil(keep_fraction * k - 1e-12)
    if n_keep < 1:
        raise ValueError("keep_fraction keeps no classes")
    # stable sort on -f keeps lower indices first among ties
    order = np.argsort(-f, axis=1, kind="stable")[:, :n_keep]
    rows = np.arange(m)[:, None]
    out = np.zeros_like(f)
    out[rows, order] = softmax_t(f[rows, order], T)
    return out
