"""scikit-learn compatible wrapper around :func:`selfdistill.harness.train_run`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .config import ExperimentConfig, ModelSpec, TargetSpec, TrainSpec
from .data import DataSplits, split_validation
from .harness import TEACHER_SCHEMES, train_run
from .losses import softmax_t
from .metrics import MetricsRecord, evaluate
from .nn import Batch, MlpModel, forward, load_checkpoint, save_checkpoint


class DistillationClassifier(ClassifierMixin, BaseEstimator):
    """ReLU MLP classifier trained under one of the target schemes.

    Parameters
    ----------
    hidden : tuple of int, default=(64,)
        Hidden layer widths. ``()`` gives softmax regression.
    scheme : str, default="ce"
        One of ``selfdistill.config.SCHEMES``. ``"sd"``, ``"weighted_sd"``,
        ``"pruned"`` and ``"dirichlet"`` need ``teacher``.
    teacher : DistillationClassifier or MlpModel, optional
        Frozen teacher. A classifier must already be fitted on the same
        label set.
    alpha, temperature, beta, gamma, epsilon, keep_fraction, beta_a, g, student_scaling
        Scheme hyper-parameters; see ``TargetSpec``.
    epochs, batch_size, learning_rate, momentum, weight_decay
        Momentum-SGD settings; the rate drops tenfold at 50% and 75% of
        the epochs.
    validation_fraction : float, default=0.1
        Share of ``X`` held out for per-epoch monitoring.
    early_stopping : bool, default=False
        Keep the parameters with the lowest validation NLL.
    random_state : int, default=0
        Seeds the validation split, initialisation, shuffling and Beta draws.

    Attributes
    ----------
    classes_ : ndarray
    model_ : MlpModel
    history_ : list of EpochRecord
    n_features_in_ : int
    """

    def __init__(self, hidden=(64,), scheme="ce", teacher=None, alpha=0.0, temperature=1.0,
                 beta=1.0, gamma=1.0, epsilon=0.15, keep_fraction=0.5, beta_a=0.0, g=0.85,
                 student_scaling=False, epochs=60, batch_size=64, learning_rate=0.1,
                 momentum=0.9, weight_decay=1e-4, validation_fraction=0.1,
                 early_stopping=False, ema_decay=0.99, k_nn=3, n_bins=15, random_state=0):
        self.hidden = hidden
        self.scheme = scheme
        self.teacher = teacher
        self.alpha = alpha
        self.temperature = temperature
        self.beta = beta
        self.gamma = gamma
        self.epsilon = epsilon
        self.keep_fraction = keep_fraction
        self.beta_a = beta_a
        self.g = g
        self.student_scaling = student_scaling
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.validation_fraction = validation_fraction
        self.early_stopping = early_stopping
        self.ema_decay = ema_decay
        self.k_nn = k_nn
        self.n_bins = n_bins
        self.random_state = random_state

    def _config(self) -> ExperimentConfig:
        cfg = ExperimentConfig(
            seed=int(self.random_state), k_nn=self.k_nn, n_bins=self.n_bins,
            model=ModelSpec(hidden=[int(h) for h in self.hidden]),
            train=TrainSpec(
                epochs=self.epochs, batch_size=self.batch_size,
                learning_rate=float(self.learning_rate), momentum=float(self.momentum),
                weight_decay=float(self.weight_decay),
                validation_fraction=float(self.validation_fraction),
                early_stopping=bool(self.early_stopping), ema_decay=float(self.ema_decay),
            ),
            scheme=TargetSpec(
                kind=self.scheme, alpha=float(self.alpha), temperature=float(self.temperature),
                beta=float(self.beta), gamma=float(self.gamma), epsilon=float(self.epsilon),
                keep_fraction=float(self.keep_fraction), beta_a=float(self.beta_a),
                g=float(self.g), student_scaling=bool(self.student_scaling),
            ),
        )
        return cfg.validate()

    def _teacher_model(self):
        t = self.teacher
        if t is None:
            return None
        if isinstance(t, MlpModel):
            return t
        check_is_fitted(t, "model_")
        if not np.array_equal(t.classes_, self.classes_):
            raise ValueError("teacher was fitted on a different label set")
        return t.model_

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, y_enc = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        self.n_features_in_ = X.shape[1]
        cfg = self._config()
        teacher = self._teacher_model()
        if cfg.scheme.kind in TEACHER_SCHEMES and teacher is None:
            raise ValueError(f"scheme {self.scheme!r} needs a fitted teacher")
        full = Batch(X, y_enc, np.arange(len(y_enc)))
        fit, val = split_validation(full, cfg.train.validation_fraction, cfg.seed)
        splits = DataSplits(fit, val, val if val is not None else fit, len(self.classes_))
        res = train_run(cfg, splits, teacher, seed=cfg.seed)
        self.model_ = res.model
        self.history_ = res.history
        return self

    def decision_function(self, X):
        """Raw logits."""
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return forward(self.model_, X)

    def predict_proba(self, X, T: float = 1.0):
        return softmax_t(self.decision_function(X), T)

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    def evaluate(self, X, y) -> MetricsRecord:
        """Accuracy, NLL, uncertainty, confidence diversity and ECE on ``(X, y)``."""
        probs = self.predict_proba(X)
        lookup = {c: i for i, c in enumerate(self.classes_)}
        y_enc = np.array([lookup[v] for v in np.asarray(y)])
        return evaluate(probs, y_enc, self.k_nn, self.n_bins)

    def save(self, path):
        check_is_fitted(self, "model_")
        save_checkpoint(self.model_, path)

    def load_model(self, path, classes):
        """Attach parameters from a checkpoint instead of fitting."""
        self.model_ = load_checkpoint(path)
        self.classes_ = np.asarray(classes)
        self.n_features_in_ = self.model_.layer_dims[0]
        if len(self.classes_) != self.model_.n_classes:
            raise ValueError("class list does not match the checkpoint's output width")
        return self
