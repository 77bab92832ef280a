"""Experiment protocols: single runs, born-again sequences, temperature and
hyper-parameter sweeps, the CE/LS/Beta/SD comparison and cross-distillation.

Seeding: repeat ``r`` uses ``seed = config.seed + r`` for its validation
split; generation ``g`` of a run initialises and shuffles from the seed
sequence ``(seed, g)``. Every scheme inside one repeat therefore sees the
same data split, and re-running a config reproduces every number.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import losses as L
from .config import ConfigError, ExperimentConfig, TargetSpec, config_hash
from .data import DataSplits, make_splits
from .metrics import MetricsRecord, evaluate
from .nn import MlpModel, OptimizerState, backward, forward, init_model, sgd_step, step_schedule
from .results import Record
from .targets import (
    BetaSmoothingConfig, EmaState, beta_targets, ema_update, ls_targets,
    model_confidences, pruned_teacher_targets, solve_beta_a,
)

log = logging.getLogger(__name__)

TEACHER_SCHEMES = {"sd", "weighted_sd", "pruned", "dirichlet"}
SWEEP_AXES = ("trainset_size", "weight_decay", "epsilon", "keep_fraction", "gamma", "student_scaling")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    metrics: MetricsRecord


@dataclass
class TrainResult:
    model: MlpModel
    ema: EmaState
    history: list
    best_epoch: int


@dataclass
class ExperimentResult:
    records: list
    models: dict = field(default_factory=dict)
    splits: dict = field(default_factory=dict)
    summary: list = field(default_factory=list)


def predict_proba(model: MlpModel, features, T: float = 1.0) -> np.ndarray:
    return L.softmax_t(forward(model, features), T)


def _one_hot(labels, k):
    out = np.zeros((labels.shape[0], k))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def smoothing_value(spec: TargetSpec) -> float:
    """The number reported in the ``beta/epsilon/g`` column."""
    if spec.kind == "ls":
        return spec.epsilon
    if spec.kind in ("beta", "random_beta"):
        return spec.g if spec.beta_a == 0 else spec.beta_a
    if spec.kind == "pruned":
        return spec.keep_fraction
    if spec.kind == "dirichlet":
        return spec.gamma
    if spec.kind in ("ls_map", "pu", "weighted_sd"):
        return spec.beta
    return 0.0


def _beta_config(spec: TargetSpec) -> BetaSmoothingConfig:
    a = spec.beta_a if spec.beta_a > 0 else solve_beta_a(spec.g, spec.alpha)
    g = spec.g if spec.beta_a == 0 else spec.alpha + (1 - spec.alpha) * a / (a + 1)
    return BetaSmoothingConfig(a=a, alpha_mix=spec.alpha, g=g,
                               use_ema_ranking=spec.kind == "beta", rng_seed=0)


def _validate_scheme(spec: TargetSpec, teacher):
    spec.validate()
    if spec.kind in TEACHER_SCHEMES and teacher is None:
        raise ConfigError(f"scheme.kind: {spec.kind!r} needs a teacher model")
    if spec.kind == "ema_self" and spec.alpha == 0:
        raise ConfigError("scheme.alpha: ema_self needs alpha > 0 (pure self-targets give no signal)")


def train_run(config: ExperimentConfig, splits: DataSplits, teacher: MlpModel | None = None,
              *, seed=0, hidden=None, scheme: TargetSpec | None = None,
              train_spec=None) -> TrainResult:
    """Train one fresh model under ``scheme`` (defaults to ``config.scheme``).

    ``seed`` seeds initialisation, shuffling and Beta draws. ``teacher`` is
    frozen: its logits on the training set are computed once up front.
    """
    spec = config.scheme if scheme is None else scheme
    ts = config.train if train_spec is None else train_spec
    _validate_scheme(spec, teacher)
    hidden = config.model.hidden if hidden is None else hidden
    train, k = splits.train, splits.n_classes
    dims = [splits.n_features, *hidden, k]
    seed_key = tuple(np.atleast_1d(seed).tolist())
    model = init_model(dims, seed_key)
    opt = OptimizerState(ts.learning_rate, ts.momentum, ts.weight_decay,
                         schedule=step_schedule(ts.epochs, tuple(ts.lr_milestones), ts.lr_factor))
    ema = EmaState.from_model(model, ts.ema_decay)
    shuffle_rng = np.random.default_rng(seed_key + (1,))
    beta_rng = np.random.default_rng(seed_key + (2,))

    teacher_logits = None
    if teacher is not None:
        if teacher.layer_dims[0] != dims[0] or teacher.n_classes != k:
            raise ValueError("teacher input/output dims do not match the data")
        teacher_logits = forward(teacher, train.features)
    loss_spec = L.LossSpec(L.LossKind.COMBINED, spec.alpha, spec.temperature,
                           spec.beta, spec.student_scaling)
    beta_cfg = _beta_config(spec) if spec.kind in ("beta", "random_beta") else None
    onehot_all = _one_hot(train.labels, k)
    eval_batch = splits.val if splits.val is not None else train

    history = []
    best_nll, best_epoch, best_model = math.inf, -1, None
    n = len(train)
    for epoch in range(ts.epochs):
        lr = opt.lr_at(epoch)
        perm = shuffle_rng.permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, ts.batch_size):
            rows = perm[start:start + ts.batch_size]
            batch = train.take(rows)
            logits, cache = forward(model, batch.features, return_cache=True)
            tl = teacher_logits[rows] if teacher_logits is not None else None
            kind = spec.kind
            if kind == "ce":
                loss, grad = L.cce_loss(logits, batch.labels)
            elif kind == "sd":
                loss, grad = L.combined_loss(logits, batch.labels, tl, loss_spec)
            elif kind == "ls":
                loss, grad = L.soft_target_ce(logits, ls_targets(batch.labels, spec.epsilon, k))
            elif kind == "ls_map":
                loss, grad = L.ls_loss(logits, batch.labels, spec.beta)
            elif kind == "pu":
                loss, grad = L.pu_loss(logits, batch.labels, spec.beta)
            elif kind == "weighted_sd":
                loss, grad = L.weighted_sd_loss(logits, batch.labels, tl, spec.beta, spec.temperature)
            elif kind == "dirichlet":
                alpha = spec.beta * np.exp(tl / spec.temperature) + spec.gamma
                loss, grad = L.dirichlet_prior_loss(logits, batch.labels, alpha)
            else:
                # the shadow is uninformative during the first epoch
                source = model if epoch == 0 else ema.shadow
                if kind in ("beta", "random_beta"):
                    conf = model_confidences(source, batch.features)
                    soft = beta_targets(batch, conf, beta_cfg, k, beta_rng)
                elif kind == "ema_self":
                    soft = predict_proba(source, batch.features)
                elif kind == "pruned":
                    soft = pruned_teacher_targets(tl, spec.temperature, spec.keep_fraction)
                else:
                    raise ConfigError(f"scheme.kind: unknown scheme {kind!r}")
                targets = spec.alpha * onehot_all[rows] + (1 - spec.alpha) * soft
                loss, grad = L.soft_target_ce(logits, targets)
            grads = backward(model, batch.features, grad, cache=cache)
            sgd_step(model, grads, opt, lr=lr)
            ema_update(ema, model)
            total += loss * len(rows)
            seen += len(rows)
        metrics = evaluate(predict_proba(model, eval_batch.features), eval_batch.labels,
                           config.k_nn, config.n_bins)
        history.append(EpochRecord(epoch, total / seen, metrics))
        if ts.early_stopping and metrics.nll < best_nll:
            best_nll, best_epoch, best_model = metrics.nll, epoch, model.copy()
    if ts.early_stopping:
        model = best_model
    else:
        best_epoch = ts.epochs - 1
    return TrainResult(model, ema, history, best_epoch)


def teacher_train_metrics(teacher: MlpModel, splits: DataSplits, T: float, config) -> MetricsRecord:
    """Training-set metrics of the tempered teacher predictions."""
    probs = predict_proba(teacher, splits.train.features, T)
    return evaluate(probs, splits.train.labels, config.k_nn, config.n_bins)


def test_metrics(model: MlpModel, splits: DataSplits, config) -> MetricsRecord:
    return evaluate(predict_proba(model, splits.test.features), splits.test.labels,
                    config.k_nn, config.n_bins)


def _record(scheme_name, generation, seed, spec: TargetSpec, test: MetricsRecord,
            source: MetricsRecord, cfg_hash, elapsed, T=None) -> Record:
    return Record(
        scheme=scheme_name, generation=generation, seed=int(seed),
        T=float(spec.temperature if T is None else T), alpha=float(spec.alpha),
        smoothing=float(smoothing_value(spec)),
        accuracy=test.accuracy, nll=test.nll, ece=test.ece,
        avg_pred_uncertainty=source.avg_pred_uncertainty,
        confidence_diversity=source.confidence_diversity,
        degenerate_fraction=source.degenerate_fraction,
        wall_seconds=float(elapsed), config_hash=cfg_hash,
    )


class _Clock:
    def __init__(self, enabled):
        self.enabled = enabled
        self.t0 = time.perf_counter()

    def lap(self) -> float:
        if not self.enabled:
            return 0.0
        now = time.perf_counter()
        out, self.t0 = now - self.t0, now
        return out


def _splits(config: ExperimentConfig, seed, n_train=None) -> DataSplits:
    return make_splits(config.dataset, config.train.validation_fraction, seed, n_train)


def single_run(config: ExperimentConfig, *, repeat: int = 0, teacher: MlpModel | None = None,
               timing: bool = False) -> ExperimentResult:
    """``train`` subcommand: one run of ``config.scheme`` (teacher trained with CE if needed)."""
    seed = config.seed + repeat
    splits = _splits(config, seed)
    h = config_hash(config)
    clock = _Clock(timing)
    spec = config.scheme
    records, models = [], {}
    if spec.kind in TEACHER_SCHEMES and teacher is None:
        ce = dataclasses.replace(spec, kind="ce")
        teacher = train_run(config, splits, seed=(seed, 0), scheme=ce).model
        tm = test_metrics(teacher, splits, config)
        records.append(_record("ce", 0, seed, ce, tm, teacher_train_metrics(teacher, splits, 1.0, config),
                               h, clock.lap(), T=1.0))
        models["teacher"] = teacher
    gen = 1 if teacher is not None else 0
    res = train_run(config, splits, teacher, seed=(seed, gen))
    models["model"] = res.model
    tm = test_metrics(res.model, splits, config)
    if teacher is not None:
        src = teacher_train_metrics(teacher, splits, spec.temperature, config)
    else:
        src = teacher_train_metrics(res.model, splits, 1.0, config)
    records.append(_record(spec.kind, gen, seed, spec, tm, src, h, clock.lap()))
    return ExperimentResult(records, models, {"main": splits}, [{"history": res.history}])


def ban_sequence(config: ExperimentConfig, *, repeat: int = 0, timing: bool = False) -> ExperimentResult:
    """Born-again sequence: generation 0 trains on labels, generation ``i``
    distils from the frozen generation ``i - 1`` under ``config.scheme``'s
    ``alpha`` and ``temperature``.

    Record ``i`` holds generation ``i``'s test metrics and the training-set
    entropies of its teacher (generation ``i - 1``, tempered). Record 0 has
    no teacher and carries generation 0's own training-set entropies.
    """
    if config.generations < 2:
        raise ConfigError("generations: ban needs at least 2")
    seed = config.seed + repeat
    splits = _splits(config, seed)
    h = config_hash(config)
    clock = _Clock(timing)
    sd = dataclasses.replace(config.scheme, kind="sd")
    ce = dataclasses.replace(config.scheme, kind="ce")
    records, models = [], {}
    teacher = None
    for gen in range(config.generations):
        if gen == 0:
            model = train_run(config, splits, seed=(seed, 0), scheme=ce).model
            src = teacher_train_metrics(model, splits, 1.0, config)
            spec = dataclasses.replace(ce, temperature=1.0)
        else:
            model = train_run(config, splits, teacher, seed=(seed, gen), scheme=sd).model
            src = teacher_train_metrics(teacher, splits, sd.temperature, config)
            spec = sd
        records.append(_record("ban", gen, seed, spec, test_metrics(model, splits, config),
                               src, h, clock.lap()))
        models[gen] = model
        log.info("ban seed=%s gen=%d acc=%.4f", seed, gen, records[-1].accuracy)
        teacher = model
    return ExperimentResult(records, models, {"main": splits})


def temperature_sweep(config: ExperimentConfig, T_values, *, repeat: int = 0,
                      teacher: MlpModel | None = None, timing: bool = False) -> ExperimentResult:
    """One shared teacher, one student per temperature (``alpha`` from the config).

    The teacher defaults to the same CE model that generation 0 of
    :func:`ban_sequence` would train, and each student uses generation 1's
    seed, so ``T_values=[1]`` reproduces the first born-again generation.
    """
    T_values = [float(t) for t in T_values]
    if not T_values:
        raise ValueError("need at least one temperature")
    seed = config.seed + repeat
    splits = _splits(config, seed)
    h = config_hash(config)
    clock = _Clock(timing)
    ce = dataclasses.replace(config.scheme, kind="ce", temperature=1.0)
    records, models = [], {}
    if teacher is None:
        teacher = train_run(config, splits, seed=(seed, 0), scheme=ce).model
        records.append(_record("ce", 0, seed, ce, test_metrics(teacher, splits, config),
                               teacher_train_metrics(teacher, splits, 1.0, config), h, clock.lap()))
    models["teacher"] = teacher
    for T in T_values:
        spec = dataclasses.replace(config.scheme, kind="sd", temperature=T)
        student = train_run(config, splits, teacher, seed=(seed, 1), scheme=spec).model
        models[T] = student
        records.append(_record("temperature", 1, seed, spec, test_metrics(student, splits, config),
                               teacher_train_metrics(teacher, splits, T, config), h, clock.lap()))
    return ExperimentResult(records, models, {"main": splits})


def mean_effective_label(teacher_logits, labels, alpha_mix: float, T: float) -> float:
    p = L.softmax_t(teacher_logits, T)
    return float(alpha_mix + (1 - alpha_mix) * p[np.arange(len(labels)), labels].mean())


def matched_smoothing_calibration(teacher, features, labels, alpha_mix: float, g: float,
                                  T_lo: float = 1e-3, T_hi: float = 1e6, tol: float = 1e-9) -> float:
    """Temperature making the mean effective ground-truth label equal ``g``.

    ``teacher`` is a model or a precomputed logit matrix. Bisection runs on
    ``log T``; the residual is checked against 1e-3 before returning.
    """
    if not alpha_mix < g < 1:
        raise ValueError(f"need alpha_mix < g < 1, got g={g}, alpha_mix={alpha_mix}")
    logits = forward(teacher, features) if isinstance(teacher, MlpModel) else np.asarray(teacher, float)
    labels = np.asarray(labels)

    def resid(log_t):
        return mean_effective_label(logits, labels, alpha_mix, math.exp(log_t)) - g

    lo, hi = math.log(T_lo), math.log(T_hi)
    r_lo, r_hi = resid(lo), resid(hi)
    if r_lo * r_hi > 0:
        raise ValueError(
            f"effective label {g} unreachable for T in [{T_lo}, {T_hi}] "
            f"(range {r_lo + g:.4f} .. {r_hi + g:.4f})"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r_mid = resid(mid)
        if abs(r_mid) < tol:
            lo = hi = mid
            break
        if (r_mid > 0) == (r_lo > 0):
            lo, r_lo = mid, r_mid
        else:
            hi = mid
    T = math.exp(0.5 * (lo + hi))
    if abs(resid(math.log(T))) >= 1e-3:
        raise ValueError(f"calibration did not converge (T={T})")
    return T


def _scheme(config, **kw) -> TargetSpec:
    return dataclasses.replace(config.scheme, **kw)


def _matched_sd(config, teacher, splits, alpha, g) -> TargetSpec:
    T = matched_smoothing_calibration(teacher, splits.train.features, splits.train.labels, alpha, g)
    return _scheme(config, kind="sd", alpha=alpha, temperature=T)


def comparison_specs(config: ExperimentConfig, teacher, splits, epsilon: float,
                     beta_alpha: float = 0.4, sd_alpha: float = 0.6) -> dict:
    """LS(epsilon), Beta and SD specs matched to the mean ground-truth mass ``1 - epsilon``."""
    g = 1.0 - epsilon
    return {
        "ls": _scheme(config, kind="ls", epsilon=epsilon, alpha=0.0),
        "beta": _scheme(config, kind="beta", alpha=beta_alpha, g=g, beta_a=0.0),
        "sd": _matched_sd(config, teacher, splits, sd_alpha, g),
    }


def comparison_suite(config: ExperimentConfig, *, schemes=("ce", "ls", "beta", "sd"),
                     beta_alpha: float = 0.4, sd_alpha: float = 0.6,
                     timing: bool = False) -> ExperimentResult:
    """CE vs LS vs Beta vs SD over ``config.repeats`` seeds.

    The CE model of each repeat doubles as the SD teacher. ``summary`` holds
    per-scheme mean and sample standard deviation of accuracy and ECE.
    """
    h = config_hash(config)
    clock = _Clock(timing)
    records, models, split_map = [], {}, {}
    eps = config.scheme.epsilon
    for r in range(config.repeats):
        seed = config.seed + r
        splits = _splits(config, seed)
        split_map[seed] = splits
        ce = _scheme(config, kind="ce", alpha=0.0, temperature=1.0)
        teacher = train_run(config, splits, seed=(seed, 0), scheme=ce).model
        models[("ce", seed)] = teacher
        if "ce" in schemes:
            records.append(_record("ce", 0, seed, ce, test_metrics(teacher, splits, config),
                                   teacher_train_metrics(teacher, splits, 1.0, config), h, clock.lap()))
        specs = comparison_specs(config, teacher, splits, eps, beta_alpha, sd_alpha)
        for name in schemes:
            if name == "ce":
                continue
            spec = specs[name] if name in specs else _scheme(config, kind=name)
            t = teacher if spec.kind in TEACHER_SCHEMES else None
            model = train_run(config, splits, t, seed=(seed, 0), scheme=spec).model
            models[(name, seed)] = model
            src_model, src_T = (teacher, spec.temperature) if t is not None else (model, 1.0)
            records.append(_record(name, 1 if t is not None else 0, seed, spec,
                                   test_metrics(model, splits, config),
                                   teacher_train_metrics(src_model, splits, src_T, config), h, clock.lap()))
    return ExperimentResult(records, models, split_map, summarize(records))


def summarize(records) -> list:
    """Mean and sample std of accuracy and ECE per scheme (first-seen order)."""
    out = []
    for name in dict.fromkeys(r.scheme for r in records):
        acc = np.array([r.accuracy for r in records if r.scheme == name])
        ec = np.array([r.ece for r in records if r.scheme == name])
        ddof = 1 if len(acc) > 1 else 0
        out.append({
            "scheme": name, "n": int(len(acc)),
            "accuracy_mean": float(acc.mean()), "accuracy_std": float(acc.std(ddof=ddof)),
            "ece_mean": float(ec.mean()), "ece_std": float(ec.std(ddof=ddof)),
        })
    return out


def relative_improvement(student_acc: float, teacher_acc: float) -> float:
    return (student_acc - teacher_acc) / teacher_acc


def _student_spec(config) -> TargetSpec:
    return config.scheme if config.scheme.kind != "ce" else _scheme(config, kind="sd")


def sweep(config: ExperimentConfig, axis: str, values, *, timing: bool = False) -> ExperimentResult:
    """Vary one hyper-parameter; ``summary`` rows carry teacher/student accuracy.

    Teacher policy: ``trainset_size`` retrains the teacher per size;
    every other axis reuses one CE teacher per repeat trained with the base
    config (including its weight decay).
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis {axis!r} not in {SWEEP_AXES}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    h = config_hash(config)
    clock = _Clock(timing)
    records, summary, models, split_map = [], [], {}, {}
    ce = _scheme(config, kind="ce", alpha=0.0, temperature=1.0)

    def add(name, seed, spec, model, teacher, teacher_acc, value, train_spec_tag=""):
        src = teacher_train_metrics(teacher, splits, spec.temperature, config) if teacher is not None \
            else teacher_train_metrics(model, splits, 1.0, config)
        tm = test_metrics(model, splits, config)
        records.append(_record(f"{name}[{axis}={value}{train_spec_tag}]", 1, seed, spec, tm, src, h, clock.lap()))
        summary.append({"axis": axis, "value": value, "scheme": name + train_spec_tag, "seed": seed,
                        "teacher_accuracy": teacher_acc, "student_accuracy": tm.accuracy,
                        "relative_improvement": relative_improvement(tm.accuracy, teacher_acc)})

    for r in range(config.repeats):
        seed = config.seed + r
        if axis == "trainset_size":
            for n in values:
                splits = _splits(config, seed, n_train=int(n))
                split_map[(seed, n)] = splits
                teacher = train_run(config, splits, seed=(seed, 0), scheme=ce).model
                tacc = test_metrics(teacher, splits, config).accuracy
                records.append(_record(f"teacher[{axis}={n}]", 0, seed, ce, test_metrics(teacher, splits, config),
                                       teacher_train_metrics(teacher, splits, 1.0, config), h, clock.lap()))
                spec = _student_spec(config)
                student = train_run(config, splits, teacher, seed=(seed, 1), scheme=spec).model
                models[(seed, n)] = (teacher, student)
                add(spec.kind, seed, spec, student, teacher, tacc, n)
            continue
        splits = _splits(config, seed)
        split_map[seed] = splits
        teacher = train_run(config, splits, seed=(seed, 0), scheme=ce).model
        tacc = test_metrics(teacher, splits, config).accuracy
        records.append(_record(f"teacher[{axis}]", 0, seed, ce, test_metrics(teacher, splits, config),
                               teacher_train_metrics(teacher, splits, 1.0, config), h, clock.lap()))
        models[(seed, "teacher")] = teacher
        for v in values:
            if axis == "weight_decay":
                spec = _student_spec(config)
                ts = dataclasses.replace(config.train, weight_decay=float(v))
                student = train_run(config, splits, teacher, seed=(seed, 1), scheme=spec, train_spec=ts).model
                add(spec.kind, seed, spec, student, teacher, tacc, v)
            elif axis == "epsilon":
                for name, spec in comparison_specs(config, teacher, splits, float(v)).items():
                    t = teacher if spec.kind in TEACHER_SCHEMES else None
                    student = train_run(config, splits, t, seed=(seed, 0), scheme=spec).model
                    add(name, seed, spec, student, t, tacc, v)
            elif axis == "keep_fraction":
                spec = _scheme(config, kind="pruned", keep_fraction=float(v))
                student = train_run(config, splits, teacher, seed=(seed, 1), scheme=spec).model
                add("pruned", seed, spec, student, teacher, tacc, v)
            elif axis == "gamma":
                spec = _scheme(config, kind="dirichlet", gamma=float(v))
                student = train_run(config, splits, teacher, seed=(seed, 1), scheme=spec).model
                add("dirichlet", seed, spec, student, teacher, tacc, v)
            elif axis == "student_scaling":
                for scaled in (False, True):
                    spec = _scheme(config, kind="sd", temperature=float(v), student_scaling=scaled)
                    student = train_run(config, splits, teacher, seed=(seed, 1), scheme=spec).model
                    add("sd", seed, spec, student, teacher, tacc, v,
                        ",scale_both" if scaled else ",scale_teacher")
    return ExperimentResult(records, models, split_map, summary)


def cross_distill(config_a: ExperimentConfig, config_b: ExperimentConfig | None = None, *,
                  sd_alpha: float = 0.6, timing: bool = False) -> ExperimentResult:
    """Self- and cross-distillation between two architectures.

    ``config_b`` defaults to ``config_a`` with ``model.hidden`` replaced by
    ``model.cross_hidden``. Every student's temperature is matched so the
    mean effective ground-truth label equals ``1 - scheme.epsilon``.
    Records: ``sd_a``, ``sd_b``, ``cd_a_to_b``, ``cd_b_to_a`` per repeat.
    """
    if config_b is None:
        config_b = config_a.replace(model={"hidden": list(config_a.model.cross_hidden)})
    if config_a.dataset != config_b.dataset or config_a.train.validation_fraction != config_b.train.validation_fraction:
        raise ConfigError("cross_distill: both configs must share dataset and validation split")
    h = config_hash(config_a)
    clock = _Clock(timing)
    g = 1.0 - config_a.scheme.epsilon
    records, models, split_map = [], {}, {}
    for r in range(config_a.repeats):
        seed = config_a.seed + r
        splits = _splits(config_a, seed)
        split_map[seed] = splits
        teachers = {}
        for tag, cfg in (("a", config_a), ("b", config_b)):
            ce = _scheme(cfg, kind="ce", alpha=0.0, temperature=1.0)
            teachers[tag] = train_run(cfg, splits, seed=(seed, 0), scheme=ce).model
        for name, t_tag, s_cfg in (("sd_a", "a", config_a), ("sd_b", "b", config_b),
                                   ("cd_a_to_b", "a", config_b), ("cd_b_to_a", "b", config_a)):
            teacher = teachers[t_tag]
            spec = _matched_sd(s_cfg, teacher, splits, sd_alpha, g)
            student = train_run(s_cfg, splits, teacher, seed=(seed, 1), scheme=spec).model
            models[(name, seed)] = student
            records.append(_record(name, 1, seed, spec, test_metrics(student, splits, s_cfg),
                                   teacher_train_metrics(teacher, splits, spec.temperature, s_cfg),
                                   h, clock.lap()))
        models[("teacher_a", seed)] = teachers["a"]
        models[("teacher_b", seed)] = teachers["b"]
    return ExperimentResult(records, models, split_map)
