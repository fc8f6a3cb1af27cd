"""Mini-batch Adam training with checkpoint/resume.

Shuffling uses ``numpy.random.default_rng((seed, epoch))``, so every epoch's
order depends only on the seed and the epoch number. That is what makes a
resumed run bit-identical to an uninterrupted one.

Checkpoint format (JSON): ``{"format": "imusurf-checkpoint", "version": 1,
"model": <model file dict>, "optimizer": {"step", "m", "v"},
"history": [<epoch records>], "config": <TrainConfig fields>}``.
"""
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .dataset import SurfaceClass, stack_windows
from .errors import ConfigError, DataError, FormatError, ShapeError, TrainingError
from .model import ArchSpec, backward, forward, init, model_from_dict, model_to_dict, predict_proba
from .preprocess import preprocessor_apply

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "imusurf-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    epochs: int = 10
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True
    class_weighting: bool = False
    clip_norm: float | None = 5.0

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("Adam betas must lie in (0, 1)")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ConfigError("clip_norm must be positive or None")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params, grads, state, cfg):
    """One bias-corrected Adam update. Returns new ``(params, state)``."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ShapeError(f"adam_step: params {params.shape}, grads {grads.shape}, "
                         f"state {state.m.shape}")
    t = state.step + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grads * grads
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    new = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return new, AdamState(m, v, t)


def clip_by_norm(grads, max_norm):
    norm = float(np.sqrt(np.dot(grads, grads)))
    if max_norm is not None and norm > max_norm:
        return grads * (max_norm / norm), norm
    return grads, norm


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_accuracy: float | None
    wall_time: float

    def format(self):
        val = "nan" if self.val_accuracy is None else f"{self.val_accuracy:.6f}"
        return (f"epoch={self.epoch} train_loss={self.train_loss:.6f} "
                f"train_acc={self.train_accuracy:.6f} val_acc={val} "
                f"wall_time={self.wall_time:.3f}")


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)

    def __len__(self):
        return len(self.epochs)

    def __iter__(self):
        return iter(self.epochs)


@dataclass
class Checkpoint:
    model: object
    optimizer: AdamState
    history: TrainHistory
    config: TrainConfig | None = None


def prepare(views, preproc):
    """Preprocess every window and stack them into ``(n, T, k)`` plus labels."""
    if not views:
        return np.empty((0, 0, preproc.k)), np.empty(0, dtype=np.int64)
    raw, y = stack_windows(views)
    x = np.stack([preprocessor_apply(preproc, w) for w in raw])
    return x, y


def accuracy(model, x, y, batch_size=512):
    if len(x) == 0:
        return None
    hits = 0
    for i in range(0, len(x), batch_size):
        probs = predict_proba(model, x[i:i + batch_size])
        hits += int(np.sum(np.argmax(probs, axis=1) == y[i:i + batch_size]))
    return hits / len(x)


def _class_weights(y, classes):
    counts = np.bincount(y, minlength=classes).astype(np.float64)
    return len(y) / (classes * np.maximum(counts, 1.0))


def train(train_windows, val_windows, preproc, spec=None, cfg=None, resume_from=None,
          log_path=None):
    """Train a GRU classifier; returns ``(model, history)``.

    ``train_windows``/``val_windows`` are lists of :class:`WindowView`. Each
    window goes through ``preprocessor_apply`` once up front. Passing a
    :class:`Checkpoint` as ``resume_from`` continues that run until
    ``cfg.epochs`` epochs are complete in total. Use :func:`train_with_state`
    when the optimizer state is needed for a checkpoint.
    """
    model, history, _ = train_with_state(train_windows, val_windows, preproc, spec, cfg,
                                         resume_from, log_path)
    return model, history


def train_with_state(train_windows, val_windows, preproc, spec=None, cfg=None,
                     resume_from=None, log_path=None):
    cfg = cfg or TrainConfig()
    spec = spec or ArchSpec.small(preproc.k)
    if spec.input_dim != preproc.k:
        raise ConfigError(f"model input_dim {spec.input_dim} != preprocessor output {preproc.k}")

    x, y = prepare(list(train_windows), preproc)
    missing = set(range(spec.classes)) - set(y.tolist())
    if missing:
        names = ", ".join(SurfaceClass(c).label for c in sorted(missing))
        raise DataError(f"training set has no windows for: {names}")
    xv, yv = prepare(list(val_windows or []), preproc)

    if resume_from is not None:
        if resume_from.model.spec != spec:
            raise FormatError(f"checkpoint architecture {resume_from.model.spec} != {spec}",
                              "model.spec")
        model = resume_from.model
        state = AdamState(resume_from.optimizer.m.copy(), resume_from.optimizer.v.copy(),
                          resume_from.optimizer.step)
        history = TrainHistory(list(resume_from.history.epochs))
    else:
        model = init(spec, cfg.seed)
        state = AdamState.zeros(model.params.size)
        history = TrainHistory()
    model = model.replace(preprocessor_fingerprint=preproc.fingerprint)
    params = model.params.copy()
    weights = _class_weights(y, spec.classes) if cfg.class_weighting else None

    logfile = open(log_path, "a", encoding="utf-8") if log_path else None
    try:
        for epoch in range(len(history), cfg.epochs):
            t0 = time.perf_counter()
            if cfg.shuffle:
                order = np.random.default_rng((cfg.seed, epoch)).permutation(len(x))
            else:
                order = np.arange(len(x))
            total_loss = 0.0
            hits = 0
            for batch, start in enumerate(range(0, len(order), cfg.batch_size)):
                idx = order[start:start + cfg.batch_size]
                current = model.replace(params=params)
                _, probs, cache = forward(current, x[idx])
                loss, grads = backward(current, cache, y[idx],
                                        None if weights is None else weights[y[idx]])
                if not math.isfinite(loss) or not np.all(np.isfinite(grads)):
                    raise TrainingError("loss diverged", epoch + 1, batch + 1)
                grads, _ = clip_by_norm(grads, cfg.clip_norm)
                params, state = adam_step(params, grads, state, cfg)
                total_loss += loss * len(idx)
                hits += int(np.sum(np.argmax(probs, axis=1) == y[idx]))
            model = model.replace(params=params)
            record = EpochRecord(epoch + 1, total_loss / len(x), hits / len(x),
                                 accuracy(model, xv, yv), time.perf_counter() - t0)
            history.epochs.append(record)
            log.info(record.format())
            if logfile:
                logfile.write(record.format() + "\n")
                logfile.flush()
    finally:
        if logfile:
            logfile.close()
    model = model.replace(params=params)
    return model, history, Checkpoint(model, state, history, cfg)


# -- checkpoints ---------------------------------------------------------------

def checkpoint(model, state, history, path, config=None):
    d = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model": model_to_dict(model),
        "optimizer": {"step": state.step,
                      "m": [float(v) for v in state.m],
                      "v": [float(v) for v in state.v]},
        "history": [asdict(r) for r in history.epochs],
        "config": asdict(config) if config else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(d, fh)
        fh.write("\n")


def resume(path):
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"corrupt checkpoint: {exc}") from None
    if not isinstance(d, dict) or d.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"expected {CHECKPOINT_FORMAT!r}", "format")
    if d.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported version {d.get('version')!r}", "version")
    model = model_from_dict(d.get("model"))
    opt = d.get("optimizer")
    try:
        state = AdamState(np.array(opt["m"], dtype=np.float64),
                          np.array(opt["v"], dtype=np.float64), int(opt["step"]))
    except (KeyError, TypeError, ValueError):
        raise FormatError("malformed optimizer state", "optimizer") from None
    if state.m.shape != model.params.shape or state.v.shape != model.params.shape:
        raise FormatError("moment vectors do not match the model", "optimizer")
    try:
        history = TrainHistory([EpochRecord(**r) for r in d.get("history", [])])
        config = TrainConfig.from_dict(d["config"]) if d.get("config") else None
    except (TypeError, ConfigError) as exc:
        raise FormatError(str(exc), "history/config") from None
    return Checkpoint(model, state, history, config)
