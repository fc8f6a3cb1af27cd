"""Confusion matrices, per-class metrics and the safe/slippery grouping."""
import json
from dataclasses import dataclass

import numpy as np

from .dataset import SLIPPERY, SurfaceClass
from .errors import ShapeError
from .model import predict_proba
from .preprocess import preprocessor_apply

N_CLASSES = len(SurfaceClass)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """``counts[true, predicted]`` window counts."""

    counts: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())

    def accuracy(self):
        return float(np.trace(self.counts)) / self.total


@dataclass(frozen=True)
class ClassMetrics:
    precision: tuple
    recall: tuple
    f1: tuple
    accuracy: float
    degenerate: tuple = ()  # classes with an empty row or column


def confusion(preds, truth, classes=N_CLASSES):
    preds = np.asarray(preds, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if preds.shape != truth.shape:
        raise ShapeError(f"{len(preds)} predictions for {len(truth)} labels")
    if len(preds) == 0:
        raise ShapeError("confusion matrix needs at least one prediction")
    counts = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(counts, (truth, preds), 1)
    return ConfusionMatrix(counts)


def metrics(cm):
    """Precision, recall and F1 per class plus overall accuracy.

    Empty denominators yield 0 and the class is listed in ``degenerate``.
    """
    c = np.asarray(cm.counts, dtype=np.float64)
    diag = np.diag(c)
    col = c.sum(axis=0)
    row = c.sum(axis=1)
    precision = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros_like(diag), where=row > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(diag), where=denom > 0)
    degenerate = tuple(int(i) for i in np.flatnonzero((col == 0) | (row == 0)))
    return ClassMetrics(tuple(precision.tolist()), tuple(recall.tolist()), tuple(f1.tolist()),
                        float(diag.sum() / c.sum()), degenerate)


def collapse(cm):
    """2x2 matrix over (safe, slippery)."""
    group = np.array([1 if SurfaceClass(i) in SLIPPERY else 0 for i in range(len(cm.counts))])
    out = np.zeros((2, 2), dtype=np.int64)
    np.add.at(out, (group[:, None].repeat(len(group), 1), group[None, :].repeat(len(group), 0)),
              cm.counts)
    return out


def binary_grouped_accuracy(cm):
    two = collapse(cm)
    return float(np.trace(two)) / float(two.sum())


def argmax_lowest(probs):
    """Row-wise argmax; ties go to the lowest class index (``np.argmax`` does that)."""
    return np.argmax(probs, axis=-1)


@dataclass(frozen=True)
class Evaluation:
    confusion: ConfusionMatrix
    metrics: ClassMetrics
    binary_accuracy: float
    predictions: np.ndarray
    probs: np.ndarray

    @property
    def accuracy(self):
        return self.metrics.accuracy


def classify_windows(model, preproc, raw_windows, batch_size=512):
    """Preprocess each raw ``(T, 6)`` window and return class probabilities."""
    out = []
    for i in range(0, len(raw_windows), batch_size):
        chunk = np.stack([preprocessor_apply(preproc, w) for w in raw_windows[i:i + batch_size]])
        out.append(predict_proba(model, chunk))
    return np.concatenate(out)


def evaluate(model, preproc, windows, batch_size=512):
    """Evaluate a model on a list of :class:`WindowView`."""
    if not windows:
        raise ShapeError("evaluate needs at least one window")
    probs = classify_windows(model, preproc, [w.data for w in windows], batch_size)
    preds = argmax_lowest(probs)
    truth = np.array([int(w.label) for w in windows])
    cm = confusion(preds, truth)
    return Evaluation(cm, metrics(cm), binary_grouped_accuracy(cm), preds, probs)


# -- reports -----------------------------------------------------------------

def format_accuracy_table(results):
    """Accuracy table with Classical and Slippery rows.

    ``results`` maps a column title (e.g. ``"small/ext"``) to an
    :class:`Evaluation`.
    """
    titles = list(results)
    width = max([10] + [len(t) for t in titles])
    lines = [" " * 10 + " | " + " | ".join(t.rjust(width) for t in titles)]
    lines.append("-" * len(lines[0]))
    lines.append("Classical".ljust(10) + " | " + " | ".join(
        f"{results[t].accuracy:.5f}".rjust(width) for t in titles))
    lines.append("Slippery".ljust(10) + " | " + " | ".join(
        f"{results[t].binary_accuracy:.5f}".rjust(width) for t in titles))
    return "\n".join(lines)


def format_class_table(m):
    lines = [f"{'surface':<14}{'precision':>10}{'recall':>10}{'f1':>10}"]
    for c in SurfaceClass:
        flag = " *" if int(c) in m.degenerate else ""
        lines.append(f"{c.label:<14}{m.precision[c]:>10.5f}{m.recall[c]:>10.5f}"
                     f"{m.f1[c]:>10.5f}{flag}")
    lines.append(f"{'accuracy':<14}{m.accuracy:>10.5f}")
    return "\n".join(lines)


def evaluation_record(ev, **extra):
    """Machine-readable summary of one run (JSON-serialisable)."""
    m = ev.metrics
    rec = {
        "accuracy": m.accuracy,
        "binary_accuracy": ev.binary_accuracy,
        "windows": ev.confusion.total,
        "confusion": ev.confusion.counts.tolist(),
        "per_class": {c.label: {"precision": m.precision[c], "recall": m.recall[c],
                                "f1": m.f1[c]} for c in SurfaceClass},
        "degenerate": [SurfaceClass(i).label for i in m.degenerate],
    }
    rec.update(extra)
    return rec


def dumps_record(ev, **extra):
    return json.dumps(evaluation_record(ev, **extra), sort_keys=True)
