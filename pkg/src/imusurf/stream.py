"""Streaming slippery-surface detector.

Every pushed sample enters a 100-sample queue. Once the queue is full, each
push classifies the queue contents. Three slippery verdicts in a row raise an
alert, after which the detector stays latched (no further alerts) until
``reset()``.

Wire format for :func:`serve`
-----------------------------
Input: one sample per line, ``ax,ay,az,gx,gy,gz`` as decimal numbers. Blank
lines and lines starting with ``#`` are skipped.

Output: one event per line, space-separated ``key=value`` pairs, always
starting with ``kind``. Values containing spaces are double-quoted.

* ``kind=decision index=<i> predicted=<class> slippery=<0|1> consecutive=<n> probs=<p0,..,p4>``
* ``kind=alert index=<i> predicted=<class> consecutive=3 message="Stop, slippery surface!"``
* ``kind=error line=<n> reason="<text>"``
* ``kind=summary lines=<n> samples=<n> decisions=<n> alerts=<n> errors=<n>``

``index`` is the 0-based position of the newest sample in the window,
counted over accepted samples. ``probs`` are written with ``repr`` and are
exact.
"""
import math
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .dataset import CHANNELS, SAMPLE_RATE_HZ, WINDOW, DEFAULT_MAPPING, SurfaceClass, load_csv
from .errors import DataError
from .evaluation import argmax_lowest
from .model import check_fingerprint, predict_proba
from .preprocess import preprocessor_apply

ALERT_MESSAGE = "Stop, slippery surface!"
CONSECUTIVE = 3


@dataclass(frozen=True)
class Decision:
    index: int
    predicted: SurfaceClass
    probs: tuple
    slippery: bool


@dataclass(frozen=True)
class AlertEvent:
    index: int
    decision: Decision
    message: str = ALERT_MESSAGE


class Debouncer:
    """Counts consecutive slippery verdicts and latches on the third."""

    def __init__(self, needed=CONSECUTIVE):
        self.needed = needed
        self.consecutive = 0
        self.latched = False

    def update(self, slippery):
        """Feed one verdict; returns True exactly when an alert should fire."""
        if not slippery:
            self.consecutive = 0
            return False
        self.consecutive = min(self.consecutive + 1, self.needed)
        if self.consecutive == self.needed and not self.latched:
            self.latched = True
            return True
        return False

    def reset(self):
        self.consecutive = 0
        self.latched = False


class SlipperyDetector:
    """Single-consumer streaming detector. Pushes must be serialized by the caller.

    The model and preprocessor are only read, so one pair may back many
    detectors.
    """

    def __init__(self, model, preproc, window=WINDOW, needed=CONSECUTIVE):
        check_fingerprint(model, preproc)
        self.model = model
        self.preproc = preproc
        self.window = window
        self.buffer = deque(maxlen=window)
        self.debouncer = Debouncer(needed)
        self.total_pushed = 0

    @property
    def consecutive_slippery(self):
        return self.debouncer.consecutive

    @property
    def alert_latched(self):
        return self.debouncer.latched

    def push(self, sample):
        """Add one sample. Returns ``(decision, alert)``; either may be None."""
        row = np.asarray(sample, dtype=np.float64).reshape(-1)
        if row.shape != (len(CHANNELS),):
            raise DataError(f"sample must have {len(CHANNELS)} values, got {row.size}")
        if not np.all(np.isfinite(row)):
            raise DataError("sample contains non-finite values")
        self.buffer.append(row)
        self.total_pushed += 1
        if len(self.buffer) < self.window:
            return None, None

        window = np.stack(self.buffer)
        probs = predict_proba(self.model, preprocessor_apply(self.preproc, window)[None])[0]
        predicted = SurfaceClass(int(argmax_lowest(probs)))
        decision = Decision(self.total_pushed - 1, predicted, tuple(probs.tolist()),
                            predicted.slippery)
        alert = None
        if self.debouncer.update(decision.slippery):
            alert = AlertEvent(decision.index, decision)
        return decision, alert

    def reset(self):
        """Clear the counter and the latch; the sample buffer is kept."""
        self.debouncer.reset()


def replay(path, model, preproc, realtime=False, schema=DEFAULT_MAPPING, clock=time):
    """Push every row of a CSV (label column optional) through a detector.

    Returns the event log: a list of ``Decision`` and ``AlertEvent`` objects
    in emission order. ``realtime`` paces pushes at the 50 Hz sample rate.
    """
    series = load_csv(path, schema, label=SurfaceClass.WOOD)
    det = SlipperyDetector(model, preproc)
    events = []
    period = 1.0 / SAMPLE_RATE_HZ
    start = clock.monotonic()
    for i, row in enumerate(series.data):
        if realtime:
            delay = start + i * period - clock.monotonic()
            if delay > 0:
                clock.sleep(delay)
        decision, alert = det.push(row)
        if decision is not None:
            events.append(decision)
        if alert is not None:
            events.append(alert)
    return events


# -- line protocol -------------------------------------------------------------

def _quote(v):
    s = str(v)
    if any(ch in s for ch in ' "='):
        return '"' + s.replace('"', "'") + '"'
    return s


def format_event(kind, **fields):
    return " ".join([f"kind={kind}"] + [f"{k}={_quote(v)}" for k, v in fields.items()])


def parse_event(line):
    """Inverse of :func:`format_event` (values come back as strings)."""
    out = {}
    i, n = 0, len(line)
    while i < n:
        while i < n and line[i] == " ":
            i += 1
        if i >= n:
            break
        eq = line.index("=", i)
        key = line[i:eq]
        i = eq + 1
        if i < n and line[i] == '"':
            end = line.index('"', i + 1)
            out[key] = line[i + 1:end]
            i = end + 1
        else:
            end = line.find(" ", i)
            end = n if end < 0 else end
            out[key] = line[i:end]
            i = end
    return out


def decision_line(d, consecutive):
    return format_event("decision", index=d.index, predicted=d.predicted.label,
                        slippery=int(d.slippery), consecutive=consecutive,
                        probs=",".join(repr(p) for p in d.probs))


def alert_line(a):
    return format_event("alert", index=a.index, predicted=a.decision.predicted.label,
                        consecutive=CONSECUTIVE, message=a.message)


def parse_sample(line):
    parts = [p.strip() for p in line.split(",")]
    if len(parts) != len(CHANNELS):
        raise DataError(f"expected {len(CHANNELS)} comma-separated values, got {len(parts)}")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise DataError(f"non-numeric value in {line.strip()!r}") from None
    if not all(math.isfinite(v) for v in values):
        raise DataError("non-finite value")
    return values


def serve(lines, write, model, preproc):
    """Run the detector over an iterable of input lines.

    ``write`` receives one output line (without newline) per event. Malformed
    input produces an error event and processing continues. Returns the
    summary counts.
    """
    det = SlipperyDetector(model, preproc)
    counts = {"lines": 0, "samples": 0, "decisions": 0, "alerts": 0, "errors": 0}
    for lineno, line in enumerate(lines, start=1):
        counts["lines"] += 1
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        try:
            sample = parse_sample(text)
        except DataError as exc:
            counts["errors"] += 1
            write(format_event("error", line=lineno, reason=str(exc)))
            continue
        decision, alert = det.push(sample)
        counts["samples"] += 1
        if decision is not None:
            counts["decisions"] += 1
            write(decision_line(decision, det.consecutive_slippery))
        if alert is not None:
            counts["alerts"] += 1
            write(alert_line(alert))
    write(format_event("summary", **counts))
    return counts
