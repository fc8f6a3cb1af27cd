"""Labeled IMU recordings, manifests, sliding windows and leakage-free splits.

A recording session covers one surface only, so a series carries a single
label and every window cut from it inherits that label.

Manifest grammar (one entry per line, ``#`` starts a comment)::

    <path> <internal|external> <class> [<start>:<stop>]

Paths are relative to the manifest file. The optional half-open sample range
restricts the entry to a contiguous segment of the file; ``split`` uses it
when it has to cut a long recording in two.
"""
import csv
import enum
import math
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DataError, ParseError, SchemaError

SAMPLE_RATE_HZ = 50
WINDOW = 100
STEP = 1
CHANNELS = ("ax", "ay", "az", "gx", "gy", "gz")


class SurfaceClass(enum.IntEnum):
    WOOD = 0
    CONCRETE = 1
    TILE = 2
    ICE = 3
    WET_CONCRETE = 4

    @property
    def slippery(self):
        return self in (SurfaceClass.ICE, SurfaceClass.WET_CONCRETE)

    @property
    def label(self):
        return _LABELS[self]

    @classmethod
    def parse(cls, text):
        key = str(text).strip().lower().replace("-", "").replace("_", "").replace(" ", "")
        if key.isdigit() and int(key) < len(cls):
            return cls(int(key))
        try:
            return _ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown surface class {text!r}") from None


_LABELS = {
    SurfaceClass.WOOD: "wood",
    SurfaceClass.CONCRETE: "concrete",
    SurfaceClass.TILE: "tile",
    SurfaceClass.ICE: "ice",
    SurfaceClass.WET_CONCRETE: "wet_concrete",
}
_ALIASES = {
    "wood": SurfaceClass.WOOD,
    "concrete": SurfaceClass.CONCRETE,
    "rubberizedconcrete": SurfaceClass.CONCRETE,
    "tile": SurfaceClass.TILE,
    "tiles": SurfaceClass.TILE,
    "ice": SurfaceClass.ICE,
    "wetconcrete": SurfaceClass.WET_CONCRETE,
}

SLIPPERY = frozenset(c for c in SurfaceClass if c.slippery)


class Stream(enum.Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"


class ImuSample(NamedTuple):
    ax: float
    ay: float
    az: float
    gx: float
    gy: float
    gz: float


@dataclass(frozen=True)
class ColumnMapping:
    """Maps the six IMU channels (and optionally the label) to CSV headers."""

    ax: str = "ax"
    ay: str = "ay"
    az: str = "az"
    gx: str = "gx"
    gy: str = "gy"
    gz: str = "gz"
    label: str = "label"

    @property
    def channels(self):
        return (self.ax, self.ay, self.az, self.gx, self.gy, self.gz)


DEFAULT_MAPPING = ColumnMapping()


@dataclass(frozen=True, eq=False)
class LabeledSeries:
    """One single-surface recording, stored as a read-only ``(n, 6)`` array."""

    data: np.ndarray
    label: SurfaceClass
    stream: Stream = Stream.EXTERNAL
    source: str = ""
    offset: int = 0
    sample_rate_hz: int = SAMPLE_RATE_HZ

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[1] != len(CHANNELS):
            raise DataError(f"series data must have shape (n, 6), got {data.shape}")
        if len(data) == 0:
            raise DataError("series must contain at least one sample")
        if not np.all(np.isfinite(data)):
            raise DataError("series contains non-finite values")
        if self.sample_rate_hz != SAMPLE_RATE_HZ:
            raise DataError(f"sample rate is fixed at {SAMPLE_RATE_HZ} Hz")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "label", SurfaceClass(self.label))

    def __len__(self):
        return len(self.data)

    def sample(self, i):
        return ImuSample(*map(float, self.data[i]))

    @property
    def samples(self):
        return [ImuSample(*map(float, row)) for row in self.data]

    @property
    def series_id(self):
        return self.source


@dataclass(frozen=True)
class WindowView:
    series: LabeledSeries = field(repr=False)
    start: int
    length: int = WINDOW

    @property
    def label(self):
        return self.series.label

    @property
    def data(self):
        """A read-only view into the parent series, no copy."""
        return self.series.data[self.start:self.start + self.length]

    @property
    def series_id(self):
        return self.series.source

    def sample_indices(self):
        """Absolute sample indices within the source file."""
        base = self.series.offset + self.start
        return range(base, base + self.length)


# -- CSV ---------------------------------------------------------------------

def _parse_float(text, row, column, path):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(row, column, text, path) from None
    if not math.isfinite(value):
        raise DataError(f"{path}: row {row}, column {column!r}: non-finite value {text!r}")
    return value


def load_csv(path, schema=DEFAULT_MAPPING, label=None, stream=Stream.EXTERNAL,
             start=None, stop=None):
    """Read a recording into a :class:`LabeledSeries`.

    Columns not named by ``schema`` (roll/pitch/yaw, quaternions, timestamps)
    are ignored. The label comes from ``label`` if given, otherwise from the
    ``schema.label`` column, which must then hold a single value throughout.
    ``start``/``stop`` select a half-open range of data rows.

    Row numbers in errors count data rows from 1 (the header is row 0).
    """
    path = os.fspath(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        positions = {}
        for col in schema.channels:
            if col not in header:
                raise SchemaError(col, path)
            positions[col] = header.index(col)
        label_pos = header.index(schema.label) if schema.label in header else None
        if label is None and label_pos is None:
            raise SchemaError(schema.label, path)

        rows = []
        labels = set()
        for rownum, cells in enumerate(reader, start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) < len(header):
                raise ParseError(rownum, header[len(cells)], "", path)
            rows.append([_parse_float(cells[positions[c]].strip(), rownum, c, path)
                         for c in schema.channels])
            if label_pos is not None and label is None:
                labels.add(cells[label_pos].strip())

    if label is None:
        if len(labels) != 1:
            raise DataError(f"{path}: expected one surface label per file, found {sorted(labels)}")
        label = SurfaceClass.parse(labels.pop())
    elif not isinstance(label, SurfaceClass):
        label = SurfaceClass.parse(label)

    data = np.array(rows, dtype=np.float64).reshape(-1, len(CHANNELS))
    start = 0 if start is None else start
    stop = len(data) if stop is None else stop
    if not 0 <= start < stop <= len(data):
        raise DataError(f"{path}: sample range {start}:{stop} outside 0:{len(data)}")
    return LabeledSeries(data[start:stop], label, Stream(stream), source=path, offset=start)


def save_csv(series, path, schema=DEFAULT_MAPPING, with_label=True):
    """Write a series in the dataset CSV layout (``repr`` floats, so exact)."""
    header = list(schema.channels) + ([schema.label] if with_label else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in series.data:
            cells = [repr(float(v)) for v in row]
            if with_label:
                cells.append(series.label.label)
            w.writerow(cells)


# -- manifests ---------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    path: str
    stream: Stream
    label: SurfaceClass
    start: int | None = None
    stop: int | None = None

    def load(self, schema=DEFAULT_MAPPING):
        return load_csv(self.path, schema, label=self.label, stream=self.stream,
                        start=self.start, stop=self.stop)

    def format(self, base=None):
        path = os.path.relpath(self.path, base) if base else self.path
        line = f"{path} {self.stream.value} {self.label.label}"
        if self.start is not None or self.stop is not None:
            line += f" {self.start or 0}:{'' if self.stop is None else self.stop}"
        return line


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple = ()
    schema: ColumnMapping = DEFAULT_MAPPING

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def classes(self):
        return {e.label for e in self.entries}

    def load(self):
        return [e.load(self.schema) for e in self.entries]

    def validate(self, require_all_classes=True):
        for e in self.entries:
            if not os.path.exists(e.path):
                raise ConfigError(f"manifest references missing file {e.path}")
        if require_all_classes:
            missing = set(SurfaceClass) - self.classes()
            if missing:
                names = ", ".join(c.label for c in sorted(missing))
                raise ConfigError(f"manifest has no files for: {names}")


def parse_manifest(text, base="."):
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise ConfigError(f"manifest line {lineno}: expected 'path stream class [start:stop]'")
        try:
            stream = Stream(parts[1].lower())
            label = SurfaceClass.parse(parts[2])
        except ValueError as exc:
            raise ConfigError(f"manifest line {lineno}: {exc}") from None
        start = stop = None
        if len(parts) == 4:
            lo, sep, hi = parts[3].partition(":")
            if not sep:
                raise ConfigError(f"manifest line {lineno}: bad range {parts[3]!r}")
            try:
                start = int(lo) if lo else 0
                stop = int(hi) if hi else None
            except ValueError:
                raise ConfigError(f"manifest line {lineno}: bad range {parts[3]!r}") from None
        path = parts[0] if os.path.isabs(parts[0]) else os.path.join(base, parts[0])
        entries.append(ManifestEntry(os.path.normpath(path), stream, label, start, stop))
    return DatasetManifest(tuple(entries))


def load_manifest(path):
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(fh.read(), base=os.path.dirname(os.path.abspath(path)))


def save_manifest(manifest, path):
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "w", encoding="utf-8") as fh:
        for e in manifest.entries:
            fh.write(e.format(base) + "\n")


# -- windows -----------------------------------------------------------------

def window_count(series_len, window=WINDOW, step=STEP):
    if window < 1 or step < 1:
        raise ValueError("window and step must be >= 1")
    if series_len < window:
        return 0
    return (series_len - window) // step + 1


def windows(series, window=WINDOW, step=STEP):
    """All sliding windows over ``series`` as zero-copy :class:`WindowView`s."""
    n = window_count(len(series), window, step)
    return [WindowView(series, i * step, window) for i in range(n)]


def stack_windows(views):
    """Copy a list of windows into one ``(n, length, 6)`` array plus labels."""
    x = np.stack([v.data for v in views]) if views else np.empty((0, WINDOW, len(CHANNELS)))
    y = np.array([int(v.label) for v in views], dtype=np.int64)
    return x, y


# -- splitting ---------------------------------------------------------------

def _entry_length(entry, schema):
    if entry.start is not None and entry.stop is not None:
        return entry.stop - entry.start
    return len(entry.load(schema))


def _cut(entry, length, test_fraction, gap, window):
    """Split one entry into (train, test) segments separated by ``gap`` samples."""
    usable = length - gap
    n_test = int(round(test_fraction * usable))
    n_train = usable - n_test
    if n_train < window or n_test < window:
        raise ConfigError(
            f"{entry.path}: {length} samples cannot hold a {window}-sample window "
            f"on both sides of a {gap}-sample gap at test fraction {test_fraction}")
    base = entry.start or 0
    train = ManifestEntry(entry.path, entry.stream, entry.label, base, base + n_train)
    test = ManifestEntry(entry.path, entry.stream, entry.label,
                         base + n_train + gap, base + length)
    return train, test


def split(manifest, test_fraction=0.2, seed=0, window=WINDOW, tolerance=0.1):
    """Split a manifest into train and test manifests without window leakage.

    Splits never cut individual windows apart. With several recordings per
    class, whole recordings are assigned to the test side (chosen by a seeded
    shuffle). If that cannot reach ``test_fraction`` within ``tolerance``
    (absolute, on sample counts), or a class has one recording only, every
    recording of the class is cut at the train/test boundary and
    ``window - 1`` samples are dropped there, so that no window on one side
    is adjacent to the other side.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
    schema = manifest.schema
    gap = window - 1
    rng = np.random.default_rng(seed)
    train, test = [], []

    by_class = {}
    for e in manifest.entries:
        by_class.setdefault(e.label, []).append(e)

    for label in sorted(by_class):
        entries = by_class[label]
        lengths = [_entry_length(e, schema) for e in entries]
        total = sum(lengths)
        order = rng.permutation(len(entries))
        if len(entries) >= 2:
            k = min(max(1, int(round(test_fraction * len(entries)))), len(entries) - 1)
            chosen = set(order[:k].tolist())
            share = sum(lengths[i] for i in chosen) / total
            if abs(share - test_fraction) <= tolerance:
                for i, e in enumerate(entries):
                    (test if i in chosen else train).append(e)
                continue
        for e, n in zip(entries, lengths):
            a, b = _cut(e, n, test_fraction, gap, window)
            train.append(a)
            test.append(b)

    return (DatasetManifest(tuple(train), schema), DatasetManifest(tuple(test), schema))
