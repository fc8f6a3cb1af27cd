"""StandardScaler and PCA front end.

The scaler uses the population (1/n) standard deviation, the PCA covariance
uses 1/(n-1). Both are fit on raw training samples only.

File format (JSON, UTF-8)::

    {"format": "imusurf-preprocessor", "version": 1,
     "dim": 6, "k": <1..6>, "stream": "internal" | "external" | null,
     "scaler": {"mean": [6], "std": [6], "degenerate": [bool x 6]},
     "pca": {"mean": [6], "components": [[6] x k], "explained_variance": [k]}}

Floats are written with ``repr`` so they read back bit-exactly.
"""
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import CHANNELS, Stream
from .errors import DataError, FormatError, ShapeError
from .numerics import sym_eigen

FORMAT = "imusurf-preprocessor"
VERSION = 1
DIM = len(CHANNELS)
STD_FLOOR = 1e-12


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def _samples(x, dim=DIM):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or (dim is not None and x.shape[1] != dim):
        raise ShapeError(f"expected a sample matrix with {dim} columns, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class Scaler:
    mean: np.ndarray
    std: np.ndarray
    degenerate: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(self.mean))
        object.__setattr__(self, "std", _frozen(self.std))
        if not self.degenerate:
            object.__setattr__(self, "degenerate", (False,) * len(self.mean))

    @property
    def dim(self):
        return len(self.mean)

    def transform(self, x):
        return scaler_transform(self, x)


def scaler_fit(x):
    """Per-column mean and population std. Constant columns get std 1 and are
    listed in ``Scaler.degenerate``."""
    x = _samples(x, dim=None)
    if len(x) == 0:
        raise DataError("cannot fit a scaler on zero samples")
    mean = x.mean(axis=0)
    std = np.sqrt(np.mean((x - mean) ** 2, axis=0))
    degenerate = std < STD_FLOOR
    std = np.where(degenerate, 1.0, std)
    return Scaler(mean, std, tuple(bool(d) for d in degenerate))


def scaler_transform(s, x):
    x = _samples(x, dim=s.dim)
    return (x - s.mean) / s.std


@dataclass(frozen=True, eq=False)
class Pca:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(self.mean))
        object.__setattr__(self, "components", _frozen(np.atleast_2d(self.components)))
        object.__setattr__(self, "explained_variance", _frozen(self.explained_variance))

    @property
    def k(self):
        return self.components.shape[0]

    @property
    def dim(self):
        return self.components.shape[1]

    def transform(self, x):
        return pca_transform(self, x)

    def inverse_transform(self, y):
        y = _samples(y, dim=self.k)
        return y @ self.components + self.mean


def pca_fit(x, k=DIM):
    x = _samples(x, dim=None)
    n, d = x.shape
    if n < 2:
        raise DataError("PCA needs at least two samples")
    if not 1 <= k <= d:
        raise ShapeError(f"k must be in [1, {d}], got {k}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    values, vectors = sym_eigen(cov)
    return Pca(mean, vectors[:, :k].T, values[:k])


def pca_transform(p, x):
    x = _samples(x, dim=p.dim)
    return (x - p.mean) @ p.components.T


@dataclass(frozen=True, eq=False)
class Preprocessor:
    scaler: Scaler
    pca: Pca
    stream: Stream | None = None
    fingerprint: str = field(init=False)

    def __post_init__(self):
        if self.scaler.dim != DIM or self.pca.dim != DIM:
            raise ShapeError(f"preprocessor must take {DIM} channels")
        object.__setattr__(self, "fingerprint", _fingerprint(self))

    @property
    def k(self):
        return self.pca.k

    def apply(self, window):
        return preprocessor_apply(self, window)


def identity_preprocessor(k=DIM):
    """No-op scaler and PCA (handy for tests and for pre-normalised data)."""
    return Preprocessor(Scaler(np.zeros(DIM), np.ones(DIM)),
                        Pca(np.zeros(DIM), np.eye(DIM)[:k], np.ones(k)))


def preprocessor_fit(x, k=DIM, stream=None):
    """Fit scaler then PCA on the scaled data."""
    scaler = scaler_fit(x)
    return Preprocessor(scaler, pca_fit(scaler_transform(scaler, x), k), stream)


def preprocessor_apply(p, window):
    """Scale then rotate one window (or any ``(n, 6)`` sample block)."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[1] != DIM:
        raise ShapeError(f"expected a (length, {DIM}) window, got shape {window.shape}")
    return pca_transform(p.pca, scaler_transform(p.scaler, window))


# -- serialization -------------------------------------------------------------

def _floats(a):
    return [float(v) for v in np.ravel(a)]


def preprocessor_to_dict(p):
    return {
        "format": FORMAT,
        "version": VERSION,
        "dim": DIM,
        "k": p.k,
        "stream": p.stream.value if p.stream else None,
        "scaler": {
            "mean": _floats(p.scaler.mean),
            "std": _floats(p.scaler.std),
            "degenerate": list(p.scaler.degenerate),
        },
        "pca": {
            "mean": _floats(p.pca.mean),
            "components": [_floats(row) for row in p.pca.components],
            "explained_variance": _floats(p.pca.explained_variance),
        },
    }


def _fingerprint(p):
    d = preprocessor_to_dict(p)
    d.pop("stream")
    blob = json.dumps(d, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _get(d, key, where):
    try:
        return d[key]
    except (KeyError, TypeError):
        raise FormatError("missing field", f"{where}{key}") from None


def _vector(d, key, length, where):
    name = f"{where}{key}"
    raw = _get(d, key, where)
    try:
        v = np.array(raw, dtype=np.float64)
    except (TypeError, ValueError):
        raise FormatError("not numeric", name) from None
    if v.shape != (length,):
        raise FormatError(f"expected {length} values, got shape {v.shape}", name)
    if not np.all(np.isfinite(v)):
        raise FormatError("non-finite value", name)
    return v


def preprocessor_from_dict(d):
    if not isinstance(d, dict):
        raise FormatError("top level must be an object")
    if _get(d, "format", "") != FORMAT:
        raise FormatError(f"expected {FORMAT!r}", "format")
    if _get(d, "version", "") != VERSION:
        raise FormatError(f"unsupported version {d.get('version')!r}", "version")
    if _get(d, "dim", "") != DIM:
        raise FormatError(f"expected {DIM}", "dim")
    k = _get(d, "k", "")
    if not isinstance(k, int) or not 1 <= k <= DIM:
        raise FormatError(f"must be an integer in [1, {DIM}], got {k!r}", "k")
    stream = d.get("stream")
    try:
        stream = Stream(stream) if stream is not None else None
    except ValueError:
        raise FormatError(f"unknown stream {stream!r}", "stream") from None

    sc = _get(d, "scaler", "")
    std = _vector(sc, "std", DIM, "scaler.")
    if np.any(std < STD_FLOOR):
        raise FormatError("std below floor", "scaler.std")
    degenerate = sc.get("degenerate") or [False] * DIM
    if len(degenerate) != DIM:
        raise FormatError(f"expected {DIM} flags", "scaler.degenerate")
    scaler = Scaler(_vector(sc, "mean", DIM, "scaler."), std, tuple(bool(f) for f in degenerate))

    pc = _get(d, "pca", "")
    comps = _get(pc, "components", "pca.")
    try:
        comps = np.array(comps, dtype=np.float64)
    except (TypeError, ValueError):
        raise FormatError("not a numeric matrix", "pca.components") from None
    if comps.shape != (k, DIM) or not np.all(np.isfinite(comps)):
        raise FormatError(f"expected a finite {k}x{DIM} matrix", "pca.components")
    if np.max(np.abs(comps @ comps.T - np.eye(k))) > 1e-9:
        raise FormatError("rows are not orthonormal", "pca.components")
    pca = Pca(_vector(pc, "mean", DIM, "pca."), comps, _vector(pc, "explained_variance", k, "pca."))
    return Preprocessor(scaler, pca, stream)


def preprocessor_save(p, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(preprocessor_to_dict(p), fh, indent=1)
        fh.write("\n")


def preprocessor_load(path):
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"corrupt file: {exc}") from None
    return preprocessor_from_dict(d)
