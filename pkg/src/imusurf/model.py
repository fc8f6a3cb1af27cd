"""Bidirectional GRU window classifier with exact BPTT gradients.

Each direction is a single GRU layer with the two-bias gate convention::

    r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
    z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
    n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
    h' = (1 - z) * n + z * h

The forward direction scans the window front to back, the backward direction
back to front. Their final hidden states are concatenated and fed to an
affine softmax head. A single-bias variant would save ``2 * 3h`` parameters
per model but is not implemented.

Parameters live in one flat float64 vector, in this order::

    forward:  w_ih (3h x d), w_hh (3h x h), b_ih (3h), b_hh (3h)
    backward: w_ih, w_hh, b_ih, b_hh
    head:     head_w (C x 2h), head_b (C)

Gate blocks inside every ``3h`` axis are stacked r, z, n. Matrices are
row-major.

Inference contractions use ``np.einsum`` rather than BLAS matmul: the result
for a given window is then bit-identical whether it is evaluated alone or
inside a batch, which keeps streaming and batch evaluation in lockstep.
"""
import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import SurfaceClass, WINDOW
from .errors import ConfigError, FormatError, ShapeError
from .numerics import sigmoid

FORMAT = "imusurf-model"
VERSION = 1


class FingerprintWarning(UserWarning):
    """A model is being used with a preprocessor it was not trained behind."""


@dataclass(frozen=True)
class ArchSpec:
    input_dim: int = 6
    hidden: int = 8
    classes: int = len(SurfaceClass)
    window: int = WINDOW

    def __post_init__(self):
        for name in ("input_dim", "hidden", "classes", "window"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"ArchSpec.{name} must be a positive integer, got {v!r}")
        if self.classes != len(SurfaceClass):
            raise ConfigError(f"ArchSpec.classes must be {len(SurfaceClass)}")

    @classmethod
    def small(cls, input_dim=6):
        return cls(input_dim=input_dim, hidden=8)

    @classmethod
    def large(cls, input_dim=6):
        return cls(input_dim=input_dim, hidden=20)

    @classmethod
    def named(cls, name, input_dim=6):
        try:
            return {"small": cls.small, "large": cls.large}[name.lower()](input_dim)
        except KeyError:
            raise ConfigError(f"unknown architecture {name!r} (small|large)") from None


def count_parameters(spec):
    d, h, c = spec.input_dim, spec.hidden, spec.classes
    return 2 * 3 * (d * h + h * h + 2 * h) + (2 * h * c + c)


def _layout(spec):
    d, h, c = spec.input_dim, spec.hidden, spec.classes
    shapes = []
    for prefix in ("fwd", "bwd"):
        shapes += [(f"{prefix}.w_ih", (3 * h, d)), (f"{prefix}.w_hh", (3 * h, h)),
                   (f"{prefix}.b_ih", (3 * h,)), (f"{prefix}.b_hh", (3 * h,))]
    shapes += [("head_w", (c, 2 * h)), ("head_b", (c,))]
    return shapes


def unpack(spec, flat):
    """Split a flat parameter (or gradient) vector into named array views."""
    flat = np.asarray(flat)
    if flat.shape != (count_parameters(spec),):
        raise ShapeError(f"expected {count_parameters(spec)} parameters, got shape {flat.shape}")
    out, pos = {}, 0
    for name, shape in _layout(spec):
        size = int(np.prod(shape))
        out[name] = flat[pos:pos + size].reshape(shape)
        pos += size
    return out


def pack(spec, arrays):
    return np.concatenate([np.asarray(arrays[name], dtype=np.float64).ravel()
                           for name, _ in _layout(spec)])


@dataclass(frozen=True, eq=False)
class GruDirectionParams:
    w_ih: np.ndarray
    w_hh: np.ndarray
    b_ih: np.ndarray
    b_hh: np.ndarray

    @property
    def hidden(self):
        return self.w_hh.shape[1]

    @property
    def input_dim(self):
        return self.w_ih.shape[1]


@dataclass(frozen=True, eq=False)
class GruModel:
    spec: ArchSpec
    params: np.ndarray
    preprocessor_fingerprint: str | None = None
    _views: dict = field(init=False, repr=False)

    def __post_init__(self):
        params = np.array(self.params, dtype=np.float64)
        if params.shape != (count_parameters(self.spec),):
            raise ShapeError(
                f"{self.spec} needs {count_parameters(self.spec)} parameters, got {params.shape}")
        params.flags.writeable = False
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "_views", unpack(self.spec, params))

    def _direction(self, prefix):
        v = self._views
        return GruDirectionParams(v[f"{prefix}.w_ih"], v[f"{prefix}.w_hh"],
                                  v[f"{prefix}.b_ih"], v[f"{prefix}.b_hh"])

    @property
    def forward_dir(self):
        return self._direction("fwd")

    @property
    def backward_dir(self):
        return self._direction("bwd")

    @property
    def head_w(self):
        return self._views["head_w"]

    @property
    def head_b(self):
        return self._views["head_b"]

    def arrays(self):
        return dict(self._views)

    def replace(self, params=None, preprocessor_fingerprint=None):
        return GruModel(self.spec, self.params if params is None else params,
                        preprocessor_fingerprint or self.preprocessor_fingerprint)


def model_from_parts(spec, forward_dir, backward_dir, head_w, head_b, fingerprint=None):
    arrays = {"head_w": head_w, "head_b": head_b}
    for prefix, p in (("fwd", forward_dir), ("bwd", backward_dir)):
        arrays.update({f"{prefix}.w_ih": p.w_ih, f"{prefix}.w_hh": p.w_hh,
                       f"{prefix}.b_ih": p.b_ih, f"{prefix}.b_hh": p.b_hh})
    return GruModel(spec, pack(spec, arrays), fingerprint)


def zero_model(spec):
    return GruModel(spec, np.zeros(count_parameters(spec)))


# -- initialisation ----------------------------------------------------------

class Lcg64:
    """64-bit linear congruential generator (Knuth's MMIX constants).

    ``uniform()`` returns the top 53 bits of the state scaled into [0, 1).
    """

    MULTIPLIER = 6364136223846793005
    INCREMENT = 1442695040888963407
    MASK = (1 << 64) - 1

    def __init__(self, seed):
        self.state = int(seed) & self.MASK
        self.next()

    def next(self):
        self.state = (self.MULTIPLIER * self.state + self.INCREMENT) & self.MASK
        return self.state

    def uniform(self):
        return (self.next() >> 11) * (1.0 / (1 << 53))


def init(spec, seed=0):
    """Weights ~ U[-1/sqrt(h), 1/sqrt(h)] from :class:`Lcg64`; biases zero.

    Draws are taken in flat-parameter order, skipping the bias slots.
    """
    rng = Lcg64(seed)
    bound = 1.0 / np.sqrt(spec.hidden)
    arrays = {}
    for name, shape in _layout(spec):
        size = int(np.prod(shape))
        if len(shape) == 1:
            arrays[name] = np.zeros(size)
        else:
            u = np.array([rng.uniform() for _ in range(size)])
            arrays[name] = (2.0 * u - 1.0) * bound
    return GruModel(spec, pack(spec, arrays))


# -- forward -----------------------------------------------------------------

def gru_cell(x_t, h_prev, p):
    """One GRU step. Works on single vectors or on row batches."""
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    h = p.hidden
    if x_t.shape[-1] != p.input_dim or h_prev.shape[-1] != h:
        raise ShapeError(f"gru_cell: x {x_t.shape} / h {h_prev.shape} do not match "
                         f"input_dim={p.input_dim}, hidden={h}")
    gi = np.einsum("...d,gd->...g", x_t, p.w_ih) + p.b_ih
    gh = np.einsum("...k,gk->...g", h_prev, p.w_hh) + p.b_hh
    r = sigmoid(gi[..., :h] + gh[..., :h])
    z = sigmoid(gi[..., h:2 * h] + gh[..., h:2 * h])
    n = np.tanh(gi[..., 2 * h:] + r * gh[..., 2 * h:])
    return (1.0 - z) * n + z * h_prev


@dataclass
class _ScanCache:
    x: np.ndarray       # (B, T, d) inputs in scan order
    h_prev: np.ndarray  # (B, T, h) state entering each step
    r: np.ndarray
    z: np.ndarray
    n: np.ndarray
    ghn: np.ndarray     # (B, T, h) W_hn h + b_hn


@dataclass
class ForwardCache:
    fwd: _ScanCache
    bwd: _ScanCache
    features: np.ndarray  # (B, 2h)
    probs: np.ndarray     # (B, C)


def _scan(p, x, keep):
    b, t, _ = x.shape
    h = p.hidden
    gi_all = np.einsum("btd,gd->btg", x, p.w_ih) + p.b_ih
    state = np.zeros((b, h))
    if keep:
        hs, rs, zs, ns, ghns = (np.empty((b, t, h)) for _ in range(5))
    for i in range(t):
        gi = gi_all[:, i]
        gh = np.einsum("bk,gk->bg", state, p.w_hh) + p.b_hh
        r = sigmoid(gi[:, :h] + gh[:, :h])
        z = sigmoid(gi[:, h:2 * h] + gh[:, h:2 * h])
        ghn = gh[:, 2 * h:]
        n = np.tanh(gi[:, 2 * h:] + r * ghn)
        if keep:
            hs[:, i], rs[:, i], zs[:, i], ns[:, i], ghns[:, i] = state, r, z, n, ghn
        state = (1.0 - z) * n + z * state
    cache = _ScanCache(x, hs, rs, zs, ns, ghns) if keep else None
    return state, cache


def _softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _as_batch(model, window):
    x = np.asarray(window, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != model.spec.input_dim or x.shape[1] < 1:
        raise ShapeError(f"expected windows of shape (T, {model.spec.input_dim}), "
                         f"got {np.shape(window)}")
    return x, single


def forward(model, window, keep_cache=True):
    """Classify one ``(T, d)`` window or a ``(B, T, d)`` batch.

    Returns ``(logits, probs, cache)``; the cache is ``None`` when
    ``keep_cache`` is false. Any window length ``T >= 1`` is accepted.
    """
    x, single = _as_batch(model, window)
    h_f, c_f = _scan(model.forward_dir, x, keep_cache)
    h_b, c_b = _scan(model.backward_dir, x[:, ::-1], keep_cache)
    features = np.concatenate([h_f, h_b], axis=1)
    logits = np.einsum("bk,ck->bc", features, model.head_w) + model.head_b
    probs = _softmax(logits)
    cache = ForwardCache(c_f, c_b, features, probs) if keep_cache else None
    if single:
        return logits[0], probs[0], cache
    return logits, probs, cache


def predict_proba(model, windows):
    return forward(model, windows, keep_cache=False)[1]


# -- backward ----------------------------------------------------------------

def _scan_backward(p, c, dh):
    b, t, d = c.x.shape
    h = p.hidden
    dgi = np.empty((b, t, 3 * h))
    dgh = np.empty((b, t, 3 * h))
    for i in range(t - 1, -1, -1):
        r, z, n, hp = c.r[:, i], c.z[:, i], c.n[:, i], c.h_prev[:, i]
        dn = dh * (1.0 - z)
        dz = dh * (hp - n)
        dan = dn * (1.0 - n * n)
        dar = dan * c.ghn[:, i] * r * (1.0 - r)
        daz = dz * z * (1.0 - z)
        dgi[:, i, :h] = dar
        dgi[:, i, h:2 * h] = daz
        dgi[:, i, 2 * h:] = dan
        dgh[:, i, :h] = dar
        dgh[:, i, h:2 * h] = daz
        dgh[:, i, 2 * h:] = dan * r
        dh = dh * z + dgh[:, i] @ p.w_hh
    flat_gi = dgi.reshape(-1, 3 * h)
    flat_gh = dgh.reshape(-1, 3 * h)
    return {
        "w_ih": flat_gi.T @ c.x.reshape(-1, d),
        "w_hh": flat_gh.T @ c.h_prev.reshape(-1, h),
        "b_ih": flat_gi.sum(axis=0),
        "b_hh": flat_gh.sum(axis=0),
    }


def backward(model, cache, target, weights=None):
    """Cross-entropy loss and its exact gradient (flat, same layout as params).

    For a batch, ``target`` is an integer array and loss and gradient are
    averaged over the batch. Optional per-window ``weights`` are rescaled to
    mean 1 before averaging.
    """
    probs = cache.probs
    targets = np.atleast_1d(np.asarray(target, dtype=np.int64))
    if targets.shape != (len(probs),):
        raise ShapeError(f"got {targets.shape[0]} targets for {len(probs)} windows")
    if np.any((targets < 0) | (targets >= model.spec.classes)):
        raise ValueError(f"target out of range [0, {model.spec.classes})")
    b = len(targets)
    rows = np.arange(b)
    w = np.ones(b) if weights is None else np.asarray(weights, dtype=np.float64)
    if weights is not None:
        w = w / w.mean()
    loss = float(-np.mean(w * np.log(probs[rows, targets])))

    dlogits = probs.copy()
    dlogits[rows, targets] -= 1.0
    dlogits *= (w / b)[:, None]
    h = model.spec.hidden
    grads = {"head_w": dlogits.T @ cache.features, "head_b": dlogits.sum(axis=0)}
    dfeat = dlogits @ model.head_w
    for prefix, p, c, dh in (("fwd", model.forward_dir, cache.fwd, dfeat[:, :h]),
                             ("bwd", model.backward_dir, cache.bwd, dfeat[:, h:])):
        for k, v in _scan_backward(p, c, dh).items():
            grads[f"{prefix}.{k}"] = v
    return loss, pack(model.spec, grads)


def loss_and_grad(model, windows, targets):
    _, _, cache = forward(model, windows)
    return backward(model, cache, targets)


# -- persistence -------------------------------------------------------------

def _checksum(params):
    return hashlib.sha256(np.ascontiguousarray(params, dtype="<f8").tobytes()).hexdigest()


def model_to_dict(m):
    return {
        "format": FORMAT,
        "version": VERSION,
        "spec": asdict(m.spec),
        "preprocessor_fingerprint": m.preprocessor_fingerprint,
        "n_params": int(m.params.size),
        "params": [float(v) for v in m.params],
        "checksum": _checksum(m.params),
    }


def model_from_dict(d, preprocessor=None):
    if not isinstance(d, dict):
        raise FormatError("top level must be an object")
    if d.get("format") != FORMAT:
        raise FormatError(f"expected {FORMAT!r}", "format")
    if d.get("version") != VERSION:
        raise FormatError(f"unsupported version {d.get('version')!r}", "version")
    try:
        spec = ArchSpec(**d["spec"])
    except (KeyError, TypeError, ConfigError) as exc:
        raise FormatError(f"invalid architecture: {exc}", "spec") from None
    expected = count_parameters(spec)
    if d.get("n_params") != expected:
        raise FormatError(f"stored count {d.get('n_params')!r} != {expected} for {spec}",
                          "n_params")
    try:
        params = np.array(d["params"], dtype=np.float64)
    except (KeyError, TypeError, ValueError):
        raise FormatError("missing or non-numeric", "params") from None
    if params.shape != (expected,):
        raise FormatError(f"expected {expected} values, got {params.size}", "params")
    if "checksum" in d and d["checksum"] != _checksum(params):
        raise FormatError("checksum mismatch", "checksum")
    model = GruModel(spec, params, d.get("preprocessor_fingerprint"))
    check_fingerprint(model, preprocessor)
    return model


def check_fingerprint(model, preprocessor):
    """Warn (never raise) when ``preprocessor`` differs from the training one."""
    if preprocessor is None or model.preprocessor_fingerprint is None:
        return True
    if preprocessor.fingerprint != model.preprocessor_fingerprint:
        warnings.warn(
            f"model was trained behind preprocessor {model.preprocessor_fingerprint}, "
            f"got {preprocessor.fingerprint}", FingerprintWarning, stacklevel=3)
        return False
    return True


def model_save(m, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(m), fh)
        fh.write("\n")


def model_load(path, preprocessor=None):
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"corrupt file: {exc}") from None
    return model_from_dict(d, preprocessor)
