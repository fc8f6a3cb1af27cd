"""Synthetic IMU recordings with one vibration signature per surface.

Each channel is ``offset + amplitude * sin(2 pi f t / 50 + phase) + noise``.
Accelerometer channels carry the class offset (plus gravity on ``az``);
gyroscope channels vibrate at the same frequency with half the amplitude and
no offset.

The signal is generated in bouts of 150-400 samples (3-8 s of walking). Each
bout redraws the per-channel phases and jitters frequency by +-5 % and
amplitude by +-10 %, so a classifier cannot key on one fixed phase pattern.

Default parameter table (frequencies stay below the 25 Hz Nyquist limit)::

    class          offset   freq Hz   amplitude   noise std
    wood             0.0       2.0        0.6        0.3
    concrete         1.5       4.5        0.8        0.3
    tile            -1.5       7.5        0.5        0.3
    ice              3.0      11.0        0.4        0.3
    wet_concrete    -3.0      16.0        0.7        0.3
"""
import os
from dataclasses import dataclass, field

import numpy as np

from .dataset import (SAMPLE_RATE_HZ, DatasetManifest, LabeledSeries, ManifestEntry, Stream,
                      SurfaceClass, save_csv, save_manifest)
from .errors import ConfigError

GRAVITY = 9.81


@dataclass(frozen=True)
class ClassSignature:
    offset: float
    freq_hz: float
    amplitude: float
    noise_std: float


DEFAULT_SIGNATURES = {
    SurfaceClass.WOOD: ClassSignature(0.0, 2.0, 0.6, 0.3),
    SurfaceClass.CONCRETE: ClassSignature(1.5, 4.5, 0.8, 0.3),
    SurfaceClass.TILE: ClassSignature(-1.5, 7.5, 0.5, 0.3),
    SurfaceClass.ICE: ClassSignature(3.0, 11.0, 0.4, 0.3),
    SurfaceClass.WET_CONCRETE: ClassSignature(-3.0, 16.0, 0.7, 0.3),
}


@dataclass(frozen=True)
class SynthSpec:
    signatures: dict = field(default_factory=lambda: dict(DEFAULT_SIGNATURES))
    samples_per_class: int = 4000
    seed: int = 0
    stream: Stream = Stream.EXTERNAL

    def __post_init__(self):
        if set(self.signatures) != set(SurfaceClass):
            raise ConfigError("SynthSpec needs a signature for every surface class")
        if self.samples_per_class < 1:
            raise ConfigError("samples_per_class must be positive")
        nyquist = SAMPLE_RATE_HZ / 2
        for c, sig in self.signatures.items():
            if not 0 < sig.freq_hz < nyquist:
                raise ConfigError(f"{c.label}: frequency must lie in (0, {nyquist}) Hz")
            if sig.noise_std < 0:
                raise ConfigError(f"{c.label}: noise std must be non-negative")


BOUT_RANGE = (150, 400)


def synth_signal(sig, n, rng, start=0):
    t = np.arange(start, start + n) / SAMPLE_RATE_HZ
    offset = np.array([sig.offset, sig.offset, sig.offset + GRAVITY, 0.0, 0.0, 0.0])
    base_amp = np.array([1.0, 1.0, 1.0, 0.5, 0.5, 0.5]) * sig.amplitude
    out = np.empty((n, 6))
    pos = 0
    while pos < n:
        end = min(n, pos + int(rng.integers(*BOUT_RANGE)))
        phases = rng.uniform(0.0, 2 * np.pi, size=6)
        freq = sig.freq_hz * rng.uniform(0.95, 1.05)
        amp = base_amp * rng.uniform(0.9, 1.1)
        wave = np.sin(2 * np.pi * freq * t[pos:end, None] + phases[None, :])
        out[pos:end] = offset + amp * wave
        pos = end
    return out + rng.normal(0.0, sig.noise_std, size=(n, 6))


def synth_series(label, n, seed=0, spec=None):
    spec = spec or SynthSpec()
    rng = np.random.default_rng((seed, int(label)))
    data = synth_signal(spec.signatures[SurfaceClass(label)], n, rng)
    return LabeledSeries(data, SurfaceClass(label), spec.stream, source=f"synth:{SurfaceClass(label).label}")


def gen_synth(spec, out_dir):
    """Write one CSV per class plus ``manifest.txt``; returns the manifest."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc}") from exc
    entries = []
    for c in SurfaceClass:
        series = synth_series(c, spec.samples_per_class, spec.seed, spec)
        path = os.path.join(out_dir, f"{c.label}.csv")
        save_csv(series, path)
        entries.append(ManifestEntry(os.path.normpath(path), spec.stream, c))
    manifest = DatasetManifest(tuple(entries))
    save_manifest(manifest, os.path.join(out_dir, "manifest.txt"))
    return manifest


def transition_series(before, after, n_before, n_after, seed=0, spec=None):
    """Raw ``(n_before + n_after, 6)`` array switching surface at ``n_before``."""
    spec = spec or SynthSpec()
    rng = np.random.default_rng((seed, 99))
    a = synth_signal(spec.signatures[SurfaceClass(before)], n_before, rng)
    b = synth_signal(spec.signatures[SurfaceClass(after)], n_after, rng, start=n_before)
    return np.concatenate([a, b])
