"""Glue used by the CLI and the demo scripts: split, fit, window, train."""
from dataclasses import dataclass

import numpy as np

from .dataset import WINDOW, split, windows
from .preprocess import preprocessor_fit


@dataclass
class SplitData:
    train_series: list
    test_series: list

    def train_windows(self, window=WINDOW):
        return all_windows(self.train_series, window)

    def test_windows(self, window=WINDOW):
        return all_windows(self.test_series, window)


def all_windows(series_list, window=WINDOW, step=1):
    return [w for s in series_list for w in windows(s, window, step)]


def load_split(manifest, test_fraction=0.2, seed=0, window=WINDOW):
    manifest.validate()
    train_m, test_m = split(manifest, test_fraction, seed, window)
    return SplitData(train_m.load(), test_m.load())


def fit_on_series(series_list, k=6):
    """Fit a preprocessor on the raw samples of ``series_list`` (training data only)."""
    streams = {s.stream for s in series_list}
    stream = streams.pop() if len(streams) == 1 else None
    return preprocessor_fit(np.concatenate([s.data for s in series_list]), k, stream)
