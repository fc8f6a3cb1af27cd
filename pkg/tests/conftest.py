import numpy as np
import pytest

from imusurf.dataset import LabeledSeries, Stream, SurfaceClass, save_csv


def write_series(path, n, label=SurfaceClass.WOOD, seed=0, extra=None):
    rng = np.random.default_rng(seed)
    series = LabeledSeries(rng.normal(size=(n, 6)), label, Stream.EXTERNAL, source=str(path))
    save_csv(series, path)
    return series


@pytest.fixture
def series_writer(tmp_path):
    def make(name, n, label=SurfaceClass.WOOD, seed=0):
        return write_series(tmp_path / name, n, label, seed)
    return make


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    """1500 samples per class of the default synthetic surfaces, split 80/20."""
    from imusurf.dataset import load_manifest
    from imusurf.pipeline import fit_on_series, load_split
    from imusurf.synth import SynthSpec, gen_synth

    out = tmp_path_factory.mktemp("synth_small")
    gen_synth(SynthSpec(samples_per_class=1500, seed=3), out)
    data = load_split(load_manifest(out / "manifest.txt"), 0.2, seed=0)
    pp = fit_on_series(data.train_series)
    return data, pp


@pytest.fixture(scope="session")
def trained_small(small_synth):
    from imusurf.model import ArchSpec
    from imusurf.training import TrainConfig, train

    data, pp = small_synth
    model, history = train(data.train_windows(), data.test_windows(), pp, ArchSpec.small(),
                           TrainConfig(epochs=6, seed=0, learning_rate=3e-3))
    return model, pp, history


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
