import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imusurf.dataset import (DatasetManifest, ManifestEntry, LabeledSeries, Stream, SurfaceClass,
                             load_csv, load_manifest, parse_manifest, save_csv, save_manifest,
                             split, window_count, windows)
from imusurf.errors import ConfigError, DataError, ParseError, SchemaError


def test_surface_classes():
    assert {c for c in SurfaceClass if c.slippery} == {SurfaceClass.ICE, SurfaceClass.WET_CONCRETE}
    assert SurfaceClass.parse("Wet concrete") is SurfaceClass.WET_CONCRETE
    assert SurfaceClass.parse("Tiles") is SurfaceClass.TILE
    with pytest.raises(ValueError):
        SurfaceClass.parse("gravel")


def test_load_csv_three_rows(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("ax,ay,az,gx,gy,gz,label\n"
                 "1,2,3,4,5,6,wood\n0.5,0,0,0,0,-1,wood\n7,8,9,10,11,12,wood\n")
    s = load_csv(p)
    assert len(s) == 3
    assert s.label is SurfaceClass.WOOD
    assert s.sample(1) == (0.5, 0.0, 0.0, 0.0, 0.0, -1.0)
    assert s.data[2].tolist() == [7, 8, 9, 10, 11, 12]
    assert s.sample_rate_hz == 50


def test_load_csv_drops_orientation_columns(tmp_path):
    p = tmp_path / "internal.csv"
    p.write_text("t,ax,ay,az,gx,gy,gz,roll,pitch,yaw,qw,qx,qy,qz,label\n"
                 "0,1,2,3,4,5,6,0.1,0.2,0.3,1,0,0,0,ice\n")
    s = load_csv(p, stream=Stream.INTERNAL)
    assert s.data.shape == (1, 6)
    assert s.data[0].tolist() == [1, 2, 3, 4, 5, 6]
    assert s.stream is Stream.INTERNAL


def test_load_csv_parse_error_names_row(tmp_path):
    rows = ["ax,ay,az,gx,gy,gz,label"] + ["1,1,1,1,1,1,wood"] * 6 + ["abc,1,1,1,1,1,wood"]
    p = tmp_path / "bad.csv"
    p.write_text("\n".join(rows) + "\n")
    with pytest.raises(ParseError) as info:
        load_csv(p)
    assert info.value.row == 7
    assert "row 7" in str(info.value)


def test_load_csv_missing_column(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("ax,ay,az,gx,gy,label\n1,2,3,4,5,wood\n")
    with pytest.raises(SchemaError) as info:
        load_csv(p)
    assert info.value.column == "gz"


@pytest.mark.parametrize("cell", ["nan", "inf", "-inf"])
def test_load_csv_non_finite(tmp_path, cell):
    p = tmp_path / "n.csv"
    p.write_text(f"ax,ay,az,gx,gy,gz,label\n1,2,{cell},4,5,6,wood\n")
    with pytest.raises(DataError):
        load_csv(p)


def test_load_csv_rejects_mixed_labels(tmp_path):
    p = tmp_path / "mix.csv"
    p.write_text("ax,ay,az,gx,gy,gz,label\n1,2,3,4,5,6,wood\n1,2,3,4,5,6,ice\n")
    with pytest.raises(DataError):
        load_csv(p)


def test_csv_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(5)
    data = rng.normal(size=(50, 6)) * 10.0 ** rng.integers(-5, 5, size=(50, 6))
    s = LabeledSeries(data, SurfaceClass.TILE)
    p = tmp_path / "rt.csv"
    save_csv(s, p)
    back = load_csv(p)
    assert np.array_equal(back.data, data)
    assert back.label is SurfaceClass.TILE


@pytest.mark.parametrize("n, window, step, expected",
                         [(100, 100, 1, 1), (250, 100, 1, 151), (99, 100, 1, 0)])
def test_window_count_examples(n, window, step, expected):
    assert window_count(n, window, step) == expected


def brute_force_windows(n, window, step):
    return sum(1 for s in range(0, n, step) if s + window <= n)


def test_window_count_matches_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n, w, s = int(rng.integers(0, 2001)), int(rng.integers(1, 201)), int(rng.integers(1, 11))
        assert window_count(n, w, s) == brute_force_windows(n, w, s)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 400), st.integers(1, 60), st.integers(1, 7))
def test_windows_length_matches_count(n, w, s):
    series = LabeledSeries(np.zeros((n, 6)), SurfaceClass.ICE)
    views = windows(series, w, s)
    assert len(views) == window_count(n, w, s)
    for v in views:
        assert v.start + v.length <= n
        assert v.label is SurfaceClass.ICE


def test_windows_are_views():
    series = LabeledSeries(np.arange(606.0).reshape(101, 6), SurfaceClass.WOOD)
    views = windows(series)
    assert [v.start for v in views] == [0, 1]
    assert np.shares_memory(views[1].data, series.data)
    assert views[1].data[0].tolist() == series.data[1].tolist()
    assert len(windows(LabeledSeries(np.zeros((100, 6)), SurfaceClass.WOOD))) == 1


def test_window_total_over_manifest():
    lengths = [100, 150, 200, 99, 300]
    total = sum(len(windows(LabeledSeries(np.zeros((n, 6)), SurfaceClass.WOOD))) for n in lengths)
    assert total == 1 + 51 + 101 + 0 + 201 == 354


def test_manifest_parse_and_save(tmp_path):
    text = ("# comment\n"
            "a.csv internal wood\n"
            "sub/b.csv external wet_concrete 10:200  # segment\n")
    m = parse_manifest(text, base=str(tmp_path))
    assert len(m) == 2
    assert m.entries[1].start == 10 and m.entries[1].stop == 200
    assert m.entries[1].label is SurfaceClass.WET_CONCRETE
    out = tmp_path / "m.txt"
    save_manifest(m, out)
    again = load_manifest(out)
    assert again.entries == m.entries
    with pytest.raises(ConfigError):
        parse_manifest("a.csv sideways wood\n")


def _covered(manifest):
    """Brute-force set of (file, sample index) pairs touched by any window."""
    cells = set()
    for series in manifest.load():
        for v in windows(series):
            cells.update((series.source, i) for i in v.sample_indices())
    return cells


def _make_manifest(tmp_path, per_class_lengths, seed=0):
    entries = []
    for c in per_class_lengths:
        for j, n in enumerate(per_class_lengths[c]):
            path = tmp_path / f"{c.label}_{j}.csv"
            rng = np.random.default_rng(seed + j + 10 * int(c))
            save_csv(LabeledSeries(rng.normal(size=(n, 6)), c), path)
            entries.append(ManifestEntry(str(path), Stream.EXTERNAL, c))
    return DatasetManifest(tuple(entries))


def test_split_whole_series(tmp_path):
    m = _make_manifest(tmp_path, {c: [120] * 10 for c in SurfaceClass})
    train, test = split(m, 0.2, seed=1)
    for c in SurfaceClass:
        assert sum(e.label is c for e in test) == 2
        assert sum(e.label is c for e in train) == 8
    assert not (_covered(train) & _covered(test))


def test_split_single_series_cuts_with_gap(tmp_path):
    m = _make_manifest(tmp_path, {c: [1000] for c in SurfaceClass})
    train, test = split(m, 0.2, seed=1)
    for a, b in zip(train, test):
        assert a.path == b.path
        assert b.start - a.stop == 99
        assert (b.stop - b.start) / (a.stop - a.start + b.stop - b.start) == pytest.approx(0.2, abs=0.01)
    tr, te = _covered(train), _covered(test)
    assert tr and te and not (tr & te)
    # every test window is at least 99 samples away from every train window
    for path in {p for p, _ in tr}:
        last_train = max(i for p, i in tr if p == path)
        first_test = min(i for p, i in te if p == path)
        assert first_test - last_train == 100


def test_split_deterministic(tmp_path):
    m = _make_manifest(tmp_path, {c: [150, 160, 170, 180, 190] for c in SurfaceClass})
    assert split(m, 0.2, seed=7) == split(m, 0.2, seed=7)


def test_split_mixed_manifests_leak_free(tmp_path):
    rng = np.random.default_rng(2)
    for trial in range(4):
        sub = tmp_path / str(trial)
        sub.mkdir()
        lengths = {c: [int(x) for x in rng.integers(600, 1500, size=rng.integers(1, 4))]
                   for c in SurfaceClass}
        m = _make_manifest(sub, lengths, seed=trial)
        train, test = split(m, 0.25, seed=trial)
        assert not (_covered(train) & _covered(test))
        for c in SurfaceClass:
            n_train = sum(len(e.load()) for e in train if e.label is c)
            n_test = sum(len(e.load()) for e in test if e.label is c)
            assert n_train and n_test
            assert abs(n_test / (n_train + n_test) - 0.25) <= 0.1


def test_split_errors(tmp_path):
    m = _make_manifest(tmp_path, {SurfaceClass.WOOD: [150]})
    with pytest.raises(ConfigError):
        split(m, 0.2)
    with pytest.raises(ConfigError):
        split(m, 1.5)


def test_manifest_validate(tmp_path):
    m = _make_manifest(tmp_path, {SurfaceClass.WOOD: [120]})
    with pytest.raises(ConfigError):
        m.validate()
    os.remove(m.entries[0].path)
    with pytest.raises(ConfigError):
        m.validate(require_all_classes=False)
