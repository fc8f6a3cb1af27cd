import json

import numpy as np
import pytest

from imusurf.errors import DataError, FormatError, ShapeError
from imusurf.preprocess import (Pca, Preprocessor, Scaler, identity_preprocessor, pca_fit,
                                pca_transform, preprocessor_apply, preprocessor_fit,
                                preprocessor_load, preprocessor_save, scaler_fit,
                                scaler_transform)


def correlated(n, seed=0):
    rng = np.random.default_rng(seed)
    mix = rng.normal(size=(6, 6))
    return rng.normal(size=(n, 6)) @ mix + rng.normal(size=6) * 5


def test_scaler_formula():
    s = scaler_fit(np.array([[1.0], [2.0], [3.0]]))
    assert s.mean[0] == 2.0
    assert s.std[0] == pytest.approx(np.sqrt(2 / 3), abs=1e-15)
    out = scaler_transform(s, [[1.0], [2.0], [3.0]])
    assert np.allclose(out[:, 0], [-np.sqrt(1.5), 0.0, np.sqrt(1.5)], atol=1e-12)


def test_scaler_constant_column_flagged():
    x = np.column_stack([[5.0, 5.0, 5.0], [1.0, 2.0, 4.0]])
    s = scaler_fit(x)
    assert s.mean[0] == 5.0 and s.std[0] == 1.0
    assert s.degenerate == (True, False)


def test_scaler_centered_point_and_errors():
    s = Scaler([2.0], [1.0])
    assert scaler_transform(s, [[2.0]]).tolist() == [[0.0]]
    with pytest.raises(DataError):
        scaler_fit(np.empty((0, 6)))
    with pytest.raises(ShapeError):
        scaler_transform(scaler_fit(correlated(10)), np.ones((3, 5)))


def test_scaler_defining_properties():
    x = correlated(10_000, seed=4)
    z = scaler_transform(scaler_fit(x), x)
    assert np.abs(z.mean(axis=0)).max() < 1e-9
    assert np.abs(z.std(axis=0) - 1.0).max() < 1e-9


def test_pca_axis_aligned():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(5000, 2)) * [2.0, 1.0]
    x = x - x.mean(axis=0)
    # force exact variances and zero covariance by whitening then rescaling
    c = np.cov(x.T)
    w = np.linalg.cholesky(np.linalg.inv(c))
    x = (x @ w) * [2.0, 1.0]
    p = pca_fit(x, k=2)
    assert np.allclose(p.explained_variance, [4.0, 1.0], atol=1e-9)
    assert np.allclose(np.abs(p.components), np.eye(2), atol=1e-9)


def test_pca_rank_one():
    t = np.linspace(-1, 1, 50)
    p = pca_fit(np.column_stack([t, t]), k=2)
    r = 1 / np.sqrt(2)
    assert np.allclose(p.components[0], [r, r], atol=1e-12)
    assert abs(p.explained_variance[1]) < 1e-12
    assert p.explained_variance[0] == pytest.approx(2 * t.var(ddof=1))


def test_pca_full_rank_is_isometry():
    x = correlated(200)
    p = pca_fit(x, 6)
    y = pca_transform(p, x)
    dx = np.linalg.norm(x[:, None] - x[None], axis=-1)
    dy = np.linalg.norm(y[:, None] - y[None], axis=-1)
    assert np.abs(dx - dy).max() < 1e-9 * max(1.0, dx.max())
    assert np.abs(p.inverse_transform(y) - x).max() < 1e-9 * np.abs(x).max()


def test_pca_transform_properties():
    x = correlated(3000, seed=2)
    p = pca_fit(x, 6)
    y = pca_transform(p, x)
    cov = np.cov(y.T)
    assert np.abs(cov - np.diag(np.diag(cov))).max() < 1e-8
    assert np.allclose(y.var(axis=0, ddof=1), p.explained_variance, atol=1e-8, rtol=0)
    assert np.abs(p.components @ p.components.T - np.eye(6)).max() < 1e-9
    assert np.all(np.diff(p.explained_variance) <= 0)


def test_pca_errors():
    with pytest.raises(DataError):
        pca_fit(np.ones((1, 6)))
    with pytest.raises(ShapeError):
        pca_fit(correlated(10), k=7)
    with pytest.raises(ShapeError):
        pca_transform(pca_fit(correlated(10), 3), np.ones((4, 5)))


def test_pca_reduced_k_output_width():
    p = pca_fit(correlated(100), 3)
    assert pca_transform(p, correlated(5)).shape == (5, 3)


def test_fit_is_deterministic():
    x = correlated(500, seed=9)
    a, b = preprocessor_fit(x), preprocessor_fit(x)
    assert a.fingerprint == b.fingerprint
    assert np.array_equal(a.pca.components, b.pca.components)


def test_identity_pipeline():
    w = np.random.default_rng(0).normal(size=(100, 6))
    assert np.array_equal(preprocessor_apply(identity_preprocessor(), w), w)


def test_apply_composes_and_is_pure():
    pp = preprocessor_fit(correlated(1000, 3))
    w = correlated(100, 8)
    once = preprocessor_apply(pp, w)
    assert np.array_equal(once, preprocessor_apply(pp, w))
    manual = pca_transform(pp.pca, scaler_transform(pp.scaler, w))
    assert np.array_equal(once, manual)
    with pytest.raises(ShapeError):
        preprocessor_apply(pp, np.ones((100, 5)))


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(12)
    for k in (6, 2):
        pp = preprocessor_fit(correlated(2000, 5) * rng.uniform(0.001, 1000, 6), k)
        path = tmp_path / f"pp{k}.json"
        preprocessor_save(pp, path)
        back = preprocessor_load(path)
        assert back.fingerprint == pp.fingerprint
        for _ in range(100):
            w = rng.normal(size=(100, 6))
            assert np.array_equal(preprocessor_apply(pp, w), preprocessor_apply(back, w))


def test_load_truncated(tmp_path):
    path = tmp_path / "pp.json"
    preprocessor_save(preprocessor_fit(correlated(100)), path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(FormatError):
        preprocessor_load(path)


def test_load_rejects_k7(tmp_path):
    path = tmp_path / "pp.json"
    preprocessor_save(preprocessor_fit(correlated(100)), path)
    d = json.loads(path.read_text())
    d["k"] = 7
    path.write_text(json.dumps(d))
    with pytest.raises(FormatError) as info:
        preprocessor_load(path)
    assert info.value.field == "k"


def test_load_names_bad_field(tmp_path):
    path = tmp_path / "pp.json"
    preprocessor_save(preprocessor_fit(correlated(100)), path)
    d = json.loads(path.read_text())
    d["scaler"]["mean"] = [0.0] * 5
    path.write_text(json.dumps(d))
    with pytest.raises(FormatError) as info:
        preprocessor_load(path)
    assert info.value.field == "scaler.mean"


def test_preprocessor_dimension_invariant():
    with pytest.raises(ShapeError):
        Preprocessor(Scaler(np.zeros(5), np.ones(5)), Pca(np.zeros(6), np.eye(6), np.ones(6)))
