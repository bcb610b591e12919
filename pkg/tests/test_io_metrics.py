import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odcreg import (
    CorruptModelError,
    FormatError,
    IncompatibleVersionError,
    InvalidArgumentError,
    OdcConfig,
    fit_odc,
    load_dataset,
    load_model,
    predict_batch,
    read_manifest,
    save_model,
    synth_dataset,
)
from odcreg.io import ManifoldGenerator, read_matrix, save_dataset, train_test_split
from odcreg.machines import preset
from odcreg.metrics import angle_error, euclid_error, mean_error


def write(path, text):
    path.write_text(text)
    return path


def test_load_small_dataset(tmp_path):
    f = write(tmp_path / "x.csv", "1,2\n3,4\n5,6\n")
    o = write(tmp_path / "y.csv", "7\n8\n9\n")
    ds = load_dataset(f, o)
    assert (ds.N, ds.d_X, ds.d_Y) == (3, 2, 1)
    assert ds.feature_names is None


def test_header_names_captured(tmp_path):
    X, names, first = read_matrix(write(tmp_path / "x.csv", "f0,f1\n1,2\n"))
    assert names == ["f0", "f1"] and first == 2
    np.testing.assert_array_equal(X, [[1, 2]])


def test_row_mismatch_names_counts(tmp_path):
    f = write(tmp_path / "x.csv", "1,2\n3,4\n5,6\n")
    o = write(tmp_path / "y.csv", "7\n8\n")
    with pytest.raises(FormatError) as err:
        load_dataset(f, o)
    assert "3 rows" in str(err.value) and "2 rows" in str(err.value)
    assert err.value.line == 3


def test_non_numeric_cell_coordinates(tmp_path):
    with pytest.raises(FormatError) as err:
        read_matrix(write(tmp_path / "x.csv", "1,2\n3,abc\n"))
    assert (err.value.line, err.value.column) == (2, 2)


@pytest.mark.parametrize("text", ["", "1,2\n3\n", "a,b\n", "1,nan\n"])
def test_malformed_files(tmp_path, text):
    with pytest.raises(FormatError):
        read_matrix(write(tmp_path / "x.csv", text))


def test_dataset_csv_roundtrip(tmp_path):
    ds = synth_dataset(N=20, d_X=3, d_Y=2, seed=4)
    save_dataset(ds, tmp_path / "x.csv", tmp_path / "y.csv")
    back = load_dataset(tmp_path / "x.csv", tmp_path / "y.csv")
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.Y, ds.Y)
    assert back.feature_names == ds.feature_names


def test_split_sizes():
    ds = synth_dataset(N=50, seed=0)
    tr, te = train_test_split(ds, 0.2, seed=1)
    assert (tr.N, te.N) == (40, 10)
    assert len(set(map(tuple, tr.X)) & set(map(tuple, te.X))) == 0
    with pytest.raises(InvalidArgumentError):
        train_test_split(ds, 50)


def test_synth_deterministic():
    a = synth_dataset(N=100, seed=7)
    b = synth_dataset(N=100, seed=7)
    assert a.X.tobytes() == b.X.tobytes() and a.Y.tobytes() == b.Y.tobytes()
    blobs = synth_dataset("blobs", N=30, d_X=2, d_Y=2, seed=1)
    assert blobs.X.shape == (30, 2)
    with pytest.raises(InvalidArgumentError):
        synth_dataset("spiral")


def test_manifold_same_latent_same_target():
    gen = ManifoldGenerator(5, 3, seed=2)
    s = np.array([0.31, 0.31])
    t = gen.targets(s)
    np.testing.assert_array_equal(t[0], t[1])


def test_manifold_is_local():
    ds = synth_dataset(N=2000, d_X=10, d_Y=3, seed=3)
    rng = np.random.default_rng(0)
    idx = rng.choice(ds.N, 200, replace=False)
    d = ((ds.X[idx, None] - ds.X[None]) ** 2).sum(-1)
    d[np.arange(200), idx] = np.inf
    nn = np.linalg.norm(ds.Y[idx] - ds.Y[d.argmin(1)], axis=1).mean()
    rand = np.linalg.norm(ds.Y[idx] - ds.Y[rng.permutation(idx)], axis=1).mean()
    assert nn < 0.25 * rand


# model archive

@pytest.fixture(scope="module")
def trained():
    ds = synth_dataset(N=240, d_X=4, d_Y=3, seed=5)
    return ds, {kind: fit_odc(ds.X, ds.Y, OdcConfig(M=40, p=0.5, Kprime=2, machine_kind=kind),
                              preset("synthetic"), seed=0)
                for kind in ("GPR", "TGP", "IWTGP")}


@pytest.mark.parametrize("kind", ["GPR", "TGP", "IWTGP"])
def test_archive_roundtrip(tmp_path, trained, kind):
    ds, models = trained
    path = tmp_path / "m.odcm"
    save_model(models[kind], path)
    back = load_model(path)
    probes = np.random.default_rng(1).standard_normal((100, 4))
    assert predict_batch(back, probes).tobytes() == predict_batch(models[kind], probes).tobytes()
    assert back.config == models[kind].config


def test_manifest_only(tmp_path, trained):
    path = tmp_path / "m.odcm"
    save_model(trained[1]["TGP"], path)
    man = read_manifest(path)
    assert man["config"]["M"] == 40 and man["config"]["machine_kind"] == "TGP"


def test_truncated_archive(tmp_path, trained):
    path = tmp_path / "m.odcm"
    save_model(trained[1]["GPR"], path)
    raw = path.read_bytes()
    for cut in (3, 20, len(raw) // 2, len(raw) - 1):
        path.write_bytes(raw[:cut])
        with pytest.raises(CorruptModelError):
            load_model(path)


def test_flipped_byte_detected(tmp_path, trained):
    path = tmp_path / "m.odcm"
    save_model(trained[1]["GPR"], path)
    raw = bytearray(path.read_bytes())
    raw[-5] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CorruptModelError):
        load_model(path)


def test_version_mismatch(tmp_path, trained):
    path = tmp_path / "m.odcm"
    save_model(trained[1]["GPR"], path)
    raw = bytearray(path.read_bytes())
    raw[4:8] = struct.pack("<I", 99)
    path.write_bytes(bytes(raw))
    with pytest.raises(IncompatibleVersionError):
        load_model(path)


# metrics

def test_angle_examples():
    assert angle_error([10.0, 20.0], [10.0, 20.0]) == 0.0
    assert angle_error([359.0], [1.0]) == 2.0
    assert angle_error([10.0], [190.0]) == 180.0


def test_euclid_examples():
    assert euclid_error([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]) == 0.0
    assert euclid_error([3.0, 4.0], [0.0, 0.0], L=1) == 5.0
    assert euclid_error([3.0, 4.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0], L=2) == 2.5


def test_metric_errors():
    with pytest.raises(InvalidArgumentError):
        euclid_error([1.0, 2.0, 3.0], [0.0, 0.0, 0.0], L=2)
    with pytest.raises(InvalidArgumentError):
        angle_error([1.0], [1.0, 2.0])
    with pytest.raises(InvalidArgumentError):
        mean_error("mse", [[0.0]], [[0.0]])
    assert mean_error("euclidean", [[3.0, 4.0, 0.0]], [[0.0, 0.0, 0.0]]) == 5.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4)), min_size=1, max_size=8))
def test_angle_wrap_properties(pairs):
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    e = angle_error(a, b)
    assert 0.0 <= e <= 180.0
    assert e == pytest.approx(angle_error(b, a))
    assert angle_error(a + 360.0, b) == pytest.approx(e, abs=1e-7)
