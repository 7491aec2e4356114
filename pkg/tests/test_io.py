import numpy as np
import pytest

import racekit as rk
from racekit import io as rio
from racekit.errors import (
    CsvError,
    InvalidParameterError,
    NonFiniteValueError,
    RaggedRowError,
    ZeroVectorError,
)


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_csv_basic(tmp_path):
    ds = rk.load_csv(_write(tmp_path, "1.0,2.0\n3.0,4.0\n"))
    assert ds.points.shape == (2, 2)
    assert ds.points.tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert ds.labels is None
    assert ds.transform.mode == "none"


def test_load_csv_nan_reports_location(tmp_path):
    with pytest.raises(NonFiniteValueError) as err:
        rk.load_csv(_write(tmp_path, "1.0,NaN\n"))
    assert err.value.row == 1 and err.value.column == 2


def test_load_csv_header_mismatch(tmp_path):
    path = _write(tmp_path, "a,b\n1.0,2.0\n")
    with pytest.raises(CsvError) as err:
        rk.load_csv(path)  # header present but not declared
    assert err.value.row == 1
    ds = rk.load_csv(path, header=True)
    assert ds.points.shape == (1, 2)


def test_load_csv_ragged_row(tmp_path):
    with pytest.raises(RaggedRowError) as err:
        rk.load_csv(_write(tmp_path, "1.0,2.0\n3.0\n"))
    assert err.value.row == 2


def test_load_csv_custom_delimiter_and_infinity(tmp_path):
    ds = rk.load_csv(_write(tmp_path, "1.0;2.0\n"), delimiter=";")
    assert ds.points.tolist() == [[1.0, 2.0]]
    with pytest.raises(NonFiniteValueError):
        rk.load_csv(_write(tmp_path, "inf,1.0\n", name="inf.csv"))


def test_load_csv_label_column(tmp_path):
    path = _write(tmp_path, "1.0,2.0,0\n3.0,4.0,1\n")
    ds = rk.load_csv(path, label_column=2)
    assert ds.points.shape == (2, 2)
    assert ds.labels.tolist() == [0.0, 1.0]
    ds = rk.load_csv(path, label_column=-1)
    assert ds.labels.tolist() == [0.0, 1.0]
    with pytest.raises(InvalidParameterError):
        rk.load_csv(path, label_column=5)


def test_load_csv_empty_file(tmp_path):
    ds = rk.load_csv(_write(tmp_path, ""))
    assert len(ds) == 0


def test_scale_sphere():
    ds = rk.scale(rk.Dataset(np.array([[3.0, 4.0], [0.0, 2.0]])), "sphere")
    assert ds.points[0].tolist() == [0.6, 0.8]
    assert np.allclose(np.linalg.norm(ds.points, axis=1), 1.0)
    with pytest.raises(ZeroVectorError):
        rk.scale(rk.Dataset(np.array([[0.0, 0.0], [1.0, 1.0]])), "sphere")


def test_scale_cube_and_constant_feature():
    raw = np.array([[2.0, 7.0], [4.0, 7.0], [3.0, 7.0]])
    ds = rk.scale(rk.Dataset(raw), "cube")
    assert ds.points[:, 0].tolist() == [0.0, 1.0, 0.5]
    assert (ds.points[:, 1] == 0.5).all()  # constant feature convention
    assert ds.points.min() >= 0.0 and ds.points.max() <= 1.0


def test_apply_transform_reproduces_training_rows():
    rng = np.random.default_rng(2)
    raw = rng.uniform(-5, 5, size=(30, 3))
    cube = rk.scale(rk.Dataset(raw), "cube")
    assert np.array_equal(rk.apply_transform(cube.transform, raw), cube.points)
    sphere = rk.scale(rk.Dataset(raw), "sphere")
    assert np.array_equal(rk.apply_transform(sphere.transform, raw), sphere.points)
    # single query point maps like a matrix row
    one = rk.apply_transform(cube.transform, raw[4])
    assert np.array_equal(one, cube.points[4])


def test_apply_transform_sphere_rejects_zero_query():
    sphere = rk.scale(rk.Dataset(np.ones((3, 2))), "sphere")
    with pytest.raises(ZeroVectorError):
        rk.apply_transform(sphere.transform, np.zeros(2))


def test_scale_twice_is_rejected():
    ds = rk.scale(rk.Dataset(np.random.default_rng(0).uniform(1, 2, (5, 2))), "cube")
    with pytest.raises(InvalidParameterError):
        rk.scale(ds, "sphere")


def test_write_read_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    pts = rng.standard_normal((25, 4)) * np.logspace(-8, 8, 4)
    path = tmp_path / "round.csv"
    rk.write_csv(pts, path)
    again = rk.load_csv(path)
    assert np.array_equal(again.points, pts)


def test_stream_csv_feeds_build(tmp_path):
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((120, 2))
    path = tmp_path / "stream.csv"
    rk.write_csv(pts, path)
    fam = rk.new_family("srp", dim=2, depth=3, width=16, seed=5)
    streamed = rk.build((vec for _, vec in rk.stream_csv(path)), fam, rows=20)
    assert streamed == rk.build(pts, fam, rows=20)
