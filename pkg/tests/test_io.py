import numpy as np
import pytest

from sparsecov import io
from sparsecov.exceptions import FileFormatError
from sparsecov.linalg import SparseEntrySet, center_columns


def test_csv_round_trip(tmp_path, rng):
    X = rng.standard_normal((7, 4))
    path = tmp_path / "x.csv"
    io.write_matrix(path, X)
    np.testing.assert_array_equal(io.read_matrix(path), X)


def test_csv_header(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("a,b\n1,2\n3,4\n")
    np.testing.assert_array_equal(io.read_matrix(path, header=True), [[1, 2], [3, 4]])
    with pytest.raises(FileFormatError):
        io.read_matrix(path)


def test_binary_round_trip_and_layout(tmp_path, rng):
    X = rng.standard_normal((5, 3))
    path = tmp_path / "x.bin"
    io.write_matrix(path, X)
    raw = path.read_bytes()
    assert raw[:8] == b"SCOVMAT1"
    assert int.from_bytes(raw[8:16], "little") == 5
    assert int.from_bytes(raw[16:24], "little") == 3
    assert np.frombuffer(raw[24:32], "<f8")[0] == X[0, 0]
    np.testing.assert_array_equal(io.read_matrix(path), X)


def test_binary_errors(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"SCOVMAT1" + (2).to_bytes(8, "little") + (2).to_bytes(8, "little") + b"\0" * 8)
    with pytest.raises(FileFormatError):
        io.read_binary_matrix(bad)
    short = tmp_path / "short.bin"
    short.write_bytes(b"SCOV")
    with pytest.raises(FileFormatError):
        io.read_binary_matrix(short)
    with pytest.raises(FileNotFoundError):
        io.read_matrix(tmp_path / "missing.csv")


def test_entries_round_trip(tmp_path, rng):
    cols = center_columns(rng.standard_normal((9, 5)))
    e = SparseEntrySet.from_pairs(cols, [4, 0, 2], [1, 3, 2])
    path = tmp_path / "e.csv"
    io.write_entries(path, e)
    lines = path.read_text().splitlines()
    assert [l.split(",")[:2] for l in lines] == [["0", "3"], ["2", "2"], ["4", "1"]]
    back = io.read_entries(path, 5)
    assert back.index_set() == e.index_set()
    np.testing.assert_array_equal(back.values, e.values)


def test_empty_entries(tmp_path):
    path = tmp_path / "e.csv"
    io.write_entries(path, SparseEntrySet([], [], [], 3))
    assert len(io.read_entries(path, 3)) == 0


def test_pairs(tmp_path):
    path = tmp_path / "t.csv"
    io.write_pairs(path, {(2, 1), (0, 0)})
    assert path.read_text() == "0,0\n2,1\n"
    assert io.read_pairs(path) == {(0, 0), (2, 1)}
