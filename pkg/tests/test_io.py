import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from maxstab import io

dims = st.tuples(st.integers(1, 3), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4))
cplx = st.complex_numbers(allow_nan=False, allow_infinity=False, max_magnitude=1e6)


@settings(max_examples=30, deadline=None)
@given(dims.flatmap(lambda s: arrays(complex, s, elements=cplx)), st.floats(1e-6, 10))
def test_raw_round_trip(tmp_path_factory, arr, h):
    path = tmp_path_factory.mktemp("raw") / "f.raw"
    io.write_raw(path, arr, h)
    back, h2 = io.read_raw(path)
    assert np.array_equal(back, arr) and h2 == h


def test_raw_layout_is_x_fastest(tmp_path):
    a = np.arange(8, dtype=complex).reshape(2, 2, 2)
    io.write_raw(tmp_path / "a.raw", a, 0.5)
    raw = (tmp_path / "a.raw").read_bytes()
    vals = np.frombuffer(raw[io._HEADER.size :], "<c16")
    assert list(vals.real[:2]) == [a[0, 0, 0].real, a[1, 0, 0].real]


def test_raw_rejects_foreign_files(tmp_path):
    (tmp_path / "bad.raw").write_bytes(b"\0" * 64)
    with pytest.raises(ValueError):
        io.read_raw(tmp_path / "bad.raw")


def test_json_handles_numpy_and_complex(tmp_path):
    io.write_json(tmp_path / "a.json", {"x": np.float64(1.5), "z": 1 + 2j, "v": np.arange(2), "b": np.bool_(True)})
    d = json.loads((tmp_path / "a.json").read_text())
    assert d == {"x": 1.5, "z": {"re": 1.0, "im": 2.0}, "v": [0, 1], "b": True}


def test_csv_union_of_keys(tmp_path):
    io.write_csv(tmp_path / "t.csv", [{"a": 1}, {"a": 2, "b": np.float64(0.5)}])
    assert (tmp_path / "t.csv").read_text().splitlines() == ["a,b", "1,", "2,0.5"]
