import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spincurv.report import SCHEMA_VERSION, atomic_write, convergence_table, dumps, export_field, write_csv, write_json

leaf = st.one_of(
    st.none(),
    st.booleans(),
    st.integers(-10**12, 10**12),
    st.floats(allow_nan=False, allow_infinity=False),
    st.text(max_size=8),
)
tree = st.recursive(leaf, lambda c: st.lists(c, max_size=4) | st.dictionaries(st.text(max_size=6), c, max_size=4), max_leaves=20)


@settings(max_examples=100, deadline=None)
@given(tree)
def test_dumps_is_valid_and_deterministic(obj):
    a = dumps(obj)
    assert a == dumps(json.loads(a) if a.strip() != "null" else None)
    json.loads(a)


@settings(max_examples=100, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_floats_round_trip_exactly(x):
    assert json.loads(dumps({"v": x}))["v"] == x


def test_key_order_and_numpy_values():
    a = dumps({"b": np.float64(1.5), "a": np.arange(3), "c": {"z": np.bool_(True), "y": 2}})
    b = dumps({"c": {"y": 2, "z": True}, "a": [0, 1, 2], "b": 1.5})
    assert a == b
    assert a.index('"a"') < a.index('"b"') < a.index('"c"')


def test_non_finite_and_empty_sections():
    d = json.loads(dumps({"nan": float("nan"), "inf": math.inf, "x": [], "y": {}, "z": None, "k": 1}))
    assert d == {"k": 1}


def test_complex_values():
    assert json.loads(dumps({"c": 1 + 2j})) == {"c": {"im": 2.0, "re": 1.0}}


def test_write_json_adds_schema(tmp_path):
    p = write_json(tmp_path / "r.json", {"x": 1})
    assert json.loads(p.read_text())["schema_version"] == SCHEMA_VERSION
    assert oct(os.stat(p).st_mode & 0o777) != oct(0o600)


def test_atomic_write_leaves_no_partial_file(tmp_path):
    target = tmp_path / "out.txt"
    atomic_write(target, "old")

    class Boom:
        def __len__(self):
            raise RuntimeError

    with pytest.raises(TypeError):
        atomic_write(target, Boom())
    assert target.read_text() == "old"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["out.txt"]


def test_csv_full_precision(tmp_path):
    p = write_csv(tmp_path / "t.csv", ("a", "b"), [(0.1, "x"), (1 / 3, 2)])
    lines = p.read_text().splitlines()
    assert lines[0] == "a,b"
    assert float(lines[2].split(",")[0]) == 1 / 3


def test_convergence_table_orders():
    rows = convergence_table([0.4, 0.2, 0.1], [1.6, 0.4, 0.1])
    assert math.isnan(rows[0][2])
    assert rows[1][2] == pytest.approx(4.0) and rows[2][3] == pytest.approx(2.0)


def test_export_field_sidecar(tmp_path):
    arr = np.arange(24, dtype=complex).reshape(2, 3, 4)
    p, s = export_field(tmp_path / "f.npy", arr, {"h": 0.5})
    assert np.array_equal(np.load(p), arr)
    meta = json.loads(s.read_text())
    assert meta["shape"] == [2, 3, 4] and meta["dtype"] == "complex128" and meta["h"] == 0.5
