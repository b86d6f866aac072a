import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thermoplate.io import dumps, fmt, write_csv, write_json


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_seventeen_digits_round_trip(x):
    assert float(fmt(x)) == x
    assert json.loads(dumps({"x": x}))["x"] == x


def test_json_conversions():
    obj = {"a": np.float64(0.1), "b": np.arange(3), "c": (1, 2.5), "d": np.bool_(True),
           "e": float("nan"), "f": 1 + 2j, "g": None, "h": []}
    back = json.loads(dumps(obj))
    assert back == {"a": 0.1, "b": [0, 1, 2], "c": [1, 2.5], "d": True, "e": None,
                    "f": {"re": 1.0, "im": 2.0}, "g": None, "h": []}
    assert "0.10000000000000001" in dumps(obj)


def test_json_is_deterministic(tmp_path):
    obj = {"rows": [[1.0, 2.0], [3.0, float("inf")]], "name": "x"}
    write_json(tmp_path / "a.json", obj)
    write_json(tmp_path / "b.json", obj)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_csv_formatting(tmp_path):
    write_csv(tmp_path / "t.csv", ["t", "v", "name"], [[0.1, np.float64(1 / 3), "x"], [2, float("nan"), "y"]])
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["t", "v", "name"]
    assert rows[1] == ["0.10000000000000001", "0.33333333333333331", "x"]
    assert rows[2][1] == "nan"
    assert float(rows[1][1]) == pytest.approx(1 / 3, rel=0, abs=0)
