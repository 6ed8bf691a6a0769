import json
import math

import jsonschema
import numpy as np
import pytest

from bichoquard.grid import Grid, load_snapshot
from bichoquard.reports import (
    SCHEMA_VERSION,
    dumps,
    fmt_float,
    load_schema,
    report_envelope,
    write_csv,
    write_json,
    write_snapshot,
)

CONFIG = {"command": "solve", "mu": 2.0, "beta": 0.0, "c": 1.0, "nl": "power:p=4", "grid": 8,
          "box": 8.0, "seed": 0, "out": "x", "workers": 1}


@pytest.mark.parametrize("x,text", [(0.1, "0.10000000000000001"), (1.0, "1"), (-2.5e-300, "-2.5e-300"),
                                    (math.nan, "nan"), (math.inf, "inf")])
def test_fmt_float(x, text):
    assert fmt_float(x) == text


def test_dumps_round_trips_floats_exactly():
    values = list(np.random.default_rng(0).normal(size=20) * 10.0 ** np.arange(-10, 10))
    back = json.loads(dumps({"v": values}))["v"]
    assert back == values


def test_dumps_handles_numpy_and_nonfinite():
    text = dumps({"a": np.float64(1.5), "b": np.arange(3), "c": np.bool_(True), "d": math.nan, "e": (1, 2)})
    assert json.loads(text) == {"a": 1.5, "b": [0, 1, 2], "c": True, "d": None, "e": [1, 2]}


def test_schema_is_valid_and_accepts_envelope():
    schema = load_schema()
    jsonschema.Draft202012Validator.check_schema(schema)
    env = report_envelope("solve", CONFIG, {"error": "boom"}, status="error")
    jsonschema.validate(json.loads(dumps(env)), schema)
    assert env["schema_version"] == SCHEMA_VERSION


def test_schema_rejects_incomplete_results():
    env = report_envelope("solve", CONFIG, {"E": 1.0}, status="ok")
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(json.loads(dumps(env)), load_schema())
    bad = dict(env, extra=1)
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(json.loads(dumps(bad)), load_schema())


def test_csv_header_and_rows(tmp_path):
    rows = [{"c": 0.5, "E": 1.0 / 3, "flag": True}, {"c": 1.0, "E": math.nan, "flag": ""}]
    path = write_csv(rows, tmp_path, "t.csv", header={"mu": 2.0, "nl": "power:p=4"})
    lines = path.read_text().splitlines()
    assert lines[:3] == ["# mu=2", "# nl=power:p=4", "c,E,flag"]
    assert lines[3] == "0.5,0.33333333333333331,true"
    assert lines[4] == "1,nan,"


def test_writers_are_byte_deterministic(tmp_path):
    env = report_envelope("solve", CONFIG, {"x": [0.1, 0.2]})
    a = write_json(env, tmp_path / "a").read_bytes()
    b = write_json(env, tmp_path / "b").read_bytes()
    assert a == b


def test_snapshot_writer(tmp_path):
    u = Grid(4, 2.0).random(np.random.default_rng(0))
    path = write_snapshot(u, tmp_path / "deep" / "dir")
    assert path.name == "state.bch4"
    assert np.array_equal(load_snapshot(path).data, u.data)


def test_unwritable_target_names_the_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        write_json({}, blocker / "sub")
