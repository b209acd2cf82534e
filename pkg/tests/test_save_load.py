import json
import logging

import numpy as np
import pytest

from utils.errors import DataError
from utils.save_load import (
    build_id, format_float, load_json, read_measurements, read_rate_table, sidecar_path, write_curve, write_json,
    write_rows,
)
from utils.types import CurveOutput


def _curve(config_hash="abc", scale=1.0):
    return CurveOutput(
        "nbar",
        [64.0, 200.0],
        {"p_up_static": [0.1 * scale, 1 / 3]},
        {"config_hash": config_hash, "eta": 0.014},
    )


def test_floats_round_trip():
    for value in (0.1, 1 / 3, 1e-300, 96000.0, np.float64(2.5e-7)):
        assert float(format_float(value)) == value


def test_build_id_is_short_and_stable():
    assert build_id() == build_id()
    assert len(build_id()) == 12
    int(build_id(), 16)


def test_write_rows(tmp_path):
    path = tmp_path / "out" / "table.csv"
    write_rows(["a", "b"], [[1, 0.1], ["x", np.float64(1 / 3)]], str(path))
    assert path.read_text(encoding="utf-8") == "a,b\n1,0.1\nx,0.3333333333333333\n"


def test_write_json_is_canonical(tmp_path):
    path = tmp_path / "data.json"
    write_json({"b": 1, "a": [1.5]}, str(path))
    text = path.read_text(encoding="utf-8")
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert load_json(str(path)) == {"a": [1.5], "b": 1}


def test_curve_and_sidecar(tmp_path):
    path = str(tmp_path / "curve.csv")
    assert write_curve(_curve(), path) is False
    with open(path, encoding="utf-8") as f:
        assert f.readline() == "nbar,p_up_static\n"
    with open(sidecar_path(path), encoding="utf-8") as f:
        assert json.load(f)["config_hash"] == "abc"


def test_rerun_of_same_config_is_verified(tmp_path, caplog):
    path = str(tmp_path / "curve.csv")
    write_curve(_curve(), path)
    with caplog.at_level(logging.INFO):
        assert write_curve(_curve(), path) is True
    assert "byte-identical" in caplog.text

    caplog.clear()
    with caplog.at_level(logging.WARNING):
        assert write_curve(_curve(scale=2.0), path) is False
    assert "differs" in caplog.text


def test_rerun_of_other_config_warns(tmp_path, caplog):
    path = str(tmp_path / "curve.csv")
    write_curve(_curve(), path)
    with caplog.at_level(logging.WARNING):
        assert write_curve(_curve(config_hash="def"), path) is False
    assert "different configuration" in caplog.text


def test_read_measurements_sorts_by_delay(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("delta_t_s,p_up,p_up_sigma\n0.002,0.8,0.01\n0.0,0.95,0.02\n0.001,0.9,0.01\n", encoding="utf-8")
    table = read_measurements(str(path))
    assert list(table["delta_t_s"]) == [0.0, 0.001, 0.002]
    assert list(table["p_up"]) == [0.95, 0.9, 0.8]
    assert list(table["p_up_sigma"]) == [0.02, 0.01, 0.01]
    assert "omega_t_opt" not in table


def test_read_measurements_errors(tmp_path):
    missing = tmp_path / "missing.csv"
    missing.write_text("delta_t_s,probability\n0.0,0.9\n", encoding="utf-8")
    with pytest.raises(DataError, match="p_up"):
        read_measurements(str(missing))

    bad = tmp_path / "bad.csv"
    bad.write_text("delta_t_s,p_up\n0.0,0.9\n0.001,oops\n", encoding="utf-8")
    with pytest.raises(DataError) as info:
        read_measurements(str(bad))
    assert info.value.line == 3

    empty = tmp_path / "empty.csv"
    empty.write_text("delta_t_s,p_up\n", encoding="utf-8")
    with pytest.raises(DataError, match="no data"):
        read_measurements(str(empty))

    with pytest.raises(DataError, match="not found"):
        read_measurements(str(tmp_path / "absent.csv"))


def test_read_rate_table(tmp_path):
    path = tmp_path / "rates.csv"
    path.write_text("omega_hz,heating_rate_per_s\n150000,96000\n300000,28000\n", encoding="utf-8")
    table = read_rate_table(str(path))
    assert list(table["omega_hz"]) == [150000.0, 300000.0]
    assert list(table["heating_rate_per_s"]) == [96000.0, 28000.0]


def test_load_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{\n\"a\": ,\n}\n", encoding="utf-8")
    with pytest.raises(DataError) as info:
        load_json(str(path))
    assert info.value.line == 2
