import json
import logging
import math

import numpy as np
import pandas as pd
import pytest
from openpyxl import load_workbook

from src.reports import export_excel, write_tables
from src.utils import (
    SCHEMA_VERSION,
    load_config_file,
    load_results_json,
    save_results_json,
    setup_logging,
    to_serializable,
)


def test_results_json_roundtrip(tmp_path):
    path = tmp_path / "out" / "r.json"
    save_results_json({"loss": np.float64(1.5), "n": np.int64(3), "bad": math.nan}, str(path))
    data = load_results_json(str(path))
    assert data == {"schema_version": SCHEMA_VERSION, "loss": 1.5, "n": 3, "bad": None}


def test_results_json_version_mismatch(tmp_path):
    path = tmp_path / "r.json"
    path.write_text(json.dumps({"schema_version": 99}), encoding="utf-8")
    with pytest.raises(ValueError):
        load_results_json(str(path))


def test_to_serializable_nested():
    value = {1: (np.array([1.0, np.inf]), np.bool_(True)), "x": [np.float32(0.5)]}
    assert to_serializable(value) == {"1": [[1.0, None], True], "x": [0.5]}


def test_config_file_keys_are_lowercased(tmp_path):
    path = tmp_path / "run.env"
    path.write_text('SEED = 7\nPreset="smooth"\n', encoding="utf-8")
    assert load_config_file(str(path)) == {"seed": "7", "preset": "smooth"}
    with pytest.raises(ValueError):
        load_config_file(str(tmp_path / "missing.env"))


def test_setup_logging_without_files(tmp_path):
    logger = setup_logging(None, None, level="info")
    assert logger.name == "src"
    assert len(logger.handlers) == 1
    assert logger.handlers[0].level == logging.INFO


def test_setup_logging_with_files(tmp_path):
    logger = setup_logging(str(tmp_path / "logs"), str(tmp_path / "debug"))
    logger.info("mensaje")
    assert len(logger.handlers) == 3
    assert list((tmp_path / "logs").glob("modelo_*.log"))
    setup_logging(None, None)


def test_write_tables_and_excel(tmp_path):
    tables = {
        "summary": pd.DataFrame({"metric": ["a", "b"], "value": [1.0, np.nan]}),
        "fields": pd.DataFrame({"field": ["x"], "n": [np.int64(2)]}),
    }
    paths = write_tables(tables, str(tmp_path), "run", excel=True)
    assert [p.name for p in paths] == ["run_summary.csv", "run_fields.csv", "run.xlsx"]
    wb = load_workbook(tmp_path / "run.xlsx")
    assert wb.sheetnames == ["summary", "fields"]
    ws = wb["summary"]
    assert ws.cell(row=1, column=1).value == "metric"
    assert ws.cell(row=3, column=2).value is None
    assert ws.cell(row=1, column=1).font.bold


def test_export_excel_truncates_sheet_names(tmp_path):
    long_name = "field_decomposition_por_campo_largo"
    export_excel({long_name: pd.DataFrame({"a": [1]})}, tmp_path / "t.xlsx")
    assert load_workbook(tmp_path / "t.xlsx").sheetnames == [long_name[:31]]
