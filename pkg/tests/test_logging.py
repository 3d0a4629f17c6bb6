import json
import logging

import numpy as np

from recovery.engine.logging import log_step, setup_logging


def test_log_step_appends_jsonl(tmp_path):
    path = tmp_path / "run.jsonl"
    log_step("cell_done", {"sparsity": np.float64(0.5), "n_users": np.int64(3)}, path)
    log_step("write", {"files": [tmp_path / "report.csv"]}, path)
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert [entry["step"] for entry in lines] == ["cell_done", "write"]
    assert lines[0]["sparsity"] == 0.5
    assert lines[0]["n_users"] == 3
    assert lines[1]["files"] == [str(tmp_path / "report.csv")]
    assert "timestamp" in lines[0]


def test_log_step_without_file_goes_to_logger(caplog):
    with caplog.at_level(logging.INFO, logger="recovery"):
        log_step("load", {"n_users": 2})
    entry = json.loads(caplog.records[-1].getMessage())
    assert entry["step"] == "load"


def test_setup_logging_levels(tmp_path):
    setup_logging(tmp_path / "plain.log", verbose=True)
    assert logging.getLogger().level == logging.DEBUG
    logging.getLogger("recovery.test").debug("hello")
    assert "hello" in (tmp_path / "plain.log").read_text()
    setup_logging()
    assert logging.getLogger().level == logging.INFO
