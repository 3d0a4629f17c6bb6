import json
import os
from pathlib import Path

import pytest

from recovery.core.estimators import KnnConfig, NnmfSgdConfig
from recovery.core.timeseries import KernelShape
from recovery.engine.config import load_config, resolve_jobs
from recovery.engine.errors import ConfigError

CONFIG = """\
input: data/ratings.csv
scale_min: 0
scale_max: 100
estimators:
  - name: mean
  - name: knn
    k: 5
  - name: nnmf_sgd
    f: 4
    max_iters: 50
sparsity: [0.2, 0.5]
iterations: 3
dilation:
  shape: gaussian
  width_seconds: 8
base_seed: 42
output: out
"""


def write(tmp_path, text, name="experiment.yaml"):
    data = tmp_path / "data"
    data.mkdir(exist_ok=True)
    (data / "ratings.csv").write_text("user,item,rating\nu1,i1,50\n")
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_config(tmp_path):
    config = load_config(write(tmp_path, CONFIG))
    assert config.input == tmp_path / "data" / "ratings.csv"
    assert config.output == tmp_path / "out"
    assert config.scale_bounds == (0.0, 100.0)
    assert isinstance(config.estimators[1], KnnConfig)
    assert config.estimators[1].k == 5
    assert isinstance(config.estimators[2], NnmfSgdConfig)
    assert config.kernel.shape is KernelShape.GAUSSIAN
    assert config.kernel.width_samples == 8

    plan = config.to_plan({"u1": "g"})
    assert plan.sparsity_levels == [0.2, 0.5]
    assert plan.n_iterations == 3
    assert plan.base_seed == 42
    assert plan.group_labels == {"u1": "g"}


def test_overrides_win(tmp_path):
    config = load_config(
        write(tmp_path, CONFIG),
        {"base_seed": 7, "clip": True, "output": Path("/elsewhere"), "jobs": None},
    )
    assert config.base_seed == 7
    assert config.clip
    assert config.output == Path("/elsewhere")
    assert config.jobs is None


def test_json_config(tmp_path):
    ratings = tmp_path / "data" / "ratings.csv"
    path = write(tmp_path, json.dumps({"input": str(ratings), "iterations": 2}), "experiment.json")
    config = load_config(path)
    assert config.input == ratings
    assert config.iterations == 2
    assert len(config.estimators) == 3


def test_error_reports_key_and_line(tmp_path):
    text = CONFIG.replace("    k: 5", "    k: 0")
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text))
    assert info.value.line == 7
    assert "estimators.1" in info.value.key
    assert str(info.value).startswith("line 7: ")


def test_unknown_key(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, CONFIG + "learning_rate: 0.1\n"))
    assert info.value.key == "learning_rate"
    assert info.value.line == 18


def test_missing_input_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, CONFIG.replace("data/ratings.csv", "data/nowhere.csv")))
    assert info.value.key == "input"
    assert info.value.line == 1
    assert info.value.exit_code == 2


def test_unknown_estimator(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, CONFIG.replace("name: mean", "name: svd")))


def test_bad_sparsity(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, CONFIG.replace("[0.2, 0.5]", "[0.2, 1.5]")))
    assert info.value.line == 11


def test_half_given_scale(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, CONFIG.replace("scale_max: 100\n", "")))


def test_malformed_yaml(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, "input: [unclosed\n"))
    assert info.value.line is not None


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


def test_resolve_jobs(monkeypatch):
    monkeypatch.delenv("RECOVERY_JOBS", raising=False)
    assert resolve_jobs(3) == 3
    assert resolve_jobs() == (os.cpu_count() or 1)
    monkeypatch.setenv("RECOVERY_JOBS", "5")
    assert resolve_jobs() == 5
    monkeypatch.setenv("RECOVERY_JOBS", "many")
    with pytest.raises(ConfigError):
        resolve_jobs()
