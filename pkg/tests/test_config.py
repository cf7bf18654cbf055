import json

import pytest
from pydantic import ValidationError

from config.run import load_run_config, merge, preset_values
from src.exceptions import UsageError
from src.metrics.schemas import DESK_MATRIX


def test_desk_preset_carries_desk_geometry():
    config = load_run_config(preset="dcase16")
    assert config.counts == (200, 50, 50)
    assert config.generator == DESK_MATRIX.generator
    assert config.model == DESK_MATRIX.model
    assert config.matrix_config().train == DESK_MATRIX.train


def test_full_preset_keeps_default_geometry():
    config = load_run_config(preset="dcase16", full=True)
    assert config.counts == (800, 200, 200)
    assert config.model.input_mels == 128
    assert "model" not in preset_values("us-8k", full=True)


def test_file_and_flags_override_preset(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"generator": {"snr_db": 5.0}, "seed": 3}))
    config = load_run_config(path, {"seed": 9, "counts": None}, preset="us-sed")
    assert config.generator.snr_db == 5.0
    assert config.generator.input_mels == DESK_MATRIX.generator.input_mels
    assert config.seed == 9
    assert config.regime.value == "noisy"


def test_merge_is_recursive_and_skips_none():
    assert merge({"a": {"b": 1, "c": 2}}, {"a": {"b": None, "c": 3}}) == {"a": {"b": 1, "c": 3}}


def test_unknown_preset_and_bad_values():
    with pytest.raises(UsageError):
        preset_values("esc50")
    with pytest.raises(ValidationError):
        load_run_config(overrides={"counts": [1, 0, 1]})
