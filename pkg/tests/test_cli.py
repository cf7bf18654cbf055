import json

import pandas as pd
import pytest

from main import main
from src.datagen.repo import dataset_load
from src.models.repo import CONFIG_FIELDS, checkpoint_load
from src.models.schemas import ModelKind
from src.models.utils import parameter_digest

SMALL_RUN = {
    "generator": {"input_mels": 16, "frames_per_second": 16},
    "model": {"input_mels": 16, "input_frames": 16, "conv_filters": 4, "num_conv_blocks": 2},
    "adapter": {"hidden": 8},
    "train": {"batch_size": 16, "early_stop": {"patience": 1, "max_epochs": 2}},
}


@pytest.fixture
def run_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(SMALL_RUN))
    return str(path)


@pytest.fixture
def workspace(tmp_path, run_config):
    data = tmp_path / "data"
    code = main(
        ["gen-data", "--config", run_config, "--classes", "dog,siren,horn", "--counts", "3,2,2",
         "--seed", "4", "--out", str(data), "--annotations"]
    )
    assert code == 0
    source = tmp_path / "source.sedm"
    code = main(
        ["train-source", "--config", run_config, "--data", str(data), "--classes", "dog,siren",
         "--out", str(source), "--log", str(tmp_path / "source_log.csv")]
    )
    assert code == 0
    return {"data": data, "source": source, "config": run_config, "root": tmp_path}


def test_gen_data_writes_splits(workspace, capsys):
    data = workspace["data"]
    for split in ("train", "val", "test"):
        assert dataset_load(data / f"{split}.sedd").class_names == ["dog", "siren", "horn"]
        assert (data / f"{split}_annotations.csv").exists()
    assert json.loads((data / "run_config.json").read_text())["counts"] == [3, 2, 2]


def test_train_source_saves_model_and_log(workspace):
    model = checkpoint_load(workspace["source"])
    assert model.kind is ModelKind.SED_CNN
    assert model.class_names == ["dog", "siren"]
    log = pd.read_csv(workspace["root"] / "source_log.csv")
    assert 1 <= len(log) <= 3


def test_adapter_flow_end_to_end(workspace, capsys):
    root = workspace["root"]
    composite = root / "adapter.sedm"
    code = main(
        ["train-incremental", "--config", workspace["config"], "--source", str(workspace["source"]),
         "--method", "adapter", "--new-class", "horn", "--data", str(workspace["data"]),
         "--out", str(composite), "--log", str(root / "adapter_log.csv")]
    )
    assert code == 0
    loaded = checkpoint_load(composite)
    assert loaded.class_names == ["dog", "siren", "horn"]
    assert parameter_digest(loaded.source) == parameter_digest(checkpoint_load(workspace["source"]))

    report = root / "ablation.json"
    assert main(["ablation", "--composite", str(composite), "--data", str(workspace["data"]), "--report", str(report)]) == 0
    assert set(json.loads(report.read_text())) == {"f1_A", "f1_B", "f1_C"}

    scores = root / "new.csv"
    assert main(["evaluate", "--model", str(composite), "--data", str(workspace["data"]),
                 "--classes", "new", "--report", str(scores)]) == 0
    assert "horn" in pd.read_csv(scores)["class_name"].tolist()

    target = root / "target.sedm"
    assert main(["extract-target", "--composite", str(composite), "--out", str(target)]) == 0
    assert checkpoint_load(target).kind is ModelKind.SED_CNN

    capsys.readouterr()
    assert main(["inspect", "--model", str(composite)]) == 0
    assert "ADAPTER_COMPOSITE" in capsys.readouterr().out


def test_simple_flow(workspace):
    out = workspace["root"] / "simple.sedm"
    code = main(
        ["train-incremental", "--config", workspace["config"], "--source", str(workspace["source"]),
         "--method", "simple", "--new-class", "horn", "--data", str(workspace["data"]), "--out", str(out),
         "--log", str(workspace["root"] / "simple_log.csv")]
    )
    assert code == 0
    assert checkpoint_load(out).num_classes == 3


def test_known_class_and_plain_model_ablation_are_data_errors(workspace, capsys):
    code = main(
        ["train-incremental", "--config", workspace["config"], "--source", str(workspace["source"]),
         "--new-class", "dog", "--data", str(workspace["data"]), "--out", str(workspace["root"] / "x.sedm")]
    )
    assert code == 3
    assert main(["ablation", "--composite", str(workspace["source"]), "--data", str(workspace["data"])]) == 3
    assert "error:" in capsys.readouterr().err


def test_missing_new_class_is_usage_error(workspace):
    with pytest.raises(SystemExit) as info:
        main(["train-incremental", "--source", str(workspace["source"]), "--data", str(workspace["data"])])
    assert info.value.code == 2


def test_zero_counts_exit_with_data_error(tmp_path, run_config):
    code = main(["gen-data", "--config", run_config, "--classes", "a,b", "--counts", "3,0,2", "--out", str(tmp_path)])
    assert code == 3


def test_invalid_config_file_is_usage_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"threshold": 2.0}))
    assert main(["gen-data", "--config", str(path), "--classes", "a,b", "--out", str(tmp_path)]) == 2
    assert main(["gen-data", "--config", str(tmp_path / "none.json"), "--classes", "a,b"]) == 2


def test_missing_checkpoint(tmp_path):
    assert main(["inspect", "--model", str(tmp_path / "none.sedm")]) == 3


def test_run_matrix_writes_reports(tmp_path, run_config):
    out = tmp_path / "run"
    code = main(
        ["run-matrix", "--config", run_config, "--classes", "a,b", "--regime", "clean,noisy",
         "--counts", "2,1,1", "--max-epochs", "1", "--out", str(out)]
    )
    assert code == 0
    matrix = pd.read_csv(out / "reports" / "clean" / "matrix.csv")
    assert matrix["scenario"].tolist() == ["C2", "C1", "Overall"]
    assert (out / "reports" / "noisy" / "matrix.md").exists()
    assert (out / "reports" / "clean" / "scenarios" / "C2.json").exists()
    assert pd.read_csv(out / "reports" / "ablation_gaps.csv")["regime"].tolist() == ["clean", "noisy"]
    assert json.loads((out / "run_config.json").read_text())["train"]["early_stop"]["max_epochs"] == 1


def test_corrupted_checkpoint_text_is_data_error(workspace, tmp_path, capsys):
    data = bytearray(workspace["source"].read_bytes())
    # first byte of the first class name in a source checkpoint
    data[9 + 4 * len(CONFIG_FIELDS) + 8] = 0xFF
    broken = tmp_path / "broken.sedm"
    broken.write_bytes(bytes(data))
    assert main(["inspect", "--model", str(broken)]) == 3
    assert "UTF-8" in capsys.readouterr().err


def test_subset_on_plain_model_warns(workspace, caplog):
    caplog.set_level("WARNING")
    root = workspace["root"]
    assert main(["gen-data", "--config", workspace["config"], "--classes", "dog,siren", "--counts", "2,1,1",
                 "--out", str(root / "plain")]) == 0
    assert main(["evaluate", "--model", str(workspace["source"]), "--data", str(root / "plain"),
                 "--classes", "new"]) == 0
    assert "'siren' as the new one" in caplog.text


def test_reruns_write_identical_bytes(tmp_path, run_config):
    for name in ("one", "two"):
        out = tmp_path / name
        assert main(["gen-data", "--config", run_config, "--classes", "a,b", "--counts", "3,1,1", "--seed", "6",
                     "--out", str(out / "data")]) == 0
        assert main(["train-source", "--config", run_config, "--data", str(out / "data"), "--seed", "6",
                     "--out", str(out / "source.sedm"), "--log", str(out / "log.csv")]) == 0
        assert main(["run-matrix", "--config", run_config, "--classes", "a,b", "--counts", "2,1,1",
                     "--max-epochs", "1", "--seed", "6", "--out", str(out / "run")]) == 0
    one, two = tmp_path / "one", tmp_path / "two"
    files = [
        "data/train.sedd",
        "data/test.sedd",
        "source.sedm",
        "run/reports/clean/matrix.csv",
        "run/reports/clean/matrix.md",
        "run/reports/clean/scenarios/C1.json",
        "run/reports/clean/scenarios/C2.json",
        "run/reports/ablation_gaps.csv",
    ]
    for name in files:
        assert (one / name).read_bytes() == (two / name).read_bytes(), name


def test_single_regime_matrix_reports_ablation_gap(tmp_path, run_config):
    out = tmp_path / "run"
    assert main(["run-matrix", "--config", run_config, "--classes", "a,b", "--counts", "2,1,1",
                 "--max-epochs", "1", "--out", str(out)]) == 0
    gaps = pd.read_csv(out / "reports" / "ablation_gaps.csv")
    assert gaps["regime"].tolist() == ["clean"]
    assert gaps["gap_C_B"].iloc[0] == pytest.approx(gaps["f1_C"].iloc[0] - gaps["f1_B"].iloc[0], abs=2e-4)
