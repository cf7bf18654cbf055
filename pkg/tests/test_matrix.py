from unittest.mock import patch

import pytest

from src.datagen.generator import generate_dataset
from src.datagen.labels import build_examples
from src.datagen.schemas import Regime
from src.exceptions import DataError, MatrixError, ScenarioError, ShapeError
from src.metrics.matrix import evaluate, run_ablation, run_matrix, scenario_id
from src.metrics.schemas import OVERALL, SCORE_COLUMNS, MatrixConfig, ScenarioReport
from src.metrics.scoring import f1_segment
from src.models.adapter import NeuralAdapter, compose
from src.models.schemas import AdapterConfig
from src.models.sedcnn import build_source, migrate_weights
from src.nncore.layers import sigmoid


def fake_report(scenario):
    return ScenarioReport(scenario=scenario, **{column: 0.5 for column in SCORE_COLUMNS})


@pytest.fixture
def composite_and_data(small_config, generator_config, rng):
    source = build_source(small_config, ["a", "b"], rng)
    target = migrate_weights(source, "c", rng)
    composite = compose(source, NeuralAdapter(2, 3, rng, AdapterConfig(hidden=4)), target)
    splits = generate_dataset(["a", "b", "c"], Regime.CLEAN, (1, 1, 2), 5, generator_config)
    return composite, build_examples(splits.test, ["a", "b", "c"])


def test_scenario_id_uses_one_based_positions():
    assert scenario_id(["x", "y", "z", "w"], ["x", "z", "w"]) == "C1C3C4"


def test_ablation_matches_branch_scores(composite_and_data):
    composite, test_set = composite_and_data
    result = run_ablation(composite, test_set)
    branches = composite.branch_logits(test_set.features)
    for key in "ABC":
        expected = f1_segment(sigmoid(branches[key]), test_set.labels).micro_f1
        assert getattr(result, f"f1_{key}") == pytest.approx(expected)


def test_ablation_and_evaluate_reject_foreign_datasets(composite_and_data, generator_config):
    composite, _ = composite_and_data
    splits = generate_dataset(["a", "b"], Regime.CLEAN, (1, 1, 1), 5, generator_config)
    other = build_examples(splits.test, ["a", "b"])
    with pytest.raises(DataError):
        run_ablation(composite, other)
    with pytest.raises(DataError):
        evaluate(composite, other)


def test_evaluate_column_subset(composite_and_data):
    composite, test_set = composite_and_data
    probabilities = composite.predict_proba(test_set.features)
    expected = f1_segment(probabilities, test_set.labels, classes=[2]).micro_f1
    assert evaluate(composite, test_set, [2]).micro_f1 == pytest.approx(expected)


def test_two_class_matrix_gives_rows_and_overall(matrix_config):
    reports = run_matrix(["a", "b"], Regime.CLEAN, matrix_config, seed=3)
    assert [report.scenario for report in reports] == ["C2", "C1", OVERALL]
    assert reports[0].new_class == "a"
    assert reports[0].source_classes == ["b"]
    for report in reports:
        for column in SCORE_COLUMNS:
            assert 0.0 <= getattr(report, column) <= 1.0
    assert set(reports[0].per_class["adapter"]) == {"a", "b"}


def test_matrix_is_deterministic_under_a_seed(matrix_config):
    first = run_matrix(["a", "b"], Regime.NOISY, matrix_config, seed=9)
    second = run_matrix(["a", "b"], Regime.NOISY, matrix_config, seed=9)
    assert [report.row() for report in first] == [report.row() for report in second]


def test_matrix_rejects_degenerate_class_lists(matrix_config):
    with pytest.raises(DataError):
        run_matrix(["a"], Regime.CLEAN, matrix_config, seed=0)
    with pytest.raises(DataError):
        run_matrix(["a", "a"], Regime.CLEAN, matrix_config, seed=0)


def test_failures_are_collected_with_completed_rows(matrix_config):
    def flaky(classes, new_class, regime, config, seed):
        if new_class == "b":
            raise ShapeError("corrupted features")
        return fake_report(new_class)

    with patch("src.metrics.matrix.run_scenario", side_effect=flaky):
        with pytest.raises(MatrixError) as info:
            run_matrix(["a", "b", "c"], Regime.CLEAN, matrix_config, seed=0)
    error = info.value
    assert len(error.failures) == 1
    assert error.failures[0].scenario == "C1C3"
    assert [report.scenario for report in error.reports] == ["a", "c"]
    assert error.exit_code == 4


def test_threaded_matrix_keeps_class_order(matrix_config):
    calls = []

    def record(index, report):
        calls.append(index)

    config = matrix_config.model_copy(update={"workers": 3})
    with patch("src.metrics.matrix.run_scenario", side_effect=lambda c, n, r, cfg, s: fake_report(n)):
        reports = run_matrix(["a", "b", "c"], Regime.CLEAN, config, seed=0, on_complete=record)
    assert [report.scenario for report in reports] == ["a", "b", "c", OVERALL]
    assert sorted(calls) == [0, 1, 2]


def test_threaded_matrix_propagates_unexpected_errors(matrix_config):
    config = matrix_config.model_copy(update={"workers": 2})
    with patch("src.metrics.matrix.run_scenario", side_effect=RuntimeError("boom")):
        with pytest.raises(RuntimeError):
            run_matrix(["a", "b"], Regime.CLEAN, config, seed=0)


def test_scenario_errors_pass_through(matrix_config):
    with patch("src.metrics.matrix.run_scenario", side_effect=ScenarioError("C1", "diverged")):
        with pytest.raises(MatrixError) as info:
            run_matrix(["a", "b"], Regime.CLEAN, matrix_config, seed=0)
    assert len(info.value.failures) == 2
    assert info.value.reports == []


def test_matrix_config_checks_geometry(generator_config, small_config):
    with pytest.raises(ValueError):
        MatrixConfig(generator=generator_config, model=small_config.model_copy(update={"input_mels": 32}))
