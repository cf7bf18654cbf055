"""Trend checks on generated datasets. Run with ``pytest -m slow``."""
import numpy as np
import pytest

from src.datagen.schemas import Regime
from src.metrics.matrix import run_matrix
from src.metrics.schemas import DESK_MATRIX, OVERALL

CLASSES = ["dog", "siren", "horn", "drill"]
SEEDS = (2020, 2021, 2022)


@pytest.fixture(scope="module")
def overall_rows():
    config = DESK_MATRIX.model_copy(update={"workers": 4})
    rows = {}
    for seed in SEEDS:
        reports = run_matrix(CLASSES, Regime.CLEAN, config, seed=seed)
        assert reports[-1].scenario == OVERALL
        rows[seed] = reports[-1]
    return rows


def seed_mean(rows, column):
    return float(np.mean([getattr(row, column) for row in rows.values()]))


@pytest.mark.slow
def test_source_model_reaches_high_f1_on_its_classes(overall_rows):
    assert seed_mean(overall_rows, "ms_ds") >= 0.90


@pytest.mark.slow
def test_adapter_stays_close_to_source_on_old_classes(overall_rows):
    assert seed_mean(overall_rows, "adapter_ds") >= seed_mean(overall_rows, "ms_ds") - 0.05


@pytest.mark.slow
def test_adapter_forgets_no_more_than_simple_transfer(overall_rows):
    assert seed_mean(overall_rows, "adapter_ds") >= seed_mean(overall_rows, "simple_ds")


@pytest.mark.slow
def test_adapter_learns_the_new_class(overall_rows):
    assert seed_mean(overall_rows, "adapter_new") >= 0.70


@pytest.mark.slow
@pytest.mark.parametrize("seed", SEEDS)
def test_merged_output_beats_each_branch(overall_rows, seed):
    row = overall_rows[seed]
    assert row.f1_C >= row.f1_B
    assert row.f1_C >= row.f1_A
