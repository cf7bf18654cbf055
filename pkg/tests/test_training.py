import unittest

import numpy as np
import pandas as pd
import pytest

from src.exceptions import DataError, ShapeError, TrainingError
from src.models.sedcnn import build_source
from src.nncore.params import LayerParams
from src.training.dataset import ExampleSet
from src.training.losses import bce_loss, bce_with_logits
from src.training.optim import AdamState, adam_step
from src.training.schemas import AdamConfig, EarlyStopConfig, TrainConfig
from src.training.trainer import LOG_COLUMNS, EarlyStopState, is_frozen, train


def random_examples(rng, config, class_names, count=12):
    features = rng.normal(size=(count, config.input_mels, config.input_frames)).astype(np.float32)
    labels = (rng.uniform(size=(count, len(class_names))) > 0.5).astype(np.float32)
    return ExampleSet(features, labels, class_names)


class TestAdam(unittest.TestCase):
    def test_first_step_matches_hand_computation(self):
        param = LayerParams("w", np.zeros(1), grad=np.ones(1))
        state = AdamState(AdamConfig())
        adam_step([("w", param)], state)
        # m_hat = v_hat = 1 after bias correction
        self.assertAlmostEqual(float(param.value[0]), -1e-3 / (1.0 + 1e-8), places=12)
        self.assertEqual(state.t, 1)

    def test_second_step_uses_incremented_timestep(self):
        param = LayerParams("w", np.zeros(1), grad=np.full(1, 2.0))
        state = AdamState(AdamConfig(lr=0.1))
        adam_step([("w", param)], state)
        adam_step([("w", param)], state)
        self.assertEqual(state.t, 2)
        self.assertAlmostEqual(float(param.value[0]), -0.2, places=6)

    def test_non_finite_gradient_leaves_parameters_untouched(self):
        good = LayerParams("good", np.ones(2), grad=np.ones(2))
        bad = LayerParams("bad", np.ones(2), grad=np.array([1.0, np.nan]))
        state = AdamState()
        with self.assertRaises(TrainingError) as context:
            adam_step([("good", good), ("bad", bad)], state)
        self.assertIn("bad", context.exception.detail)
        np.testing.assert_array_equal(good.value, np.ones(2))
        self.assertEqual(state.t, 0)

    def test_zero_learning_rate_changes_nothing(self):
        param = LayerParams("w", np.array([0.5, -2.0]), grad=np.array([3.0, -1.0]))
        adam_step([("w", param)], AdamState(AdamConfig(lr=0.0)))
        np.testing.assert_array_equal(param.value, np.array([0.5, -2.0]))

    def test_constant_gradient_decreases_every_step(self):
        param = LayerParams("w", np.zeros(1), grad=np.ones(1))
        state = AdamState(AdamConfig())
        previous = float(param.value[0])
        for _ in range(10):
            adam_step([("w", param)], state)
            self.assertLess(float(param.value[0]), previous)
            previous = float(param.value[0])


class TestLosses(unittest.TestCase):
    def test_zero_logits_give_log_two(self):
        loss, grad = bce_with_logits(np.zeros((2, 2)), np.array([[0.0, 1.0], [1.0, 0.0]]))
        self.assertAlmostEqual(loss, np.log(2.0))
        np.testing.assert_allclose(grad, np.array([[0.5, -0.5], [-0.5, 0.5]]) / 4)

    def test_probability_form_agrees_with_logit_form(self):
        logits = np.array([[-3.0, 0.2], [1.5, 4.0]])
        targets = np.array([[0.0, 1.0], [1.0, 1.0]])
        from src.nncore.layers import sigmoid

        fused, _ = bce_with_logits(logits, targets)
        plain, _ = bce_loss(sigmoid(logits), targets)
        self.assertAlmostEqual(fused, plain, places=10)

    def test_extreme_logits_stay_finite(self):
        loss, grad = bce_with_logits(np.array([[50.0, -50.0]]), np.array([[0.0, 1.0]]))
        self.assertTrue(np.isfinite(loss))
        self.assertTrue(np.all(np.isfinite(grad)))
        self.assertAlmostEqual(loss, 50.0, places=6)

    def test_rejects_soft_targets(self):
        with self.assertRaises(DataError):
            bce_with_logits(np.zeros((1, 2)), np.array([[0.5, 1.0]]))

    def test_rejects_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            bce_with_logits(np.zeros((1, 2)), np.zeros((1, 3)))


def test_early_stop_state_counts_patience():
    state = EarlyStopState(EarlyStopConfig(patience=2, max_epochs=10))
    assert state.update(1, 0.0)
    assert not state.update(2, 0.0)
    assert not state.should_stop(2)
    assert not state.update(3, 0.0)
    assert state.should_stop(3)
    assert state.best_epoch == 1


def test_is_frozen_matches_exact_names_and_dotted_prefixes():
    assert is_frozen("source.block0.conv.weight", ["source"])
    assert is_frozen("head.bias", ["head.bias"])
    assert not is_frozen("sourcex.head.bias", ["source"])
    assert not is_frozen("target.head.bias", ["source"])


def test_rigged_metric_stops_at_best_epoch_plus_patience(small_config, rng):
    names = ["a", "b"]
    model = build_source(small_config, names, rng)
    examples = random_examples(rng, small_config, names)
    scores = {1: 0.5, 2: 0.6, 3: 0.4, 4: 0.4, 5: 0.4, 6: 0.4}
    best_head = {}

    def metric(current, epoch):
        if epoch == 2:
            best_head["weight"] = current.head.weight.value.copy()
        return scores[epoch]

    config = TrainConfig(batch_size=4, early_stop=EarlyStopConfig(patience=2, max_epochs=6))
    model, log = train(model, examples, examples, config, rng, metric_fn=metric)

    assert log.best_epoch == 2
    assert [record.epoch for record in log.records] == [1, 2, 3, 4]
    assert log.records[-1].stopped_flag
    assert not any(record.stopped_flag for record in log.records[:-1])
    np.testing.assert_array_equal(model.head.weight.value, best_head["weight"])


def test_max_epochs_caps_training(small_config, rng):
    names = ["a"]
    model = build_source(small_config, names, rng)
    examples = random_examples(rng, small_config, names)
    config = TrainConfig(batch_size=6, early_stop=EarlyStopConfig(patience=50, max_epochs=3))
    _, log = train(model, examples, examples, config, rng, metric_fn=lambda current, epoch: epoch / 10)
    assert len(log.records) == 3
    assert log.records[-1].stopped_flag


def test_fully_frozen_model_is_unchanged(small_config, rng):
    names = ["a", "b"]
    model = build_source(small_config, names, rng)
    examples = random_examples(rng, small_config, names)
    before = model.predict_logits(examples.features)
    config = TrainConfig(batch_size=4, early_stop=EarlyStopConfig(patience=1, max_epochs=2))
    model, _ = train(model, examples, examples, config, rng, freeze=["block0", "block1", "head"])
    np.testing.assert_array_equal(model.predict_logits(examples.features), before)


def test_training_log_csv(small_config, rng, tmp_path):
    names = ["a"]
    model = build_source(small_config, names, rng)
    examples = random_examples(rng, small_config, names)
    config = TrainConfig(batch_size=4, early_stop=EarlyStopConfig(patience=1, max_epochs=3))
    _, log = train(model, examples, examples, config, rng, metric_fn=lambda current, epoch: 0.3)
    path = tmp_path / "log.csv"
    log.to_csv(path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == LOG_COLUMNS
    assert frame["stopped_flag"].tolist() == [0, 1]


def test_train_rejects_empty_and_mismatched_sets(small_config, rng):
    model = build_source(small_config, ["a", "b"], rng)
    empty = ExampleSet(np.zeros((0, 16, 16), dtype=np.float32), np.zeros((0, 2), dtype=np.float32), ["a", "b"])
    with pytest.raises(DataError):
        train(model, empty, empty, TrainConfig(), rng)
    other = random_examples(rng, small_config, ["a", "c"])
    with pytest.raises(DataError):
        train(model, other, other, TrainConfig(), rng)


def test_training_reduces_loss_on_generated_data(small_config, tiny_examples, rng):
    names = tiny_examples["train"].class_names
    model = build_source(small_config, names, rng)
    model.scaler.fit(tiny_examples["train"].features)
    config = TrainConfig(
        batch_size=8,
        optimizer=AdamConfig(lr=1e-2),
        early_stop=EarlyStopConfig(patience=8, max_epochs=8),
    )
    _, log = train(model, tiny_examples["train"], tiny_examples["val"], config, rng)
    assert log.records[-1].train_loss < log.records[0].train_loss


def test_example_set_batches_cover_every_example(rng):
    examples = ExampleSet(np.arange(10 * 4, dtype=np.float32).reshape(10, 2, 2), np.zeros((10, 1)), ["a"])
    seen = np.concatenate([features[:, 0, 0] for features, _ in examples.batches(3, rng)])
    assert sorted(seen.tolist()) == sorted(examples.features[:, 0, 0].tolist())
    with pytest.raises(DataError):
        examples.select_classes(["b"])


def test_separable_two_class_set_reaches_high_validation_f1(small_config, separable_set, rng):
    train_set = separable_set(rng, ["a", "b"])
    val_set = separable_set(rng, ["a", "b"], count=16)
    model = build_source(small_config, ["a", "b"], rng)
    model.scaler.fit(train_set.features)
    config = TrainConfig(
        batch_size=8,
        optimizer=AdamConfig(lr=1e-2),
        early_stop=EarlyStopConfig(patience=20, max_epochs=200),
    )
    _, log = train(model, train_set, val_set, config, rng)
    assert max(record.val_f1 for record in log.records) >= 0.95
