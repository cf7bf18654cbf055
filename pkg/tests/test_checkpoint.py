import struct
import unittest

import numpy as np
from faker import Faker

from src.exceptions import CheckpointError
from src.models.adapter import NeuralAdapter, compose
from src.models.repo import CONFIG_FIELDS, MAGIC, CheckpointRepository, checkpoint_load, checkpoint_save
from src.models.schemas import AdapterConfig, ModelKind, SedCnnConfig
from src.models.sedcnn import build_source, migrate_weights
from src.models.utils import parameter_digest
from src.nncore.utils import make_rng


class TestCheckpointRepository(unittest.TestCase):
    def setUp(self):
        self.faker = Faker()
        self.rng = make_rng(self.faker.random_int(min=0, max=10_000))
        self.config = SedCnnConfig(input_mels=16, input_frames=16, conv_filters=3, num_conv_blocks=2)
        self.class_names = self.faker.words(nb=3, unique=True)
        self.repo = CheckpointRepository()
        self.source = build_source(self.config, self.class_names, self.rng)
        self.source.scaler.mean[...] = 0.25
        self.source.scaler.std[...] = 1.5

    def make_composite(self, adapter_input="logits"):
        target = migrate_weights(self.source, "new_class", self.rng)
        adapter = NeuralAdapter(3, 4, self.rng, AdapterConfig(hidden=5, adapter_input=adapter_input))
        return compose(self.source, adapter, target)

    def test_sedcnn_round_trip_is_byte_identical(self):
        data = self.repo.encode(self.source)
        loaded = self.repo.decode(data)
        self.assertEqual(loaded.kind, ModelKind.SED_CNN)
        self.assertEqual(loaded.class_names, self.class_names)
        self.assertEqual(loaded.config, self.source.config)
        self.assertEqual(parameter_digest(loaded), parameter_digest(self.source))
        self.assertEqual(self.repo.encode(loaded), data)

    def test_composite_round_trip_keeps_branches(self):
        composite = self.make_composite("probabilities")
        data = self.repo.encode(composite)
        loaded = self.repo.decode(data)
        self.assertEqual(loaded.kind, ModelKind.ADAPTER_COMPOSITE)
        self.assertEqual(loaded.adapter.config.adapter_input, "probabilities")
        self.assertEqual(parameter_digest(loaded.source), parameter_digest(composite.source))
        self.assertEqual(self.repo.encode(loaded), data)
        x = self.rng.normal(size=(4, 16, 16)).astype(np.float32)
        np.testing.assert_array_equal(loaded.predict_logits(x), composite.predict_logits(x))

    def test_scaler_and_running_stats_are_stored(self):
        loaded = self.repo.decode(self.repo.encode(self.source))
        self.assertEqual(float(loaded.scaler.mean[0]), 0.25)
        self.assertEqual(float(loaded.scaler.std[0]), 1.5)
        self.assertIn("block1.bn.running_var", loaded.named_buffers())

    def test_bad_magic(self):
        data = b"XXXX" + self.repo.encode(self.source)[4:]
        with self.assertRaises(CheckpointError) as context:
            self.repo.decode(data)
        self.assertIn("magic", context.exception.detail)

    def test_unsupported_version(self):
        data = MAGIC + struct.pack("<I", 99) + self.repo.encode(self.source)[8:]
        with self.assertRaises(CheckpointError) as context:
            self.repo.decode(data)
        self.assertIn("version 99", context.exception.detail)

    def test_unknown_kind(self):
        data = bytearray(self.repo.encode(self.source))
        data[8] = 7
        with self.assertRaises(CheckpointError) as context:
            self.repo.decode(bytes(data))
        self.assertIn("kind 7", context.exception.detail)

    def test_truncated_file(self):
        data = self.repo.encode(self.make_composite())
        with self.assertRaises(CheckpointError) as context:
            self.repo.decode(data[: len(data) - 10])
        self.assertIn("truncated", context.exception.detail)

    def test_corrupted_class_name(self):
        data = bytearray(self.repo.encode(self.source))
        # magic, version, kind, config integers, class count, first name length
        data[9 + 4 * len(CONFIG_FIELDS) + 8] = 0xFF
        with self.assertRaises(CheckpointError) as context:
            self.repo.decode(bytes(data))
        self.assertIn("UTF-8", context.exception.detail)

    def test_trailing_bytes(self):
        with self.assertRaises(CheckpointError):
            self.repo.decode(self.repo.encode(self.source) + b"\x00")

    def test_missing_file(self):
        with self.assertRaises(CheckpointError):
            self.repo.load("/nonexistent/model.sedm")


def test_save_and_load_through_files(tmp_path, small_config, rng):
    model = build_source(small_config, ["a", "b"], rng)
    path = checkpoint_save(model, tmp_path / "models" / "source.sedm")
    assert path.read_bytes()[:4] == MAGIC
    loaded = checkpoint_load(path)
    assert parameter_digest(loaded) == parameter_digest(model)
