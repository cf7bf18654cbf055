import numpy as np
import pytest
from faker import Faker

from src.datagen.generator import generate_dataset
from src.datagen.labels import build_examples
from src.datagen.schemas import GeneratorConfig, Regime
from src.metrics.schemas import MatrixConfig
from src.models.schemas import AdapterConfig, SedCnnConfig
from src.nncore.utils import make_rng
from src.training.dataset import ExampleSet
from src.training.schemas import AdamConfig, EarlyStopConfig, TrainConfig

SMALL_MELS = 16
SMALL_FRAMES = 16


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def faker():
    fake = Faker()
    Faker.seed(2024)
    return fake


@pytest.fixture
def class_names(faker):
    return [f"{word}_{index}" for index, word in enumerate(faker.words(nb=4, unique=True))]


@pytest.fixture
def small_config():
    return SedCnnConfig(
        input_mels=SMALL_MELS,
        input_frames=SMALL_FRAMES,
        conv_filters=4,
        num_conv_blocks=2,
    )


@pytest.fixture
def generator_config():
    return GeneratorConfig(input_mels=SMALL_MELS, frames_per_second=SMALL_FRAMES)


@pytest.fixture
def fast_train():
    return TrainConfig(
        batch_size=16,
        optimizer=AdamConfig(lr=1e-2),
        early_stop=EarlyStopConfig(patience=3, max_epochs=4),
    )


@pytest.fixture
def tiny_splits(class_names, generator_config):
    return generate_dataset(class_names[:3], Regime.CLEAN, (4, 2, 2), 7, generator_config)


@pytest.fixture
def tiny_examples(tiny_splits, class_names):
    return {split: build_examples(collection, class_names[:3]) for split, collection in tiny_splits.items()}


@pytest.fixture
def matrix_config(small_config, generator_config):
    return MatrixConfig(
        counts=(3, 2, 2),
        generator=generator_config,
        model=small_config,
        adapter=AdapterConfig(hidden=8),
        train=TrainConfig(
            batch_size=16,
            optimizer=AdamConfig(lr=1e-2),
            early_stop=EarlyStopConfig(patience=2, max_epochs=2),
        ),
    )


@pytest.fixture
def separable_set():
    """Builds examples where class i lights up its own block of mel rows."""

    def build(rng, class_names, count=32):
        k = len(class_names)
        rows = SMALL_MELS // k
        labels = np.array([[(index >> column) & 1 for column in range(k)] for index in range(count)], dtype=np.float32)
        features = rng.normal(scale=0.1, size=(count, SMALL_MELS, SMALL_FRAMES)).astype(np.float32)
        for column in range(k):
            features[labels[:, column] == 1, column * rows : (column + 1) * rows, :] += 1.0
        return ExampleSet(features, labels, list(class_names))

    return build
