import logging

import numpy as np

from src.exceptions import TrainingError
from src.models.adapter import AdapterComposite
from src.models.sedcnn import SedCnn
from src.models.utils import parameter_digest
from src.training.dataset import ExampleSet
from src.training.schemas import TrainConfig
from src.training.trainer import TrainingLog, train

logger = logging.getLogger(__name__)


def train_source(
    model: SedCnn,
    train_set: ExampleSet,
    val_set: ExampleSet,
    config: TrainConfig,
    rng: np.random.Generator,
) -> tuple[SedCnn, TrainingLog]:
    """
    Fits the input scaler on the source training windows, then trains every
    parameter on the N source classes.
    """
    model.scaler.fit(train_set.features)
    model, log = train(model, train_set, val_set, config, rng)
    logger.info(f"source model trained on {model.class_names}")
    return model, log


def train_simple_tl(
    target: SedCnn,
    train_set: ExampleSet,
    val_set: ExampleSet,
    config: TrainConfig,
    rng: np.random.Generator,
) -> tuple[SedCnn, TrainingLog]:
    """
    Simple transfer learning: fine-tunes all parameters of a migrated target
    on the N+1 target classes, with no source model involved.
    """
    target, log = train(target, train_set, val_set, config, rng)
    logger.info(f"simple TL trained on {target.class_names}")
    return target, log


def train_adapter_tl(
    composite: AdapterComposite,
    train_set: ExampleSet,
    val_set: ExampleSet,
    config: TrainConfig,
    rng: np.random.Generator,
) -> tuple[AdapterComposite, TrainingLog]:
    """
    Jointly trains the adapter and the target through the merged output C
    while the source stays frozen.

    Raises:
    TrainingError: If any source parameter changed during training.
    """
    before = parameter_digest(composite.source)
    composite, log = train(
        composite, train_set, val_set, config, rng, freeze=composite.frozen_prefixes
    )
    after = parameter_digest(composite.source)
    if before != after:
        raise TrainingError(f"source parameters changed during adapter training ({before} -> {after})")
    logger.info(f"adapter TL trained on {composite.class_names}, source digest {after[:12]}")
    return composite, log
