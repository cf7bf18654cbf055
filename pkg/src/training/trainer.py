import logging
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.exceptions import DataError, TrainingError
from src.metrics.scoring import f1_segment
from src.nncore.utils import Tensor
from src.training.dataset import ExampleSet
from src.training.losses import bce_with_logits
from src.training.optim import AdamState, adam_step
from src.training.schemas import EarlyStopConfig, EpochRecord, TrainConfig

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["epoch", "train_loss", "val_f1", "best_f1", "stopped_flag"]

MetricFn = Callable[[object, int], float]


class EarlyStopState:
    """
    Tracks the best validation F1 and decides when training halts.

    Training stops once ``patience`` epochs pass without improvement or when
    ``max_epochs`` is reached. The first evaluated epoch always counts as an
    improvement.
    """

    def __init__(self, config: EarlyStopConfig):
        self.patience = config.patience
        self.max_epochs = config.max_epochs
        self.best_f1 = 0.0
        self.best_epoch = 0
        self.epochs_since_improvement = 0
        self.best_weights: dict[str, Tensor] | None = None

    def update(self, epoch: int, f1: float) -> bool:
        if self.best_epoch == 0 or f1 > self.best_f1:
            self.best_f1 = max(self.best_f1, f1)
            self.best_epoch = epoch
            self.epochs_since_improvement = 0
            return True
        self.epochs_since_improvement += 1
        return False

    def should_stop(self, epoch: int) -> bool:
        return self.epochs_since_improvement >= self.patience or epoch >= self.max_epochs


class TrainingLog:
    def __init__(self):
        self.records: list[EpochRecord] = []
        self.best_epoch = 0

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    def to_frame(self) -> pd.DataFrame:
        rows = [record.model_dump() for record in self.records]
        frame = pd.DataFrame(rows, columns=LOG_COLUMNS)
        return frame.astype({"stopped_flag": int})

    def to_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.6f")


def is_frozen(name: str, freeze: Iterable[str]) -> bool:
    """True if ``name`` equals a freeze entry or sits under it as a dotted prefix."""
    return any(name == entry or name.startswith(entry + ".") for entry in freeze)


def snapshot(model) -> dict[str, Tensor]:
    state = {name: param.value.copy() for name, param in model.named_parameters()}
    state.update({name: value.copy() for name, value in model.named_buffers().items()})
    return state


def restore(model, state: dict[str, Tensor]) -> None:
    for name, param in model.named_parameters():
        param.value[...] = state[name]
    for name, value in model.named_buffers().items():
        value[...] = state[name]


def validation_f1(model, examples: ExampleSet, threshold: float) -> float:
    if examples.class_names != model.class_names:
        raise DataError(
            f"validation classes {examples.class_names} differ from model classes {model.class_names}"
        )
    predictions = model.predict_proba(examples.features)
    return f1_segment(predictions, examples.labels, threshold).micro_f1


def train(
    model,
    train_set: ExampleSet,
    val_set: ExampleSet,
    config: TrainConfig,
    rng: np.random.Generator,
    freeze: Iterable[str] = (),
    metric_fn: MetricFn | None = None,
):
    """
    Mini-batch Adam training on BCE with F1-based early stopping.

    Each epoch shuffles the training examples with ``rng``, steps every
    non-frozen parameter and then scores the validation split (segment micro
    F1 at the configured threshold unless ``metric_fn`` is given). The best
    scoring weights are restored at the end. Frozen parameters are never
    stepped and frozen BatchNorm statistics are restored after every step.

    Parameters:
    model (SedCnn | AdapterComposite): Model to train in place.
    train_set (ExampleSet): Training examples, labels aligned with the model classes.
    val_set (ExampleSet): Validation examples.
    config (TrainConfig): Batch size, optimizer and early-stopping settings.
    rng (np.random.Generator): Shuffling stream.
    freeze (Iterable[str], optional): Names or dotted prefixes excluded from updates.
    metric_fn (Callable, optional): ``metric_fn(model, epoch) -> float`` replacing validation F1.

    Returns:
    tuple[model, TrainingLog]: The model (best weights restored) and the per-epoch log.

    Raises:
    DataError: If the training set is empty or its classes differ from the model's.
    TrainingError: If the loss or a gradient becomes non-finite.
    """
    if len(train_set) == 0:
        raise DataError("training set is empty")
    if train_set.class_names != model.class_names:
        raise DataError(
            f"training classes {train_set.class_names} differ from model classes {model.class_names}"
        )
    freeze = list(freeze)
    trainable = [(name, param) for name, param in model.named_parameters() if not is_frozen(name, freeze)]
    frozen_buffers = {
        name: value.copy() for name, value in model.named_buffers().items() if is_frozen(name, freeze)
    }
    if metric_fn is None:
        def metric_fn(current, epoch):
            return validation_f1(current, val_set, config.threshold)

    optimizer = AdamState(config.optimizer)
    stopper = EarlyStopState(config.early_stop)
    log = TrainingLog()
    epochs = tqdm(
        range(1, config.early_stop.max_epochs + 1),
        desc="epochs",
        disable=not config.progress,
    )
    for epoch in epochs:
        total = 0.0
        for features, labels in train_set.batches(config.batch_size, rng):
            model.zero_grad()
            logits = model.forward_logits(features, training=True)
            loss, grad = bce_with_logits(logits, labels)
            model.backward(grad)
            adam_step(trainable, optimizer)
            for name, value in model.named_buffers().items():
                if name in frozen_buffers:
                    value[...] = frozen_buffers[name]
            total += loss * len(features)
        train_loss = total / len(train_set)
        if not np.isfinite(train_loss):
            raise TrainingError(f"training loss became non-finite at epoch {epoch}")

        val_f1 = float(metric_fn(model, epoch))
        if stopper.update(epoch, val_f1):
            stopper.best_weights = snapshot(model)
        stop = stopper.should_stop(epoch)
        log.append(
            EpochRecord(
                epoch=epoch,
                train_loss=train_loss,
                val_f1=val_f1,
                best_f1=stopper.best_f1,
                stopped_flag=stop,
            )
        )
        logger.debug(f"epoch {epoch}: loss={train_loss:.5f} val_f1={val_f1:.4f} best={stopper.best_f1:.4f}")
        if stop:
            break

    log.best_epoch = stopper.best_epoch
    if stopper.best_weights is not None:
        restore(model, stopper.best_weights)
        logger.info(
            f"training stopped after {len(log.records)} epochs, best epoch {stopper.best_epoch} "
            f"(val F1 {stopper.best_f1:.4f})"
        )
    return model, log
