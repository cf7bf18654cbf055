import copy
import logging

import numpy as np

from src.exceptions import DataError, ShapeError
from src.models.scaler import FeatureScaler
from src.models.schemas import ModelKind, SedCnnConfig
from src.nncore import layers
from src.nncore.modules import BatchNorm2d, Conv2d, Dense, MaxPool2d, ReLU, Sequential
from src.nncore.params import LayerParams
from src.nncore.utils import FLOAT32, Tensor, glorot_uniform

logger = logging.getLogger(__name__)


class SedCnn:
    """
    Convolutional sound event classifier with one sigmoid output per class.

    Every block is conv 3x3 -> batch norm -> ReLU -> max pool, followed by a
    dense head over the flattened feature maps. Inputs are one-second feature
    windows of shape [mels, frames] (or a batch [B, mels, frames]); they are
    clamped and standardized by the model's ``FeatureScaler`` first.

    Parameters:
    config (SedCnnConfig): Geometry; ``num_classes`` must equal len(class_names).
    class_names (list[str]): Output order of the classes.
    rng (np.random.Generator): Source of the Glorot initialization.
    """

    kind = ModelKind.SED_CNN

    def __init__(
        self,
        config: SedCnnConfig,
        class_names: list[str],
        rng: np.random.Generator,
        dtype=FLOAT32,
    ):
        if config.num_classes != len(class_names):
            raise ShapeError(
                f"config has {config.num_classes} classes but {len(class_names)} names were given"
            )
        self.config = config
        self.class_names = list(class_names)
        self.scaler = FeatureScaler(dtype)
        blocks = []
        in_channels = 1
        for index in range(config.num_conv_blocks):
            prefix = f"block{index}"
            blocks.append(
                Sequential(
                    prefix,
                    [
                        Conv2d(f"{prefix}.conv", in_channels, config.conv_filters, config.kernel_size, rng, dtype=dtype),
                        BatchNorm2d(f"{prefix}.bn", config.conv_filters, dtype=dtype),
                        ReLU(f"{prefix}.relu"),
                        MaxPool2d(f"{prefix}.pool", config.pool),
                    ],
                )
            )
            in_channels = config.conv_filters
        self.features = Sequential("features", blocks)
        self.head = Dense("head", config.flat_features, config.num_classes, rng, dtype=dtype)
        self._feature_shape = None

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def dtype(self):
        return self.head.weight.value.dtype

    def named_parameters(self) -> list[tuple[str, LayerParams]]:
        params = self.features.parameters() + self.head.parameters()
        return [(param.name, param) for param in params]

    def parameters(self) -> list[LayerParams]:
        return [param for _, param in self.named_parameters()]

    def named_buffers(self) -> dict[str, Tensor]:
        buffers = dict(self.scaler.buffers())
        buffers.update(self.features.buffers())
        return buffers

    def state_tensors(self) -> dict[str, Tensor]:
        """All checkpointed tensors: parameters, BN running statistics, scaler."""
        state = {name: param.value for name, param in self.named_parameters()}
        state.update(self.named_buffers())
        return state

    def load_state(self, state: dict[str, Tensor]) -> None:
        expected = self.state_tensors()
        missing = sorted(set(expected) - set(state))
        unexpected = sorted(set(state) - set(expected))
        if missing or unexpected:
            raise ShapeError(f"state mismatch: missing {missing}, unexpected {unexpected}")
        for name, target in expected.items():
            if state[name].shape != target.shape:
                raise ShapeError(f"{name}: shape {state[name].shape} != {target.shape}")
            target[...] = state[name]

    def _prepare(self, x: Tensor) -> Tensor:
        x = np.asarray(x)
        if x.ndim == 2:
            x = x[np.newaxis]
        expected = (self.config.input_mels, self.config.input_frames)
        if x.ndim != 3 or x.shape[1:] != expected:
            raise ShapeError(f"expected input [B, {expected[0]}, {expected[1]}], got {x.shape}")
        return self.scaler.transform(x)[:, np.newaxis]

    def forward_logits(self, x: Tensor, training: bool = False) -> Tensor:
        """
        Pre-sigmoid class scores.

        Parameters:
        x (Tensor): [mels, frames] or [B, mels, frames] raw feature windows.
        training (bool, optional): Batch statistics + caches for backward. Defaults to False.

        Returns:
        Tensor: Logits of shape [B, num_classes].
        """
        maps = self.features.forward(self._prepare(x), training)
        self._feature_shape = maps.shape if training else None
        return self.head.forward(maps.reshape(maps.shape[0], -1), training)

    def backward(self, grad_logits: Tensor) -> None:
        """Back-propagates d(loss)/d(logits) into every parameter gradient."""
        if self._feature_shape is None:
            raise ShapeError("SedCnn.backward called without a training-mode forward")
        grad = self.head.backward(grad_logits)
        self.features.backward(grad.reshape(self._feature_shape))

    def predict_logits(self, x: Tensor, batch_size: int = 64) -> Tensor:
        x = np.asarray(x)
        chunks = [
            self.forward_logits(x[start : start + batch_size])
            for start in range(0, len(x), batch_size)
        ]
        if not chunks:
            return np.zeros((0, self.num_classes), dtype=self.dtype)
        return np.concatenate(chunks)

    def predict_proba(self, x: Tensor, batch_size: int = 64) -> Tensor:
        return layers.sigmoid(self.predict_logits(x, batch_size))

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def cast(self, dtype) -> "SedCnn":
        self.features.cast(dtype)
        self.head.cast(dtype)
        self.scaler.cast(dtype)
        return self

    def copy(self) -> "SedCnn":
        return copy.deepcopy(self)


def build_source(
    config: SedCnnConfig, class_names: list[str], rng: np.random.Generator
) -> SedCnn:
    """
    Builds a freshly initialized source model for ``class_names``.

    Parameters:
    config (SedCnnConfig): Geometry; ``num_classes`` is replaced by len(class_names).
    class_names (list[str]): The N classes of the source domain.
    rng (np.random.Generator): Initialization stream.

    Returns:
    SedCnn: The untrained model.

    Raises:
    DataError: If the class list is empty or has duplicates.
    """
    if not class_names:
        raise DataError("a source model needs at least one class")
    if len(set(class_names)) != len(class_names):
        raise DataError(f"duplicate class names: {class_names}")
    model = SedCnn(config.with_classes(len(class_names)), class_names, rng)
    logger.debug(f"built source model for {class_names}")
    return model


def migrate_weights(source: SedCnn, new_class: str, rng: np.random.Generator) -> SedCnn:
    """
    Expands a trained N-class model into an N+1-class target model.

    Convolution, batch-norm and scaler tensors are copied bit-exact; the N
    existing output rows keep their indices and values, and the new class takes
    index N with a Glorot-uniform row and zero bias.

    Parameters:
    source (SedCnn): Trained N-class model (left untouched).
    new_class (str): Name of the class to add.
    rng (np.random.Generator): Stream for the new output row.

    Returns:
    SedCnn: The N+1-class target model.

    Raises:
    DataError: If ``new_class`` is already a source class.
    """
    if new_class in source.class_names:
        raise DataError(f"class {new_class!r} is already learned by the source model")
    target = source.copy()
    old = source.head
    if old.out_features != source.num_classes:
        raise ShapeError(
            f"source head has {old.out_features} rows for {source.num_classes} classes"
        )
    fan_in = old.in_features
    new_row = glorot_uniform(rng, (1, fan_in), fan_in, source.num_classes + 1, old.weight.value.dtype)
    weight = np.concatenate([old.weight.value, new_row], axis=0)
    bias = np.concatenate([old.bias.value, np.zeros(1, dtype=old.bias.value.dtype)])
    target.head = Dense.from_values("head", weight, bias)
    target.class_names = source.class_names + [new_class]
    target.config = source.config.with_classes(target.num_classes)
    logger.debug(f"migrated {source.class_names} -> {target.class_names}")
    return target
