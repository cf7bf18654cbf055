import copy
import logging

import numpy as np

from src.exceptions import ShapeError
from src.models.schemas import AdapterConfig, ModelKind
from src.models.sedcnn import SedCnn
from src.nncore import layers
from src.nncore.modules import Dense, ReLU, Sequential
from src.nncore.params import LayerParams
from src.nncore.utils import FLOAT32, Tensor

logger = logging.getLogger(__name__)


class NeuralAdapter:
    """
    Two dense layers mapping the source output space (N) to the target's (N+1).

    layer1: dense N -> hidden with ReLU; layer2: dense hidden -> N+1, linear.
    """

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        config: AdapterConfig | None = None,
        dtype=FLOAT32,
    ):
        self.config = config or AdapterConfig()
        self.layer1 = Dense("layer1", in_features, self.config.hidden, rng, dtype=dtype)
        self.layer2 = Dense("layer2", self.config.hidden, out_features, rng, dtype=dtype)
        self.network = Sequential("adapter", [self.layer1, ReLU("relu"), self.layer2])

    @property
    def in_features(self) -> int:
        return self.layer1.in_features

    @property
    def out_features(self) -> int:
        return self.layer2.out_features

    def named_parameters(self) -> list[tuple[str, LayerParams]]:
        return [(param.name, param) for param in self.network.parameters()]

    def state_tensors(self) -> dict[str, Tensor]:
        return {name: param.value for name, param in self.named_parameters()}

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        return self.network.forward(x, training)

    def backward(self, grad: Tensor) -> Tensor:
        return self.network.backward(grad)

    def cast(self, dtype) -> None:
        self.network.cast(dtype)


class AdapterComposite:
    """
    Frozen source + trainable adapter + trainable target, merged by logit sum.

    Outputs:
    A = sigmoid(adapter(source logits)), B = sigmoid(target logits),
    C = sigmoid(adapter logits + target logits). Training goes through C and
    only reaches the adapter and the target; the source always runs in
    inference mode and never receives a gradient.
    """

    kind = ModelKind.ADAPTER_COMPOSITE

    def __init__(self, source: SedCnn, adapter: NeuralAdapter, target: SedCnn):
        self.source = source
        self.adapter = adapter
        self.target = target

    @property
    def class_names(self) -> list[str]:
        return self.target.class_names

    @property
    def num_classes(self) -> int:
        return self.target.num_classes

    @property
    def frozen_prefixes(self) -> list[str]:
        return ["source"]

    def named_parameters(self) -> list[tuple[str, LayerParams]]:
        named = [(f"source.{name}", param) for name, param in self.source.named_parameters()]
        named += [(f"adapter.{name}", param) for name, param in self.adapter.named_parameters()]
        named += [(f"target.{name}", param) for name, param in self.target.named_parameters()]
        return named

    def parameters(self) -> list[LayerParams]:
        return [param for _, param in self.named_parameters()]

    def named_buffers(self) -> dict[str, Tensor]:
        buffers = {f"source.{name}": value for name, value in self.source.named_buffers().items()}
        buffers.update({f"target.{name}": value for name, value in self.target.named_buffers().items()})
        return buffers

    def _adapter_input(self, source_logits: Tensor) -> Tensor:
        if self.adapter.config.adapter_input == "probabilities":
            return layers.sigmoid(source_logits)
        return source_logits

    def branch_logits(self, x: Tensor, training: bool = False) -> dict[str, Tensor]:
        """
        Logits of the adapter branch (A), the target branch (B) and the merger (C).

        Parameters:
        x (Tensor): [mels, frames] or [B, mels, frames] feature windows.
        training (bool, optional): Training mode for adapter and target. Defaults to False.

        Returns:
        dict[str, Tensor]: Keys "A", "B", "C", each [B, N+1].
        """
        source_logits = self.source.forward_logits(x, training=False)
        adapter_logits = self.adapter.forward(self._adapter_input(source_logits), training)
        target_logits = self.target.forward_logits(x, training)
        return {"A": adapter_logits, "B": target_logits, "C": adapter_logits + target_logits}

    def branch_outputs(self, x: Tensor) -> dict[str, Tensor]:
        return {key: layers.sigmoid(value) for key, value in self.branch_logits(x).items()}

    def forward_logits(self, x: Tensor, training: bool = False) -> Tensor:
        return self.branch_logits(x, training)["C"]

    def backward(self, grad_logits: Tensor) -> None:
        # d(C)/d(A) = d(C)/d(B) = identity
        self.adapter.backward(grad_logits)
        self.target.backward(grad_logits)

    def predict_branch_logits(self, x: Tensor, batch_size: int = 64) -> dict[str, Tensor]:
        x = np.asarray(x)
        chunks = [self.branch_logits(x[start : start + batch_size]) for start in range(0, len(x), batch_size)]
        if not chunks:
            empty = np.zeros((0, self.num_classes), dtype=self.target.dtype)
            return {"A": empty, "B": empty, "C": empty}
        return {key: np.concatenate([chunk[key] for chunk in chunks]) for key in ("A", "B", "C")}

    def predict_logits(self, x: Tensor, batch_size: int = 64) -> Tensor:
        return self.predict_branch_logits(x, batch_size)["C"]

    def predict_proba(self, x: Tensor, batch_size: int = 64) -> Tensor:
        return layers.sigmoid(self.predict_logits(x, batch_size))

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def cast(self, dtype) -> "AdapterComposite":
        self.source.cast(dtype)
        self.adapter.cast(dtype)
        self.target.cast(dtype)
        return self

    def copy(self) -> "AdapterComposite":
        return copy.deepcopy(self)


def compose(source: SedCnn, adapter: NeuralAdapter, target: SedCnn) -> AdapterComposite:
    """
    Bridges a source model and its migrated target through an adapter.

    Parameters:
    source (SedCnn): Trained N-class model; frozen inside the composite.
    adapter (NeuralAdapter): N -> N+1 adapter.
    target (SedCnn): N+1-class model, usually from ``migrate_weights``.

    Returns:
    AdapterComposite: The merged model.

    Raises:
    ShapeError: If the dimension chain N -> N+1 is inconsistent.
    """
    n = source.num_classes
    if adapter.in_features != n:
        raise ShapeError(f"adapter input {adapter.in_features} != source classes {n}")
    if adapter.out_features != target.num_classes:
        raise ShapeError(
            f"adapter output {adapter.out_features} != target classes {target.num_classes}"
        )
    if target.num_classes != n + 1:
        raise ShapeError(f"target must have N+1={n + 1} classes, has {target.num_classes}")
    if target.class_names[:n] != source.class_names:
        raise ShapeError(
            f"target classes {target.class_names} do not extend source classes {source.class_names}"
        )
    logger.debug(f"composed adapter {n} -> {adapter.config.hidden} -> {n + 1}")
    return AdapterComposite(source, adapter, target)


def extract_target(composite: AdapterComposite) -> SedCnn:
    """Returns a standalone copy of the target branch (output B)."""
    return composite.target.copy()
