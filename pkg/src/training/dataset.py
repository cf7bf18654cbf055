from typing import Iterator

import numpy as np

from src.exceptions import DataError, ShapeError
from src.nncore.utils import Tensor


class ExampleSet:
    """
    Model-ready examples: feature windows [M, mels, frames] and multi-label
    targets [M, K] aligned with ``class_names``.
    """

    def __init__(self, features: Tensor, labels: Tensor, class_names: list[str]):
        if features.ndim != 3:
            raise ShapeError(f"features must be [M, mels, frames], got {features.shape}")
        if labels.shape != (features.shape[0], len(class_names)):
            raise ShapeError(
                f"labels {labels.shape} do not match {features.shape[0]} examples x {len(class_names)} classes"
            )
        self.features = features
        self.labels = labels
        self.class_names = list(class_names)

    def __len__(self) -> int:
        return int(self.features.shape[0])

    def select_classes(self, class_names: list[str]) -> "ExampleSet":
        """Restricts (and reorders) the label columns to ``class_names``."""
        missing = [name for name in class_names if name not in self.class_names]
        if missing:
            raise DataError(f"classes {missing} are not present in the examples")
        columns = [self.class_names.index(name) for name in class_names]
        return ExampleSet(self.features, self.labels[:, columns], class_names)

    def batches(
        self, batch_size: int, rng: np.random.Generator | None = None
    ) -> Iterator[tuple[Tensor, Tensor]]:
        order = rng.permutation(len(self)) if rng is not None else np.arange(len(self))
        for start in range(0, len(self), batch_size):
            index = order[start : start + batch_size]
            yield self.features[index], self.labels[index]
