import numpy as np

from src.exceptions import ShapeError
from src.nncore.utils import Tensor


class LayerParams:
    """
    A named learnable tensor together with its gradient.

    Parameters:
    name (str): Identifier, unique within a model (e.g. ``block0.conv.weight``).
    value (Tensor): Parameter values.
    grad (Tensor, optional): Gradient of the same shape. Defaults to zeros.
    """

    def __init__(self, name: str, value: Tensor, grad: Tensor | None = None):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value) if grad is None else grad
        if self.grad.shape != self.value.shape:
            raise ShapeError(
                f"{name}: gradient shape {self.grad.shape} != value shape {self.value.shape}"
            )

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return int(self.value.size)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.value)

    def set_grad(self, grad: Tensor) -> None:
        if grad.shape != self.value.shape:
            raise ShapeError(
                f"{self.name}: gradient shape {grad.shape} != value shape {self.value.shape}"
            )
        self.grad = grad.astype(self.value.dtype, copy=False)

    def cast(self, dtype) -> None:
        self.value = self.value.astype(dtype)
        self.grad = self.grad.astype(dtype)

    def __repr__(self) -> str:
        return f"LayerParams(name={self.name!r}, shape={self.shape})"
