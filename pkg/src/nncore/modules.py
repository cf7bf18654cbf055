import numpy as np

from src.exceptions import ShapeError
from src.nncore import layers
from src.nncore.params import LayerParams
from src.nncore.utils import FLOAT32, Tensor, glorot_uniform


class Layer:
    """
    Stateful wrapper around a functional layer.

    A layer owns its learnable ``LayerParams``, any non-learnable buffers and
    the cache of its last training-mode forward call.
    """

    def __init__(self, name: str):
        self.name = name

    def parameters(self) -> list[LayerParams]:
        return []

    def buffers(self) -> dict[str, Tensor]:
        return {}

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        raise NotImplementedError

    def backward(self, grad: Tensor) -> Tensor:
        raise NotImplementedError

    def cast(self, dtype) -> None:
        for param in self.parameters():
            param.cast(dtype)
        for key, value in self.buffers().items():
            setattr(self, key.rsplit(".", 1)[-1], value.astype(dtype))

    def _missing_cache(self) -> ShapeError:
        return ShapeError(f"{self.name}: backward called without a training-mode forward")


class Conv2d(Layer):
    def __init__(
        self,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        padding: layers.Padding = "same",
        dtype=FLOAT32,
    ):
        super().__init__(name)
        fan_in = in_channels * kernel_size * kernel_size
        fan_out = out_channels * kernel_size * kernel_size
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        self.weight = LayerParams(f"{name}.weight", glorot_uniform(rng, shape, fan_in, fan_out, dtype))
        self.bias = LayerParams(f"{name}.bias", np.zeros(out_channels, dtype=dtype))
        self.padding = padding
        self._cache = None

    def parameters(self) -> list[LayerParams]:
        return [self.weight, self.bias]

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        out, cache = layers.conv2d_forward(x, self.weight.value, self.bias.value, self.padding)
        self._cache = cache if training else None
        return out

    def backward(self, grad: Tensor) -> Tensor:
        if self._cache is None:
            raise self._missing_cache()
        grad_input, grad_weight, grad_bias = layers.conv2d_backward(
            grad, self._cache, self.weight.value
        )
        self.weight.set_grad(grad_weight)
        self.bias.set_grad(grad_bias)
        return grad_input


class BatchNorm2d(Layer):
    def __init__(self, name: str, channels: int, dtype=FLOAT32):
        super().__init__(name)
        self.gamma = LayerParams(f"{name}.gamma", np.ones(channels, dtype=dtype))
        self.beta = LayerParams(f"{name}.beta", np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._cache = None

    def parameters(self) -> list[LayerParams]:
        return [self.gamma, self.beta]

    def buffers(self) -> dict[str, Tensor]:
        return {
            f"{self.name}.running_mean": self.running_mean,
            f"{self.name}.running_var": self.running_var,
        }

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        out, cache = layers.batchnorm2d_forward(
            x,
            self.gamma.value,
            self.beta.value,
            self.running_mean,
            self.running_var,
            training,
        )
        self._cache = cache if training else None
        return out

    def backward(self, grad: Tensor) -> Tensor:
        if self._cache is None:
            raise self._missing_cache()
        grad_input, grad_gamma, grad_beta = layers.batchnorm2d_backward(
            grad, self._cache, self.gamma.value
        )
        self.gamma.set_grad(grad_gamma)
        self.beta.set_grad(grad_beta)
        return grad_input


class ReLU(Layer):
    def __init__(self, name: str):
        super().__init__(name)
        self._input = None

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        self._input = x if training else None
        return layers.relu(x)

    def backward(self, grad: Tensor) -> Tensor:
        if self._input is None:
            raise self._missing_cache()
        return layers.relu_backward(grad, self._input)


class MaxPool2d(Layer):
    def __init__(self, name: str, pool: tuple[int, int] = (2, 2)):
        super().__init__(name)
        self.pool = pool
        self._argmax = None
        self._shape = None

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        out, argmax = layers.maxpool2d_forward(x, self.pool)
        self._argmax, self._shape = (argmax, x.shape) if training else (None, None)
        return out

    def backward(self, grad: Tensor) -> Tensor:
        if self._argmax is None:
            raise self._missing_cache()
        return layers.maxpool2d_backward(grad, self._argmax, self._shape, self.pool)


class Dense(Layer):
    def __init__(
        self,
        name: str,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        dtype=FLOAT32,
    ):
        super().__init__(name)
        self.weight = LayerParams(
            f"{name}.weight",
            glorot_uniform(rng, (out_features, in_features), in_features, out_features, dtype),
        )
        self.bias = LayerParams(f"{name}.bias", np.zeros(out_features, dtype=dtype))
        self._cache = None

    @classmethod
    def from_values(cls, name: str, weight: Tensor, bias: Tensor) -> "Dense":
        layer = cls.__new__(cls)
        Layer.__init__(layer, name)
        layer.weight = LayerParams(f"{name}.weight", weight)
        layer.bias = LayerParams(f"{name}.bias", bias)
        layer._cache = None
        return layer

    @property
    def in_features(self) -> int:
        return self.weight.shape[1]

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]

    def parameters(self) -> list[LayerParams]:
        return [self.weight, self.bias]

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        out, cache = layers.dense_forward(x, self.weight.value, self.bias.value)
        self._cache = cache if training else None
        return out

    def backward(self, grad: Tensor) -> Tensor:
        if self._cache is None:
            raise self._missing_cache()
        grad_input, grad_weight, grad_bias = layers.dense_backward(
            grad, self._cache, self.weight.value
        )
        self.weight.set_grad(grad_weight)
        self.bias.set_grad(grad_bias)
        return grad_input


class Sequential(Layer):
    """Runs child layers in order and back-propagates in reverse."""

    def __init__(self, name: str, children: list[Layer]):
        super().__init__(name)
        self.children = children

    def parameters(self) -> list[LayerParams]:
        return [param for child in self.children for param in child.parameters()]

    def buffers(self) -> dict[str, Tensor]:
        merged = {}
        for child in self.children:
            merged.update(child.buffers())
        return merged

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        for child in self.children:
            x = child.forward(x, training)
        return x

    def backward(self, grad: Tensor) -> Tensor:
        for child in reversed(self.children):
            grad = child.backward(grad)
        return grad

    def cast(self, dtype) -> None:
        for child in self.children:
            child.cast(dtype)
