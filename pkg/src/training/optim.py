import numpy as np

from src.exceptions import TrainingError
from src.nncore.params import LayerParams
from src.nncore.utils import Tensor
from src.training.schemas import AdamConfig


class AdamState:
    """
    First/second moment estimates per parameter plus the shared timestep.

    Moments are created lazily, keyed by parameter name, with the parameter's
    shape and dtype.
    """

    def __init__(self, config: AdamConfig | None = None):
        self.config = config or AdamConfig()
        self.m: dict[str, Tensor] = {}
        self.v: dict[str, Tensor] = {}
        self.t = 0

    def moments(self, name: str, param: LayerParams) -> tuple[Tensor, Tensor]:
        if name not in self.m:
            self.m[name] = np.zeros_like(param.value)
            self.v[name] = np.zeros_like(param.value)
        return self.m[name], self.v[name]


def adam_step(params: list[tuple[str, LayerParams]], state: AdamState) -> None:
    """
    Applies one Adam update in place.

    m <- b1 m + (1 - b1) g; v <- b2 v + (1 - b2) g^2; t is incremented before
    the bias corrections m_hat = m / (1 - b1^t), v_hat = v / (1 - b2^t);
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).

    Parameters:
    params (list[tuple[str, LayerParams]]): Named parameters to update.
    state (AdamState): Optimizer state, mutated in place.

    Raises:
    TrainingError: If a gradient contains NaN or Inf; no parameter is changed then.
    """
    for name, param in params:
        if not np.all(np.isfinite(param.grad)):
            raise TrainingError(f"non-finite gradient in parameter {name}")

    cfg = state.config
    state.t += 1
    correction1 = 1.0 - cfg.beta1**state.t
    correction2 = 1.0 - cfg.beta2**state.t
    for name, param in params:
        m, v = state.moments(name, param)
        grad = param.grad
        m[...] = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
        v[...] = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        step = cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        param.value -= step.astype(param.value.dtype, copy=False)
