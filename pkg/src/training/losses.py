import numpy as np

from src.exceptions import DataError, ShapeError
from src.nncore.layers import sigmoid
from src.nncore.utils import Tensor


def _check_targets(values: Tensor, targets: Tensor) -> None:
    if values.shape != targets.shape:
        raise ShapeError(f"bce: predictions {values.shape} and targets {targets.shape} differ")
    if not np.all((targets == 0) | (targets == 1)):
        raise DataError("bce: targets must be 0 or 1")


def bce_with_logits(logits: Tensor, targets: Tensor) -> tuple[float, Tensor]:
    """
    Binary cross-entropy computed from pre-sigmoid logits in the stable form
    max(z, 0) - z*y + log(1 + exp(-|z|)).

    Parameters:
    logits (Tensor): Scores [B, K].
    targets (Tensor): Labels [B, K] in {0, 1}.

    Returns:
    tuple[float, Tensor]: Mean loss over B*K and its gradient (p - y) / (B*K) w.r.t. the logits.
    """
    _check_targets(logits, targets)
    z = logits.astype(np.float64)
    y = targets.astype(np.float64)
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    grad = (sigmoid(z) - y) / z.size
    return float(loss.mean()), grad.astype(logits.dtype)


def bce_loss(predictions: Tensor, targets: Tensor) -> tuple[float, Tensor]:
    """
    Binary cross-entropy from sigmoid outputs strictly inside (0, 1).

    Returns:
    tuple[float, Tensor]: Mean loss and the fused gradient (p - y) / (B*K) w.r.t. the logits.
    """
    _check_targets(predictions, targets)
    p = predictions.astype(np.float64)
    y = targets.astype(np.float64)
    loss = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    grad = (p - y) / p.size
    return float(loss.mean()), grad.astype(predictions.dtype)
