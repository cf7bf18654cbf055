from typing import Callable

import numpy as np

from src.nncore.utils import Tensor


def numerical_gradient(f: Callable[[], float], array: Tensor, eps: float = 1e-6) -> Tensor:
    """
    Central finite differences of a scalar function with respect to ``array``.

    ``array`` is perturbed in place, one element at a time, and restored.

    Parameters:
    f (Callable[[], float]): Evaluates the scalar objective at the current values.
    array (Tensor): The tensor to differentiate against.
    eps (float, optional): Step size. Defaults to 1e-6.

    Returns:
    Tensor: Estimated gradient (float64) with ``array``'s shape.
    """
    grad = np.zeros(array.shape, dtype=np.float64)
    flat = array.reshape(-1)
    for index in range(flat.size):
        original = flat[index]
        flat[index] = original + eps
        plus = float(f())
        flat[index] = original - eps
        minus = float(f())
        flat[index] = original
        grad.reshape(-1)[index] = (plus - minus) / (2.0 * eps)
    return grad


def relative_error(analytic: Tensor, numeric: Tensor, floor: float = 1e-12) -> float:
    """Norm-wise relative error ||a - n|| / max(||a||, ||n||, floor)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), floor)
    return float(np.linalg.norm(analytic - numeric) / scale)
