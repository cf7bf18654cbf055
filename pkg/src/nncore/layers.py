"""
Functional forward/backward passes for the layers of the SED CNN.

All functions are dtype preserving: float32 inputs give float32 outputs, and
float64 inputs run the same arithmetic in 64 bits for gradient checks.
Image tensors are laid out as [B, C, H, W]; a single [C, H, W] sample is
accepted where noted and returned without the batch axis.
"""

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.exceptions import ShapeError
from src.nncore.utils import Tensor

Padding = Literal["same", "valid"]

BN_MOMENTUM = 0.99
BN_EPSILON = 1e-5


@dataclass
class Conv2dCache:
    padded_input: Tensor
    input_shape: tuple[int, ...]
    padding: Padding
    pad_top: int
    pad_left: int


@dataclass
class BatchNormCache:
    normalized: Tensor
    inv_std: Tensor
    training: bool


@dataclass
class DenseCache:
    input: Tensor
    squeeze: bool


def _as_batch(x: Tensor, ndim: int, what: str) -> tuple[Tensor, bool]:
    if x.ndim == ndim - 1:
        return x[np.newaxis], True
    if x.ndim != ndim:
        raise ShapeError(f"{what}: expected {ndim - 1}- or {ndim}-d input, got shape {x.shape}")
    return x, False


def _same_padding(kernel: int) -> tuple[int, int]:
    before = (kernel - 1) // 2
    return before, kernel - 1 - before


def conv2d_forward(
    x: Tensor, weights: Tensor, bias: Tensor, padding: Padding = "same"
) -> tuple[Tensor, Conv2dCache]:
    """
    Stride-1 2D cross-correlation (no kernel flip).

    Parameters:
    x (Tensor): Input of shape [C_in, H, W] or [B, C_in, H, W].
    weights (Tensor): Kernels of shape [C_out, C_in, kH, kW].
    bias (Tensor): Bias of shape [C_out].
    padding (str): "same" keeps H and W, "valid" shrinks them by k - 1.

    Returns:
    tuple[Tensor, Conv2dCache]: Output [.., C_out, H', W'] and the cache for the backward pass.

    Raises:
    ShapeError: If channel counts disagree or the kernel does not fit.
    """
    batch, squeeze = _as_batch(x, 4, "conv2d")
    if weights.ndim != 4:
        raise ShapeError(f"conv2d: weights must be [C_out, C_in, kH, kW], got {weights.shape}")
    c_out, c_in, kh, kw = weights.shape
    if batch.shape[1] != c_in:
        raise ShapeError(
            f"conv2d: input has {batch.shape[1]} channels but weights expect C_in={c_in}"
        )
    if bias.shape != (c_out,):
        raise ShapeError(f"conv2d: bias shape {bias.shape} != ({c_out},)")

    if padding == "same":
        top, bottom = _same_padding(kh)
        left, right = _same_padding(kw)
        padded = np.pad(batch, ((0, 0), (0, 0), (top, bottom), (left, right)))
    elif padding == "valid":
        top = left = 0
        padded = batch
    else:
        raise ShapeError(f"conv2d: unknown padding {padding!r}")
    if padded.shape[2] < kh or padded.shape[3] < kw:
        raise ShapeError(
            f"conv2d: kernel {kh}x{kw} does not fit input {batch.shape[2]}x{batch.shape[3]} "
            f"with {padding!r} padding"
        )

    windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))
    out = np.tensordot(windows, weights, axes=([1, 4, 5], [1, 2, 3]))
    out = out.transpose(0, 3, 1, 2) + bias[np.newaxis, :, np.newaxis, np.newaxis]
    out = np.ascontiguousarray(out, dtype=batch.dtype)

    cache = Conv2dCache(
        padded_input=padded,
        input_shape=batch.shape,
        padding=padding,
        pad_top=top,
        pad_left=left,
    )
    return (out[0] if squeeze else out), cache


def conv2d_backward(
    grad_out: Tensor, cache: Conv2dCache | None, weights: Tensor
) -> tuple[Tensor, Tensor, Tensor]:
    """
    Gradients of conv2d_forward.

    Parameters:
    grad_out (Tensor): Upstream gradient with the forward output's shape.
    cache (Conv2dCache): Cache returned by the matching forward call.
    weights (Tensor): Kernels used in the forward call.

    Returns:
    tuple[Tensor, Tensor, Tensor]: grad_input, grad_weights, grad_bias.

    Raises:
    ShapeError: If the forward cache is missing or shapes disagree.
    """
    if cache is None:
        raise ShapeError("conv2d_backward: missing forward cache")
    grad, squeeze = _as_batch(grad_out, 4, "conv2d_backward")
    c_out, c_in, kh, kw = weights.shape
    b, _, h, w = cache.input_shape
    out_h = cache.padded_input.shape[2] - kh + 1
    out_w = cache.padded_input.shape[3] - kw + 1
    if grad.shape != (b, c_out, out_h, out_w):
        raise ShapeError(
            f"conv2d_backward: grad_out shape {grad.shape} != forward output {(b, c_out, out_h, out_w)}"
        )

    windows = sliding_window_view(cache.padded_input, (kh, kw), axis=(2, 3))
    grad_weights = np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))
    grad_bias = grad.sum(axis=(0, 2, 3))

    grad_padded = np.zeros_like(cache.padded_input)
    for i in range(kh):
        for j in range(kw):
            contribution = np.tensordot(grad, weights[:, :, i, j], axes=([1], [0]))
            grad_padded[:, :, i : i + out_h, j : j + out_w] += contribution.transpose(0, 3, 1, 2)
    grad_input = grad_padded[
        :, :, cache.pad_top : cache.pad_top + h, cache.pad_left : cache.pad_left + w
    ]
    grad_input = np.ascontiguousarray(grad_input)

    dtype = cache.padded_input.dtype
    return (
        grad_input[0] if squeeze else grad_input,
        grad_weights.astype(dtype, copy=False),
        grad_bias.astype(dtype, copy=False),
    )


def maxpool2d_forward(x: Tensor, pool: tuple[int, int] = (2, 2)) -> tuple[Tensor, Tensor]:
    """
    Non-overlapping max pooling.

    Ties resolve to the first position of the window in row-major order.

    Parameters:
    x (Tensor): Input of shape [C, H, W] or [B, C, H, W].
    pool (tuple[int, int]): Window (pH, pW), also the stride.

    Returns:
    tuple[Tensor, Tensor]: Pooled output and the window-local argmax indices.

    Raises:
    ShapeError: If H or W is not divisible by the pool size.
    """
    batch, squeeze = _as_batch(x, 4, "maxpool2d")
    ph, pw = pool
    b, c, h, w = batch.shape
    if h % ph or w % pw:
        raise ShapeError(f"maxpool2d: input {h}x{w} is not divisible by pool {ph}x{pw}")
    windows = batch.reshape(b, c, h // ph, ph, w // pw, pw).transpose(0, 1, 2, 4, 3, 5)
    windows = windows.reshape(b, c, h // ph, w // pw, ph * pw)
    argmax = np.argmax(windows, axis=-1)
    out = np.take_along_axis(windows, argmax[..., np.newaxis], axis=-1)[..., 0]
    if squeeze:
        return out[0], argmax[0]
    return out, argmax


def maxpool2d_backward(
    grad_out: Tensor,
    argmax: Tensor,
    input_shape: tuple[int, ...],
    pool: tuple[int, int] = (2, 2),
) -> Tensor:
    """Routes each output gradient to the argmax position of its window."""
    grad, squeeze = _as_batch(grad_out, 4, "maxpool2d_backward")
    idx, _ = _as_batch(argmax, 4, "maxpool2d_backward")
    shape = (1, *input_shape) if len(input_shape) == 3 else tuple(input_shape)
    b, c, h, w = shape
    ph, pw = pool
    if grad.shape != (b, c, h // ph, w // pw) or idx.shape != grad.shape:
        raise ShapeError(
            f"maxpool2d_backward: grad {grad.shape} / argmax {idx.shape} do not match input {shape}"
        )
    windows = np.zeros((b, c, h // ph, w // pw, ph * pw), dtype=grad.dtype)
    np.put_along_axis(windows, idx[..., np.newaxis], grad[..., np.newaxis], axis=-1)
    grad_input = windows.reshape(b, c, h // ph, w // pw, ph, pw).transpose(0, 1, 2, 4, 3, 5)
    grad_input = np.ascontiguousarray(grad_input.reshape(b, c, h, w))
    return grad_input[0] if squeeze else grad_input


def batchnorm2d_forward(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
    training: bool,
    momentum: float = BN_MOMENTUM,
    epsilon: float = BN_EPSILON,
) -> tuple[Tensor, BatchNormCache]:
    """
    Per-channel batch normalization over [B, C, H, W].

    In training mode the batch statistics normalize the input and the running
    statistics are updated in place as running <- momentum * running +
    (1 - momentum) * batch. In inference mode the running statistics are used.

    Parameters:
    x (Tensor): Input [B, C, H, W], B >= 1.
    gamma (Tensor): Scale [C].
    beta (Tensor): Shift [C].
    running_mean (Tensor): Running mean [C], updated in place when training.
    running_var (Tensor): Running (biased) variance [C], updated in place when training.
    training (bool): Selects batch or running statistics.
    momentum (float): Running statistics momentum.
    epsilon (float): Variance floor.

    Returns:
    tuple[Tensor, BatchNormCache]: Normalized output and backward cache.
    """
    if x.ndim != 4:
        raise ShapeError(f"batchnorm2d: expected [B, C, H, W], got {x.shape}")
    channels = x.shape[1]
    for name, array in (("gamma", gamma), ("beta", beta), ("running_mean", running_mean), ("running_var", running_var)):
        if array.shape != (channels,):
            raise ShapeError(f"batchnorm2d: {name} shape {array.shape} != ({channels},)")

    if training:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        running_mean[...] = momentum * running_mean + (1.0 - momentum) * mean
        running_var[...] = momentum * running_var + (1.0 - momentum) * var
    else:
        mean, var = running_mean, running_var

    inv_std = (1.0 / np.sqrt(var + epsilon)).astype(x.dtype)
    normalized = (x - mean[np.newaxis, :, np.newaxis, np.newaxis]) * inv_std[
        np.newaxis, :, np.newaxis, np.newaxis
    ]
    out = gamma[np.newaxis, :, np.newaxis, np.newaxis] * normalized + beta[
        np.newaxis, :, np.newaxis, np.newaxis
    ]
    return out.astype(x.dtype, copy=False), BatchNormCache(normalized, inv_std, training)


def batchnorm2d_backward(
    grad_out: Tensor, cache: BatchNormCache | None, gamma: Tensor
) -> tuple[Tensor, Tensor, Tensor]:
    """
    Gradients of batchnorm2d_forward.

    Returns:
    tuple[Tensor, Tensor, Tensor]: grad_input, grad_gamma, grad_beta.
    """
    if cache is None:
        raise ShapeError("batchnorm2d_backward: missing forward cache")
    if grad_out.shape != cache.normalized.shape:
        raise ShapeError(
            f"batchnorm2d_backward: grad_out shape {grad_out.shape} != {cache.normalized.shape}"
        )
    axes = (0, 2, 3)
    grad_beta = grad_out.sum(axis=axes)
    grad_gamma = (grad_out * cache.normalized).sum(axis=axes)
    grad_norm = grad_out * gamma[np.newaxis, :, np.newaxis, np.newaxis]
    inv_std = cache.inv_std[np.newaxis, :, np.newaxis, np.newaxis]
    if not cache.training:
        return grad_norm * inv_std, grad_gamma, grad_beta

    count = grad_out.shape[0] * grad_out.shape[2] * grad_out.shape[3]
    sum_grad = grad_norm.sum(axis=axes, keepdims=True)
    sum_grad_norm = (grad_norm * cache.normalized).sum(axis=axes, keepdims=True)
    grad_input = (inv_std / count) * (count * grad_norm - sum_grad - cache.normalized * sum_grad_norm)
    return grad_input.astype(grad_out.dtype, copy=False), grad_gamma, grad_beta


def dense_forward(x: Tensor, weights: Tensor, bias: Tensor) -> tuple[Tensor, DenseCache]:
    """
    Affine map W x + b for a vector [D_in] or a batch [B, D_in].

    Each output unit is reduced on its own from a fresh product array, so the
    logits of a unit do not depend on how many units the layer has.

    Raises:
    ShapeError: If the input width disagrees with the weights.
    """
    batch, squeeze = _as_batch(x, 2, "dense")
    if weights.ndim != 2 or batch.shape[1] != weights.shape[1]:
        raise ShapeError(
            f"dense: input width {batch.shape[1]} does not match weights {weights.shape}"
        )
    if bias.shape != (weights.shape[0],):
        raise ShapeError(f"dense: bias shape {bias.shape} != ({weights.shape[0]},)")
    out = np.empty((batch.shape[0], weights.shape[0]), dtype=batch.dtype)
    for unit in range(weights.shape[0]):
        out[:, unit] = (batch * weights[unit]).sum(axis=1) + bias[unit]
    return (out[0] if squeeze else out), DenseCache(batch, squeeze)


def dense_backward(
    grad_out: Tensor, cache: DenseCache | None, weights: Tensor
) -> tuple[Tensor, Tensor, Tensor]:
    """Returns grad_input, grad_weights, grad_bias of dense_forward."""
    if cache is None:
        raise ShapeError("dense_backward: missing forward cache")
    grad, _ = _as_batch(grad_out, 2, "dense_backward")
    if grad.shape != (cache.input.shape[0], weights.shape[0]):
        raise ShapeError(f"dense_backward: grad_out shape {grad.shape} does not match forward")
    grad_input = grad @ weights
    grad_weights = grad.T @ cache.input
    grad_bias = grad.sum(axis=0)
    return (grad_input[0] if cache.squeeze else grad_input), grad_weights, grad_bias


def relu(x: Tensor) -> Tensor:
    return np.maximum(x, 0).astype(x.dtype, copy=False)


def relu_backward(grad_out: Tensor, x: Tensor) -> Tensor:
    return grad_out * (x > 0)


def sigmoid(x: Tensor) -> Tensor:
    """
    Numerically stable logistic function.

    Positive and negative inputs take separate branches so ``exp`` never
    overflows; the result is clipped to the open interval (0, 1) of the
    input dtype.
    """
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float64)
    kind = x.dtype.type
    decay = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + decay), decay / (1.0 + decay)).astype(kind)
    low = np.finfo(x.dtype).tiny
    high = np.nextafter(kind(1), kind(0))
    return np.clip(out, low, high)


def sigmoid_backward(grad_out: Tensor, y: Tensor) -> Tensor:
    """Gradient through the sigmoid given its output y: g * y * (1 - y)."""
    return grad_out * y * (1.0 - y)
