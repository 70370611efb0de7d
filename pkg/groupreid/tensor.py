"""
Layer-wise tensor operations with explicit forward/backward passes.

Tensors are float64 numpy arrays (NCHW for feature maps, B x D for vectors).
There is no autodiff graph: each differentiable op has a backward function
that takes the upstream gradient plus whatever the forward pass cached.

Conv2D arithmetic:
    H_out = (H + 2*pad - k) // stride + 1
    W_out = (W + 2*pad - k) // stride + 1
"""

from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import log_softmax, softmax

from .exceptions import LabelRangeError, ShapeMismatchError


DTYPE = np.float64
BN_EPS = 1e-5

Mode = Literal['train', 'eval']


@dataclass
class ParamTensor:
    """
    Trainable parameter: value, accumulated gradient and SGD momentum buffer.

    Gradients accumulate across backward calls until zero_grad().
    """

    name: str
    value: np.ndarray
    grad: np.ndarray = field(default=None, repr=False)
    momentum_buffer: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=DTYPE)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.momentum_buffer is None:
            self.momentum_buffer = np.zeros_like(self.value)
        if not (self.value.shape == self.grad.shape == self.momentum_buffer.shape):
            raise ShapeMismatchError(
                f"parameter '{self.name}': value, grad and momentum shapes differ",
                dimension='param',
                expected=self.value.shape,
                actual=(self.grad.shape, self.momentum_buffer.shape),
            )

    @property
    def size(self) -> int:
        return int(self.value.size)

    def zero_grad(self) -> None:
        self.grad.fill(0.0)


@dataclass
class RunningStats:
    """Batch-norm running mean/variance (biased), updated by EMA in train mode."""

    mean: np.ndarray
    var: np.ndarray

    @classmethod
    def fresh(cls, features: int) -> 'RunningStats':
        return cls(mean=np.zeros(features, dtype=DTYPE), var=np.ones(features, dtype=DTYPE))


def _require(condition: bool, message: str, dimension: str, expected=None, actual=None) -> None:
    if not condition:
        raise ShapeMismatchError(message, dimension=dimension, expected=expected, actual=actual)


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------

def conv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def _conv_windows(x: np.ndarray, kernel_hw: Tuple[int, int], stride: int, pad: int) -> np.ndarray:
    """Strided view of every receptive field: N x C x H_out x W_out x kH x kW."""
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(xp, kernel_hw, axis=(2, 3))
    return windows[:, :, ::stride, ::stride]


def _check_conv(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int, pad: int) -> None:
    _require(x.ndim == 4, f"conv2d input must be NCHW, got shape {x.shape}", 'input_rank', 4, x.ndim)
    _require(weight.ndim == 4, f"conv2d weight must be OIKK, got shape {weight.shape}",
             'weight_rank', 4, weight.ndim)
    _require(x.shape[1] == weight.shape[1],
             f"input has {x.shape[1]} channels but weight expects {weight.shape[1]}",
             'in_channels', weight.shape[1], x.shape[1])
    _require(bias.shape == (weight.shape[0],),
             f"bias shape {bias.shape} does not match {weight.shape[0]} output channels",
             'out_channels', (weight.shape[0],), bias.shape)
    _require(stride >= 1, f"stride must be positive, got {stride}", 'stride', '>= 1', stride)
    _require(pad >= 0, f"pad must be non-negative, got {pad}", 'pad', '>= 0', pad)
    _require(x.shape[2] + 2 * pad >= weight.shape[2],
             f"kernel height {weight.shape[2]} exceeds padded input height {x.shape[2] + 2 * pad}",
             'height', weight.shape[2], x.shape[2] + 2 * pad)
    _require(x.shape[3] + 2 * pad >= weight.shape[3],
             f"kernel width {weight.shape[3]} exceeds padded input width {x.shape[3] + 2 * pad}",
             'width', weight.shape[3], x.shape[3] + 2 * pad)


def conv2d_forward(
    x: np.ndarray,
    weight: np.ndarray,
    bias: np.ndarray,
    stride: int = 1,
    pad: int = 0,
) -> np.ndarray:
    """
    2D cross-correlation.

        Y[n, o, i, j] = sum_{c, u, v} X_pad[n, c, i*s + u, j*s + v] * W[o, c, u, v] + b[o]
    """
    _check_conv(x, weight, bias, stride, pad)
    windows = _conv_windows(x, weight.shape[2:], stride, pad)
    out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))  # N, Ho, Wo, O
    out = out + bias
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d_backward(
    grad_out: np.ndarray,
    x: np.ndarray,
    weight: np.ndarray,
    stride: int = 1,
    pad: int = 0,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradients of conv2d_forward w.r.t. input, weight and bias.

        dW[o, c, u, v] = sum_{n, i, j} dY[n, o, i, j] * X_pad[n, c, i*s + u, j*s + v]
        db[o]          = sum_{n, i, j} dY[n, o, i, j]
        dX_pad[n, c, i*s + u, j*s + v] += sum_o dY[n, o, i, j] * W[o, c, u, v]
    """
    n, _, height, width = x.shape
    out_channels, in_channels, kh, kw = weight.shape
    ho = conv_output_size(height, kh, stride, pad)
    wo = conv_output_size(width, kw, stride, pad)
    _require(grad_out.shape == (n, out_channels, ho, wo),
             f"grad_out shape {grad_out.shape} does not match forward output {(n, out_channels, ho, wo)}",
             'grad_out', (n, out_channels, ho, wo), grad_out.shape)

    windows = _conv_windows(x, (kh, kw), stride, pad)
    grad_weight = np.tensordot(grad_out, windows, axes=([0, 2, 3], [0, 2, 3]))
    grad_bias = grad_out.sum(axis=(0, 2, 3))

    cols = np.tensordot(grad_out, weight, axes=([1], [0]))  # N, Ho, Wo, C, kH, kW
    grad_padded = np.zeros((n, in_channels, height + 2 * pad, width + 2 * pad), dtype=DTYPE)
    for u in range(kh):
        for v in range(kw):
            grad_padded[:, :, u:u + stride * ho:stride, v:v + stride * wo:stride] += (
                cols[:, :, :, :, u, v].transpose(0, 3, 1, 2)
            )
    grad_input = grad_padded[:, :, pad:pad + height, pad:pad + width]
    return np.ascontiguousarray(grad_input), grad_weight, grad_bias


# ---------------------------------------------------------------------------
# Linear
# ---------------------------------------------------------------------------

def linear_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """out[b, o] = sum_i x[b, i] * w[o, i] + bias[o]"""
    _require(x.ndim == 2, f"linear input must be B x I, got shape {x.shape}", 'input_rank', 2, x.ndim)
    _require(weight.ndim == 2 and x.shape[1] == weight.shape[1],
             f"input has {x.shape[1]} features but weight {weight.shape} expects {weight.shape[-1]}",
             'in_features', weight.shape[-1], x.shape[1])
    _require(bias.shape == (weight.shape[0],),
             f"bias shape {bias.shape} does not match {weight.shape[0]} outputs",
             'out_features', (weight.shape[0],), bias.shape)
    return x @ weight.T + bias


def linear_backward(
    grad_out: np.ndarray,
    x: np.ndarray,
    weight: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    _require(grad_out.shape == (x.shape[0], weight.shape[0]),
             f"grad_out shape {grad_out.shape} does not match forward output {(x.shape[0], weight.shape[0])}",
             'grad_out', (x.shape[0], weight.shape[0]), grad_out.shape)
    return grad_out @ weight, grad_out.T @ x, grad_out.sum(axis=0)


# ---------------------------------------------------------------------------
# Activations and pooling
# ---------------------------------------------------------------------------

def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Subgradient at exactly 0 is 0.
    return grad_out * (x > 0)


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    _require(x.ndim == 4, f"global_avg_pool expects NCHW, got shape {x.shape}", 'input_rank', 4, x.ndim)
    return x.mean(axis=(2, 3))


def global_avg_pool_backward(grad_out: np.ndarray, input_shape: Tuple[int, ...]) -> np.ndarray:
    height, width = input_shape[2], input_shape[3]
    grad = grad_out[:, :, None, None] / (height * width)
    return np.broadcast_to(grad, input_shape).copy()


# ---------------------------------------------------------------------------
# Batch normalisation
# ---------------------------------------------------------------------------

@dataclass
class BatchNormCache:
    x_hat: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray
    mode: Mode


def batchnorm1d(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running: RunningStats,
    mode: Mode = 'train',
    momentum: float = 0.1,
    eps: float = BN_EPS,
) -> Tuple[np.ndarray, BatchNormCache]:
    """
    Batch normalisation over the rows of a B x D matrix.

    Train mode normalises with the biased batch variance and updates the
    running statistics in place by exponential moving average (the running
    variance is biased as well). Eval mode uses the running statistics.
    """
    _require(x.ndim == 2, f"batchnorm1d expects B x D, got shape {x.shape}", 'input_rank', 2, x.ndim)
    _require(gamma.shape == beta.shape == (x.shape[1],),
             f"gamma/beta shape {gamma.shape} does not match {x.shape[1]} features",
             'features', (x.shape[1],), gamma.shape)
    if mode == 'train':
        _require(x.shape[0] >= 2,
                 f"batch-norm in train mode needs at least 2 rows, got {x.shape[0]}",
                 'batch', '>= 2', x.shape[0])
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        running.mean *= 1.0 - momentum
        running.mean += momentum * mean
        running.var *= 1.0 - momentum
        running.var += momentum * var
    elif mode == 'eval':
        mean, var = running.mean, running.var
    else:
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mean) * inv_std
    return gamma * x_hat + beta, BatchNormCache(x_hat=x_hat, inv_std=inv_std, gamma=gamma, mode=mode)


def batchnorm1d_backward(
    grad_out: np.ndarray,
    cache: BatchNormCache,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full batch-norm gradient, including the paths through mean and variance."""
    grad_gamma = (grad_out * cache.x_hat).sum(axis=0)
    grad_beta = grad_out.sum(axis=0)
    grad_x_hat = grad_out * cache.gamma
    if cache.mode == 'eval':
        return grad_x_hat * cache.inv_std, grad_gamma, grad_beta
    batch = grad_out.shape[0]
    grad_input = (cache.inv_std / batch) * (
        batch * grad_x_hat
        - grad_x_hat.sum(axis=0)
        - cache.x_hat * (grad_x_hat * cache.x_hat).sum(axis=0)
    )
    return grad_input, grad_gamma, grad_beta


def _nchw_to_rows(x: np.ndarray) -> np.ndarray:
    return x.transpose(0, 2, 3, 1).reshape(-1, x.shape[1])


def _rows_to_nchw(rows: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    n, c, h, w = shape
    return np.ascontiguousarray(rows.reshape(n, h, w, c).transpose(0, 3, 1, 2))


def batchnorm2d(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running: RunningStats,
    mode: Mode = 'train',
    momentum: float = 0.1,
    eps: float = BN_EPS,
) -> Tuple[np.ndarray, BatchNormCache]:
    """Per-channel batch-norm with statistics over N, H and W."""
    _require(x.ndim == 4, f"batchnorm2d expects NCHW, got shape {x.shape}", 'input_rank', 4, x.ndim)
    out, cache = batchnorm1d(_nchw_to_rows(x), gamma, beta, running, mode, momentum, eps)
    return _rows_to_nchw(out, x.shape), cache


def batchnorm2d_backward(
    grad_out: np.ndarray,
    cache: BatchNormCache,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    grad_rows, grad_gamma, grad_beta = batchnorm1d_backward(_nchw_to_rows(grad_out), cache)
    return _rows_to_nchw(grad_rows, grad_out.shape), grad_gamma, grad_beta


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-sample cross-entropy -log softmax(logits)[label] and its gradient.

    Labels are 0-based class indices. The gradient row for each sample is
    softmax(logits) - one_hot(label) (not divided by the batch size).
    """
    _require(logits.ndim == 2, f"logits must be B x K, got shape {logits.shape}", 'logits_rank', 2, logits.ndim)
    labels = np.asarray(labels)
    _require(labels.shape == (logits.shape[0],),
             f"{labels.shape[0] if labels.ndim else 0} labels for {logits.shape[0]} rows of logits",
             'batch', logits.shape[0], labels.shape)
    n_classes = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise LabelRangeError(
            f"labels must lie in [0, {n_classes}), got range [{labels.min()}, {labels.max()}]"
        )
    rows = np.arange(logits.shape[0])
    log_probs = log_softmax(logits, axis=1)
    loss = -log_probs[rows, labels]
    grad = softmax(logits, axis=1)
    grad[rows, labels] -= 1.0
    return loss, grad


# ---------------------------------------------------------------------------
# Optimisation and gradient checking
# ---------------------------------------------------------------------------

def sgd_step(
    params: Iterable[ParamTensor],
    lr: float,
    momentum: float = 0.0,
    weight_decay: float = 0.0,
) -> None:
    """
    SGD with momentum and L2 weight decay, in place:

        v <- momentum * v + grad + weight_decay * value
        value <- value - lr * v
    """
    for param in params:
        buffer = param.momentum_buffer
        buffer *= momentum
        buffer += param.grad
        if weight_decay:
            buffer += weight_decay * param.value
        param.value -= lr * buffer


def finite_diff_grad(
    scalar_fn: Callable[[], float],
    param: np.ndarray,
    h: float = 1e-5,
) -> np.ndarray:
    """
    Central-difference gradient of scalar_fn w.r.t. every entry of param.

    param is perturbed in place (and restored), so scalar_fn must read it
    through a reference it already holds.
    """
    grad = np.zeros_like(param, dtype=DTYPE)
    for index in np.ndindex(param.shape):
        original = param[index]
        param[index] = original + h
        upper = scalar_fn()
        param[index] = original - h
        lower = scalar_fn()
        param[index] = original
        grad[index] = (upper - lower) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-based relative error used by every gradient check."""
    analytic = np.asarray(analytic, dtype=DTYPE)
    numeric = np.asarray(numeric, dtype=DTYPE)
    scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)
