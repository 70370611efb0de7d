"""
Toy convolutional backbone.

A plain stack of conv -> batchnorm2d -> relu stages producing the C-channel
feature maps the channel-group head pools and slices. No residual
connections: the head is where the interesting behaviour lives.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .config import BackboneSpec
from .exceptions import NotForwardedError, ShapeMismatchError
from .tensor import (
    DTYPE,
    BatchNormCache,
    Mode,
    ParamTensor,
    RunningStats,
    batchnorm2d,
    batchnorm2d_backward,
    conv2d_backward,
    conv2d_forward,
    relu,
    relu_backward,
)


logger = logging.getLogger('groupreid')


@dataclass
class _StageCache:
    x: np.ndarray
    bn_cache: BatchNormCache
    bn_out: np.ndarray


class ConvStage:
    """One conv -> batchnorm2d -> relu block."""

    def __init__(
        self,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel: int,
        stride: int,
        rng: np.random.Generator,
        bn_momentum: float = 0.1,
        bn_eps: float = 1e-5,
    ):
        self.name = name
        self.stride = stride
        self.pad = kernel // 2
        self.bn_momentum = bn_momentum
        self.bn_eps = bn_eps

        fan_in = in_channels * kernel * kernel
        self.weight = ParamTensor(
            f'{name}.conv.weight',
            rng.normal(0.0, np.sqrt(2.0 / fan_in), (out_channels, in_channels, kernel, kernel)),
        )
        self.bias = ParamTensor(f'{name}.conv.bias', np.zeros(out_channels, dtype=DTYPE))
        self.gamma = ParamTensor(f'{name}.bn.gamma', np.ones(out_channels, dtype=DTYPE))
        self.beta = ParamTensor(f'{name}.bn.beta', np.zeros(out_channels, dtype=DTYPE))
        self.running = RunningStats.fresh(out_channels)

    def forward(self, x: np.ndarray, mode: Mode):
        conv_out = conv2d_forward(x, self.weight.value, self.bias.value, self.stride, self.pad)
        bn_out, bn_cache = batchnorm2d(
            conv_out, self.gamma.value, self.beta.value, self.running,
            mode, self.bn_momentum, self.bn_eps,
        )
        return relu(bn_out), _StageCache(x=x, bn_cache=bn_cache, bn_out=bn_out)

    def backward(self, grad_out: np.ndarray, cache: _StageCache) -> np.ndarray:
        grad_bn = relu_backward(grad_out, cache.bn_out)
        grad_conv, grad_gamma, grad_beta = batchnorm2d_backward(grad_bn, cache.bn_cache)
        self.gamma.grad += grad_gamma
        self.beta.grad += grad_beta
        grad_x, grad_weight, grad_bias = conv2d_backward(
            grad_conv, cache.x, self.weight.value, self.stride, self.pad
        )
        self.weight.grad += grad_weight
        self.bias.grad += grad_bias
        return grad_x

    def parameters(self) -> List[ParamTensor]:
        return [self.weight, self.bias, self.gamma, self.beta]

    def buffers(self) -> Dict[str, np.ndarray]:
        return {
            f'{self.name}.bn.running_mean': self.running.mean,
            f'{self.name}.bn.running_var': self.running.var,
        }


class Backbone:
    """
    Feature extractor: N x 3 x H x W images -> N x C x H' x W' maps.

    Usage:
        backbone = Backbone(spec, np.random.default_rng(0))
        maps = backbone.forward(images, 'train')
        grad_images = backbone.backward(grad_maps)
    """

    def __init__(self, spec: BackboneSpec, rng: np.random.Generator):
        self.spec = spec
        self.stages: List[ConvStage] = []
        in_channels = 3
        for index, (channels, stride) in enumerate(zip(spec.stage_channels, spec.strides)):
            self.stages.append(ConvStage(
                f'backbone.stage{index}',
                in_channels,
                channels,
                spec.kernel,
                stride,
                rng,
                spec.bn_momentum,
                spec.bn_eps,
            ))
            in_channels = channels
        self._caches: Optional[List[_StageCache]] = None

    @property
    def out_channels(self) -> int:
        return self.spec.out_channels

    def forward(self, images: np.ndarray, mode: Mode = 'train') -> np.ndarray:
        if images.ndim != 4 or images.shape[1] != 3:
            raise ShapeMismatchError(
                f"backbone expects N x 3 x H x W images, got shape {images.shape}",
                dimension='in_channels',
                expected=3,
                actual=images.shape[1] if images.ndim == 4 else images.ndim,
            )
        try:
            self.spec.output_hw(images.shape[2:])
        except ValueError as e:
            raise ShapeMismatchError(str(e), dimension='spatial', actual=images.shape[2:])

        caches = []
        out = images
        for stage in self.stages:
            out, cache = stage.forward(out, mode)
            caches.append(cache)
        self._caches = caches
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        """Backpropagate to the images; parameter gradients accumulate."""
        if self._caches is None:
            raise NotForwardedError("Backbone.backward() called before forward()")
        grad = grad_out
        for stage, cache in zip(reversed(self.stages), reversed(self._caches)):
            grad = stage.backward(grad, cache)
        return grad

    def parameters(self) -> List[ParamTensor]:
        return [param for stage in self.stages for param in stage.parameters()]

    def buffers(self) -> Dict[str, np.ndarray]:
        buffers: Dict[str, np.ndarray] = {}
        for stage in self.stages:
            buffers.update(stage.buffers())
        return buffers
