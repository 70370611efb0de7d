"""
Channel-group head.

The global feature F (B x C, from global average pooling) is divided into
N_c contiguous channel groups,

    f_i(c) = F(c + i * C_g),   i = 0..N_c-1,  c = 0..C_g-1,  C_g = C / N_c

Each group is transformed by a linear -> batchnorm -> relu embedding (one
parameter set shared by every group by default) and classified by its own
identity classifier. The five architecture variants differ only in which
inputs the embeddings see and how embeddings map to classifiers:

    variant  embed inputs        embeds             classifiers
    A        N_c group slices    1 (shared) or N_c  N_c, one per group
    B        full F              1                  1
    C        N_c group slices    N_c                1 on the concatenation
    D        full F              1                  N_c on the same embedding
    E        full F, N_c times   N_c (or 1 shared)  N_c, one per embedding

An optional stripe head pools horizontal stripes of the feature maps and
runs the same embed + classify pipeline per stripe.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import HeadSpec
from .exceptions import EvaluationError, NotForwardedError, ShapeMismatchError
from .tensor import (
    DTYPE,
    BatchNormCache,
    Mode,
    ParamTensor,
    RunningStats,
    batchnorm1d,
    batchnorm1d_backward,
    linear_backward,
    linear_forward,
    relu,
    relu_backward,
)


def slice_channel_groups(features: np.ndarray, n_c: int) -> List[np.ndarray]:
    """Split B x C features into n_c disjoint, contiguous B x C_g groups."""
    if features.ndim != 2:
        raise ShapeMismatchError(
            f"channel grouping expects B x C features, got shape {features.shape}",
            dimension='input_rank', expected=2, actual=features.ndim,
        )
    channels = features.shape[1]
    if n_c < 1 or channels % n_c:
        raise ShapeMismatchError(
            f"{channels} channels cannot be split into {n_c} equal groups",
            dimension='channels', expected=f"multiple of {n_c}", actual=channels,
        )
    width = channels // n_c
    return [features[:, i * width:(i + 1) * width] for i in range(n_c)]


@dataclass
class _EmbedCache:
    x: np.ndarray
    bn_cache: BatchNormCache
    bn_out: np.ndarray


class EmbedBlock:
    """Linear (the 1x1 convolution on a pooled map) -> batchnorm1d -> relu."""

    def __init__(self, name: str, in_features: int, out_features: int, rng: np.random.Generator):
        self.name = name
        self.weight = ParamTensor(
            f'{name}.weight',
            rng.normal(0.0, np.sqrt(2.0 / in_features), (out_features, in_features)),
        )
        self.bias = ParamTensor(f'{name}.bias', np.zeros(out_features, dtype=DTYPE))
        self.gamma = ParamTensor(f'{name}.bn.gamma', np.ones(out_features, dtype=DTYPE))
        self.beta = ParamTensor(f'{name}.bn.beta', np.zeros(out_features, dtype=DTYPE))
        self.running = RunningStats.fresh(out_features)

    def forward(self, x: np.ndarray, mode: Mode) -> Tuple[np.ndarray, _EmbedCache]:
        hidden = linear_forward(x, self.weight.value, self.bias.value)
        bn_out, bn_cache = batchnorm1d(hidden, self.gamma.value, self.beta.value, self.running, mode)
        return relu(bn_out), _EmbedCache(x=x, bn_cache=bn_cache, bn_out=bn_out)

    def backward(self, grad_out: np.ndarray, cache: _EmbedCache) -> np.ndarray:
        grad_bn = relu_backward(grad_out, cache.bn_out)
        grad_hidden, grad_gamma, grad_beta = batchnorm1d_backward(grad_bn, cache.bn_cache)
        self.gamma.grad += grad_gamma
        self.beta.grad += grad_beta
        grad_x, grad_weight, grad_bias = linear_backward(grad_hidden, cache.x, self.weight.value)
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


class Classifier:
    """Identity classifier: a single linear layer onto n_id logits."""

    def __init__(self, name: str, in_features: int, n_id: int, rng: np.random.Generator):
        self.name = name
        self.weight = ParamTensor(f'{name}.weight', rng.normal(0.0, 0.01, (n_id, in_features)))
        self.bias = ParamTensor(f'{name}.bias', np.zeros(n_id, dtype=DTYPE))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return linear_forward(x, self.weight.value, self.bias.value)

    def backward(self, grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
        grad_x, grad_weight, grad_bias = linear_backward(grad_out, x, self.weight.value)
        self.weight.grad += grad_weight
        self.bias.grad += grad_bias
        return grad_x

    def parameters(self) -> List[ParamTensor]:
        return [self.weight, self.bias]


@dataclass
class DescriptorSet:
    """
    Inference features of a batch of images.

    Attributes:
        groups: Transformed group features in channel-group order, each N x D.
        stripes: Stripe features from the part head, each N x D.
    """

    groups: List[np.ndarray]
    stripes: List[np.ndarray] = field(default_factory=list)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def n_images(self) -> int:
        return self.groups[0].shape[0]

    @property
    def group_dim(self) -> int:
        return self.groups[0].shape[1]

    def standard(self) -> np.ndarray:
        """All groups concatenated, stripe features appended."""
        return np.concatenate(self.groups + self.stripes, axis=1)

    def fast(self, index: int) -> np.ndarray:
        """A single channel group as the whole descriptor."""
        if not 0 <= index < self.n_groups:
            raise EvaluationError(
                f"group index {index} out of range for {self.n_groups} channel groups",
                details={'index': index, 'n_groups': self.n_groups},
            )
        return self.groups[index]

    def concat(self, k: int) -> np.ndarray:
        """The first k groups concatenated, stripe features appended."""
        if not 1 <= k <= self.n_groups:
            raise EvaluationError(
                f"cannot concatenate {k} of {self.n_groups} channel groups",
                details={'k': k, 'n_groups': self.n_groups},
            )
        return np.concatenate(self.groups[:k] + self.stripes, axis=1)

    @classmethod
    def merge(cls, parts: List['DescriptorSet']) -> 'DescriptorSet':
        """Stack descriptor sets computed on consecutive chunks of images."""
        return cls(
            groups=[np.concatenate(g, axis=0) for g in zip(*(p.groups for p in parts))],
            stripes=[np.concatenate(s, axis=0) for s in zip(*(p.stripes for p in parts))],
        )


@dataclass
class _HeadCache:
    features_shape: Tuple[int, ...]
    embed_caches: List[_EmbedCache]
    classifier_inputs: List[np.ndarray]


class ChannelGroupHead:
    """
    Channel-group embedding and multi-branch classification.

    Usage:
        head = ChannelGroupHead(spec, rng)
        logits, descriptors = head.forward(features, 'train')
        grad_features = head.backward(grad_logits)
    """

    def __init__(self, spec: HeadSpec, rng: np.random.Generator):
        self.spec = spec
        self.embeds = [
            EmbedBlock(f'head.embed{i}', spec.embed_in, spec.embed_dim, rng)
            for i in range(spec.n_embeds)
        ]
        self.classifiers = [
            Classifier(f'head.classifier{j}', spec.classifier_in, spec.n_id, rng)
            for j in range(spec.n_branches)
        ]
        self._cache: Optional[_HeadCache] = None

    def _embed_slices(self) -> List[slice]:
        spec = self.spec
        if spec.grouped:
            width = spec.c_group
            return [slice(i * width, (i + 1) * width) for i in range(spec.n_c)]
        if spec.variant == 'E':
            return [slice(None)] * spec.n_c
        return [slice(None)]

    def _embed_for(self, call: int) -> EmbedBlock:
        return self.embeds[0] if len(self.embeds) == 1 else self.embeds[call]

    def forward(self, features: np.ndarray, mode: Mode = 'train') -> Tuple[List[np.ndarray], DescriptorSet]:
        spec = self.spec
        if features.ndim != 2 or features.shape[1] != spec.c_total:
            raise ShapeMismatchError(
                f"head expects B x {spec.c_total} features, got shape {features.shape}",
                dimension='channels', expected=spec.c_total, actual=features.shape,
            )
        if spec.grouped:
            slice_channel_groups(features, spec.n_c)

        outputs, caches = [], []
        for call, channels in enumerate(self._embed_slices()):
            out, cache = self._embed_for(call).forward(features[:, channels], mode)
            outputs.append(out)
            caches.append(cache)

        if spec.variant == 'C':
            classifier_inputs = [np.concatenate(outputs, axis=1)]
        elif spec.variant == 'D':
            classifier_inputs = [outputs[0]] * spec.n_branches
        else:
            classifier_inputs = outputs

        logits = [clf.forward(x) for clf, x in zip(self.classifiers, classifier_inputs)]
        self._cache = _HeadCache(
            features_shape=features.shape,
            embed_caches=caches,
            classifier_inputs=classifier_inputs,
        )
        return logits, DescriptorSet(groups=outputs)

    def backward(
        self,
        grad_logits: List[np.ndarray],
        grad_groups: Optional[List[np.ndarray]] = None,
    ) -> np.ndarray:
        """
        Backpropagate branch logit gradients (and optionally gradients on the
        group descriptors, e.g. from a metric loss) to the global feature.
        """
        if self._cache is None:
            raise NotForwardedError("ChannelGroupHead.backward() called before forward()")
        cache = self._cache
        spec = self.spec
        if len(grad_logits) != len(self.classifiers):
            raise ShapeMismatchError(
                f"{len(grad_logits)} logit gradients for {len(self.classifiers)} branches",
                dimension='branches', expected=len(self.classifiers), actual=len(grad_logits),
            )

        grad_outputs = [np.zeros_like(c.bn_out) for c in cache.embed_caches]
        for branch, (clf, x) in enumerate(zip(self.classifiers, cache.classifier_inputs)):
            grad_x = clf.backward(grad_logits[branch], x)
            if spec.variant == 'C':
                for i, piece in enumerate(np.split(grad_x, spec.n_c, axis=1)):
                    grad_outputs[i] += piece
            elif spec.variant == 'D':
                grad_outputs[0] += grad_x
            else:
                grad_outputs[branch] += grad_x

        if grad_groups is not None:
            for i, grad in enumerate(grad_groups):
                grad_outputs[i] += grad

        grad_features = np.zeros(cache.features_shape, dtype=DTYPE)
        for call, channels in enumerate(self._embed_slices()):
            grad_features[:, channels] += self._embed_for(call).backward(
                grad_outputs[call], cache.embed_caches[call]
            )
        return grad_features

    def parameters(self) -> List[ParamTensor]:
        params = [p for embed in self.embeds for p in embed.parameters()]
        params.extend(p for clf in self.classifiers for p in clf.parameters())
        return params

    def buffers(self) -> Dict[str, np.ndarray]:
        buffers: Dict[str, np.ndarray] = {}
        for embed in self.embeds:
            buffers.update(embed.buffers())
        return buffers


def stripe_pool(maps: np.ndarray, p: int) -> List[np.ndarray]:
    """Average-pool p equal horizontal stripes of N x C x H x W maps."""
    height = maps.shape[2]
    if p < 1 or height % p:
        raise ShapeMismatchError(
            f"feature-map height {height} is not divisible into {p} stripes",
            dimension='height', expected=f"multiple of {p}", actual=height,
        )
    rows = height // p
    return [maps[:, :, s * rows:(s + 1) * rows, :].mean(axis=(2, 3)) for s in range(p)]


def stripe_pool_backward(grad_stripes: List[np.ndarray], maps_shape: Tuple[int, ...]) -> np.ndarray:
    p = len(grad_stripes)
    _, _, height, width = maps_shape
    rows = height // p
    grad = np.zeros(maps_shape, dtype=DTYPE)
    for s, g in enumerate(grad_stripes):
        grad[:, :, s * rows:(s + 1) * rows, :] += g[:, :, None, None] / (rows * width)
    return grad


class StripeHead:
    """
    Horizontal part head: per-stripe pooling, embedding and classification.

    Every stripe has its own embedding and classifier.
    """

    def __init__(self, spec: HeadSpec, rng: np.random.Generator):
        self.spec = spec
        self.p = spec.part_stripes
        self.embeds = [
            EmbedBlock(f'head.stripe{s}.embed', spec.c_total, spec.embed_dim, rng)
            for s in range(self.p)
        ]
        self.classifiers = [
            Classifier(f'head.stripe{s}.classifier', spec.embed_dim, spec.n_id, rng)
            for s in range(self.p)
        ]
        self._cache: Optional[Tuple[Tuple[int, ...], List[_EmbedCache], List[np.ndarray]]] = None

    def forward(self, maps: np.ndarray, mode: Mode = 'train') -> Tuple[List[np.ndarray], List[np.ndarray]]:
        """Return (p branch logits, p stripe descriptors)."""
        pooled = stripe_pool(maps, self.p)
        outputs, caches = [], []
        for embed, x in zip(self.embeds, pooled):
            out, cache = embed.forward(x, mode)
            outputs.append(out)
            caches.append(cache)
        logits = [clf.forward(x) for clf, x in zip(self.classifiers, outputs)]
        self._cache = (maps.shape, caches, outputs)
        return logits, outputs

    def backward(
        self,
        grad_logits: List[np.ndarray],
        grad_stripes: Optional[List[np.ndarray]] = None,
    ) -> np.ndarray:
        if self._cache is None:
            raise NotForwardedError("StripeHead.backward() called before forward()")
        maps_shape, caches, outputs = self._cache
        grad_pooled = []
        for s, (embed, clf) in enumerate(zip(self.embeds, self.classifiers)):
            grad_out = clf.backward(grad_logits[s], outputs[s])
            if grad_stripes is not None:
                grad_out = grad_out + grad_stripes[s]
            grad_pooled.append(embed.backward(grad_out, caches[s]))
        return stripe_pool_backward(grad_pooled, maps_shape)

    def parameters(self) -> List[ParamTensor]:
        params = [p for embed in self.embeds for p in embed.parameters()]
        params.extend(p for clf in self.classifiers for p in clf.parameters())
        return params

    def buffers(self) -> Dict[str, np.ndarray]:
        buffers: Dict[str, np.ndarray] = {}
        for embed in self.embeds:
            buffers.update(embed.buffers())
        return buffers


def param_breakdown(spec: HeadSpec) -> Dict[str, int]:
    """Trainable scalar counts of the head, by component."""
    d = spec.embed_dim

    def embed_block(fan_in: int) -> int:
        # linear weight + bias, then batch-norm gamma + beta
        return fan_in * d + d + 2 * d

    counts = {
        'embed': spec.n_embeds * embed_block(spec.embed_in),
        'classifier': spec.n_branches * (spec.classifier_in * spec.n_id + spec.n_id),
        'stripe_embed': spec.part_stripes * embed_block(spec.c_total),
        'stripe_classifier': spec.part_stripes * (d * spec.n_id + spec.n_id),
    }
    return counts


def param_count(spec: HeadSpec) -> int:
    """Exact number of trainable scalars in the head."""
    return sum(param_breakdown(spec).values())
