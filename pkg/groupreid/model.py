"""
Re-id model: backbone -> global average pooling -> channel-group head,
plus the optional horizontal-stripe head on the same feature maps.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .backbone import Backbone
from .config import ModelSpec
from .exceptions import CheckpointFormatError, NotForwardedError, ShapeMismatchError
from .head import ChannelGroupHead, DescriptorSet, StripeHead
from .tensor import Mode, ParamTensor, global_avg_pool, global_avg_pool_backward


logger = logging.getLogger('groupreid')


@dataclass
class ModelOutput:
    """
    Attributes:
        logits: Branch logits; channel-group branches first, then stripes.
        descriptors: Transformed group (and stripe) features.
    """

    logits: List[np.ndarray]
    descriptors: DescriptorSet


class ReidModel:
    """
    Complete trainable model.

    All parameters are drawn from one generator seeded with `seed`, in the
    order backbone, head embeddings, head classifiers, stripe head, so two
    specs with the same structure get bit-identical initial weights.
    """

    def __init__(self, spec: ModelSpec, seed: int = 0):
        self.spec = spec
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.backbone = Backbone(spec.backbone, rng)
        self.head = ChannelGroupHead(spec.head, rng)
        self.stripe_head = StripeHead(spec.head, rng) if spec.head.part_stripes else None
        self._maps_shape = None

    @property
    def n_branches(self) -> int:
        return self.spec.head.n_branches + self.spec.head.part_stripes

    def forward(self, images: np.ndarray, mode: Mode = 'train') -> ModelOutput:
        maps = self.backbone.forward(images, mode)
        features = global_avg_pool(maps)
        logits, descriptors = self.head.forward(features, mode)
        if self.stripe_head is not None:
            stripe_logits, stripe_descriptors = self.stripe_head.forward(maps, mode)
            logits = logits + stripe_logits
            descriptors.stripes = stripe_descriptors
        self._maps_shape = maps.shape
        return ModelOutput(logits=logits, descriptors=descriptors)

    def backward(
        self,
        grad_logits: List[np.ndarray],
        grad_descriptor: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """
        Backpropagate to the images.

        Args:
            grad_logits: One gradient per branch, in ModelOutput.logits order.
            grad_descriptor: Optional gradient on the standard descriptor
                             (groups then stripes, N x Dim_f).
        """
        if self._maps_shape is None:
            raise NotForwardedError("ReidModel.backward() called before forward()")
        head_spec = self.spec.head
        if len(grad_logits) != self.n_branches:
            raise ShapeMismatchError(
                f"{len(grad_logits)} logit gradients for {self.n_branches} branches",
                dimension='branches', expected=self.n_branches, actual=len(grad_logits),
            )
        n_head = head_spec.n_branches

        grad_groups = grad_stripes = None
        if grad_descriptor is not None:
            if grad_descriptor.shape[1] != head_spec.standard_dim:
                raise ShapeMismatchError(
                    f"descriptor gradient has {grad_descriptor.shape[1]} columns, "
                    f"expected {head_spec.standard_dim}",
                    dimension='descriptor', expected=head_spec.standard_dim,
                    actual=grad_descriptor.shape[1],
                )
            pieces = np.split(grad_descriptor, head_spec.n_groups + head_spec.part_stripes, axis=1)
            grad_groups = pieces[:head_spec.n_groups]
            grad_stripes = pieces[head_spec.n_groups:]

        grad_features = self.head.backward(grad_logits[:n_head], grad_groups)
        grad_maps = global_avg_pool_backward(grad_features, self._maps_shape)
        if self.stripe_head is not None:
            grad_maps += self.stripe_head.backward(grad_logits[n_head:], grad_stripes)
        return self.backbone.backward(grad_maps)

    def parameters(self) -> List[ParamTensor]:
        params = self.backbone.parameters() + self.head.parameters()
        if self.stripe_head is not None:
            params.extend(self.stripe_head.parameters())
        return params

    def named_parameters(self) -> Dict[str, ParamTensor]:
        return {param.name: param for param in self.parameters()}

    def buffers(self) -> Dict[str, np.ndarray]:
        buffers = dict(self.backbone.buffers())
        buffers.update(self.head.buffers())
        if self.stripe_head is not None:
            buffers.update(self.stripe_head.buffers())
        return buffers

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Parameter values and batch-norm running statistics, by name."""
        state = {name: param.value for name, param in self.named_parameters().items()}
        state.update(self.buffers())
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """Copy tensors into the model; names and shapes must match exactly."""
        targets = {name: param.value for name, param in self.named_parameters().items()}
        targets.update(self.buffers())
        missing = sorted(set(targets) - set(state))
        unexpected = sorted(set(state) - set(targets))
        if missing or unexpected:
            raise CheckpointFormatError(
                f"checkpoint tensors do not match the model: missing {missing}, unexpected {unexpected}"
            )
        for name, target in targets.items():
            source = np.asarray(state[name])
            if source.shape != target.shape:
                raise CheckpointFormatError(
                    f"tensor '{name}' has shape {source.shape}, model expects {target.shape}"
                )
            target[...] = source

    def extract(self, images: np.ndarray, batch_size: int = 64) -> DescriptorSet:
        """Eval-mode descriptors, computed in chunks of batch_size images."""
        if images.shape[0] == 0:
            raise ShapeMismatchError("cannot extract descriptors from zero images",
                                     dimension='batch', expected='>= 1', actual=0)
        parts = []
        for start in range(0, images.shape[0], batch_size):
            parts.append(self.forward(images[start:start + batch_size], 'eval').descriptors)
        return DescriptorSet.merge(parts)

    def predict_logits(self, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
        """Eval-mode identity scores: the sum of every branch's logits."""
        chunks = []
        for start in range(0, images.shape[0], batch_size):
            logits = self.forward(images[start:start + batch_size], 'eval').logits
            chunks.append(np.sum(logits, axis=0))
        return np.concatenate(chunks, axis=0)
