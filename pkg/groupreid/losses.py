"""
Training losses.

head_loss is the multi-branch classification objective: one batch-mean
cross-entropy per branch, summed. triplet_hard_loss is the batch-hard
metric-learning baseline it is compared against.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import TripletConfig
from .exceptions import ShapeMismatchError
from .tensor import DTYPE, softmax_cross_entropy


# Guards the derivative of the Euclidean distance at coincident points.
DISTANCE_EPS = 1e-12


@dataclass
class BranchLoss:
    """
    Attributes:
        total: Sum of the branch losses.
        per_branch: Batch-mean cross-entropy of every branch.
        grad_logits: d total / d logits, one array per branch.
    """

    total: float
    per_branch: List[float]
    grad_logits: List[np.ndarray]


def head_loss(logits: Sequence[np.ndarray], labels: np.ndarray) -> BranchLoss:
    """Total loss L = sum_i L_i with L_i the batch-mean cross-entropy of branch i."""
    if not logits:
        raise ShapeMismatchError("head_loss needs at least one branch", dimension='branches',
                                 expected='>= 1', actual=0)
    per_branch, grads = [], []
    for branch_logits in logits:
        losses, grad = softmax_cross_entropy(branch_logits, labels)
        batch = branch_logits.shape[0]
        per_branch.append(float(losses.mean()))
        grads.append(grad / batch)
    return BranchLoss(total=float(sum(per_branch)), per_branch=per_branch, grad_logits=grads)


def pairwise_distances(embeddings: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Euclidean distances B x B and the difference tensor B x B x D they came from."""
    diffs = embeddings[:, None, :] - embeddings[None, :, :]
    return np.sqrt((diffs ** 2).sum(axis=2)), diffs


def hardest_pairs(distances: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Batch-hard selection for every anchor.

    Returns (hardest_positive, hardest_negative, valid). The hardest positive
    is the farthest other sample with the anchor's label, the hardest negative
    the closest sample with a different label; ties go to the lowest index.
    Anchors without a positive or without a negative are marked invalid.
    """
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    others = ~np.eye(len(labels), dtype=bool)
    positive_mask = same & others
    negative_mask = ~same

    pos_dist = np.where(positive_mask, distances, -np.inf)
    neg_dist = np.where(negative_mask, distances, np.inf)
    hardest_positive = pos_dist.argmax(axis=1)
    hardest_negative = neg_dist.argmin(axis=1)
    valid = positive_mask.any(axis=1) & negative_mask.any(axis=1)
    return hardest_positive, hardest_negative, valid


def triplet_hard_loss(
    embeddings: np.ndarray,
    labels: np.ndarray,
    cfg: Optional[TripletConfig] = None,
) -> Tuple[float, np.ndarray]:
    """
    Batch-hard triplet loss and its gradient w.r.t. the embeddings.

    Per anchor a: max(0, margin + d(a, p*) - d(a, n*)) (or softplus of
    d(a, p*) - d(a, n*) with soft_margin), averaged over valid anchors. The
    gradient flows through the selected pairs only.
    """
    cfg = cfg or TripletConfig()
    labels = np.asarray(labels)
    if embeddings.ndim != 2 or embeddings.shape[0] != labels.shape[0]:
        raise ShapeMismatchError(
            f"{labels.shape[0]} labels for embeddings of shape {embeddings.shape}",
            dimension='batch', expected=embeddings.shape[0], actual=labels.shape[0],
        )
    if np.unique(labels).size < 2:
        raise ShapeMismatchError(
            "batch-hard triplet loss needs at least two identities in the batch",
            dimension='identities', expected='>= 2', actual=int(np.unique(labels).size),
        )

    distances, diffs = pairwise_distances(embeddings)
    positives, negatives, valid = hardest_pairs(distances, labels)
    anchors = np.flatnonzero(valid)
    if anchors.size == 0:
        raise ShapeMismatchError(
            "no anchor in the batch has both a positive and a negative",
            dimension='identities', expected='some identity with >= 2 samples', actual=0,
        )

    d_pos = distances[anchors, positives[anchors]]
    d_neg = distances[anchors, negatives[anchors]]
    gap = d_pos - d_neg
    if cfg.soft_margin:
        per_anchor = np.logaddexp(0.0, gap)
        weight = 1.0 / (1.0 + np.exp(-gap))
    else:
        per_anchor = np.maximum(0.0, cfg.margin + gap)
        weight = (cfg.margin + gap > 0).astype(DTYPE)
    loss = float(per_anchor.mean())

    scale = weight / anchors.size
    grad = np.zeros_like(embeddings, dtype=DTYPE)
    for a, p, n, w in zip(anchors, positives[anchors], negatives[anchors], scale):
        if w == 0:
            continue
        # d(a, j) = ||x_a - x_j||; its gradient w.r.t. x_a is (x_a - x_j) / d.
        unit_pos = diffs[a, p] / max(distances[a, p], DISTANCE_EPS)
        unit_neg = diffs[a, n] / max(distances[a, n], DISTANCE_EPS)
        grad[a] += w * (unit_pos - unit_neg)
        grad[p] -= w * unit_pos
        grad[n] += w * unit_neg
    return loss, grad
