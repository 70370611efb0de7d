"""
groupreid custom exceptions.

Provides clear, actionable error types for training and evaluation failures.
"""

from typing import Any, Dict, List, Optional, Sequence


class GroupReidError(Exception):
    """Base exception for all groupreid errors."""
    pass


class ConfigurationError(GroupReidError):
    """
    Raised when invalid configuration is provided.
    """
    pass


class ShapeMismatchError(GroupReidError):
    """
    Raised when a tensor operation receives incompatible shapes.

    Attributes:
        dimension: Name of the offending dimension (e.g. 'in_channels')
        expected: What the operation needed
        actual: What it was given
    """

    def __init__(
        self,
        message: str,
        dimension: Optional[str] = None,
        expected: Any = None,
        actual: Any = None,
    ):
        super().__init__(message)
        self.dimension = dimension
        self.expected = expected
        self.actual = actual


class LabelRangeError(GroupReidError):
    """Raised when a class label falls outside [0, n_classes)."""
    pass


class NotForwardedError(GroupReidError):
    """
    Raised when backward() is called before forward().

    Layer-wise backward passes read caches written by the forward pass.
    """
    pass


class DivergenceError(GroupReidError):
    """
    Raised when the training loss becomes non-finite or explodes.

    Contains diagnostic information about where training went wrong.
    """

    def __init__(
        self,
        message: str,
        epoch: int,
        step: int,
        lr: float,
        loss: float,
        threshold: float,
        recent_losses: Optional[Sequence[float]] = None,
    ):
        super().__init__(message)
        self.epoch = epoch
        self.step = step
        self.lr = lr
        self.loss = loss
        self.threshold = threshold
        self.recent_losses: List[float] = list(recent_losses or [])

    def get_diagnostic_summary(self) -> str:
        """Return a human-readable summary of the divergence."""
        lines = [
            f"\n{'='*60}",
            "TRAINING DIVERGED - loss left the finite range",
            f"{'='*60}",
            f"Epoch: {self.epoch}  Step: {self.step}  lr: {self.lr:g}",
            f"Loss: {self.loss}  (threshold: {self.threshold:g})",
            "",
            "RECENT LOSSES:",
        ]

        if not self.recent_losses:
            lines.append("  (diverged on the first step)")
        else:
            for value in self.recent_losses[-5:]:
                lines.append(f"  {value:.6f}")

        lines.extend([
            "",
            "SUGGESTIONS:",
            "  1. Lower train.lr (try 10x smaller)",
            "  2. Raise train.weight_decay or shorten the schedule",
            "  3. Check data.label_noise and the PK batch shape",
            f"{'='*60}",
        ])

        return "\n".join(lines)

    def __str__(self) -> str:
        base = super().__str__()
        return f"{base}\n{self.get_diagnostic_summary()}"


class CheckpointFormatError(GroupReidError):
    """
    Raised when a checkpoint, matrix or dataset file cannot be decoded.

    This usually indicates:
    - The file was truncated
    - The magic string or format version does not match
    - The stored model spec disagrees with the stored tensors
    """

    def __init__(self, message: str, original_error: Optional[Exception] = None):
        super().__init__(message)
        self.original_error = original_error


class EvaluationError(GroupReidError):
    """
    Raised when an evaluation request cannot be served.

    Covers unknown inference settings, group indices out of range, voting
    with a single group, empty query sets and mismatched distance matrices.
    """

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details or {}
