"""
Unit tests for exceptions.
"""

import pytest
from groupreid.exceptions import (
    GroupReidError,
    ConfigurationError,
    ShapeMismatchError,
    LabelRangeError,
    NotForwardedError,
    DivergenceError,
    CheckpointFormatError,
    EvaluationError,
)


class TestDivergenceError:
    """Tests for DivergenceError exception."""

    def test_basic_creation(self):
        """Test basic exception creation."""
        exc = DivergenceError(
            message="training diverged",
            epoch=2,
            step=17,
            lr=0.1,
            loss=float('nan'),
            threshold=1e6,
        )

        assert exc.epoch == 2
        assert exc.step == 17
        assert exc.recent_losses == []

    def test_diagnostic_summary_first_step(self):
        """Test summary for a run that diverged immediately."""
        exc = DivergenceError("diverged", epoch=0, step=0, lr=0.1, loss=float('inf'), threshold=1e6)

        summary = exc.get_diagnostic_summary()

        assert "diverged on the first step" in summary
        assert "Epoch: 0  Step: 0" in summary

    def test_diagnostic_summary_lists_recent_losses(self):
        """Test summary shows the last five losses."""
        exc = DivergenceError(
            "diverged", epoch=1, step=9, lr=0.5, loss=2e6, threshold=1e6,
            recent_losses=[1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
        )

        summary = exc.get_diagnostic_summary()

        assert "32.000000" in summary
        assert "1.000000" not in summary
        assert "RECENT LOSSES" in summary

    def test_str_includes_diagnostics(self):
        """Test __str__ includes diagnostic information."""
        exc = DivergenceError("loss exploded", epoch=0, step=3, lr=0.1, loss=1e9, threshold=1e6)

        string = str(exc)

        assert "loss exploded" in string
        assert "TRAINING DIVERGED" in string
        assert "SUGGESTIONS" in string


class TestShapeMismatchError:
    """Tests for ShapeMismatchError exception."""

    def test_carries_dimension_details(self):
        """Test dimension, expected and actual are kept."""
        exc = ShapeMismatchError("bad channels", dimension='in_channels', expected=3, actual=1)

        assert exc.dimension == 'in_channels'
        assert exc.expected == 3
        assert exc.actual == 1
        assert str(exc) == "bad channels"

    def test_defaults(self):
        """Test details default to None."""
        exc = ShapeMismatchError("bad")

        assert exc.dimension is None
        assert exc.expected is None


class TestCheckpointFormatError:
    """Tests for CheckpointFormatError exception."""

    def test_with_original_error(self):
        """Test wrapping an underlying exception."""
        original = OSError("disk gone")
        exc = CheckpointFormatError("cannot read", original_error=original)

        assert exc.original_error is original

    def test_without_original_error(self):
        """Test original_error defaults to None."""
        exc = CheckpointFormatError("truncated")

        assert exc.original_error is None


class TestEvaluationError:
    """Tests for EvaluationError exception."""

    def test_details(self):
        """Test details dict is kept and defaults to empty."""
        assert EvaluationError("empty").details == {}
        assert EvaluationError("range", details={'index': 9}).details['index'] == 9


class TestExceptionHierarchy:
    """Tests for exception inheritance."""

    @pytest.mark.parametrize('cls', [
        ConfigurationError,
        ShapeMismatchError,
        LabelRangeError,
        NotForwardedError,
        CheckpointFormatError,
        EvaluationError,
    ])
    def test_all_inherit_from_base(self, cls):
        """Test all exceptions inherit from GroupReidError."""
        assert issubclass(cls, GroupReidError)

    def test_divergence_inherits_from_base(self):
        """Test DivergenceError inherits from GroupReidError."""
        assert issubclass(DivergenceError, GroupReidError)

    def test_catch_all_with_base(self):
        """Test catching all groupreid errors with base class."""
        with pytest.raises(GroupReidError):
            raise LabelRangeError("label 9 of 8 classes")
