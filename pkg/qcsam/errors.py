"""
Exception hierarchy for the QCSAM library.
Every error carries a readable message; a few carry structured context
(field name, byte offset, sample index) for the CLI error reporter.
"""

from typing import Optional


class QcsamError(Exception):
    """Base class for all library errors."""


class SizeError(QcsamError, ValueError):
    """Register size outside the dense-simulation range."""


class QubitIndexError(QcsamError, IndexError):
    """Gate target or control outside the register."""


class ShapeError(QcsamError, ValueError):
    """Mismatched widths, lengths or array shapes."""


class GateSpecError(QcsamError, ValueError):
    """Malformed gate operation."""


class PostSelectionError(QcsamError):
    """Post-selected branch has (numerically) zero probability."""


class DestructiveCancellationError(PostSelectionError):
    """A linear combination of states cancels to the zero vector."""


class BindingError(QcsamError, ValueError):
    """Data or parameter vector does not match the circuit's slot families."""


class DegenerateCoefficientsError(QcsamError, ValueError):
    """All combination coefficients or weights are zero."""


class InconsistentReadoutError(QcsamError):
    """Hadamard-test probabilities imply a weight with magnitude above 1."""


class InputDomainError(QcsamError, ValueError):
    """Feature values outside the encoding range [0, pi]."""


class DegenerateReadoutError(QcsamError):
    """Class-probability normalizer vanishes."""


class ConfigError(QcsamError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class SampleDegenerateError(QcsamError):
    """Forward pass failed on a specific sample."""

    def __init__(self, message: str, sample_index: Optional[int] = None):
        if sample_index is not None:
            message = f"{message} (sample {sample_index})"
        super().__init__(message)
        self.sample_index = sample_index


class DataError(QcsamError):
    """Dataset content cannot satisfy the request."""


class IdxFormatError(DataError):
    """Malformed IDX file."""

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} at byte offset {offset}"
        super().__init__(message)
        self.offset = offset


class StateError(QcsamError, RuntimeError):
    """Object used before it was fitted/initialized."""
