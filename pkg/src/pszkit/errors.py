"""Exception types shared across the package."""


class PszkitError(Exception):
    """Base class for all package errors."""


class GeometryError(PszkitError):
    """Degenerate or invalid geometry (coincident source/receiver, bad scene)."""


class GridError(PszkitError):
    """Invalid frequency grid, band mask, or offset-grid parameters."""


class ShapeError(PszkitError):
    """Array dimensions inconsistent with the declared layout."""


class CheckpointError(PszkitError):
    """Base class for checkpoint load/save failures."""


class CorruptCheckpointError(CheckpointError):
    """File truncated or header unparseable."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint written by an incompatible format version."""


class BandMismatchError(CheckpointError):
    """Checkpoint band differs from the band expected by the caller."""


class ConfigError(PszkitError):
    """Experiment configuration failed validation."""


class NumericalOverflowError(PszkitError):
    """A forward pass produced a non-finite intermediate value."""


class TrainingDivergedError(PszkitError):
    """Training loss became non-finite."""


class EvaluationError(PszkitError):
    """Evaluation protocol preconditions violated (inadmissible anchor, ...)."""
