"""
Error hierarchy shared by every layer.

Each error carries a short machine-parsable ``category`` which the CLI prints
as ``error:<category>: <message>``.
"""


class SeanetError(Exception):
    """Base class for all errors raised on purpose by this package"""

    category = "error"


class InvalidArgumentError(SeanetError, ValueError):
    category = "invalid-argument"


class ShapeError(SeanetError, ValueError):
    category = "shape"


class ConfigurationError(SeanetError):
    category = "configuration"


class MissingModalityError(ConfigurationError):
    category = "missing-modality"


class AlignmentError(SeanetError):
    category = "alignment"


class UndefinedMetricError(SeanetError):
    category = "undefined-metric"


class CheckpointError(SeanetError):
    category = "checkpoint"


class UntrainedModelError(SeanetError):
    category = "untrained-model"


class AudioIOError(SeanetError, OSError):
    category = "io"


class NonFiniteLossError(SeanetError, RuntimeError):
    """Raised when a loss turns NaN/Inf; training stops instead of skipping the step."""

    category = "non-finite-loss"

    def __init__(self, step: int, component: str, max_activation: float):
        self.step = step
        self.component = component
        self.max_activation = max_activation
        super().__init__(
            f"non-finite {component} at step {step} (max |activation| = {max_activation:.4g})"
        )
