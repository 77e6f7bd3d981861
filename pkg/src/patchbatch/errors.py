"""Exception types raised across the package."""


class PatchBatchError(Exception):
    """Base class for all package errors."""


class DimensionError(PatchBatchError, ValueError):
    """Shapes of the operands do not conform."""


class DomainError(PatchBatchError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateBatchError(PatchBatchError, ValueError):
    """A batch is too small (or too unbalanced) for batch statistics."""


class StateError(PatchBatchError, RuntimeError):
    """An object is in the wrong mode for the requested operation."""


class SamplingError(PatchBatchError, ValueError):
    pass


class ConfigError(PatchBatchError, ValueError):
    pass


class InterpolationError(PatchBatchError, ValueError):
    pass


class PipelineError(PatchBatchError, RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
