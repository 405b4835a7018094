"""Exception types shared across the package."""


class DomainError(ValueError):
    """An operation was called outside its mathematical domain."""


class ShapeError(ValueError):
    """Operand shapes are incompatible with the operation."""


class FormatError(ValueError):
    """A persisted artifact (tensor file, manifest, record) is malformed."""


class ConfigError(ValueError):
    """A run configuration is internally inconsistent."""


class EngineError(RuntimeError):
    """A training/evaluation run failed at runtime (e.g. non-finite loss)."""
