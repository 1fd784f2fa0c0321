"""Exception types shared across the package."""


class MivarnetError(Exception):
    """Base class for all package errors."""


class ShapeError(MivarnetError, ValueError):
    """Array shapes do not agree."""


class ParameterError(MivarnetError, ValueError):
    """A parameter violates an operation precondition."""


class ConfigError(ParameterError):
    """An experiment configuration failed validation."""


class FormatError(MivarnetError, ValueError):
    """A serialized artifact is malformed or of an unknown version."""


class DivergenceError(MivarnetError, RuntimeError):
    """Training produced a non-finite loss or parameter."""


class DegenerateClassError(MivarnetError, ValueError):
    """A classifier was asked to train without both classes present."""
