class PodiffError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(PodiffError, ValueError):
    pass


class SceneSpecError(PodiffError, ValueError):
    pass


class EmptyEvaluationError(PodiffError, ValueError):
    pass


class DepthFormatError(PodiffError, ValueError):
    """Malformed depth file. ``offset`` is the byte position where parsing failed."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ConfigError(PodiffError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line
