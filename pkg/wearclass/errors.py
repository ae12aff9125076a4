import typing as typ

__all__ = ['WearClassError', 'EmptyShapeError', 'InsertNotFoundError', 'MissingEdgesError',
           'DimensionMismatchError', 'SingleClassError', 'DatasetError', 'ConfigError',
           'PipelineRunError']


class WearClassError(Exception):
    """
    Base class of all errors raised by this package.
    """


class EmptyShapeError(WearClassError, ValueError):
    def __init__(self, message: str = "empty shape") -> None:
        super().__init__(message)


class InsertNotFoundError(WearClassError, ValueError):
    def __init__(self, message: str = "no insert found") -> None:
        super().__init__(message)


class MissingEdgesError(WearClassError):
    """
    Raised when fewer than four cutting edges could be detected on an insert.

    Parameters
    ----------
    missing
        the sides (north, south, east, west) without a detectable edge band.
    """
    def __init__(self, missing: typ.Sequence[str]) -> None:
        self.missing = tuple(missing)
        super().__init__(f"cutting edges not detected on side(s): {', '.join(self.missing)}")

    def __reduce__(self):
        return type(self), (self.missing,)


class DimensionMismatchError(WearClassError, ValueError):
    pass


class SingleClassError(WearClassError, ValueError):
    pass


class DatasetError(WearClassError):
    pass


class ConfigError(WearClassError):
    """
    Invalid configuration. ``line`` is set when the error could be traced back
    to a line of the configuration file.
    """
    def __init__(self, message: str, line: typ.Optional[int] = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PipelineRunError(WearClassError):
    def __init__(self, run: int, cause: BaseException) -> None:
        self.run = run
        self.cause = cause
        super().__init__(f"evaluation run {run} failed: {cause}")

    def __reduce__(self):
        return type(self), (self.run, self.cause)
