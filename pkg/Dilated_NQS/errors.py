# Exception hierarchy shared by the engine, the CLI and the run browser.
# The CLI turns these into exit codes (see cli.EXIT_CODES).


class DnqsError(Exception):
    """Base class for every error raised by this project."""


class InvalidInputError(DnqsError, ValueError):
    """A value is non-finite or outside its allowed range."""


class ShapeError(DnqsError, ValueError):
    """Array dimensions do not match the parameters they meet."""


class ConfigError(DnqsError, ValueError):
    """A run/theory configuration is malformed or inconsistent."""


class ResourceError(DnqsError):
    """A request would enumerate or diagonalize an intractable space."""


class FitError(DnqsError):
    """A least-squares fit had too few usable points."""

    def __init__(self, message, excluded=0):
        super().__init__(message)
        self.excluded = excluded


class CheckpointError(DnqsError):
    """A checkpoint could not be written, read, or has the wrong version."""

    def __init__(self, message, found_version=None):
        super().__init__(message)
        self.found_version = found_version
