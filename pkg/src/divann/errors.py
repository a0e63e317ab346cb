"""Exception hierarchy shared across the package."""


class DivannError(Exception):
    """Base class. ``exit_code`` is what the CLI returns for this category."""

    exit_code = 1
    category = "error"


class InputError(DivannError, ValueError):
    exit_code = 2
    category = "input"


class FormatError(DivannError):
    """Malformed file. ``offset`` is the byte offset of the problem, when known."""

    exit_code = 3
    category = "format"

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ResourceError(DivannError):
    """A search budget was exhausted. ``partial`` carries whatever was found."""

    exit_code = 4
    category = "resource"

    def __init__(self, message, partial=None, diagnostics=None):
        super().__init__(message)
        self.partial = partial
        self.diagnostics = dict(diagnostics or {})


class MissingGroundTruthError(DivannError):
    exit_code = 5
    category = "ground-truth"
