"""Exception hierarchy shared by all dataspace modules."""


class DataspaceError(Exception):
    """Base class for all errors raised by this package."""


class StatePointError(DataspaceError, ValueError):
    """A state point or document violates the value/key invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{path or '<root>'}: {reason}" for path, reason in self.violations)
        super().__init__(f"invalid state point: {msg}")


class CorruptionError(DataspaceError):
    """An existing metadata file cannot be parsed or fails its id check."""


class ConflictError(DataspaceError):
    """The requested change would clobber existing, different state."""


class NotAProjectError(DataspaceError):
    """No project configuration was found in any ancestor directory."""


class UnknownIdError(DataspaceError, KeyError):
    """No initialized job with the requested id exists."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown job id"


class FilterParseError(DataspaceError, ValueError):
    """A filter document or CLI token list is malformed."""


class TemplateError(DataspaceError, ValueError):
    """A command template placeholder cannot be resolved."""


class StaleIndexError(DataspaceError):
    """An indexed file no longer exists on disk."""


class SchedulerError(DataspaceError):
    """The scheduler rejected a submission or does not support the request."""


class SubmitError(DataspaceError):
    """Submission stopped part way; ``submitted`` holds the cluster ids that went through."""

    def __init__(self, msg, submitted=()):
        super().__init__(msg)
        self.submitted = list(submitted)


class ExportError(DataspaceError):
    """A sink failed; ``count`` records were written before the failure."""

    def __init__(self, msg, count):
        super().__init__(msg)
        self.count = count
