"""Exception hierarchy shared by every tpsim module."""


class TpsimError(Exception):
    """Base class; the CLI maps subclasses onto exit codes."""

    exit_code = 1


class UsageError(TpsimError):
    pass


class UnsupportedSpecError(TpsimError):
    pass


class FormatError(TpsimError):
    """A file has the wrong magic/header or a malformed record."""

    exit_code = 4


class TraceFormatError(FormatError):
    pass


class TraceParseError(FormatError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ManifestError(FormatError):
    pass


class HintCapacityError(ManifestError):
    pass


class DuplicateHintError(ManifestError):
    pass


class CounterFormatError(FormatError):
    pass


class StoreVersionError(FormatError):
    exit_code = 3


class SchemaError(FormatError):
    pass
