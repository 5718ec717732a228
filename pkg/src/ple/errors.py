"""Exception hierarchy shared by the library and the CLI."""


class PLEError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class InputFileError(PLEError, FileNotFoundError):
    exit_code = 3


class SchemaError(PLEError, ValueError):
    """Malformed record, unknown type name, or mismatched ids between artifacts."""

    exit_code = 4


class ConfigError(PLEError, ValueError):
    exit_code = 5


class DivergenceError(PLEError, RuntimeError):
    exit_code = 6
