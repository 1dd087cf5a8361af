"""Exception types, grouped by how the CLI reports them.

ConfigError maps to exit code 1 (usage), FormatError and subclasses to
exit code 2 (data/format), NumericError to exit code 3.
"""


class AinetError(Exception):
    """Base class for all library errors."""


class ShapeError(AinetError, ValueError):
    """Operand shapes violate an operation's contract."""


class ConfigError(AinetError, ValueError):
    """Invalid configuration value, unknown key, or bad flag combination."""


class FormatError(AinetError, ValueError):
    """Malformed or truncated data file."""


class ManifestError(FormatError):
    """Malformed manifest: bad header, bad label, duplicate id, missing file."""


class PartitionError(AinetError, ValueError):
    """Bag cannot be split into the requested number of regions."""


class NumericError(AinetError, ArithmeticError):
    """Non-finite value or failed numeric self-check."""
