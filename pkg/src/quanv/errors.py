"""Exception hierarchy shared by the library and the CLI."""


class QuanvError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(QuanvError, ValueError):
    """Invalid configuration, argument range or qubit-count mismatch."""


class ShapeError(QuanvError, ValueError):
    """Array or image dimensions do not fit the operation."""


class WireError(QuanvError, IndexError):
    """Qubit index out of range or duplicated."""


class FormatError(QuanvError, ValueError):
    """Malformed input file (IDX, CSV, checkpoint)."""


class CacheError(FormatError):
    """Feature cache is malformed, truncated or stamped for another circuit."""
