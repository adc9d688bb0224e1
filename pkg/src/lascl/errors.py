"""Exception types raised across the package."""


class LasclError(Exception):
    """Base class for all errors raised by lascl."""


# taxonomy
class EmptyPath(LasclError, ValueError):
    pass


class DuplicateClass(LasclError, ValueError):
    pass


class PrefixConflict(LasclError, ValueError):
    """A declared leaf would be an internal node of another path."""


class LeafCollision(LasclError, ValueError):
    """Two classes resolve to the same root-to-leaf path."""


class UnknownClass(LasclError, KeyError):
    pass


class UnresolvedPlaceholder(LasclError, ValueError):
    pass


class DepthOutOfRange(LasclError, ValueError):
    pass


# data
class ParseError(LasclError, ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyDataset(LasclError, ValueError):
    pass


# numerics
class ShapeMismatch(LasclError, ValueError):
    pass


class SingleClass(LasclError, ValueError):
    """Instance-center terms need at least two classes."""


class EmptyProbeSet(LasclError, ValueError):
    pass


class InsufficientData(LasclError, ValueError):
    pass
