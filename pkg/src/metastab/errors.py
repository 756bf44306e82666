"""Exception hierarchy shared by all modules."""


class MetastabError(Exception):
    """Base class for every error raised by this package."""


class MissingProfile(MetastabError):
    pass


class NoConvergence(MetastabError):
    pass


class EmptyResult(MetastabError):
    pass


class Disconnected(MetastabError):
    pass


class NotSeparated(MetastabError):
    pass


class UnreachedSaddleSet(MetastabError):
    pass


class NotProper(MetastabError, ValueError):
    pass


class BoxTooSmall(MetastabError, ValueError):
    pass


class NoRoot(MetastabError):
    pass


class TooLarge(MetastabError):
    pass


class ShiftOverflow(MetastabError, OverflowError):
    """A local exponent (F - shift)/eps left the floating range."""


class ShiftMismatch(MetastabError, ValueError):
    pass


class SpectrumInvalid(MetastabError, ValueError):
    pass


class ZeroCapacity(MetastabError, ZeroDivisionError):
    pass


class TopologyGeneral(MetastabError):
    pass


class UnstableStep(MetastabError):
    pass


class ConfigInvalid(MetastabError, ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class MissingData(MetastabError):
    pass
