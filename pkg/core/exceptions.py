class SortitionError(ValueError):
    """Base class for domain errors raised by the library"""


class InvalidInstance(SortitionError):
    pass


class DisconnectedGraph(SortitionError):
    pass


class SupportCapExceeded(SortitionError):
    """Raised instead of silently truncating an enumeration"""


class DegenerateOptimum(SortitionError):
    """The optimal social cost is zero, so distortion is undefined"""


class DatasetError(SortitionError):
    pass
