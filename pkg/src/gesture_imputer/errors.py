"""Exception types.

Data problems (bad files, impossible geometry) derive from ``DataError`` so the
CLI can map them to a single exit code.
"""

__all__ = [
    "DataError",
    "FormatError",
    "MissingFloor",
    "MissingFloorWarning",
    "EmptyCloud",
    "OutOfBounds",
    "EmptyScene",
    "CenterOccupied",
    "TooLarge",
    "DegeneratePointing",
    "EmptyLibrary",
    "NoPlacement",
    "DegenerateRay",
    "LengthMismatch",
    "EmptyInput",
]


class DataError(ValueError):
    pass


class FormatError(DataError):
    """Malformed PLY / JSON input."""


class MissingFloor(DataError):
    """No floor points available and no floor height override given."""


class MissingFloorWarning(UserWarning):
    pass


class EmptyCloud(DataError):
    pass


class OutOfBounds(DataError, IndexError):
    pass


class EmptyScene(DataError):
    pass


class CenterOccupied(DataError):
    """The visibility seed cell is occupied (target was not erased)."""


class TooLarge(DataError):
    pass


class DegeneratePointing(DataError):
    pass


class EmptyLibrary(DataError):
    pass


class NoPlacement(DataError):
    pass


class DegenerateRay(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass
