"""Exception types shared across the library."""


class RaymapError(Exception):
    """Base class for all library errors."""


class NonPositiveInput(RaymapError, ValueError):
    pass


class InvalidAngle(RaymapError, ValueError):
    pass


class UnknownMaterial(RaymapError, KeyError):
    pass


class DegeneratePath(RaymapError, ValueError):
    pass


class DegenerateGeometry(RaymapError, ValueError):
    pass


class EmptyPalette(RaymapError, ValueError):
    pass


class InvalidDimensions(RaymapError, ValueError):
    pass


class TxOutsideGrid(RaymapError, ValueError):
    pass


class ParseError(RaymapError, ValueError):
    pass


class GridMismatch(RaymapError, ValueError):
    pass


class DegenerateReference(RaymapError, ValueError):
    pass


class ScoreOutOfRange(RaymapError, ValueError):
    pass


class NoSamplesForMechanism(RaymapError, ValueError):
    pass


class InvalidMix(RaymapError, ValueError):
    pass


class OutputDirNotWritable(RaymapError, OSError):
    pass


class ManifestInvalid(RaymapError, ValueError):
    pass
