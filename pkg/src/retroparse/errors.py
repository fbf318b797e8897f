"""Exception hierarchy.

Everything raised for bad input data derives from :class:`DataError`; the CLI
maps that family to exit code 3.
"""


class DataError(Exception):
    """Input data is malformed or inconsistent."""


# -- frame strings ---------------------------------------------------------

class FrameParseError(DataError):
    pass


class UnbalancedBrackets(FrameParseError):
    pass


class EmptyNode(FrameParseError):
    pass


class RootNotIntent(FrameParseError):
    pass


class MixedSlotChildren(FrameParseError):
    pass


class TrailingGarbage(FrameParseError):
    pass


class BadLabel(FrameParseError):
    """Node label has the wrong prefix for its position (slot under slot, etc.)."""


# -- vectors and indexes ---------------------------------------------------

class DimTooSmall(DataError):
    pass


class DimMismatch(DataError):
    pass


class DuplicateId(DataError):
    pass


class MissingId(DataError):
    pass


class UnknownId(DataError):
    pass


class EmbeddingParseError(DataError):
    pass


class EmptyInput(DataError):
    pass


class KZero(DataError):
    pass


class FormatError(DataError):
    pass


class VersionMismatch(FormatError):
    pass


# -- corpora ---------------------------------------------------------------

class RowParseError(DataError):
    def __init__(self, row: int, cause: Exception):
        self.row = row
        self.cause = cause
        super().__init__(f"row {row}: {type(cause).__name__}: {cause}")


class ColumnCountError(DataError):
    pass


class EmptyFile(DataError):
    pass


class BadFractions(DataError):
    pass


class UnknownDomain(DataError):
    pass


# -- retrieval / augmentation / parsing ------------------------------------

class EmptyIndex(DataError):
    pass


class NoCandidates(DataError):
    pass


class UnknownNeighborId(DataError):
    pass


class PredictionsParseError(DataError):
    pass


# -- evaluation ------------------------------------------------------------

class GoldUnparseable(DataError):
    pass


class EmptyResults(DataError):
    pass


class LengthMismatch(DataError):
    pass


class ZeroBaseline(DataError):
    pass


class InvariantError(Exception):
    """An internal consistency check failed; indicates a bug, not bad data."""
