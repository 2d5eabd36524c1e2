"""Exception types shared across the package."""


class PsMimoError(Exception):
    """Base class for all library-specific errors."""


class RankDeficient(PsMimoError):
    """Matrix does not have the full rank a factorization requires."""


class ConvergenceFailure(PsMimoError):
    """Iterative factorization exceeded its iteration cap."""


class LengthMismatch(PsMimoError):
    """Input sequence length violates an operation's contract."""


class InvalidSequence(PsMimoError):
    """Amplitude sequence is outside the matcher's valid set."""


class SizeMismatch(PsMimoError):
    """Transport-block sizes do not divide into the requested segmentation."""


class DegenerateShaping(PsMimoError):
    """Shaping parameter makes the prior-augmented construction degenerate."""


class SearchSpaceTooLarge(PsMimoError):
    """Exhaustive search would enumerate more candidates than allowed."""


class GridMismatch(PsMimoError):
    """Coded bits do not tile the layer/slot resource grid."""


class ConfigError(PsMimoError):
    """Simulation configuration is invalid or cannot be parsed."""
