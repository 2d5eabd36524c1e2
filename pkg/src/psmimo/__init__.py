"""Link-level MIMO simulation for probabilistically shaped QAM.

Subpackages cover matrix decompositions (QR/SVD/GMD), Maxwell-Boltzmann
shaping with constant-composition matching, quasi-cyclic LDPC coding,
distribution-aware precoding, MAP detection, codeword-to-layer mapping with
codeblock-level SIC, and a Monte-Carlo sweep harness with a CSV/CLI front
end.
"""

from . import channel, decomp, detection, fec, harness, layermap, precoding, shaping
from .errors import (
    ConfigError,
    ConvergenceFailure,
    DegenerateShaping,
    GridMismatch,
    InvalidSequence,
    LengthMismatch,
    PsMimoError,
    RankDeficient,
    SearchSpaceTooLarge,
    SizeMismatch,
)

__all__ = [
    "channel",
    "decomp",
    "detection",
    "fec",
    "harness",
    "layermap",
    "precoding",
    "shaping",
    "ConfigError",
    "ConvergenceFailure",
    "DegenerateShaping",
    "GridMismatch",
    "InvalidSequence",
    "LengthMismatch",
    "PsMimoError",
    "RankDeficient",
    "SearchSpaceTooLarge",
    "SizeMismatch",
]

__version__ = "0.1.0"
