"""Exception hierarchy.

Exit-code mapping used by the CLI: usage errors are 1, data/format errors 2,
numeric/estimation failures 3, invalid Monte Carlo runs 4.
"""


class FsdrError(Exception):
    """Base class for all errors raised by this package."""


class GridMismatchError(FsdrError):
    """Two functional objects do not share the same grid."""


class DegenerateBasisError(FsdrError):
    """A set of curves is numerically rank deficient."""


class NotOrthonormalError(FsdrError):
    """A basis that must be orthonormal is not."""


class BandwidthError(FsdrError):
    """A kernel window contains too little data; widen the bandwidth."""


class TruncationError(FsdrError):
    """The score covariance is rank deficient; reduce the truncation level."""


class DataFormatError(FsdrError):
    """An input file or configuration does not match the expected format."""


class NumericError(FsdrError):
    """An estimation step failed numerically."""


class InvalidRunError(FsdrError):
    """A Monte Carlo run had too many failed replicates to be trusted."""
