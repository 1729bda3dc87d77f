"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`MbvarError`,
so callers (the CLI in particular) can catch one type and still report the
specific class name.
"""


class MbvarError(Exception):
    """Base class for all library errors."""


class ParseError(MbvarError, ValueError):
    """Input file could not be parsed."""


class NonPositiveField(MbvarError, ValueError):
    """A trade, holding or price that must be strictly positive was not."""


class UnsortedInput(MbvarError, ValueError):
    """Ticks were out of time order while strict ordering was requested."""


class EmptyBucket(MbvarError):
    """A security had no trade inside one of the grid buckets."""

    def __init__(self, security_id, bucket):
        self.security_id = security_id
        self.bucket = bucket
        super().__init__(f"security {security_id!r} has no trades in bucket {bucket}")


class ZeroTotalVolume(MbvarError, ZeroDivisionError):
    """A security did not trade at all inside the averaging window."""


class UnknownSecurity(MbvarError, KeyError):
    """A security id is not part of the portfolio."""

    def __str__(self):
        return Exception.__str__(self)


class MismatchedLength(MbvarError, ValueError):
    """Series that must share a bucket grid have different lengths."""


class DegenerateSeries(MbvarError, ValueError):
    """Too few buckets for a variance (N < 2), or an empty list."""


class EmptyList(DegenerateSeries):
    """A moment was requested of an empty sequence."""


class ZeroWeightSum(MbvarError, ZeroDivisionError):
    """Weighted average with weights summing to zero."""


class DomainError(MbvarError, ValueError):
    """Argument outside the mathematical domain of a formula."""


class WeightSumError(MbvarError, ValueError):
    """Portfolio value weights do not sum to one."""


class InfeasibleTargets(MbvarError):
    """The synthetic generator cannot reach the requested moment targets."""
