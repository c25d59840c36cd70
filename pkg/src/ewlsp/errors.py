"""Exception types shared across the package."""


class SchemaError(ValueError):
    """Malformed JSON input; message carries the offending field path."""


class IncommensurateIntervals(ValueError):
    """No common cycle below the configured bound exists for the given intervals."""


class NotAPowerOfTwo(ValueError):
    """Interval ratio of a candidate couple is not an integer power of two."""


class SpaceMismatch(ValueError):
    """Peak-space products of a candidate couple differ by more than the allowed slack."""


class InfeasibleMatching(ValueError):
    """No assignment satisfies the degree bounds of a matching instance."""


class BudgetExceeded(RuntimeError):
    """Guess enumeration would exceed the configured budget."""

    def __init__(self, count: int, budget: int):
        super().__init__(f"enumeration of {count} guesses exceeds budget {budget}")
        self.count = count
        self.budget = budget


class StateSpaceExceeded(RuntimeError):
    """Dynamic program state count crossed the hard cap."""


class SearchSpaceExceeded(RuntimeError):
    """Brute-force search space is too large to enumerate."""
