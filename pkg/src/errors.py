# errors.py


class SearchError(Exception):
    """Base class for every fault raised by the search library."""


class ValidationError(SearchError, ValueError):
    """A parameter or document violates its documented domain."""


class DimensionMismatch(ValidationError):
    """Sizes of a design, outcome vector, pool or truth do not agree."""


class InfeasibleError(SearchError):
    """The requested success probability lies beyond the feasibility boundary."""


class WorkBudgetExceeded(SearchError):
    def __init__(self, required, budget):
        super().__init__(f"verification needs {required} row-checks, budget is {budget}")
        self.required = required
        self.budget = budget


class RetriesExhausted(SearchError):
    def __init__(self, attempts, L):
        super().__init__(f"no {L}-disjunct design found after {attempts} attempts")
        self.attempts = attempts
        self.L = L


class GoldenFileError(SearchError):
    """A golden table file is missing or cannot be parsed."""


class BracketViolation(SearchError):
    """The lower bound exceeded the upper bound although its slack term was small."""
