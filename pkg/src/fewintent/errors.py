"""Exception types shared across the toolkit.

The CLI maps these onto its exit-code contract: DataFormatError and plain
IO failures exit 2, DomainError and subclasses exit 1.
"""


class FewIntentError(Exception):
    """Base class for all toolkit-specific failures."""


class DataFormatError(FewIntentError):
    """Input file is missing, malformed, or has the wrong schema."""


class DomainError(FewIntentError):
    """An operation precondition was violated by otherwise well-formed input."""


class BudgetExceededError(DomainError):
    """A prompt does not fit the backend's context window."""

    def __init__(self, tokens: int, limit: int, reserve: int):
        self.tokens = tokens
        self.limit = limit
        self.reserve = reserve
        super().__init__(
            f"prompt needs {tokens} tokens + {reserve} reserved "
            f"but the context limit is {limit}"
        )


class DivergenceError(DomainError):
    """Training produced a non-finite loss; carries the trajectory so far."""

    def __init__(self, message: str, trajectory: list[float]):
        self.trajectory = trajectory
        super().__init__(message)


class TransportError(FewIntentError):
    """A chat backend failed after exhausting its retry policy."""

    def __init__(self, message: str, attempts: list[str] | None = None):
        self.attempts = attempts or []
        super().__init__(message)
