"""Exception hierarchy shared by the services and the command line.

Every error carries a ``status_code`` (the process exit code used by the CLI)
and a human readable ``detail``.
"""

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class BracketLabError(Exception):
    status_code: int = EXIT_FAILURE

    def __init__(self, detail: str, status_code: int | None = None):
        super().__init__(detail)
        self.detail = detail
        if status_code is not None:
            self.status_code = status_code


class UsageError(BracketLabError):
    status_code = EXIT_USAGE


class ParseError(BracketLabError):
    status_code = EXIT_USAGE

    def __init__(self, detail: str, offset: int, expected: set[str] | frozenset[str] = frozenset()):
        self.offset = offset
        self.expected = frozenset(expected)
        message = f"{detail} at offset {offset}"
        if self.expected:
            message += f"; expected one of: {', '.join(sorted(self.expected))}"
        super().__init__(message)


class MissingBindingError(BracketLabError):
    status_code = EXIT_USAGE

    def __init__(self, symbol: int):
        self.symbol = symbol
        super().__init__(f"missing binding for symbol a{symbol}")


class ExactModeError(BracketLabError):
    status_code = EXIT_USAGE


class PreconditionError(BracketLabError):
    status_code = EXIT_FAILURE


class BudgetExceededError(BracketLabError):
    status_code = EXIT_FAILURE

    def __init__(self, budget: str, requested: int, allowed: int):
        self.budget = budget
        self.requested = requested
        self.allowed = allowed
        super().__init__(
            f"{budget} budget exceeded: {requested} requested, {allowed} allowed")


class AcceptanceError(BracketLabError):
    status_code = EXIT_FAILURE


class ConsistencyError(BracketLabError):
    status_code = EXIT_FAILURE
