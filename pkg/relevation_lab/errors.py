# relevation_lab/errors.py

# Every failure carries an exit code and a human readable detail, so main.py can
# map it straight to the process exit status.

from typing import Optional


class RelevationError(Exception):
    """Base error. `exit_code` follows the CLI contract (2 config, 3 numeric, 4 inconclusive)."""

    exit_code: int = 3

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code

    def __str__(self) -> str:
        return self.detail


class ConfigError(RelevationError):
    exit_code = 2


class DomainError(RelevationError, ValueError):
    """Argument outside the mathematical domain (negative time, u not in (0,1), unsorted input)."""


class OutOfSupportError(RelevationError):
    """Survival vanished where a ratio by it was requested."""


class BracketError(RelevationError):
    """No root bracket found below the configured bound."""


class QuadratureError(RelevationError):
    pass


class IntegrandSingularityError(QuadratureError):
    def __init__(self, detail: str, abscissa: float):
        super().__init__(f"{detail} (first failing abscissa x={abscissa:.17g})")
        self.abscissa = abscissa


class SequenceExhaustedError(RelevationError):
    pass


class TruncationError(RelevationError):
    """A path set does not reach far enough for the requested arrival index or time."""


class GridError(RelevationError):
    pass


class HistoryError(RelevationError):
    """A history pair violates the severity relation; `clause` names which part."""

    def __init__(self, clause: str, detail: str):
        super().__init__(f"severity clause '{clause}' violated: {detail}")
        self.clause = clause


class InconclusiveError(RelevationError):
    exit_code = 4
