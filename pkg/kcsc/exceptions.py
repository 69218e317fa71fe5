"""
Exception hierarchy shared by the numerical modules and the commands.

Every error carries the process exit code the command layer reports.
"""

from typing import Optional


class KcscError(Exception):
    """Base error for the toolkit."""

    exit_code = 1

    def __init__(self, message: str, field: Optional[str] = None):
        self.message = message
        self.field = field
        super().__init__(self.message)


class ConfigError(KcscError):
    """Invalid or inconsistent configuration value."""

    exit_code = 2


class DimensionError(KcscError):
    """Shapes or ranks that do not conform."""

    exit_code = 2


class UnknownAtomError(KcscError):
    """Atom index outside the dictionary."""

    exit_code = 2


class DataFileError(KcscError):
    """Unreadable, malformed or refused data file."""

    exit_code = 3


class DivergenceError(KcscError):
    """Non-finite iterate inside an optimization loop."""

    exit_code = 4

    def __init__(self, message: str, phase: str, restart: Optional[int] = None):
        self.phase = phase
        self.restart = restart
        super().__init__(message)

    def with_restart(self, restart: int) -> 'DivergenceError':
        return DivergenceError(f"restart {restart}: {self.message}", self.phase, restart)
