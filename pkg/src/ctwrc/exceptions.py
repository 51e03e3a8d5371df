"""Custom exceptions and exit codes for the ctwrc CLI."""

from enum import IntEnum


class ExitCode(IntEnum):
    """Exit codes for the ctwrc CLI.

    Exit codes:
    - 0: Success
    - 1: Validation error (bad arguments, bad config, degenerate channel, I/O)
    - 2: Acceptance failure (recovery mismatch, failed check suite)
    """

    SUCCESS = 0
    VALIDATION_ERROR = 1
    ACCEPTANCE_FAILED = 2


class CtwrcError(Exception):
    """Base exception for ctwrc."""

    exit_code = ExitCode.VALIDATION_ERROR
    error_code = "CTWRC_ERROR"

    def __init__(self, message: str, details: str | None = None):
        super().__init__(message)
        self.message = message
        self.details = details


class InvalidArgsError(CtwrcError):
    """Invalid arguments or mismatched dimensions."""

    error_code = "INVALID_ARGS"


class ConfigError(CtwrcError):
    """Unparseable or invalid sweep configuration."""

    error_code = "CONFIG_ERROR"


class RankDeficientError(CtwrcError):
    """Matrix fails the full-rank tolerance check."""

    error_code = "RANK_DEFICIENT"


class TooLargeError(CtwrcError):
    """Exhaustive enumeration requested beyond the supported size."""

    error_code = "TOO_LARGE"


class OutputError(CtwrcError):
    """Result file could not be written."""

    error_code = "OUTPUT_ERROR"


class AcceptanceError(CtwrcError):
    """A recovery check or acceptance suite failed."""

    exit_code = ExitCode.ACCEPTANCE_FAILED
    error_code = "ACCEPTANCE_FAILED"
