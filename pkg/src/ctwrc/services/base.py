"""Base class for CLI-facing services."""

from abc import ABC
from collections.abc import Iterator
from contextlib import contextmanager
from typing import NoReturn

from ctwrc.exceptions import CtwrcError
from ctwrc.output import output_error


class BaseService(ABC):
    """Runs library calls and turns CtwrcError into a JSON error and an exit code."""

    OPERATION: str = ""

    def __init__(self, quiet: bool = False):
        self.quiet = quiet

    def fail(self, error: CtwrcError, operation: str | None = None) -> NoReturn:
        output_error(
            error_code=error.error_code,
            operation=operation or self.OPERATION,
            message=error.message,
            details=error.details,
        )
        raise SystemExit(error.exit_code)

    @contextmanager
    def reporting(self, operation: str | None = None) -> Iterator[None]:
        """Context in which any CtwrcError ends the command."""
        try:
            yield
        except CtwrcError as e:
            self.fail(e, operation)
