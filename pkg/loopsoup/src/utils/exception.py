import sys
import logging
from typing import Any, Dict, Optional
from dataclasses import dataclass

logger = logging.getLogger("LoopSoup")

# CLI exit codes; 1 is reserved for "a claimed band failed"
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_NUMERIC = 4
EXIT_IO = 5


@dataclass(frozen=True)
class ErrorDetails:
    """
    Traceback details captured when a LoopSoupException is raised.

    Attributes:
        exc_type (type): The type of the exception being handled, if any.
        exc_value (BaseException): The exception instance being handled, if any.
        exc_traceback (Any): The traceback object.
    """
    exc_type: Optional[type]
    exc_value: Optional[BaseException]
    exc_traceback: Any


class LoopSoupException(Exception):
    """
    Project-wide exception for the loop soup simulator.

    Attributes:
        message (str): Formatted error message with details.
        error (Exception): The original exception instance.
        error_details (ErrorDetails): Structured error details (type, value, traceback).
        context (Dict): Additional context (parameters, sizes, caps).
        error_type (str): Type of error (e.g. InsufficientPrecision, InvalidGraph).
        exit_code (int): Process exit code used by the command-line interface.
    """

    def __init__(
            self,
            error: Exception,
            error_type: Optional[str] = None,
            context: Optional[Dict[str, Any]] = None,
            exit_code: int = EXIT_DOMAIN,
            log_immediately: bool = False,
    ) -> None:
        """
        Initialize the LoopSoupException.

        Args:
            error (Exception): The original exception.
            error_type (Optional[str]): Specific error type; defaults to the class name of `error`.
            context (Optional[Dict]): Additional context (e.g. n, kappa, required bits).
            exit_code (int): Exit code for the CLI (default: EXIT_DOMAIN).
            log_immediately (bool): Whether to log the error right away.
        """
        if isinstance(error, LoopSoupException):
            # keep the innermost classification when re-wrapped
            error_type = error_type or error.error_type
            context = {**error.context, **(context or {})}
            exit_code = error.exit_code
            error = error.error
        self.error = error
        self.context = context or {}
        self.error_type = error_type if error_type else type(error).__name__
        self.exit_code = exit_code

        self.error_details = ErrorDetails(*sys.exc_info())
        self.message = self._format_error_message()
        super().__init__(self.message)

        if log_immediately:
            self.log_error()

    def _format_error_message(self) -> str:
        """
        Format error information for logging and CLI output.

        Returns:
            str: Formatted error message with location (when available) and context.
        """
        try:
            lines = [f"Error Type: {self.error_type}"]
            if self.error_details.exc_traceback:
                lines.append(f"File: {self.error_details.exc_traceback.tb_frame.f_code.co_filename}")
                lines.append(f"Line Number: {self.error_details.exc_traceback.tb_lineno}")
            lines.append(f"Error Message: {self.error}")
            lines.append(f"Exit Code: {self.exit_code}")
            if self.context:
                lines.append("Context:")
                lines.extend(f"  {k}: {v}" for k, v in self.context.items())
            return "\n".join(lines)
        except Exception:
            return f"Error Type: {self.error_type} | Error: {self.error} | Exit: {self.exit_code}"

    def log_error(self, level: int = logging.ERROR) -> None:
        """Log the formatted error message at the specified level."""
        logger.log(level, self.message)

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable form used by the CLI when reporting a failure."""
        return {
            "error_type": self.error_type,
            "message": str(self.error),
            "exit_code": self.exit_code,
            "context": {k: str(v) for k, v in self.context.items()},
        }

    def __str__(self) -> str:
        return self.message


def domain_error(message: str, error_type: str, **context: Any) -> LoopSoupException:
    """Build (not raise) a LoopSoupException for a violated precondition."""
    return LoopSoupException(ValueError(message), error_type=error_type, context=context)
