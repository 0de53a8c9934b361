import logging
from dataclasses import dataclass
from typing import Any


class AsianPricingException(Exception):

    def __init__(
        self,
        *,
        user_message: str,
        log_message: str | None = None,
        error_type: str | None = None,
        public_context: dict[str, Any] | None = None,
        internal_context: dict[str, Any] | None = None,
        log_level: int | None = None,
    ):
        """
        Args:
                user_message: Short message suitable for a report or the CLI.
                public_context: Optional context to show next to the message (e.g., {"t": 1.5}).

                log_message: Detailed internal message for logs/debugging.
                internal_context: Optional context to include in logs only (e.g., {"grid_size": 512}).

                error_type: Optional machine-readable code.
                log_level: Specifies the log level for this instance leveraging the python logging module int representation
        """
        super().__init__(user_message)

        self.user_message = user_message
        self.log_message = log_message or user_message
        self.error_type = error_type or self.__class__.__name__.upper()
        self.public_context = public_context or {}
        self.internal_context = internal_context or {}

        if log_level is None:
            log_level = logging.WARNING

        self.log_level = logging.getLevelName(log_level).lower()

    def __str__(self) -> str:
        return f"[{self.error_type}] {self.user_message}"


class DomainError(AsianPricingException):
    """An argument lies outside the domain of the requested operation."""


class MeasureError(AsianPricingException):
    """A sampling or dividend measure cannot be used the way it was asked to."""


class ExtrapolationError(AsianPricingException):
    """A cascade query fell outside the tabulated range."""


class SolverError(AsianPricingException):

    def __init__(self, **kwargs: Any):
        kwargs.setdefault("log_level", logging.ERROR)
        super().__init__(**kwargs)


class EngineUnavailableError(AsianPricingException):
    """The engine cannot serve this kind of request."""


@dataclass(frozen=True)
class ConfigIssue:
    line: int  # 1-based; 0 when the issue is not tied to a line
    message: str

    def __str__(self) -> str:
        if self.line:
            return f"line {self.line}: {self.message}"
        return self.message


class ConfigError(AsianPricingException):

    def __init__(self, issues: list[ConfigIssue], **kwargs: Any):
        self.issues = list(issues)
        kwargs.setdefault(
            "user_message", "; ".join(str(issue) for issue in self.issues)
        )
        super().__init__(**kwargs)
