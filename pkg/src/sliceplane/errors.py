"""Common error base for domain failures surfaced over the API and CLI."""

from __future__ import annotations


class SlicePlaneError(Exception):
    """Base class for all domain errors.

    ``code`` is a stable machine-readable identifier used in API error
    payloads and CLI output; the message stays human-readable.
    """

    code = "error"

    def payload(self) -> dict:
        return {"error": self.code, "detail": str(self)}


class ConfigError(SlicePlaneError):
    code = "config_error"

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
