"""Exception types.

Every error carries a short machine-readable ``code`` (e.g. ``NEGATIVE_PARAMETER``)
and, where it makes sense, the dotted path of the offending config field.
"""

from __future__ import annotations


class EOPulseError(Exception):
    code = "ERROR"

    def __init__(self, code: str, message: str, field: str | None = None):
        self.code = code
        self.field = field
        where = f" [{field}]" if field else ""
        super().__init__(f"{code}{where}: {message}")


class ConfigError(EOPulseError):
    """Raised for invalid or incomplete model descriptions."""


class NetworkError(EOPulseError):
    """Raised for impedances that cannot be realized or are unstable."""


class SimulationError(EOPulseError):
    """Raised by integrators and post-processing (grids, tails, consistency)."""


class RegimeWarning(UserWarning):
    """An approximation the model relies on is only marginally satisfied."""
