"""Exception hierarchy shared by all switchsim modules."""
from __future__ import annotations


class SwitchSimError(Exception):
    """Base class for every error raised by this package."""


class ManifestError(SwitchSimError):
    """The block manifest is malformed (duplicate shard ids, bad sizes, ...)."""


class StoreCreationError(SwitchSimError):
    """Shard files could not be materialized on disk."""


class BudgetExceededError(SwitchSimError):
    """A tier byte budget cannot be satisfied even after eviction.

    ``shortfall_bytes`` is the number of bytes that could not be freed.
    The state passed to the failing operation is left untouched.
    """

    def __init__(self, tier: str, shortfall_bytes: int):
        self.tier = tier
        self.shortfall_bytes = shortfall_bytes
        super().__init__(f"{tier} budget exceeded by {shortfall_bytes} bytes")


class StagingOrderError(SwitchSimError):
    """A device insert was attempted for a block that is not host-resident."""


class LogParseError(SwitchSimError):
    """A task log contains an unknown task id; ``position`` is 0-based."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (log position {position})")


class OracleError(SwitchSimError):
    """A metric oracle could not evaluate the requested active set."""


class ConfigError(SwitchSimError):
    """A scenario, task file, or CLI configuration is invalid."""


class ReplayError(SwitchSimError):
    """A lower-level error surfaced while replaying a trace.

    ``position`` is the 0-based trace index at which the failure occurred.
    """

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (trace position {position})")
