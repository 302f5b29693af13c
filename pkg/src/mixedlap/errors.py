"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class MixedLapError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(MixedLapError):
    """Invalid geometry or configuration input."""


class OverlapError(ConfigError):
    pass


class TruncationError(ConfigError):
    pass


class OrderError(ConfigError):
    pass


class DegenerateRegion(ConfigError):
    pass


class ConfigParseError(ConfigError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ScheduleError(ConfigError):
    pass


class QuadratureError(MixedLapError):
    pass


class AssemblyError(MixedLapError):
    pass


class ZeroMassError(MixedLapError):
    pass


class SolverError(MixedLapError):
    pass


class SingularBlockError(SolverError):
    pass


class NoConvergence(SolverError):
    pass


class SingularJacobian(SolverError):
    pass


class ContinuationStall(SolverError):
    pass


class ZeroNorm(MixedLapError):
    pass


class IoError(MixedLapError, OSError):
    """Refused or failed output."""
