"""Flat ``key = value`` run configuration files.

Recognized keys::

    omega.a, omega.b                 omega interval
    neumann[i].a, neumann[i].b       Neumann intervals, i = 0, 1, ...
    truncation_radius                R (default 4)
    s                                fractional order (default 0.5)
    pure_neumann                     true/false; the Neumann set defaults to B_R minus omega
    far_field                        dirichlet | neumann
    nonlocal_weight                  0 or 1 (default 1)
    mesh.h                           target element size
    seed                             seed for randomized checks
    eig.count                        number of eigenpairs reported

    schedule.mode                    neumann_shrink | dirichlet_approaching | dirichlet_separated
    schedule.k_max
    schedule.far_field
    schedule.interval[i].lo / .hi    endpoint coefficients "a b c" for a + b 2^-k + c/k

    nonlinearity.kind                asymlinear | logistic
    nonlinearity.p, nonlinearity.scale
    continuation.<field>             any ContinuationParams field

Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

from .bifurcation import ContinuationParams, Nonlinearity
from .dissipation import (
    DissipationSchedule,
    Endpoint,
    ScheduleMode,
    approaching_schedule,
    neumann_schedule,
    separated_schedule,
)
from .domain import DomainConfig, full_neumann_complement, validate_config
from .errors import ConfigError, ConfigParseError

_INDEXED = re.compile(r"^(neumann|schedule\.interval)\[(\d+)\]\.(a|b|lo|hi)$")
_SCALAR_KEYS = {
    "omega.a",
    "omega.b",
    "truncation_radius",
    "s",
    "pure_neumann",
    "far_field",
    "nonlocal_weight",
    "mesh.h",
    "seed",
    "eig.count",
    "schedule.mode",
    "schedule.k_max",
    "schedule.far_field",
    "nonlinearity.kind",
    "nonlinearity.p",
    "nonlinearity.scale",
}
_CONT_FIELDS = {f.name: f.type for f in dataclasses.fields(ContinuationParams)}


@dataclass(frozen=True)
class RunConfig:
    domain: DomainConfig
    h: float = 1.0 / 64
    nonlocal_weight: float = 1.0
    seed: int = 0
    eig_count: int = 2
    schedule: DissipationSchedule | None = None
    nonlinearity: Nonlinearity | None = None
    continuation: ContinuationParams = field(default_factory=ContinuationParams)
    source: str | None = None
    entries: tuple[tuple[str, str], ...] = ()


def parse_entries(text: str) -> dict[str, tuple[str, int]]:
    """key -> (raw value, line number)."""
    out: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError("expected 'key = value'", None, lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigParseError("empty key", None, lineno)
        known = key in _SCALAR_KEYS or _INDEXED.match(key) or (
            key.startswith("continuation.") and key.split(".", 1)[1] in _CONT_FIELDS
        )
        if not known:
            raise ConfigParseError("unknown key", key, lineno)
        if key in out:
            raise ConfigParseError("duplicate key", key, lineno)
        out[key] = (value, lineno)
    return out


class _Reader:
    def __init__(self, entries):
        self.entries = entries

    def _convert(self, key, conv, what):
        value, line = self.entries[key]
        try:
            return conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigParseError(f"key '{key}' expects {what}, got {value!r}", key, line) from exc

    def get(self, key, conv=float, default=None, what="a number"):
        if key not in self.entries:
            return default
        return self._convert(key, conv, what)

    def require(self, key, conv=float, what="a number"):
        if key not in self.entries:
            raise ConfigParseError(f"missing required key '{key}'", key, None)
        return self._convert(key, conv, what)

    def indexed(self, prefix: str, first: str, second: str) -> list[tuple[str, str]]:
        """Pairs of raw keys for prefix[i].first / prefix[i].second, i ascending."""
        idx = sorted({int(m.group(2)) for k in self.entries if (m := _INDEXED.match(k)) and m.group(1) == prefix})
        out = []
        for i in idx:
            pair = (f"{prefix}[{i}].{first}", f"{prefix}[{i}].{second}")
            for k in pair:
                if k not in self.entries:
                    raise ConfigParseError(f"missing key '{k}'", k, None)
            out.append(pair)
        return out


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(text)


def _int(text: str) -> int:
    val = float(text)
    if not val.is_integer():
        raise ValueError(text)
    return int(val)


def parse_config(text: str, source: str | None = None) -> RunConfig:
    entries = parse_entries(text)
    r = _Reader(entries)
    omega = (r.require("omega.a"), r.require("omega.b"))
    R = r.get("truncation_radius", default=4.0)
    s = r.get("s", default=0.5)
    pure = r.get("pure_neumann", _bool, False, "true or false")
    far = r.get("far_field", str, None, "a string")
    neumann = [(r.get(a), r.get(b)) for a, b in r.indexed("neumann", "a", "b")]
    if pure and not neumann:
        neumann = list(full_neumann_complement(omega, R))
    domain_kw = {"far_field": far} if far else {}
    domain = DomainConfig(omega, tuple(neumann), R, s, pure, **domain_kw)

    schedule = None
    if "schedule.mode" in entries:
        schedule = _schedule(r, omega, s, R)
    elif any(k.startswith("schedule.") for k in entries):
        raise ConfigParseError("schedule keys given without schedule.mode", "schedule.mode", None)

    nonlinearity = None
    if "nonlinearity.kind" in entries:
        kind = r.require("nonlinearity.kind", str, "a string")
        try:
            nonlinearity = Nonlinearity(
                kind, r.get("nonlinearity.p", _int, 3, "an integer"), r.get("nonlinearity.scale", default=1.0)
            )
        except ValueError as exc:
            line = entries["nonlinearity.kind"][1]
            raise ConfigParseError(str(exc), "nonlinearity.kind", line) from exc

    cont = {}
    for key in entries:
        if key.startswith("continuation."):
            name = key.split(".", 1)[1]
            conv = _int if _CONT_FIELDS[name] in ("int", int) else float
            cont[name] = r.get(key, conv)
    try:
        continuation = ContinuationParams(**cont)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc

    h = r.get("mesh.h", default=1.0 / 64)
    if not h > 0:
        key = "mesh.h"
        raise ConfigParseError("mesh.h must be positive", key, entries[key][1])
    weight = r.get("nonlocal_weight", default=1.0)
    if weight not in (0.0, 1.0):
        raise ConfigParseError("nonlocal_weight must be 0 or 1", "nonlocal_weight", entries["nonlocal_weight"][1])
    validate_config(domain)
    return RunConfig(
        domain=domain,
        h=h,
        nonlocal_weight=weight,
        seed=r.get("seed", _int, 0, "an integer"),
        eig_count=r.get("eig.count", _int, 2, "an integer"),
        schedule=schedule,
        nonlinearity=nonlinearity,
        continuation=continuation,
        source=source,
        entries=tuple((k, v) for k, (v, _) in entries.items()),
    )


def _schedule(r: _Reader, omega, s, R) -> DissipationSchedule:
    mode_text = r.require("schedule.mode", str, "a string")
    try:
        mode = ScheduleMode(mode_text)
    except ValueError as exc:
        line = r.entries["schedule.mode"][1]
        raise ConfigParseError(f"unknown schedule mode {mode_text!r}", "schedule.mode", line) from exc
    k_max = r.get("schedule.k_max", _int, 5, "an integer")
    pairs = r.indexed("schedule.interval", "lo", "hi")
    if pairs:
        intervals = tuple(
            (r.require(lo, Endpoint.parse, "endpoint coefficients"), r.require(hi, Endpoint.parse, "endpoint coefficients"))
            for lo, hi in pairs
        )
    else:
        default = {
            ScheduleMode.NEUMANN_SHRINK: neumann_schedule,
            ScheduleMode.DIRICHLET_APPROACHING: approaching_schedule,
            ScheduleMode.DIRICHLET_SEPARATED: separated_schedule,
        }[mode]
        intervals = default(omega).intervals
    far = r.get("schedule.far_field", str, None, "a string")
    return DissipationSchedule(omega, mode, intervals, k_max, s, R, far)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, str(path))
