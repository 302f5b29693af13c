"""CSV tables and run manifests."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import IoError


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.17g}"
    return str(value)


def write_csv(header: Sequence[str], rows: Iterable[Sequence], path: str | Path) -> Path:
    """Header plus rows, floats to 17 significant digits, LF line endings."""
    rows = [tuple(r) for r in rows]
    if not rows:
        raise IoError(f"refusing to write an empty table to {path}")
    width = len(header)
    if any(len(r) != width for r in rows):
        raise IoError("row width does not match the header")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for r in rows:
                writer.writerow([_format(v) for v in r])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def write_table(table, path: str | Path) -> Path:
    """Write any object exposing ``HEADER`` and ``records()``."""
    return write_csv(table.HEADER, table.records(), path)


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


@dataclass
class RunManifest:
    """Everything needed to rerun a subcommand, as flat ``key = value`` text.

    ``config.*`` entries carry the resolved configuration so a run can be
    reproduced from the manifest alone.
    """

    subcommand: str
    config_path: str | None
    config_entries: list[tuple[str, str]] = field(default_factory=list)
    output_dir: str = "."
    seed: int = 0
    version: str = ""
    timings: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [
            f"subcommand = {self.subcommand}",
            f"config_path = {self.config_path or ''}",
            f"output_dir = {self.output_dir}",
            f"seed = {self.seed}",
            f"version = {self.version}",
        ]
        lines += [f"extra.{k} = {_format(v)}" for k, v in sorted(self.extra.items())]
        lines += [f"config.{k} = {v}" for k, v in self.config_entries]
        lines += [f"timing.{k} = {v:.3f}" for k, v in self.timings.items()]
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.to_text())
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc
        return path

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise IoError(f"cannot read {path}: {exc}") from exc
        scalars, config, timings, extra = {}, [], {}, {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, value = (p.strip() for p in line.split("=", 1))
            if key.startswith("config."):
                config.append((key[len("config.") :], value))
            elif key.startswith("timing."):
                timings[key[len("timing.") :]] = float(value)
            elif key.startswith("extra."):
                extra[key[len("extra.") :]] = value
            else:
                scalars[key] = value
        return cls(
            scalars["subcommand"],
            scalars.get("config_path") or None,
            config,
            scalars.get("output_dir", "."),
            int(scalars.get("seed", 0)),
            scalars.get("version", ""),
            timings,
            extra,
        )

    def config_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.config_entries)
