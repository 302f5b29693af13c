from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import pytest

from mixedlap.assembly import assemble
from mixedlap.config import load_config
from mixedlap.domain import DomainConfig, build_mesh
from mixedlap.frackernel import FracKernel

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

# Lines emitted by the acceptance module, repeated in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@lru_cache(maxsize=None)
def system_for(omega=(0.0, 1.0), neumann=((1.0, 1.5),), h=1 / 32, s=0.5, radius=4.0, far_field="dirichlet", weight=1.0):
    cfg = DomainConfig(omega, neumann, radius, s, far_field=far_field)
    return assemble(build_mesh(cfg, h), FracKernel.for_order(s, weight))


@lru_cache(maxsize=None)
def shipped(name: str):
    return load_config(CONFIG_DIR / f"{name}.cfg")


@pytest.fixture(scope="session")
def mixed_system():
    return system_for()


@pytest.fixture(scope="session")
def config_dir():
    return CONFIG_DIR
