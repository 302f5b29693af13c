"""Boundary-set geometry on the line and classified P1 meshes.

The computational picture is the interval ``[-R, R]`` split into three kinds
of regions: the open interval ``omega``, a finite family of Neumann intervals,
and the Dirichlet remainder.  The Dirichlet set is never stored explicitly; it
is whatever is left of the line once ``omega`` and the Neumann intervals are
removed.  Beyond ``R`` the far field is either Dirichlet (the usual case,
handled by exact tail integrals) or dropped entirely (``far_field="neumann"``),
which is how the pure Neumann problem and the Dirichlet-dissipation sequences
are modelled.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DegenerateRegion, OrderError, OverlapError, TruncationError

Interval = tuple[float, float]

# Endpoint matching tolerance for region bookkeeping.
_EPS = 1e-12

GRADING_RATIO = 1.5


class NodeRole(enum.IntEnum):
    OMEGA_INTERIOR = 0
    OMEGA_BOUNDARY_NEUMANN = 1
    OMEGA_BOUNDARY_DIRICHLET = 2
    NEUMANN_SET = 3
    DIRICHLET_SET = 4


class Region(enum.IntEnum):
    OMEGA = 0
    NEUMANN = 1
    DIRICHLET = 2


CONSTRAINED_ROLES = (NodeRole.OMEGA_BOUNDARY_DIRICHLET, NodeRole.DIRICHLET_SET)


@dataclass(frozen=True)
class DomainConfig:
    omega: Interval
    neumann_set: tuple[Interval, ...] = ()
    truncation_radius: float = 4.0
    fractional_order: float = 0.5
    pure_neumann: bool = False
    # "dirichlet": u = 0 for |x| > R and the exact tail integral is kept.
    # "neumann": pairs reaching beyond R are dropped from the nonlocal form.
    far_field: str = "dirichlet"

    def __post_init__(self):
        object.__setattr__(self, "omega", (float(self.omega[0]), float(self.omega[1])))
        ivs = tuple(sorted((float(a), float(b)) for a, b in self.neumann_set))
        object.__setattr__(self, "neumann_set", ivs)
        if self.pure_neumann and self.far_field != "neumann":
            object.__setattr__(self, "far_field", "neumann")

    @property
    def s(self) -> float:
        return self.fractional_order

    @property
    def radius(self) -> float:
        return self.truncation_radius

    @property
    def tail_included(self) -> bool:
        return self.far_field == "dirichlet"

    def dirichlet_intervals(self) -> list[Interval]:
        """Pieces of the Dirichlet set inside ``(-R, R)``."""
        R = self.truncation_radius
        a, b = self.omega
        occupied = sorted([(a, b), *self.neumann_set])
        gaps = []
        cursor = -R
        for lo, hi in occupied:
            if lo - cursor > _EPS:
                gaps.append((cursor, lo))
            cursor = max(cursor, hi)
        if R - cursor > _EPS:
            gaps.append((cursor, R))
        return gaps

    def neumann_measure(self) -> float:
        R = self.truncation_radius
        return sum(min(hi, R) - max(lo, -R) for lo, hi in self.neumann_set)

    def dirichlet_measure(self) -> float:
        return sum(hi - lo for lo, hi in self.dirichlet_intervals())

    def with_neumann(self, neumann_set) -> "DomainConfig":
        return replace(self, neumann_set=tuple(neumann_set))


def full_neumann_complement(omega: Interval, radius: float) -> tuple[Interval, ...]:
    a, b = omega
    return ((-radius, a), (b, radius))


def validate_config(cfg: DomainConfig) -> DomainConfig:
    """Return ``cfg`` unchanged if every geometric invariant holds."""
    s = cfg.fractional_order
    if not (0.0 < s < 1.0) or not math.isfinite(s):
        raise OrderError(f"fractional order s={s} outside (0, 1)")
    a, b = cfg.omega
    if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
        raise ConfigError(f"omega={cfg.omega} is not a nonempty interval")
    R = cfg.truncation_radius
    if not (R > 0 and math.isfinite(R)):
        raise TruncationError(f"truncation radius R={R} must be positive")
    if cfg.far_field not in ("dirichlet", "neumann"):
        raise ConfigError(f"far_field must be 'dirichlet' or 'neumann', got {cfg.far_field!r}")
    if max(abs(a), abs(b)) > R / 2 + _EPS:
        raise TruncationError(f"omega={cfg.omega} is not contained in B_(R/2) with R={R}")

    prev_hi = -math.inf
    for lo, hi in cfg.neumann_set:
        if not lo < hi:
            raise ConfigError(f"Neumann interval ({lo}, {hi}) is empty")
        if hi > a + _EPS and lo < b - _EPS:
            raise OverlapError(f"Neumann interval ({lo}, {hi}) intersects omega={cfg.omega}")
        if lo < prev_hi - _EPS:
            raise OverlapError(f"Neumann intervals overlap near x={lo}")
        if max(abs(lo), abs(hi)) > R + _EPS:
            raise TruncationError(f"Neumann interval ({lo}, {hi}) leaves B_R with R={R}")
        prev_hi = hi

    if cfg.pure_neumann:
        merged = _merge(cfg.neumann_set)
        expected = list(full_neumann_complement(cfg.omega, R))
        if len(merged) != 2 or any(
            abs(m[0] - e[0]) > 1e-9 or abs(m[1] - e[1]) > 1e-9 for m, e in zip(merged, expected)
        ):
            raise ConfigError("pure_neumann requires the Neumann set to fill B_R minus closure of omega")
    return cfg


def _merge(intervals) -> list[Interval]:
    out: list[list[float]] = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1] + _EPS:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(lo, hi) for lo, hi in out]


@dataclass(frozen=True, eq=False)
class Mesh1D:
    nodes: np.ndarray
    elements: np.ndarray
    element_region: np.ndarray
    node_role: np.ndarray
    free_dof_map: np.ndarray  # node index -> dof index, -1 when constrained
    cfg: DomainConfig
    target_h: float
    free_nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "free_nodes", np.flatnonzero(self.free_dof_map >= 0))

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def n_free(self) -> int:
        return self.free_nodes.size

    def element_lengths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def elements_in(self, region: Region) -> np.ndarray:
        return np.flatnonzero(self.element_region == region)

    def free_coordinates(self) -> np.ndarray:
        return self.nodes[self.free_nodes]

    def free_roles(self) -> np.ndarray:
        return self.node_role[self.free_nodes]

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        """Nodal vector on all nodes, zero at constrained nodes."""
        full = np.zeros(self.n_nodes)
        full[self.free_nodes] = u_free
        return full

    def region_breakpoints(self) -> np.ndarray:
        idx = np.flatnonzero(np.diff(self.element_region) != 0) + 1
        return np.concatenate(([self.nodes[0]], self.nodes[idx], [self.nodes[-1]]))


def _uniform(lo: float, hi: float, h: float) -> np.ndarray:
    n = max(1, math.ceil((hi - lo) / h - 1e-9))
    return np.linspace(lo, hi, n + 1)


def _graded_sizes(length: float, h: float) -> list[float]:
    if length <= h:
        return [length]
    sizes = []
    total = 0.0
    size = h
    while total < length:
        sizes.append(size)
        total += size
        size *= GRADING_RATIO
    scale = length / total
    return [sz * scale for sz in sizes]


def _graded(lo: float, hi: float, h: float, grade_from_left: bool, grade_from_right: bool) -> np.ndarray:
    length = hi - lo
    if grade_from_left and grade_from_right:
        half = _graded_sizes(length / 2, h)
        sizes = half + half[::-1]
    elif grade_from_left:
        sizes = _graded_sizes(length, h)
    elif grade_from_right:
        sizes = _graded_sizes(length, h)[::-1]
    else:
        sizes = [length]
    pts = lo + np.concatenate(([0.0], np.cumsum(sizes)))
    pts[-1] = hi
    return pts


def _segments(cfg: DomainConfig) -> list[tuple[float, float, Region]]:
    R = cfg.truncation_radius
    a, b = cfg.omega
    segs = [(a, b, Region.OMEGA)]
    segs += [(lo, hi, Region.NEUMANN) for lo, hi in cfg.neumann_set]
    segs += [(lo, hi, Region.DIRICHLET) for lo, hi in cfg.dirichlet_intervals()]
    segs.sort()
    # Snap shared endpoints so that neighbouring segments agree bit for bit.
    out = []
    for lo, hi, reg in segs:
        if out and abs(lo - out[-1][1]) <= _EPS:
            lo = out[-1][1]
        out.append((lo, hi, reg))
    if abs(out[0][0] + R) > 1e-9 or abs(out[-1][1] - R) > 1e-9:
        raise ConfigError("regions do not tile [-R, R]")
    return out


def build_mesh(cfg: DomainConfig, target_h: float) -> Mesh1D:
    validate_config(cfg)
    if not target_h > 0:
        raise ConfigError(f"mesh size h={target_h} must be positive")
    segs = _segments(cfg)
    for lo, hi, reg in segs:
        if reg != Region.DIRICHLET and hi - lo < target_h / 10:
            raise DegenerateRegion(
                f"{reg.name.lower()} interval ({lo}, {hi}) is shorter than h/10 = {target_h / 10}"
            )

    pieces = [np.array([segs[0][0]])]
    regions = []
    for k, (lo, hi, reg) in enumerate(segs):
        if reg == Region.DIRICHLET:
            pts = _graded(lo, hi, target_h, k > 0, k < len(segs) - 1)
        else:
            pts = _uniform(lo, hi, target_h)
        pieces.append(pts[1:])
        regions.append(np.full(len(pts) - 1, reg, dtype=np.int8))
    nodes = np.concatenate(pieces)
    element_region = np.concatenate(regions)
    n_el = nodes.size - 1
    elements = np.column_stack((np.arange(n_el), np.arange(1, n_el + 1)))
    assert element_region.size == n_el

    roles = _classify(nodes, element_region, cfg)
    free = np.isin(roles, CONSTRAINED_ROLES, invert=True)
    dof_map = np.full(nodes.size, -1, dtype=np.int64)
    dof_map[free] = np.arange(int(free.sum()))
    return Mesh1D(nodes, elements, element_region, roles, dof_map, cfg, float(target_h))


def _classify(nodes: np.ndarray, element_region: np.ndarray, cfg: DomainConfig) -> np.ndarray:
    a, b = cfg.omega
    n = nodes.size
    roles = np.empty(n, dtype=np.int8)
    far_neumann = cfg.far_field == "neumann"
    for i in range(n):
        left = element_region[i - 1] if i > 0 else None
        right = element_region[i] if i < n - 1 else None
        adjacent = [r for r in (left, right) if r is not None]
        if Region.OMEGA in adjacent:
            if left == Region.OMEGA and right == Region.OMEGA:
                roles[i] = NodeRole.OMEGA_INTERIOR
            else:
                outside = right if left == Region.OMEGA else left
                if outside == Region.NEUMANN or (outside is None and far_neumann):
                    roles[i] = NodeRole.OMEGA_BOUNDARY_NEUMANN
                else:
                    roles[i] = NodeRole.OMEGA_BOUNDARY_DIRICHLET
            continue
        # A node shared by Neumann and Dirichlet elements carries the one-sided
        # Neumann value: no pair in the energy couples the two sets, so u may
        # jump there at no cost.
        at_outer = left is None or right is None
        if Region.NEUMANN in adjacent:
            roles[i] = NodeRole.NEUMANN_SET
        elif Region.DIRICHLET in adjacent or (at_outer and not far_neumann):
            roles[i] = NodeRole.DIRICHLET_SET
        else:
            roles[i] = NodeRole.NEUMANN_SET
    return roles


def free_dof_count(mesh: Mesh1D) -> int:
    return int(mesh.n_free)
