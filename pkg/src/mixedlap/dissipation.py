"""Sequences of boundary-set configurations and their eigenvalue limits.

A schedule moves interval endpoints with k.  Each endpoint is written as

    a + b * 2**(-k) + c / k

so both geometric and harmonic shrinking are expressible.  In Neumann mode the
moving intervals form the Neumann set and the Dirichlet set is the rest.  In
the two Dirichlet modes the moving intervals form the Dirichlet set and the
Neumann set fills the remainder of ``(-R, R)``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble
from .domain import DomainConfig, Interval, build_mesh, validate_config
from .errors import ConfigError, QuadratureError, ScheduleError, SolverError
from .frackernel import FracKernel, gauss_legendre, graded_rule, tail_weight
from .spectral import solve_smallest

logger = logging.getLogger(__name__)


class ScheduleMode(str, enum.Enum):
    NEUMANN_SHRINK = "neumann_shrink"
    DIRICHLET_APPROACHING = "dirichlet_approaching"
    DIRICHLET_SEPARATED = "dirichlet_separated"


@dataclass(frozen=True)
class Endpoint:
    a: float
    b: float = 0.0
    c: float = 0.0

    def __call__(self, k: int) -> float:
        return self.a + self.b * 2.0 ** (-k) + self.c / k

    @classmethod
    def parse(cls, text: str) -> "Endpoint":
        parts = [float(p) for p in text.replace(",", " ").split()]
        if not 1 <= len(parts) <= 3:
            raise ValueError(f"endpoint needs 1 to 3 coefficients, got {text!r}")
        return cls(*parts)

    def __str__(self) -> str:
        return f"{self.a!r} {self.b!r} {self.c!r}"


@dataclass(frozen=True)
class DissipationSchedule:
    omega: Interval
    mode: ScheduleMode
    intervals: tuple[tuple[Endpoint, Endpoint], ...]
    k_max: int = 5
    s: float = 0.5
    truncation_radius: float = 4.0
    # None picks the mode default: Dirichlet far field for Neumann shrinking,
    # no far-field interaction for the Dirichlet modes (their Dirichlet set
    # must shrink in every ball, including outside B_R).
    far_field: str | None = None

    @property
    def resolved_far_field(self) -> str:
        if self.far_field is not None:
            return self.far_field
        return "dirichlet" if self.mode == ScheduleMode.NEUMANN_SHRINK else "neumann"

    def moving_intervals(self, k: int) -> list[Interval]:
        return sorted((lo(k), hi(k)) for lo, hi in self.intervals)


def neumann_schedule(omega=(0.0, 1.0), s=0.5, k_max=5, radius=4.0) -> DissipationSchedule:
    """N_k = (b, b + 2^-k) and (a - 2^-k, a)."""
    a, b = omega
    ivs = ((Endpoint(a, -1.0), Endpoint(a)), (Endpoint(b), Endpoint(b, 1.0)))
    return DissipationSchedule(omega, ScheduleMode.NEUMANN_SHRINK, ivs, k_max, s, radius)


def approaching_schedule(omega=(0.0, 1.0), s=0.25, k_max=5, radius=4.0) -> DissipationSchedule:
    """D_k = (b + 1/k, b + 2/k)."""
    b = omega[1]
    ivs = ((Endpoint(b, 0.0, 1.0), Endpoint(b, 0.0, 2.0)),)
    return DissipationSchedule(omega, ScheduleMode.DIRICHLET_APPROACHING, ivs, k_max, s, radius)


def separated_schedule(omega=(0.0, 1.0), s=0.75, k_max=5, radius=4.0, delta=1.0) -> DissipationSchedule:
    """D_k = (b + delta, b + delta + 2^-k)."""
    b = omega[1]
    ivs = ((Endpoint(b + delta), Endpoint(b + delta, 1.0)),)
    return DissipationSchedule(omega, ScheduleMode.DIRICHLET_SEPARATED, ivs, k_max, s, radius)


def _complement(omega: Interval, removed: list[Interval], radius: float) -> list[Interval]:
    occupied = sorted([omega, *removed])
    out, cursor = [], -radius
    for lo, hi in occupied:
        if lo > cursor + 1e-12:
            out.append((cursor, lo))
        cursor = max(cursor, hi)
    if radius > cursor + 1e-12:
        out.append((cursor, radius))
    return out


def boundary_contacts(cfg: DomainConfig) -> int:
    """Number of omega endpoints lying in the closure of the Neumann set."""
    a, b = cfg.omega
    return sum(any(lo - 1e-12 <= p <= hi + 1e-12 for lo, hi in cfg.neumann_set) for p in (a, b))


def generate_config(sched: DissipationSchedule, k: int) -> DomainConfig:
    if not 1 <= k <= sched.k_max:
        raise ScheduleError(f"k={k} outside 1..{sched.k_max}")
    moving = sched.moving_intervals(k)
    R = sched.truncation_radius
    a, b = sched.omega
    if sched.mode == ScheduleMode.NEUMANN_SHRINK:
        neumann = moving
    else:
        if sched.mode == ScheduleMode.DIRICHLET_APPROACHING and not sched.s < 0.5:
            raise ScheduleError(f"approaching Dirichlet sets need s < 1/2, got s={sched.s}")
        for lo, hi in moving:
            if not (lo > b + 1e-12 or hi < a - 1e-12):
                raise ScheduleError(f"Dirichlet interval ({lo}, {hi}) touches the closure of omega at k={k}")
            if min(abs(lo), abs(hi)) > R:
                raise ScheduleError(f"Dirichlet interval ({lo}, {hi}) lies outside B_R at k={k}")
        neumann = _complement(sched.omega, moving, R)
    cfg = DomainConfig(sched.omega, tuple(neumann), R, sched.s, far_field=sched.resolved_far_field)
    try:
        validate_config(cfg)
    except ConfigError as exc:
        raise ScheduleError(f"step k={k}: {exc}") from exc
    return cfg


def set_measure(sched: DissipationSchedule, cfg: DomainConfig) -> float:
    """Measure of the dissipating set inside B_R."""
    if sched.mode == ScheduleMode.NEUMANN_SHRINK:
        return cfg.neumann_measure()
    return cfg.dirichlet_measure()


def separation(sched: DissipationSchedule, k: int) -> float:
    a, b = sched.omega
    gaps = [max(lo - b, a - hi) for lo, hi in sched.moving_intervals(k)]
    return min(gaps) if gaps else math.inf


def validate_schedule(sched: DissipationSchedule) -> list[DomainConfig]:
    """Build every step and check the mode invariants that are checkable at finite k."""
    cfgs = [generate_config(sched, k) for k in range(1, sched.k_max + 1)]
    measures = [set_measure(sched, c) for c in cfgs]
    if any(m1 >= m0 for m0, m1 in zip(measures, measures[1:])):
        if sched.mode == ScheduleMode.NEUMANN_SHRINK:
            raise ScheduleError(f"Neumann measure is not strictly decreasing: {measures}")
        # Dirichlet modes only need the measure to go to zero.
        if measures[-1] >= measures[0]:
            raise ScheduleError(f"Dirichlet measure does not shrink: {measures}")
    if sched.mode == ScheduleMode.DIRICHLET_SEPARATED:
        delta = min(separation(sched, k) for k in range(1, sched.k_max + 1))
        if not delta > 0:
            raise ScheduleError("separated schedule must keep a positive distance from omega")
    if sched.mode == ScheduleMode.NEUMANN_SHRINK and boundary_contacts(cfgs[-1]) > 0:
        logger.warning(
            "Neumann set still touches the boundary of omega at k=%d; the limit problem may not be full Dirichlet",
            sched.k_max,
        )
    return cfgs


@dataclass(frozen=True)
class ConvergenceRow:
    k: int
    set_measure: float
    lambda1: float
    target: float
    rel_gap: float
    linf_norm: float
    integral_condition: float
    residual: float


@dataclass(frozen=True)
class ConvergenceTable:
    """Rows ordered by k.

    ``rel_gap`` is |lambda - target| / target for a nonzero target.  For the
    Dirichlet modes the target is 0 and the gap is reported relative to the
    first step instead, lambda_k / lambda_1.
    """

    rows: tuple[ConvergenceRow, ...]
    target: float
    mode: ScheduleMode
    meta: dict = field(default_factory=dict)

    HEADER = ("k", "set_measure", "lambda1", "target", "rel_gap", "linf_norm", "integral_condition")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def records(self) -> list[tuple]:
        return [tuple(getattr(r, h) for h in self.HEADER) for r in self.rows]


def full_dirichlet_config(omega: Interval, s: float, radius: float) -> DomainConfig:
    return DomainConfig(omega, (), radius, s)


def run_schedule(
    sched: DissipationSchedule, mesh_h: float, eig_tol: float = 1e-12, nonlocal_weight: float = 1.0
) -> ConvergenceTable:
    cfgs = validate_schedule(sched)
    kernel = FracKernel.for_order(sched.s, nonlocal_weight)
    if sched.mode == ScheduleMode.NEUMANN_SHRINK:
        ref = full_dirichlet_config(sched.omega, sched.s, sched.truncation_radius)
        target = solve_smallest(assemble(build_mesh(ref, mesh_h), kernel), 1, eig_tol)[0].lam
    else:
        target = 0.0

    rows = []
    first = None
    for k, cfg in enumerate(cfgs, start=1):
        system = assemble(build_mesh(cfg, mesh_h), kernel)
        try:
            pair = solve_smallest(system, 1, eig_tol)[0]
        except SolverError as exc:
            raise type(exc)(f"step k={k}: {exc}") from exc
        lam = pair.lam
        first = lam if first is None else first
        gap = abs(lam - target) / target if target != 0 else lam / first
        # Unit omega mass, so the sup norm is already the L-inf / L2 ratio.
        linf = float(np.abs(pair.vector).max())
        rows.append(
            ConvergenceRow(k, set_measure(sched, cfg), lam, target, gap, linf, integral_condition(cfg), pair.residual)
        )
        logger.info("k=%d lambda1=%.12g gap=%.4g", k, lam, gap)
    meta = {"h": mesh_h, "s": sched.s, "far_field": sched.resolved_far_field}
    return ConvergenceTable(tuple(rows), target, sched.mode, meta)


def _antiderivative(t, s):
    """G with G'(t) = t^(-2s) / (2s)."""
    t = np.asarray(t, dtype=float)
    if abs(s - 0.5) < 1e-14:
        return np.log(t)
    return t ** (1.0 - 2.0 * s) / (2.0 * s * (1.0 - 2.0 * s))


def _interaction(omega: Interval, lo: float, hi: float, s: float) -> float:
    """int_lo^hi int_omega |x - y|^(-1-2s) dx dy for (lo, hi) outside omega."""
    a, b = omega
    if lo >= b:
        near, far, gap = lambda y: y - b, lambda y: y - a, lo - b
        toward_hi = False
    elif hi <= a:
        near, far, gap = lambda y: a - y, lambda y: b - y, a - hi
        toward_hi = True
    else:
        raise QuadratureError(f"interval ({lo}, {hi}) overlaps omega")
    if gap <= 0:
        if s >= 0.5:
            return math.inf
        # Exact: the two-sided antiderivative is finite at the contact point.
        if lo >= b:
            val = (_antiderivative(hi - b, s) - _antiderivative(0.0, s)) - (
                _antiderivative(hi - a, s) - _antiderivative(lo - a, s)
            )
        else:
            val = (_antiderivative(a - lo, s) - _antiderivative(0.0, s)) - (
                _antiderivative(b - lo, s) - _antiderivative(b - hi, s)
            )
        return float(val)
    y, w = graded_rule(lo, hi, toward_hi, gap, order_scale=2)
    inner = (near(y) ** (-2.0 * s) - far(y) ** (-2.0 * s)) / (2.0 * s)
    val = float(w @ inner)
    if not (val >= 0 and math.isfinite(val)):
        raise QuadratureError(f"interaction integral failed on ({lo}, {hi})")
    return val


def integral_condition(cfg: DomainConfig) -> float:
    """Interaction of omega with the Dirichlet set, int_D int_omega |x-y|^(-1-2s).

    The part of D inside B_R is integrated by graded quadrature over each
    Dirichlet interval; beyond R (Dirichlet far field only) the exact tail
    weight is integrated over omega.  No normalization constant is applied.
    """
    s = cfg.fractional_order
    total = 0.0
    for lo, hi in cfg.dirichlet_intervals():
        total += _interaction(cfg.omega, lo, hi, s)
    if cfg.tail_included:
        a, b = cfg.omega
        t, w = gauss_legendre(20)
        x = a + (b - a) * t
        total += float((b - a) * w @ tail_weight(x, cfg.truncation_radius, s, 1.0))
    return total
