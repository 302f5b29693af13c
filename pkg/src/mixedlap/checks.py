"""Numerical checks of the inequality and identity toolkit.

Every randomized check takes an explicit seed and records it in the report.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg as sla

from .assembly import AssembledSystem, assemble
from .domain import DomainConfig, NodeRole, Region, build_mesh
from .errors import ConfigError, QuadratureError, SolverError
from .frackernel import FracKernel, graded_rule
from .report import CheckReport
from .spectral import Spectrum, solve_smallest


def picone_check(sys: AssembledSystem, sp: Spectrum, trials: int = 100, seed: int = 42) -> CheckReport:
    """eta(v)^2 >= lambda_1 ||v||^2_{L2(omega)} for random v, equality at phi_1.

    The margin of a trial is (eta(v)^2 - lambda_1 ||v||^2) / eta(v)^2; the
    report fails if any margin drops below -1e-9 or if phi_1 does not
    saturate the inequality to 1e-10.
    """
    lam1 = sp[0].lam
    phi = sp[0].vector
    rng = np.random.default_rng(seed)
    worst, witness = math.inf, None
    for t in range(trials):
        v = rng.standard_normal(sys.n)
        eta = sys.eta_form(v)
        margin = (eta - lam1 * sys.mass_form(v)) / eta
        if margin < worst:
            worst, witness = margin, t
    eta_phi = sys.eta_form(phi)
    saturation = abs(eta_phi - lam1 * sys.mass_form(phi)) / eta_phi if eta_phi > 0 else abs(lam1)
    passed = worst >= -1e-9 and saturation <= 1e-10
    return CheckReport(
        "picone",
        bool(passed),
        float(worst),
        {"trial": witness, "saturation": float(saturation)},
        {"trials": trials, "seed": seed},
    )


def _factor(sys: AssembledSystem):
    if not sys.has_dirichlet:
        raise ConfigError("maximum principle checks need a nonempty Dirichlet set")
    try:
        return sla.cho_factor(sys.a_total, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SolverError("energy matrix is not positive definite") from exc


def weak_max_principle_check(sys: AssembledSystem, trials: int = 20, seed: int = 7) -> CheckReport:
    """Nonnegative omega loads give nonnegative solutions of A u = M w."""
    factor = _factor(sys)
    rng = np.random.default_rng(seed)
    worst, witness = math.inf, None
    for t in range(trials):
        w = np.zeros(sys.n)
        w[sys.omega_dofs] = rng.random(sys.omega_dofs.size)
        u = sla.cho_solve(factor, sys.mass @ w)
        scale = np.abs(u).max()
        margin = u.min() / scale + 1e-10 if scale > 0 else 1e-10
        if margin < worst:
            worst, witness = margin, {"trial": t, "dof": int(np.argmin(u))}
    return CheckReport("weak_max_principle", bool(worst >= 0), float(worst), witness, {"trials": trials, "seed": seed})


def single_node_load_check(sys: AssembledSystem, dof: int | None = None) -> CheckReport:
    """Load concentrated at one interior omega node; u must be > 0 at every free node."""
    factor = _factor(sys)
    mesh = sys.mesh
    if dof is None:
        roles = mesh.free_roles()
        interior = np.flatnonzero(roles == NodeRole.OMEGA_INTERIOR)
        if interior.size == 0:
            raise ConfigError("mesh has no interior omega node")
        a, b = mesh.cfg.omega
        x = mesh.free_coordinates()[interior]
        dof = int(interior[np.argmin(np.abs(x - 0.5 * (a + b)))])
    w = np.zeros(sys.n)
    w[dof] = 1.0
    u = sla.cho_solve(factor, sys.mass @ w)
    k = int(np.argmin(u))
    return CheckReport(
        "single_node_positivity",
        bool(u[k] > 0),
        float(u[k] / np.abs(u).max()),
        {"dof": k, "x": float(mesh.free_coordinates()[k]), "role": NodeRole(mesh.free_roles()[k]).name},
        {"load_dof": dof},
    )


def reconstruction_values(sys: AssembledSystem, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Weighted omega averages of ``u`` at free Neumann-set nodes.

    Returns (coordinates, nodal values, averages), where the average at x is
    int_omega u(y) |x-y|^(-1-2s) dy / int_omega |x-y|^(-1-2s) dy for the P1
    interpolant of ``u``.  The denominator is exact; the numerator uses a
    graded rule on each omega element.
    """
    mesh = sys.mesh
    s = sys.s
    free_roles = mesh.free_roles()
    targets = np.flatnonzero(free_roles == NodeRole.NEUMANN_SET)
    xs = mesh.free_coordinates()[targets]
    full = mesh.expand(u)
    a, b = mesh.cfg.omega
    avg = np.empty(xs.size)
    for n, x in enumerate(xs):
        num = 0.0
        for e in mesh.elements_in(Region.OMEGA):
            lo, hi = mesh.nodes[e], mesh.nodes[e + 1]
            if x >= hi:
                y, w = graded_rule(lo, hi, True, x - hi)
            else:
                y, w = graded_rule(lo, hi, False, lo - x)
            vals = np.interp(y, (lo, hi), (full[e], full[e + 1]))
            num += w @ (vals * np.abs(x - y) ** (-1.0 - 2.0 * s))
        if x >= b:
            den = ((x - b) ** (-2.0 * s) - (x - a) ** (-2.0 * s)) / (2.0 * s)
        else:
            den = ((a - x) ** (-2.0 * s) - (b - x) ** (-2.0 * s)) / (2.0 * s)
        if not (math.isfinite(num) and den > 0):
            raise QuadratureError(f"reconstruction integral failed at x={x}")
        avg[n] = num / den
    return xs, u[targets], avg


def neumann_reconstruction_check(sys: AssembledSystem, sp: Spectrum, tol: float = 0.05) -> CheckReport:
    """Compare phi_1 on the Neumann set with its kernel-weighted omega average.

    The margin is tol minus the maximum relative nodal discrepancy.
    """
    xs, vals, avg = reconstruction_values(sys, sp[0].vector)
    if xs.size == 0:
        raise ConfigError("configuration has no free Neumann-set node")
    rel = np.abs(vals - avg) / np.abs(avg)
    k = int(np.argmax(rel))
    return CheckReport(
        "neumann_reconstruction",
        bool(rel[k] <= tol),
        float(tol - rel[k]),
        {"x": float(xs[k]), "discrepancy": float(rel[k])},
        {"h": sys.mesh.target_h, "tol": tol},
    )


def reconstruction_refinement(cfg: DomainConfig, h: float, kernel: FracKernel) -> tuple[float, float]:
    """Max reconstruction discrepancy at h and at h/2."""
    out = []
    for hh in (h, h / 2):
        system = assemble(build_mesh(cfg, hh), kernel)
        rep = neumann_reconstruction_check(system, solve_smallest(system, 1), tol=math.inf)
        out.append(rep.witness["discrepancy"])
    return out[0], out[1]


def poincare_constant(sys: AssembledSystem) -> float:
    """Best constant C in ||u||^2_{L2(omega)} <= C eta(u)^2, i.e. 1 / lambda_1."""
    if not sys.has_dirichlet:
        raise ConfigError("Poincare inequality needs a nonempty Dirichlet set")
    return 1.0 / solve_smallest(sys, 1)[0].lam
