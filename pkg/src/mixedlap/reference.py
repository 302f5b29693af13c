"""Slow, independent reference computations used to validate the fast paths.

Nothing here shares quadrature code with the production assembly.  For the
nonlocal form the inner integral over each element is done in closed form
(for P1 functions it reduces to three power moments of |x - y|) and the outer
integral is adaptive, over ordered element pairs with the basis evaluated
globally.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg as sla
from scipy import integrate
from scipy.special import gamma

from .assembly import AssembledSystem
from .bifurcation import Nonlinearity
from .domain import Mesh1D, Region
from .frackernel import FracKernel


def normalization_constant_gamma(s: float) -> float:
    """C_{1,s} = s 4^s Gamma(1/2 + s) / (sqrt(pi) Gamma(1 - s))."""
    return s * 4.0**s * gamma(0.5 + s) / (math.sqrt(math.pi) * gamma(1.0 - s))


class _Basis:
    """Free-DOF basis on one element, zero on Dirichlet elements."""

    def __init__(self, mesh: Mesh1D):
        self.mesh = mesh
        self.x = mesh.nodes

    def slopes(self, element: int) -> np.ndarray:
        mesh = self.mesh
        out = np.zeros(mesh.n_free)
        if mesh.element_region[element] == Region.DIRICHLET:
            return out
        h = self.x[element + 1] - self.x[element]
        for node, w in ((element, -1.0 / h), (element + 1, 1.0 / h)):
            dof = mesh.free_dof_map[node]
            if dof >= 0:
                out[dof] += w
        return out

    def values(self, t: float, element: int) -> np.ndarray:
        """Linear extension of the element's basis functions evaluated at t."""
        mesh = self.mesh
        out = np.zeros(mesh.n_free)
        if mesh.element_region[element] == Region.DIRICHLET:
            return out
        lo, hi = self.x[element], self.x[element + 1]
        lam = (t - lo) / (hi - lo)
        for node, w in ((element, 1.0 - lam), (element + 1, lam)):
            dof = mesh.free_dof_map[node]
            if dof >= 0:
                out[dof] += w
        return out


def _power_integral(a: float, b: float, m: float) -> float:
    """int_a^b r^m dr for 0 <= a < b."""
    if abs(m + 1.0) < 1e-14:
        return math.log(b / a)
    return (b ** (m + 1.0) - a ** (m + 1.0)) / (m + 1.0)


def _moments(t: float, lo: float, hi: float, s: float) -> tuple[float, float, float]:
    """int_lo^hi r^k |r|^(-1-2s) dy with r = y - t, k = 0, 1, 2, for t outside (lo, hi)."""
    p = -1.0 - 2.0 * s
    if lo >= t:
        a, b, sign = lo - t, hi - t, 1.0
    else:
        a, b, sign = t - hi, t - lo, -1.0
    return _power_integral(a, b, p), sign * _power_integral(a, b, p + 1.0), _power_integral(a, b, p + 2.0)


def _quad_vec(f, a, b):
    val, _ = integrate.quad_vec(f, a, b, epsabs=1e-16, epsrel=1e-13, limit=5000)
    return val


def reference_assembly(mesh: Mesh1D, kernel: FracKernel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(a_local, a_nonlocal, mass) for small meshes, independent of the panel code."""
    basis = _Basis(mesh)
    x = mesh.nodes
    s = kernel.s
    n = mesh.n_free
    a_local = np.zeros((n, n))
    mass = np.zeros((n, n))
    a_nl = np.zeros((n, n))
    omega_el = mesh.elements_in(Region.OMEGA)

    for e in omega_el:
        lo, hi = x[e], x[e + 1]
        g = basis.slopes(e)
        a_local += np.outer(g, g) * (hi - lo)
        mass += _quad_vec(lambda t: np.outer(basis.values(t, e), basis.values(t, e)), lo, hi)

    if kernel.scale == 0:
        return a_local, a_nl, mass

    slopes = [basis.slopes(f) for f in range(mesh.n_elements)]
    # Ordered pairs: omega x omega once per order, omega x exterior doubled.
    weights = np.where(mesh.element_region == Region.OMEGA, 1.0, 2.0)
    tail = mesh.cfg.tail_included
    R = mesh.cfg.truncation_radius

    def integrand(t, e):
        lo, hi = x[e], x[e + 1]
        g = slopes[e]
        # Same element: B(t) - B(y) = g (t - y) exactly.
        same = ((t - lo) ** (2.0 - 2.0 * s) + (hi - t) ** (2.0 - 2.0 * s)) / (2.0 - 2.0 * s)
        out = same * np.outer(g, g)
        bt = basis.values(t, e)
        for f in range(mesh.n_elements):
            if f == e:
                continue
            # On element f, B(y) = B_f(t) + q (y - t).
            m0, m1, m2 = _moments(t, x[f], x[f + 1], s)
            q = slopes[f]
            alpha = bt - basis.values(t, f)
            cross = np.outer(alpha, q)
            out += weights[f] * (m0 * np.outer(alpha, alpha) - m1 * (cross + cross.T) + m2 * np.outer(q, q))
        if tail:
            beyond = ((R - t) ** (-2.0 * s) + (R + t) ** (-2.0 * s)) / (2.0 * s)
            out += 2.0 * beyond * np.outer(bt, bt)
        return out

    for e in omega_el:
        a_nl += _quad_vec(lambda t: integrand(t, e), x[e], x[e + 1])

    return a_local, kernel.scale * a_nl, mass


def dense_full_eigenvalues(sys: AssembledSystem) -> np.ndarray:
    """All finite eigenvalues of the uncondensed pencil, ascending.

    Solves the reversed pencil M v = mu A v, which is definite because A is;
    zero mu belong to the infinite eigenvalues carried by Neumann-only DOFs.
    """
    mu = sla.eigh(sys.mass, sys.a_total, eigvals_only=True)
    mu = mu[mu > 1e-12 * mu.max()]
    return np.sort(1.0 / mu)


def fixed_point_solve(
    sys: AssembledSystem, nl: Nonlinearity, lam: float, u0: np.ndarray, shift: float, tol: float = 1e-13, max_iter: int = 100000
) -> np.ndarray:
    """Shifted monotone iteration (A + lam shift M_L) u+ = lam M_L (h(u) + shift u).

    With ``shift`` large enough that h(t) + shift t is increasing on the range
    of interest, the iteration started from a supersolution decreases
    monotonically to the maximal solution below it.
    """
    ml = sys.lumped_mass
    factor = sla.cho_factor(sys.a_total + lam * shift * np.diag(ml))
    u = np.array(u0, dtype=float)
    for _ in range(max_iter):
        new = sla.cho_solve(factor, lam * ml * (nl(u) + shift * u))
        if np.abs(new - u).max() <= tol * max(1.0, np.abs(new).max()):
            return new
        u = new
    raise RuntimeError("fixed-point iteration did not stagnate")
