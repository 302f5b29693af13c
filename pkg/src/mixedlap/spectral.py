"""Smallest eigenpairs of the pencil (a_local + a_nonlocal, mass) on free DOFs.

The mass matrix vanishes on DOFs that live only in the Neumann set, so the
pencil is singular.  Those DOFs are removed by static condensation: on the
Neumann set the solution is determined by its values on omega, and the
reduced pencil (Schur complement, omega mass) is definite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .assembly import AssembledSystem
from .errors import SingularBlockError, SolverError
from .report import CheckReport

logger = logging.getLogger(__name__)

DENSE_LIMIT = 200


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Eigenvalue with its free-DOF vector.

    The vector is scaled to unit omega mass and signed so that its omega mean
    is nonnegative.  ``residual`` is ||A u - lambda M u|| / ||A u||, or the
    backward error ||A u|| / (||A||_F ||u||) when lambda is exactly zero.
    """

    lam: float
    vector: np.ndarray
    residual: float


@dataclass(frozen=True, eq=False)
class Spectrum:
    pairs: tuple[EigenPair, ...]
    count: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.pairs])

    def __getitem__(self, i) -> EigenPair:
        return self.pairs[i]

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True, eq=False)
class Condensation:
    """Schur reduction of the exterior (Neumann-only) DOFs."""

    sys: AssembledSystem
    omega: np.ndarray
    exterior: np.ndarray
    schur: np.ndarray
    mass: np.ndarray
    _factor: tuple | None

    def extend(self, u_omega: np.ndarray) -> np.ndarray:
        """Full free-DOF vector from omega values (the Neumann-set harmonic extension)."""
        u_omega = np.asarray(u_omega)
        full = np.zeros((self.sys.n,) + u_omega.shape[1:])
        full[self.omega] = u_omega
        if self.exterior.size:
            A = self.sys.a_total
            rhs = A[np.ix_(self.exterior, self.omega)] @ u_omega
            full[self.exterior] = -sla.cho_solve(self._factor, rhs)
        return full


def condense(sys: AssembledSystem) -> Condensation:
    A = sys.a_total
    o, x = sys.omega_dofs, sys.exterior_dofs
    a_oo = A[np.ix_(o, o)]
    factor = None
    if x.size:
        a_xx = A[np.ix_(x, x)]
        diag = np.diag(a_xx)
        scale = np.abs(np.diag(a_oo)).max()
        if diag.min() <= 1e-13 * scale:
            raise SingularBlockError("Neumann-only block has a vanishing diagonal; the set is decoupled from omega")
        try:
            factor = sla.cho_factor(a_xx, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SingularBlockError("Neumann-only block is not positive definite") from exc
        cond = np.linalg.cond(a_xx) if x.size <= 2000 else 0.0
        if cond > 1e13:
            raise SingularBlockError(f"Neumann-only block is numerically singular (cond={cond:.3g})")
        a_ox = A[np.ix_(o, x)]
        schur = a_oo - a_ox @ sla.cho_solve(factor, a_ox.T)
    else:
        schur = a_oo.copy()
    schur = 0.5 * (schur + schur.T)
    return Condensation(sys, o, x, schur, sys.mass[np.ix_(o, o)], factor)


def _reduced_eigs(S, M, count, tol, dense_limit):
    n = S.shape[0]
    count = min(count, n)
    if n <= dense_limit or count >= n - 1:
        vals, vecs = sla.eigh(S, M, subset_by_index=[0, count - 1])
        return vals, vecs, {"method": "dense", "shift": None, "iterations": 1}
    # Fixed start vector: ARPACK otherwise draws a random one and the last
    # digits of the result change from run to run.
    v0 = np.ones(n)
    try:
        vals, vecs = eigsh(S, k=count, M=M, sigma=0.0, which="LM", v0=v0, tol=tol, maxiter=max(1000, 20 * n))
    except ArpackNoConvergence as exc:
        raise SolverError(f"shift-invert Lanczos did not converge: {exc}") from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order], {"method": "shift-invert-lanczos", "shift": 0.0, "iterations": None}


def _finish(sys: AssembledSystem, lam: float, u: np.ndarray) -> EigenPair:
    u = u / np.sqrt(sys.mass_form(u))
    if (sys.mass @ u).sum() < 0:
        u = -u
    A = sys.a_total
    Au = A @ u
    r = Au - lam * (sys.mass @ u)
    if lam == 0.0:
        residual = float(np.linalg.norm(Au) / (np.linalg.norm(A) * np.linalg.norm(u)))
    else:
        residual = float(np.linalg.norm(r) / np.linalg.norm(Au))
    return EigenPair(float(lam), u, residual)


def solve_smallest(
    sys: AssembledSystem, count: int = 2, tol: float = 1e-12, dense_limit: int = DENSE_LIMIT
) -> Spectrum:
    if count < 1:
        raise ValueError("count must be at least 1")
    cond = condense(sys)
    S, M = cond.schur, cond.mass
    pairs = []
    diag = {}
    if not sys.has_dirichlet:
        # Pure Neumann: the constant is an exact null vector; deflate it.
        ones = np.ones(S.shape[0])
        null_res = np.linalg.norm(S @ ones) / (np.linalg.norm(S) * np.linalg.norm(ones))
        if null_res > 1e-9:
            raise SolverError(f"constant is not in the kernel (relative residual {null_res:.3g})")
        pairs.append(_finish(sys, 0.0, cond.extend(ones)))
        if count > 1:
            Q = sla.null_space((M @ ones)[None, :])
            vals, vecs, diag = _reduced_eigs(Q.T @ S @ Q, Q.T @ M @ Q, count - 1, tol, dense_limit)
            vecs = Q @ vecs
        else:
            vals, vecs = np.empty(0), np.empty((S.shape[0], 0))
        diag = dict(diag, deflated=True)
    else:
        vals, vecs, diag = _reduced_eigs(S, M, count, tol, dense_limit)
        diag = dict(diag, deflated=False)
    for lam, v in zip(vals, vecs.T):
        pairs.append(_finish(sys, float(lam), cond.extend(v)))
    diag.update(n_omega=int(cond.omega.size), n_exterior=int(cond.exterior.size))
    logger.debug("eigen solve: %s", diag)
    return Spectrum(tuple(pairs), count, diag)


def check_principal(sp: Spectrum, index: int = 0) -> CheckReport:
    pair = sp[index]
    u = pair.vector
    k = int(np.argmin(u))
    kmax = int(np.argmax(u))
    passed = bool(u[k] > 0)
    witness = {"dof_min": k, "min_value": float(u[k]), "dof_max": kmax, "max_value": float(u[kmax])}
    if not passed:
        witness["sign_change"] = bool(u[kmax] > 0 > u[k])
    return CheckReport("principal_positivity", passed, float(u[k]), witness, {"index": index})


def check_simplicity(sp: Spectrum, gap_tol: float = 1e-6) -> CheckReport:
    if len(sp) < 2:
        raise ValueError("need at least two eigenpairs")
    l1, l2 = sp[0].lam, sp[1].lam
    margin = (l2 - l1) - gap_tol * l1
    return CheckReport("simplicity", bool(margin > 0), float(margin), {"lambda1": l1, "lambda2": l2}, {"gap_tol": gap_tol})


def check_orthogonality(sp: Spectrum, sys: AssembledSystem, i: int = 0, j: int = 1, tol: float = 1e-8) -> CheckReport:
    u, v = sp[i].vector, sp[j].vector
    eta = abs(sys.eta_form(u, v))
    mass = abs(sys.mass_form(u, v))
    worst = max(eta, mass)
    return CheckReport(
        "orthogonality", bool(worst <= tol), float(tol - worst), {"eta": eta, "mass": mass}, {"pair": (i, j), "tol": tol}
    )
