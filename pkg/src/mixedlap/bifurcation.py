"""Positive solution branches of A u = lambda M_L h(u).

The nonlinear term uses the row-sum lumped omega mass with ``h`` applied
nodewise, so the residual and Jacobian are exactly consistent and the
discrete problem inherits a maximum principle.  All eigenvalue anchors used
here (lambda_0, lambda_inf) come from the lumped pencil (A, M_L) so that the
linearization at u = 0 is singular exactly at lambda_0.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .assembly import AssembledSystem
from .errors import ContinuationStall, NoConvergence, SingularJacobian, ZeroNorm
from .spectral import EigenPair, solve_smallest

logger = logging.getLogger(__name__)


class NonlinearityKind(str, enum.Enum):
    ASYMLINEAR = "asymlinear"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class Nonlinearity:
    """h(t) for t > 0 and zero for t <= 0, optionally multiplied by ``scale``.

    asymlinear: h(t) = t + t^2 exp(-t), slope 1 at zero and at infinity.
    logistic:   h(t) = t - t^p.
    """

    kind: NonlinearityKind = NonlinearityKind.ASYMLINEAR
    p: int = 3
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NonlinearityKind(self.kind))
        if self.kind == NonlinearityKind.LOGISTIC and not (self.p > 1 and float(self.p).is_integer()):
            raise ValueError(f"logistic exponent must be an integer > 1, got {self.p}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def asymlinear(cls, scale: float = 1.0) -> "Nonlinearity":
        return cls(NonlinearityKind.ASYMLINEAR, scale=scale)

    @classmethod
    def logistic(cls, p: int = 3, scale: float = 1.0) -> "Nonlinearity":
        return cls(NonlinearityKind.LOGISTIC, p=p, scale=scale)

    @property
    def a(self) -> float:
        return self.scale

    @property
    def theta(self) -> float | None:
        """Slope at infinity; None when h is not asymptotically linear."""
        return self.scale if self.kind == NonlinearityKind.ASYMLINEAR else None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        tp = np.maximum(t, 0.0)
        if self.kind == NonlinearityKind.ASYMLINEAR:
            val = tp + tp * tp * np.exp(-tp)
        else:
            val = tp - tp ** self.p
        return self.scale * val

    def derivative(self, t):
        # Right derivative at t = 0, zero for t < 0.
        t = np.asarray(t, dtype=float)
        tp = np.maximum(t, 0.0)
        if self.kind == NonlinearityKind.ASYMLINEAR:
            val = 1.0 + (2.0 * tp - tp * tp) * np.exp(-tp)
        else:
            val = 1.0 - self.p * tp ** (self.p - 1)
        return self.scale * np.where(t >= 0, val, 0.0)

    def perturbation(self, t):
        """f(t) = h(t) - a t, the part beyond the linearization at zero."""
        return self(t) - self.a * np.asarray(t, dtype=float)


def residual(sys: AssembledSystem, nl: Nonlinearity, lam: float, u: np.ndarray) -> np.ndarray:
    return sys.a_total @ u - lam * sys.lumped_mass * nl(u)


def jacobian(sys: AssembledSystem, nl: Nonlinearity, lam: float, u: np.ndarray) -> np.ndarray:
    J = sys.a_total.copy()
    J[np.diag_indices_from(J)] -= lam * sys.lumped_mass * nl.derivative(u)
    return J


def fd_jacobian(sys: AssembledSystem, nl: Nonlinearity, lam: float, u: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of the residual, step 1e-6 (1 + ||u||_inf)."""
    step = 1e-6 * (1.0 + np.abs(u).max())
    out = np.empty((u.size, u.size))
    for j in range(u.size):
        e = np.zeros_like(u)
        e[j] = step
        out[:, j] = (residual(sys, nl, lam, u + e) - residual(sys, nl, lam, u - e)) / (2.0 * step)
    return out


def jacobian_fd_error(sys: AssembledSystem, nl: Nonlinearity, lam: float, u: np.ndarray) -> float:
    J = jacobian(sys, nl, lam, u)
    return float(np.abs(J - fd_jacobian(sys, nl, lam, u)).max() / np.abs(J).max())


def _solve(J: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        lu = sla.lu_factor(J, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularJacobian(str(exc)) from exc
    diag = np.abs(np.diag(lu[0]))
    if diag.min() <= 1e-14 * diag.max():
        raise SingularJacobian("Jacobian is numerically singular")
    return sla.lu_solve(lu, rhs)


def newton_solve(
    sys: AssembledSystem, nl: Nonlinearity, lam: float, u0: np.ndarray, tol: float = 1e-10, max_iter: int = 50
) -> np.ndarray:
    u = np.array(u0, dtype=float)
    A = sys.a_total
    for it in range(max_iter):
        r = residual(sys, nl, lam, u)
        if np.linalg.norm(r) <= tol * (1.0 + np.linalg.norm(A @ u)):
            logger.debug("newton converged in %d iterations", it)
            return u
        u = u - _solve(jacobian(sys, nl, lam, u), r)
    r = residual(sys, nl, lam, u)
    if np.linalg.norm(r) <= tol * (1.0 + np.linalg.norm(A @ u)):
        return u
    raise NoConvergence(f"Newton did not converge in {max_iter} iterations at lambda={lam}")


@dataclass(frozen=True)
class BifurcationEstimate:
    lambda0: float
    lambda1: float
    crossing: float
    confirmed: bool


def lumped_principal(sys: AssembledSystem) -> EigenPair:
    """First pair of (A, M_L); its vector has unit lumped mass."""
    return solve_smallest(sys.with_lumped_mass(), 1)[0]


def _smallest_eig(J: np.ndarray) -> float:
    return float(sla.eigvalsh(J, subset_by_index=[0, 0])[0])


def detect_bifurcation_point(sys: AssembledSystem, nl: Nonlinearity, tol: float = 1e-8) -> BifurcationEstimate:
    """lambda_1 / a, confirmed by where the Jacobian at zero loses definiteness.

    J(lambda, 0) = A - lambda a M_L is symmetric, positive definite below the
    bifurcation value and indefinite above it, so its smallest eigenvalue (in
    absolute value, its smallest singular value) crosses zero there.  The
    crossing is located by bisection.
    """
    if not nl.a > 0:
        raise ValueError("bifurcation from zero needs a > 0")
    lam1 = lumped_principal(sys).lam
    lam0 = lam1 / nl.a
    zero = np.zeros(sys.n)
    lo, hi = 0.5 * lam0, 1.5 * lam0
    if not (_smallest_eig(jacobian(sys, nl, lo, zero)) > 0 > _smallest_eig(jacobian(sys, nl, hi, zero))):
        return BifurcationEstimate(lam0, lam1, math.nan, False)
    while hi - lo > 1e-14 * lam0:
        mid = 0.5 * (lo + hi)
        if _smallest_eig(jacobian(sys, nl, mid, zero)) > 0:
            lo = mid
        else:
            hi = mid
    crossing = 0.5 * (lo + hi)
    return BifurcationEstimate(lam0, lam1, crossing, abs(crossing - lam0) <= tol * lam0)


@dataclass(frozen=True, eq=False)
class BranchPoint:
    lam: float
    u: np.ndarray
    linf_norm: float
    l2_norm: float
    arclength: float
    newton_iters: int


class Termination(str, enum.Enum):
    NORM_CAP = "norm_cap"
    LAMBDA_CAP = "lambda_cap"
    MAX_STEPS = "max_steps"


@dataclass(frozen=True, eq=False)
class Branch:
    points: tuple[BranchPoint, ...]
    lambda0: float
    lambda_inf: float | None
    lambda1: float
    direction: int  # -1 subcritical, +1 supercritical
    termination: Termination | None
    inverted: bool = False
    meta: dict = field(default_factory=dict)

    HEADER = ("index", "lambda", "linf_norm", "l2_norm", "arclength", "newton_iters")

    def __len__(self) -> int:
        return len(self.points)

    def column(self, name: str) -> np.ndarray:
        attr = "lam" if name == "lambda" else name
        return np.array([getattr(p, attr) for p in self.points], dtype=float)

    def records(self) -> list[tuple]:
        return [(i, p.lam, p.linf_norm, p.l2_norm, p.arclength, p.newton_iters) for i, p in enumerate(self.points)]


@dataclass(frozen=True)
class ContinuationParams:
    epsilon: float = 1e-3
    lambda_offset: float = 1e-3
    norm_cap_factor: float = 1e3
    lambda_cap_factor: float = 10.0
    ds_max: float = 1.0
    ds_min: float = 1e-12
    max_steps: int = 2000
    newton_tol: float = 1e-11
    newton_max_iter: int = 12
    fast_iters: int = 4
    grow: float = 1.3


def _point(sys, lam, u, arclength, iters) -> BranchPoint:
    return BranchPoint(
        float(lam), u, float(np.abs(u).max()), math.sqrt(max(sys.mass_form(u), 0.0)), float(arclength), int(iters)
    )


def _converged(sys, r, u, tol) -> bool:
    return np.linalg.norm(r) <= tol * (1.0 + np.linalg.norm(sys.a_total @ u))


def amplitude_solve(
    sys: AssembledSystem,
    nl: Nonlinearity,
    phi: np.ndarray,
    eps: float,
    lam_guess: float,
    max_iter: int = 30,
) -> tuple[float, np.ndarray, int]:
    """Solve the residual together with <phi, M_L u> = eps, lambda unknown.

    Iterates until the update stalls at roundoff, not just until a residual
    tolerance, so that lambda is resolved to near machine precision.
    """
    ml = sys.lumped_mass
    w = ml * phi
    u = eps * phi
    lam = lam_guess
    n = sys.n
    prev = math.inf
    for it in range(1, max_iter + 1):
        r = residual(sys, nl, lam, u)
        g = w @ u - eps
        K = np.zeros((n + 1, n + 1))
        K[:n, :n] = jacobian(sys, nl, lam, u)
        K[:n, n] = -ml * nl(u)
        K[n, :n] = w
        d = _solve(K, -np.concatenate((r, [g])))
        u = u + d[:n]
        lam = lam + d[n]
        size = max(np.abs(d[:n]).max() / np.abs(u).max(), abs(d[n]) / abs(lam))
        # Stop once the updates are at roundoff level and no longer shrinking.
        if size <= 1e-14 or (size <= 1e-12 and size >= 0.5 * prev):
            return lam, u, it
        prev = size
    if _converged(sys, residual(sys, nl, lam, u), u, 1e-12):
        return lam, u, max_iter
    raise NoConvergence(f"amplitude-constrained solve failed at eps={eps}")


def emanation_lambda(sys: AssembledSystem, nl: Nonlinearity, eps=(4e-4, 2e-4, 1e-4)) -> float:
    """Extrapolate lambda(eps) on the small-amplitude branch to eps = 0."""
    pair = lumped_principal(sys)
    lam0 = pair.lam / nl.a
    lams = [amplitude_solve(sys, nl, pair.vector, e, lam0)[0] for e in eps]
    coef = np.polyfit(np.asarray(eps), np.asarray(lams), len(eps) - 1)
    return float(coef[-1])


class _Metric:
    """Inner product on (u, mu) with mu = lambda / lambda_1."""

    def __init__(self, ml: np.ndarray, lam1: float):
        self.ml = ml
        self.lam1 = lam1

    def dot(self, du, dmu, eu, emu) -> float:
        return float(du @ (self.ml * eu) + dmu * emu)

    def norm(self, du, dmu) -> float:
        return math.sqrt(self.dot(du, dmu, du, dmu))


def continue_branch(
    sys: AssembledSystem,
    nl: Nonlinearity,
    start: tuple[float, np.ndarray] | None = None,
    params: ContinuationParams | None = None,
) -> Branch:
    """Pseudo-arclength continuation of positive solutions.

    ``start=None`` leaves the trivial branch at lambda_0 = lambda_1 / a: the
    first point solves the amplitude-constrained problem at epsilon times the
    principal eigenvector, on the side of lambda_0 given by the sign of
    <f(eps phi_1), phi_1>.  Otherwise ``start`` is a known point (lambda, u),
    and the first secant uses the trivial point (lambda, 0).
    """
    params = params or ContinuationParams()
    if not nl.a > 0:
        raise ValueError("continuation from zero needs a > 0")
    pair = lumped_principal(sys)
    lam1 = pair.lam
    phi = pair.vector
    lam0 = lam1 / nl.a
    lam_inf = lam1 / nl.theta if nl.theta else None
    ml = sys.lumped_mass
    metric = _Metric(ml, lam1)

    if start is None:
        eps = params.epsilon
        push = float(phi @ (ml * nl.perturbation(eps * phi)))
        direction = -1 if push > 0 else 1
        guess = lam0 * (1.0 + direction * params.lambda_offset)
        lam, u, iters = amplitude_solve(sys, nl, phi, eps, guess)
        prev_lam, prev_u = lam0, np.zeros(sys.n)
    else:
        lam, u = float(start[0]), np.asarray(start[1], dtype=float)
        u = newton_solve(sys, nl, lam, u, params.newton_tol)
        iters = 0
        prev_lam, prev_u = lam, np.zeros(sys.n)
        direction = 0

    ds = metric.norm(u - prev_u, (lam - prev_lam) / lam1)
    points = [_point(sys, lam, u, ds, iters)]
    first_norm = points[0].linf_norm
    norm_cap = params.norm_cap_factor * first_norm
    lam_cap = params.lambda_cap_factor * lam1
    ds = min(ds, params.ds_max)
    arclength = points[0].arclength
    termination = Termination.MAX_STEPS

    for _ in range(params.max_steps):
        tu, tmu = u - prev_u, (lam - prev_lam) / lam1
        tn = metric.norm(tu, tmu)
        tu, tmu = tu / tn, tmu / tn
        while True:
            if ds < params.ds_min:
                raise ContinuationStall(f"step size underflow at lambda={lam}, ||u||={np.abs(u).max()}")
            result = _correct(sys, nl, metric, u, lam, tu, tmu, ds, params)
            if result is not None:
                new_u, new_lam, iters = result
                if new_u.min() >= -1e-10 * max(1.0, np.abs(new_u).max()):
                    break
            ds *= 0.5
        prev_u, prev_lam = u, lam
        u, lam = new_u, new_lam
        arclength += metric.norm(u - prev_u, (lam - prev_lam) / lam1)
        points.append(_point(sys, lam, u, arclength, iters))
        if iters <= params.fast_iters:
            ds = min(ds * params.grow, params.ds_max)
        if points[-1].linf_norm > norm_cap:
            termination = Termination.NORM_CAP
            break
        if not 0.0 <= lam <= lam_cap:
            termination = Termination.LAMBDA_CAP
            break

    meta = {"norm_cap": norm_cap, "lambda_cap": lam_cap, "first_norm": first_norm, "ds_max": params.ds_max}
    return Branch(tuple(points), lam0, lam_inf, lam1, direction, termination, meta=meta)


def _correct(sys, nl, metric, u, lam, tu, tmu, ds, params):
    """Newton on the bordered system; None when the corrector fails."""
    lam1 = metric.lam1
    ml = metric.ml
    n = sys.n
    yu = u + ds * tu
    ymu = lam / lam1 + ds * tmu
    for it in range(1, params.newton_max_iter + 1):
        lam_y = ymu * lam1
        r = residual(sys, nl, lam_y, yu)
        g = metric.dot(tu, tmu, yu - u, ymu - lam / lam1) - ds
        if _converged(sys, r, yu, params.newton_tol) and abs(g) <= 1e-12 * max(1.0, ds):
            return yu, lam_y, it - 1
        K = np.empty((n + 1, n + 1))
        K[:n, :n] = jacobian(sys, nl, lam_y, yu)
        K[:n, n] = -lam1 * ml * nl(yu)
        K[n, :n] = ml * tu
        K[n, n] = tmu
        try:
            d = _solve(K, -np.concatenate((r, [g])))
        except SingularJacobian:
            return None
        if not np.all(np.isfinite(d)):
            return None
        yu = yu + d[:n]
        ymu = ymu + d[n]
    lam_y = ymu * lam1
    if _converged(sys, residual(sys, nl, lam_y, yu), yu, params.newton_tol):
        return yu, lam_y, params.newton_max_iter
    return None


def invert_branch(b: Branch) -> Branch:
    """Map each (lambda, u) to (lambda, u / ||u||_inf^2)."""
    pts = []
    for p in b.points:
        norm = float(np.abs(p.u).max())
        if norm == 0.0:
            raise ZeroNorm(f"trivial point at lambda={p.lam} cannot be inverted")
        v = p.u / norm**2
        scale = 1.0 / norm**2
        pts.append(replace(p, u=v, linf_norm=float(np.abs(v).max()), l2_norm=p.l2_norm * scale))
    return replace(b, points=tuple(pts), inverted=not b.inverted)
