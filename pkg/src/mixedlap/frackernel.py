"""Fractional kernel c_s |x - y|^(-1-2s) on the line: constant, tail, panel integrals.

Panel integrals are the element-pair pieces of the Gagliardo form

    I(E, F)[i, j] = \\iint_{E x F} (phi_i(x) - phi_i(y)) (phi_j(x) - phi_j(y)) |x - y|^(-1-2s) dx dy

for P1 hat functions.  Three cases are distinguished:

* identical panels: on a single element the differences are linear in
  ``x - y`` so the integral has a closed form;
* panels sharing one vertex: the difference factors are homogeneous linear in
  the distances to the shared vertex, so a Duffy split of the rectangle
  integrates the radial variable exactly and leaves a smooth 1D integral;
* disjoint panels: tensor Gauss-Legendre rules whose order (and, for panels
  close relative to their size, geometric subdivision) is chosen from the
  separation-to-size ratio.

The normalization constant is *not* applied inside the panel routines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import OrderError, QuadratureError

# Target relative accuracy used to pick Gauss orders for smooth panel pairs.
_QUAD_DIGITS = 15.0
MIN_GAUSS_ORDER = 3
MAX_GAUSS_ORDER = 12
_DUFFY_ORDER = 20


@dataclass(frozen=True)
class FracKernel:
    s: float
    c_ns: float
    nonlocal_weight: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise OrderError(f"fractional order s={self.s} outside (0, 1)")
        if not self.c_ns > 0:
            raise ValueError("normalization constant must be positive")
        if self.nonlocal_weight not in (0, 1, 0.0, 1.0):
            raise ValueError("nonlocal_weight must be 0 or 1")

    @classmethod
    def for_order(cls, s: float, nonlocal_weight: float = 1.0) -> "FracKernel":
        return cls(s, compute_normalization_constant(s), float(nonlocal_weight))

    @property
    def scale(self) -> float:
        """Factor multiplying every nonlocal contribution."""
        return self.c_ns * self.nonlocal_weight

    def __call__(self, x, y):
        r = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        return self.c_ns * r ** (-1.0 - 2.0 * self.s)


@lru_cache(maxsize=256)
def compute_normalization_constant(s: float) -> float:
    """Inverse of  int_R (1 - cos z) / |z|^(1+2s) dz.

    The integral is split at |z| = 1.  Near the origin the smooth factor
    (1 - cos z)/z^2 is integrated against the algebraic weight z^(1-2s); on
    [1, inf) the non-oscillatory part is exact and the cosine part uses a
    Fourier-weighted rule.
    """
    s = float(s)
    if not 0.0 < s < 1.0:
        raise OrderError(f"fractional order s={s} outside (0, 1)")

    def smooth(t):
        return 0.5 * np.sinc(t / (2.0 * np.pi)) ** 2

    near, err_near, info_near = _checked_quad(
        smooth, 0.0, 1.0, weight="alg", wvar=(1.0 - 2.0 * s, 0.0)
    )
    osc, err_osc, info_osc = _checked_quad(
        lambda t: t ** (-1.0 - 2.0 * s), 1.0, np.inf, weight="cos", wvar=1.0
    )
    half = near + 1.0 / (2.0 * s) - osc
    total = 2.0 * half
    if not (total > 0 and math.isfinite(total)):
        raise QuadratureError(f"normalization integral not finite for s={s}")
    if (err_near + err_osc) > 1e-10 * abs(half):
        raise QuadratureError(f"normalization integral inaccurate for s={s}")
    return 1.0 / total


def _checked_quad(f, a, b, **kw):
    val, err, info = integrate.quad(f, a, b, full_output=1, epsabs=1e-14, epsrel=1e-13, limit=200, **kw)[:3]
    if not math.isfinite(val):
        raise QuadratureError("quadrature returned a non-finite value")
    return val, err, info


def tail_weight(x, radius: float, s: float, c_ns: float, in_omega=True):
    """c_ns * int_{|y|>R} |x - y|^(-1-2s) dy, or 0 when x is outside omega."""
    x = np.asarray(x, dtype=float)
    val = c_ns * ((radius - x) ** (-2.0 * s) + (radius + x) ** (-2.0 * s)) / (2.0 * s)
    return np.where(in_omega, val, 0.0)


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point rule mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_order(ratio: float) -> int:
    """Order giving ~1e-15 relative error for a kernel singular at distance ratio*size."""
    ratio = max(ratio, 1e-3)
    z = 1.0 + 2.0 * ratio
    rho = z + math.sqrt(z * z - 1.0)
    n = math.ceil(_QUAD_DIGITS * math.log(10.0) / (2.0 * math.log(rho)))
    return int(min(MAX_GAUSS_ORDER, max(MIN_GAUSS_ORDER, n)))


def graded_rule(
    lo: float, hi: float, toward_hi: bool, gap: float, order_scale: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss rule on [lo, hi] for a singularity ``gap`` beyond one end.

    Subintervals are never longer than their distance to the singularity.
    """
    length = hi - lo
    if gap >= length:
        t, w = gauss_legendre(order_scale * gauss_order(gap / length))
        return lo + length * t, length * w
    # distances from the near end: 0, g, 3g, 7g, ... (size == distance)
    cuts = [0.0]
    while cuts[-1] < length:
        cuts.append(min(length, 2.0 * cuts[-1] + gap))
    pts, wts = [], []
    t, w = gauss_legendre(order_scale * gauss_order(1.0))
    for d0, d1 in zip(cuts[:-1], cuts[1:]):
        seg = d1 - d0
        if toward_hi:
            pts.append(hi - d1 + seg * t)
        else:
            pts.append(lo + d0 + seg * t)
        wts.append(seg * w)
    return np.concatenate(pts), np.concatenate(wts)


def _duffy_line_rule(pole: float) -> tuple[np.ndarray, np.ndarray]:
    """Rule on [0, 1] for integrands with a pole at w = -pole (pole > 0)."""
    t, w = gauss_legendre(_DUFFY_ORDER)
    if pole >= 1.0:
        return t, w
    cuts = [0.0]
    while cuts[-1] < 1.0:
        cuts.append(min(1.0, 2.0 * cuts[-1] + pole))
    pts = np.concatenate([a + (b - a) * t for a, b in zip(cuts[:-1], cuts[1:])])
    wts = np.concatenate([(b - a) * w for a, b in zip(cuts[:-1], cuts[1:])])
    return pts, wts


def identical_panel_matrix(h: float, s: float) -> np.ndarray:
    """2x2 local matrix for E = F of length h over (left, right) vertices."""
    const = 2.0 * h ** (3.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s))
    g = np.array([-1.0 / h, 1.0 / h])
    return const * np.outer(g, g)


def touching_panel_matrix(h1: float, h2: float, s: float) -> np.ndarray:
    """3x3 local matrix for E=[a-h1, a], F=[a, a+h2] over vertices (a-h1, a, a+h2)."""
    alpha = np.array([-1.0 / h1, 1.0 / h1, 0.0])  # slopes on E
    beta = np.array([0.0, -1.0 / h2, 1.0 / h2])  # slopes on F
    p = -1.0 - 2.0 * s
    # triangle eta/h2 <= xi/h1
    w1, q1 = _duffy_line_rule(h1 / h2)
    c1 = alpha[:, None] * h1 + beta[:, None] * h2 * w1[None, :]
    k1 = q1 * (h1 + h2 * w1) ** p
    # triangle xi/h1 <= eta/h2
    w2, q2 = _duffy_line_rule(h2 / h1)
    c2 = alpha[:, None] * h1 * w2[None, :] + beta[:, None] * h2
    k2 = q2 * (h1 * w2 + h2) ** p
    mat = (c1 * k1) @ c1.T + (c2 * k2) @ c2.T
    return mat * h1 * h2 / (3.0 - 2.0 * s)


def _hat_values(pts: np.ndarray, lo: float, hi: float) -> np.ndarray:
    t = (pts - lo) / (hi - lo)
    return np.stack((1.0 - t, t))


def disjoint_panel_matrix(E, F, s: float, order_scale: int = 1) -> np.ndarray:
    """4x4 local matrix over (E0, E1, F0, F1) for panels with a positive gap."""
    (x0, x1), (y0, y1) = E, F
    if x1 <= y0:
        gap = y0 - x1
        xp, xw = graded_rule(x0, x1, True, gap, order_scale)
        yp, yw = graded_rule(y0, y1, False, gap, order_scale)
    elif y1 <= x0:
        gap = x0 - y1
        xp, xw = graded_rule(x0, x1, False, gap, order_scale)
        yp, yw = graded_rule(y0, y1, True, gap, order_scale)
    else:
        raise ValueError("panels overlap")
    if gap <= 0:
        raise ValueError("panels touch; use touching_panel_matrix")
    K = np.abs(xp[:, None] - yp[None, :]) ** (-1.0 - 2.0 * s)
    Nx = _hat_values(xp, x0, x1)
    Ny = _hat_values(yp, y0, y1)
    Kx = K @ yw
    Ky = xw @ K
    out = np.empty((4, 4))
    out[:2, :2] = (Nx * (xw * Kx)) @ Nx.T
    out[2:, 2:] = (Ny * (yw * Ky)) @ Ny.T
    cross = -(Nx * xw) @ K @ (Ny * yw).T
    out[:2, 2:] = cross
    out[2:, :2] = cross.T
    return out


def panel_vertices(E, F) -> np.ndarray:
    return np.unique(np.array([E[0], E[1], F[0], F[1]], dtype=float))


def panel_local_matrix(E, F, s: float) -> tuple[np.ndarray, np.ndarray]:
    """Local matrix and its vertex coordinates for any pair of P1 panels.

    Hat functions are indexed by the sorted unique vertices of E and F.
    """
    E = (float(E[0]), float(E[1]))
    F = (float(F[0]), float(F[1]))
    if E == F:
        return np.array(E), identical_panel_matrix(E[1] - E[0], s)
    if E[1] == F[0]:
        return np.array([E[0], E[1], F[1]]), touching_panel_matrix(E[1] - E[0], F[1] - F[0], s)
    if F[1] == E[0]:
        return np.array([F[0], F[1], E[1]]), touching_panel_matrix(F[1] - F[0], E[1] - E[0], s)
    mat = disjoint_panel_matrix(E, F, s)
    verts = np.array([E[0], E[1], F[0], F[1]])
    order = np.argsort(verts)
    return verts[order], mat[np.ix_(order, order)]


def kernel_panel_integral(E, F, i: int, j: int, s: float, c_ns: float = 1.0) -> float:
    """c_ns * iint_{E x F} (phi_i(x)-phi_i(y))(phi_j(x)-phi_j(y)) |x-y|^(-1-2s).

    ``i`` and ``j`` index the sorted unique vertices of E and F.
    """
    _, mat = panel_local_matrix(E, F, s)
    val = c_ns * mat[i, j]
    if not math.isfinite(val):
        raise QuadratureError(f"non-finite panel integral for E={E}, F={F}")
    return float(val)
