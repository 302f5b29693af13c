"""Discrete energy form, L2(omega) pairing and the constrained free-DOF system.

Matrices are dense: every omega DOF interacts with every other DOF through the
kernel, so there is no sparsity worth exploiting at desk scale.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .domain import Mesh1D, Region
from .errors import AssemblyError, QuadratureError, ZeroMassError
from .frackernel import (
    FracKernel,
    disjoint_panel_matrix,
    gauss_legendre,
    gauss_order,
    identical_panel_matrix,
    tail_weight,
    touching_panel_matrix,
)

logger = logging.getLogger(__name__)

_TAIL_GAUSS = 8
# Upper bound on kernel evaluations held in memory at once.
_CHUNK = 4_000_000


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    a_local: np.ndarray
    a_nonlocal: np.ndarray
    mass: np.ndarray
    mesh: Mesh1D
    kernel: FracKernel
    tail_included: bool
    lumped: bool = False
    omega_dofs: np.ndarray = field(init=False)
    exterior_dofs: np.ndarray = field(init=False)

    def __post_init__(self):
        active = self._mass_active()
        object.__setattr__(self, "omega_dofs", np.flatnonzero(active))
        object.__setattr__(self, "exterior_dofs", np.flatnonzero(~active))

    def _mass_active(self) -> np.ndarray:
        mesh = self.mesh
        touches = np.zeros(mesh.n_nodes, dtype=bool)
        om = mesh.elements[mesh.element_region == Region.OMEGA]
        touches[om.ravel()] = True
        return touches[mesh.free_nodes]

    @property
    def s(self) -> float:
        return self.kernel.s

    @property
    def c_ns(self) -> float:
        return self.kernel.c_ns

    @property
    def n(self) -> int:
        return self.a_local.shape[0]

    @cached_property
    def a_total(self) -> np.ndarray:
        return self.a_local + self.a_nonlocal

    @cached_property
    def lumped_mass(self) -> np.ndarray:
        """Row-sum lumped omega mass as a vector over free DOFs."""
        return self.mass.sum(axis=1)

    @property
    def has_dirichlet(self) -> bool:
        return bool((self.mesh.element_region == Region.DIRICHLET).any()) or self.tail_included

    def with_lumped_mass(self) -> "AssembledSystem":
        return AssembledSystem(
            self.a_local,
            self.a_nonlocal,
            np.diag(self.lumped_mass),
            self.mesh,
            self.kernel,
            self.tail_included,
            lumped=True,
        )

    def eta_form(self, u: np.ndarray, v: np.ndarray | None = None) -> float:
        v = u if v is None else v
        return float(u @ self.a_local @ v + u @ self.a_nonlocal @ v)

    def mass_form(self, u: np.ndarray, v: np.ndarray | None = None) -> float:
        v = u if v is None else v
        return float(u @ self.mass @ v)

    def dump(self, directory: str | Path) -> list[Path]:
        """Write each matrix as 'row col value' lines (zeros skipped)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        out = []
        for name in ("a_local", "a_nonlocal", "mass"):
            mat = getattr(self, name)
            rows, cols = np.nonzero(mat)
            path = directory / f"{name}.coo"
            with open(path, "w", newline="\n") as fh:
                fh.write(f"# {mat.shape[0]} {mat.shape[1]} {rows.size}\n")
                for r, c in zip(rows, cols):
                    fh.write(f"{r} {c} {mat[r, c]:.17g}\n")
            out.append(path)
        return out


def rayleigh_quotient(sys: AssembledSystem, u: np.ndarray) -> float:
    u = np.asarray(u, dtype=float)
    denom = sys.mass_form(u)
    scale = np.abs(sys.mass).max() * float(u @ u)
    if not denom > 1e-14 * scale:
        raise ZeroMassError("vector carries no mass on omega")
    return sys.eta_form(u) / denom


def apply_operator(sys: AssembledSystem, u: np.ndarray) -> np.ndarray:
    return sys.a_total @ u


def assemble(mesh: Mesh1D, kernel: FracKernel) -> AssembledSystem:
    cfg = mesh.cfg
    if abs(cfg.fractional_order - kernel.s) > 1e-14:
        raise AssemblyError(f"kernel order {kernel.s} does not match config order {cfg.fractional_order}")
    n_nodes = mesh.n_nodes
    x = mesh.nodes
    h = mesh.element_lengths()
    omega_el = mesh.elements_in(Region.OMEGA)

    k_local = np.zeros((n_nodes, n_nodes))
    m_full = np.zeros((n_nodes, n_nodes))
    for e in omega_el:
        i, j = mesh.elements[e]
        idx = np.ix_((i, j), (i, j))
        k_local[idx] += np.array([[1.0, -1.0], [-1.0, 1.0]]) / h[e]
        m_full[idx] += h[e] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])

    k_nonlocal = np.zeros((n_nodes, n_nodes))
    tail_included = cfg.tail_included
    if kernel.scale > 0:
        _accumulate_panels(k_nonlocal, mesh, kernel.s)
        if tail_included:
            _accumulate_tail(k_nonlocal, mesh, kernel.s)
        k_nonlocal *= kernel.scale
    if not np.all(np.isfinite(k_nonlocal)):
        raise AssemblyError("non-finite entry in the nonlocal matrix")

    free = mesh.free_nodes
    sub = np.ix_(free, free)
    a_local = k_local[sub]
    a_nonlocal = k_nonlocal[sub]
    mass = m_full[sub]
    # Exact symmetry; the panel sums are symmetric only up to roundoff.
    a_nonlocal = 0.5 * (a_nonlocal + a_nonlocal.T)
    return AssembledSystem(a_local, a_nonlocal, mass, mesh, kernel, tail_included)


def _panel_pairs(mesh: Mesh1D):
    """Unordered element pairs with at least one element in omega."""
    n_el = mesh.n_elements
    in_omega = mesh.element_region == Region.OMEGA
    es, fs = [], []
    for e in np.flatnonzero(in_omega):
        f = np.arange(n_el)
        keep = ~in_omega | (f >= e)
        es.append(np.full(int(keep.sum()), e))
        fs.append(f[keep])
    return np.concatenate(es), np.concatenate(fs)


def _accumulate_panels(target: np.ndarray, mesh: Mesh1D, s: float) -> None:
    el = mesh.elements
    x = mesh.nodes
    h = mesh.element_lengths()
    e_idx, f_idx = _panel_pairs(mesh)
    diff = np.abs(e_idx - f_idx)
    # u vanishes on Dirichlet elements whatever the nodal values at their ends.
    dirichlet = mesh.element_region == Region.DIRICHLET

    for e in e_idx[diff == 0]:
        loc = identical_panel_matrix(h[e], s)
        nodes = el[e]
        target[np.ix_(nodes, nodes)] += loc

    for e, f in zip(e_idx[diff == 1], f_idx[diff == 1]):
        left, right = (e, f) if e < f else (f, e)
        loc = touching_panel_matrix(h[left], h[right], s)
        if dirichlet[f]:
            k = 2 if f == right else 0
            loc[k, :] = 0.0
            loc[:, k] = 0.0
        nodes = np.array([el[left][0], el[left][1], el[right][1]])
        target[np.ix_(nodes, nodes)] += 2.0 * loc

    far = diff >= 2
    e_far, f_far = e_idx[far], f_idx[far]
    lo = np.minimum(e_far, f_far)
    hi = np.maximum(e_far, f_far)
    gap = x[hi] - x[lo + 1]
    he, hf = h[e_far], h[f_far]
    fast = (gap >= he) & (gap >= hf)

    for e, f in zip(e_far[~fast], f_far[~fast]):
        E = (x[e], x[e + 1])
        F = (x[f], x[f + 1])
        try:
            loc = disjoint_panel_matrix(E, F, s)
        except QuadratureError as exc:
            raise AssemblyError(f"panel pair E={E}, F={F}: {exc}") from exc
        if dirichlet[f]:
            loc[2:, :] = 0.0
            loc[:, 2:] = 0.0
        nodes = np.concatenate((el[e], el[f]))
        target[np.ix_(nodes, nodes)] += 2.0 * loc

    e_far, f_far, gap, he, hf = e_far[fast], f_far[fast], gap[fast], he[fast], hf[fast]
    nx = np.array([gauss_order(r) for r in gap / he])
    ny = np.array([gauss_order(r) for r in gap / hf])
    for ox in np.unique(nx):
        for oy in np.unique(ny[nx == ox]):
            sel = np.flatnonzero((nx == ox) & (ny == oy))
            step = max(1, _CHUNK // (ox * oy))
            for start in range(0, sel.size, step):
                part = sel[start : start + step]
                _far_group(target, mesh, s, e_far[part], f_far[part], ox, oy)


def _far_group(target, mesh, s, e, f, ox, oy):
    x = mesh.nodes
    h = mesh.element_lengths()
    tx, wx = gauss_legendre(int(ox))
    ty, wy = gauss_legendre(int(oy))
    xp = x[e][:, None] + h[e][:, None] * tx[None, :]
    yp = x[f][:, None] + h[f][:, None] * ty[None, :]
    xw = h[e][:, None] * wx[None, :]
    yw = h[f][:, None] * wy[None, :]
    K = np.abs(xp[:, :, None] - yp[:, None, :]) ** (-1.0 - 2.0 * s)
    Nx = np.stack((1.0 - tx, tx))
    Ny = np.stack((1.0 - ty, ty))
    Kx = np.einsum("pab,pb->pa", K, yw) * xw
    Ky = np.einsum("pab,pa->pb", K, xw) * yw
    ee = np.einsum("ia,ja,pa->pij", Nx, Nx, Kx)
    ff = np.einsum("ib,jb,pb->pij", Ny, Ny, Ky)
    KW = K * xw[:, :, None] * yw[:, None, :]
    ef = -np.einsum("ia,pab,jb->pij", Nx, KW, Ny)
    local = np.empty((e.size, 4, 4))
    local[:, :2, :2] = ee
    local[:, 2:, 2:] = ff
    local[:, :2, 2:] = ef
    local[:, 2:, :2] = np.transpose(ef, (0, 2, 1))
    dirichlet = mesh.element_region[f] == Region.DIRICHLET
    local[dirichlet, 2:, :] = 0.0
    local[dirichlet, :, 2:] = 0.0
    el = mesh.elements
    nodes = np.concatenate((el[e], el[f]), axis=1)
    rows = np.repeat(nodes, 4, axis=1)
    cols = np.tile(nodes, (1, 4))
    np.add.at(target, (rows.ravel(), cols.ravel()), 2.0 * local.reshape(e.size, 16).ravel())


def _accumulate_tail(target: np.ndarray, mesh: Mesh1D, s: float) -> None:
    """2 * int_omega phi_i phi_j * int_{|y|>R} |x-y|^(-1-2s) dy dx (no constant)."""
    R = mesh.cfg.truncation_radius
    t, w = gauss_legendre(_TAIL_GAUSS)
    N = np.stack((1.0 - t, t))
    x = mesh.nodes
    h = mesh.element_lengths()
    for e in mesh.elements_in(Region.OMEGA):
        pts = x[e] + h[e] * t
        tw = tail_weight(pts, R, s, 1.0)
        loc = (N * (h[e] * w * tw)) @ N.T
        nodes = mesh.elements[e]
        target[np.ix_(nodes, nodes)] += 2.0 * loc
