from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixedlap.assembly import apply_operator, assemble, rayleigh_quotient
from mixedlap.domain import DomainConfig, build_mesh
from mixedlap.errors import AssemblyError, ZeroMassError
from mixedlap.frackernel import FracKernel
from mixedlap.reference import reference_assembly

from conftest import system_for


def test_symmetry_and_semidefinite(mixed_system):
    A = mixed_system.a_total
    assert np.array_equal(mixed_system.a_nonlocal, mixed_system.a_nonlocal.T)
    assert np.allclose(A, A.T, atol=1e-13 * np.abs(A).max())
    assert np.linalg.eigvalsh(A).min() > -1e-10 * np.abs(A).max()


def test_mass_lives_on_omega(mixed_system):
    sys = mixed_system
    ext = sys.exterior_dofs
    assert ext.size > 0
    assert np.all(sys.mass[ext] == 0)
    # Only the Dirichlet endpoint x = 0 is eliminated: its row h/2 and its
    # coupling h/6 into the neighbouring row.
    h = 1 / 32
    assert sys.lumped_mass[sys.omega_dofs].sum() == pytest.approx(1.0 - 2 * h / 3)


def test_constant_in_kernel_for_pure_neumann():
    sys = system_for(neumann=((-4.0, 0.0), (1.0, 4.0)), h=1 / 16, far_field="neumann")
    assert not sys.has_dirichlet
    ones = np.ones(sys.n)
    assert np.abs(apply_operator(sys, ones)).max() < 1e-10 * np.abs(sys.a_total).max()


def test_rayleigh_quotient_rejects_exterior_vector(mixed_system):
    u = np.zeros(mixed_system.n)
    u[mixed_system.exterior_dofs] = 1.0
    with pytest.raises(ZeroMassError):
        rayleigh_quotient(mixed_system, u)


def test_kernel_order_mismatch():
    mesh = build_mesh(DomainConfig((0, 1), ()), 0.25)
    with pytest.raises(AssemblyError):
        assemble(mesh, FracKernel.for_order(0.3))


def test_zero_weight_drops_nonlocal_part():
    sys = system_for(neumann=(), h=1 / 16, weight=0.0)
    assert np.all(sys.a_nonlocal == 0)
    n = 15
    K = (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) * 16
    assert np.allclose(sys.a_local, K)


@pytest.mark.parametrize(
    "cfg",
    [
        DomainConfig((0, 1), ((1, 1.5),), 2.0, 0.5),
        DomainConfig((0, 1), ((-1, -0.5),), 2.0, 0.25, far_field="neumann"),
    ],
    ids=["mixed_s050", "mixed_s025_far_neumann"],
)
def test_matches_semi_analytic_reference(cfg):
    mesh = build_mesh(cfg, 0.25)
    kernel = FracKernel.for_order(cfg.fractional_order)
    sys = assemble(mesh, kernel)
    al, an, ms = reference_assembly(mesh, kernel)
    ref = al + an
    assert np.abs(sys.a_total - ref).max() <= 1e-10 * np.abs(ref).max()
    assert np.allclose(sys.mass, ms, rtol=0, atol=1e-15)


def test_dump_roundtrip(tmp_path):
    sys = system_for(neumann=(), h=1 / 8)
    paths = sys.dump(tmp_path)
    assert [p.name for p in paths] == ["a_local.coo", "a_nonlocal.coo", "mass.coo"]
    lines = paths[2].read_text().splitlines()
    n, _, nnz = map(int, lines[0][2:].split())
    mat = np.zeros((n, n))
    for line in lines[1:]:
        r, c, v = line.split()
        mat[int(r), int(c)] = float(v)
    assert nnz == len(lines) - 1
    assert np.array_equal(mat, sys.mass)


@settings(max_examples=12, deadline=None)
@given(s=st.floats(0.1, 0.9), seed=st.integers(0, 2**31 - 1))
def test_rayleigh_quotient_bounded_below_by_lambda1(s, seed):
    from mixedlap.spectral import solve_smallest

    sys = system_for(h=1 / 8, s=round(s, 3), radius=3.0)
    lam1 = solve_smallest(sys, 1)[0].lam
    u = np.random.default_rng(seed).standard_normal(sys.n)
    assert rayleigh_quotient(sys, u) >= lam1 * (1 - 1e-10)
