from __future__ import annotations

import math

import numpy as np
import pytest

from mixedlap.errors import SingularBlockError
from mixedlap.reference import dense_full_eigenvalues
from mixedlap.spectral import (
    check_orthogonality,
    check_principal,
    check_simplicity,
    condense,
    solve_smallest,
)

from conftest import system_for


def test_full_dirichlet_local_limit_converges_to_pi_squared():
    sys = system_for(neumann=(), h=1 / 64, weight=0.0)
    lam = solve_smallest(sys, 2).lambdas
    assert lam[0] == pytest.approx(math.pi**2, rel=1e-3)
    assert lam[1] == pytest.approx(4 * math.pi**2, rel=1e-2)


def test_dense_and_iterative_paths_agree(mixed_system):
    dense = solve_smallest(mixed_system, 3, dense_limit=10**6).lambdas
    iterative = solve_smallest(mixed_system, 3, dense_limit=0).lambdas
    assert np.allclose(dense, iterative, rtol=1e-9)
    full = dense_full_eigenvalues(mixed_system)
    assert np.allclose(full[:3], dense, rtol=1e-9)


def test_normalization_and_residuals(mixed_system):
    sp = solve_smallest(mixed_system, 3)
    for pair in sp:
        assert mixed_system.mass_form(pair.vector) == pytest.approx(1.0)
        assert pair.residual < 1e-10
    om = mixed_system.omega_dofs
    assert sp[0].vector[om].sum() > 0


def test_pure_neumann_spectrum():
    sys = system_for(neumann=((-4.0, 0.0), (1.0, 4.0)), h=1 / 16, far_field="neumann")
    sp = solve_smallest(sys, 3)
    assert sp[0].lam == 0.0
    assert sp.diagnostics["deflated"]
    assert np.ptp(sp[0].vector) < 1e-12
    assert 0 < sp[1].lam < sp[2].lam


def test_structure_reports(mixed_system):
    sp = solve_smallest(mixed_system, 2)
    assert check_principal(sp).passed
    second = check_principal(sp, 1)
    assert not second.passed and second.witness["sign_change"]
    assert check_simplicity(sp).passed
    orth = check_orthogonality(sp, mixed_system)
    assert orth.passed and orth.margin > 0
    assert "orthogonality" in orth.line()


def test_condensation_extends_to_harmonic_exterior(mixed_system):
    cond = condense(mixed_system)
    u = np.linspace(1, 2, cond.omega.size)
    full = cond.extend(u)
    A = mixed_system.a_total
    ext = cond.exterior
    assert np.abs((A @ full)[ext]).max() < 1e-10 * np.abs(A).max()
    assert np.array_equal(full[cond.omega], u)


def test_no_nonlocal_coupling_makes_exterior_singular():
    sys = system_for(h=1 / 8, weight=0.0)
    with pytest.raises(SingularBlockError):
        solve_smallest(sys, 1)


def test_count_validation(mixed_system):
    with pytest.raises(ValueError):
        solve_smallest(mixed_system, 0)
