from __future__ import annotations

import math

import numpy as np
import pytest

from mixedlap.checks import (
    neumann_reconstruction_check,
    picone_check,
    poincare_constant,
    reconstruction_values,
    single_node_load_check,
    weak_max_principle_check,
)
from mixedlap.errors import ConfigError
from mixedlap.spectral import EigenPair, Spectrum, solve_smallest

from conftest import system_for


def test_picone_passes_and_saturates(mixed_system):
    sp = solve_smallest(mixed_system, 2)
    rep = picone_check(mixed_system, sp, trials=30, seed=1)
    assert rep.passed
    assert rep.margin >= 0
    assert rep.witness["saturation"] < 1e-10
    assert rep.params["seed"] == 1


def test_picone_is_seed_deterministic(mixed_system):
    sp = solve_smallest(mixed_system, 2)
    a = picone_check(mixed_system, sp, trials=10, seed=5)
    b = picone_check(mixed_system, sp, trials=10, seed=5)
    assert a == b


def test_picone_detects_wrong_eigenvalue(mixed_system):
    sp = solve_smallest(mixed_system, 2)
    # An overstated principal value must break saturation at phi_1.
    fake = Spectrum((EigenPair(1.5 * sp[0].lam, sp[0].vector, 0.0), sp[1]), 2)
    rep = picone_check(mixed_system, fake, trials=5, seed=2)
    assert not rep.passed
    assert rep.witness["saturation"] > 0.1


def test_maximum_principles(mixed_system):
    assert weak_max_principle_check(mixed_system, trials=5, seed=3).passed
    rep = single_node_load_check(mixed_system)
    assert rep.passed and rep.margin > 0


def test_maximum_principle_needs_dirichlet_set():
    sys = system_for(neumann=((-4.0, 0.0), (1.0, 4.0)), h=1 / 8, far_field="neumann")
    with pytest.raises(ConfigError):
        weak_max_principle_check(sys)
    with pytest.raises(ConfigError):
        poincare_constant(sys)


def test_reconstruction_of_constant_is_exact():
    # Both ends of omega are Neumann-adjacent, so the interpolant of 1 is 1.
    sys = system_for(neumann=((-0.5, 0.0), (1.0, 1.5)), h=1 / 16)
    xs, vals, avg = reconstruction_values(sys, np.ones(sys.n))
    assert xs.size > 0
    assert np.allclose(avg, 1.0, rtol=1e-12)


def test_reconstruction_check_on_eigenvector(mixed_system):
    sp = solve_smallest(mixed_system, 1)
    rep = neumann_reconstruction_check(mixed_system, sp)
    assert rep.passed
    assert 1.0 <= rep.witness["x"] <= 1.5


def test_poincare_constant(mixed_system):
    lam = solve_smallest(mixed_system, 1)[0].lam
    assert poincare_constant(mixed_system) == pytest.approx(1 / lam)
    assert math.isfinite(poincare_constant(mixed_system))
