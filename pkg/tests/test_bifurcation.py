from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixedlap.bifurcation import (
    ContinuationParams,
    Nonlinearity,
    Termination,
    amplitude_solve,
    continue_branch,
    detect_bifurcation_point,
    emanation_lambda,
    invert_branch,
    jacobian_fd_error,
    lumped_principal,
    newton_solve,
    residual,
)
from mixedlap.errors import NoConvergence, ZeroNorm
from mixedlap.reference import fixed_point_solve

from conftest import system_for


@pytest.fixture(scope="module")
def sys():
    return system_for()


@pytest.fixture(scope="module")
def asym_branch(sys):
    return continue_branch(sys, Nonlinearity.asymlinear(), params=ContinuationParams(norm_cap_factor=1e5))


def test_nonlinearity_values():
    h = Nonlinearity.asymlinear()
    assert h(-1.0) == 0.0
    assert h(1.0) == pytest.approx(1 + np.exp(-1))
    assert h.derivative(0.0) == 1.0 and h.derivative(-0.1) == 0.0
    g = Nonlinearity.logistic(3)
    assert g(1.0) == 0.0 and g.theta is None
    assert g.perturbation(0.5) == pytest.approx(-0.125)
    with pytest.raises(ValueError):
        Nonlinearity.logistic(1)
    with pytest.raises(ValueError):
        Nonlinearity.asymlinear(scale=0.0)


@settings(max_examples=25, deadline=None)
@given(t=st.floats(1e-3, 50.0), kind=st.sampled_from(["asymlinear", "logistic"]))
def test_derivative_matches_difference_quotient(t, kind):
    h = Nonlinearity(kind)
    step = 1e-6 * max(1.0, t)
    fd = (h(t + step) - h(t - step)) / (2 * step)
    assert float(h.derivative(t)) == pytest.approx(float(fd), rel=1e-6, abs=1e-6 * (1 + t**2))


def test_detect_bifurcation_point(sys):
    est = detect_bifurcation_point(sys, Nonlinearity.asymlinear())
    assert est.confirmed
    assert abs(est.crossing - est.lambda1) <= 1e-10 * est.lambda1
    scaled = detect_bifurcation_point(sys, Nonlinearity.asymlinear(scale=2.0))
    assert scaled.lambda0 == pytest.approx(est.lambda1 / 2)


def test_emanation_lambda(sys):
    lam1 = lumped_principal(sys).lam
    assert abs(emanation_lambda(sys, Nonlinearity.asymlinear()) - lam1) <= 1e-8 * lam1


def test_amplitude_solve_fixes_amplitude(sys):
    pair = lumped_principal(sys)
    lam, u, _ = amplitude_solve(sys, Nonlinearity.asymlinear(), pair.vector, 1e-2, pair.lam)
    assert float(pair.vector @ (sys.lumped_mass * u)) == pytest.approx(1e-2, rel=1e-10)
    assert lam < pair.lam
    with pytest.raises(NoConvergence):
        amplitude_solve(sys, Nonlinearity.asymlinear(), pair.vector, 1e-2, pair.lam, max_iter=1)


def test_newton_agrees_with_fixed_point(sys, asym_branch):
    nl = Nonlinearity.asymlinear()
    p = asym_branch.points[10]
    u = newton_solve(sys, nl, p.lam, 1.05 * p.u)
    assert np.allclose(u, p.u, rtol=1e-8, atol=1e-10 * p.linf_norm)


def test_logistic_branch_matches_monotone_iteration(sys):
    """The constant 1 is a supersolution for the logistic term, and the
    positive solution above lambda_1 is unique, so the monotone iteration
    started there lands on the continuation point."""
    nl = Nonlinearity.logistic(3)
    b = continue_branch(sys, nl)
    # Away from lambda_1, where the iteration contracts quickly.
    for p in b.points[15::5]:
        v = fixed_point_solve(sys, nl, p.lam, np.ones(sys.n), shift=3.0)
        assert np.abs(v - p.u).max() <= 1e-8 * p.linf_norm


def test_asymlinear_branch_shape(sys, asym_branch):
    b = asym_branch
    assert b.termination == Termination.NORM_CAP
    assert b.direction == -1
    lam = b.column("lambda")
    assert np.all(lam < b.lambda1 * (1 + 1e-6))
    assert np.all(b.column("arclength")[1:] > b.column("arclength")[:-1])
    for p in b.points[::20]:
        r = residual(sys, Nonlinearity.asymlinear(), p.lam, p.u)
        assert np.linalg.norm(r) <= 1e-9 * (1 + np.linalg.norm(sys.a_total @ p.u))
        assert p.u.min() >= -1e-10 * p.linf_norm


def test_jacobian_consistency(sys, asym_branch):
    nl = Nonlinearity.asymlinear()
    for p in asym_branch.points[:: max(1, len(asym_branch) // 5)]:
        assert jacobian_fd_error(sys, nl, p.lam, p.u) <= 1e-5


def test_logistic_branch_is_supercritical_and_bounded(sys):
    b = continue_branch(sys, Nonlinearity.logistic(3))
    assert b.direction == 1
    assert b.lambda_inf is None
    assert np.all(b.column("lambda") > b.lambda1)
    norms = b.column("linf_norm")
    assert np.all(np.diff(norms) >= 0)
    assert norms.max() <= 1 + 1e-6


def test_invert_branch(asym_branch):
    inv = invert_branch(asym_branch)
    assert inv.inverted and not invert_branch(inv).inverted
    p, q = asym_branch.points[-1], inv.points[-1]
    assert q.linf_norm == pytest.approx(1 / p.linf_norm)
    assert q.lam == p.lam
    from dataclasses import replace

    zero = replace(asym_branch, points=(replace(p, u=np.zeros_like(p.u)),))
    with pytest.raises(ZeroNorm):
        invert_branch(zero)


def test_continue_from_given_point(sys, asym_branch):
    p = asym_branch.points[5]
    b = continue_branch(sys, Nonlinearity.asymlinear(), start=(p.lam, p.u), params=ContinuationParams(max_steps=5))
    assert len(b) == 6
    assert b.termination == Termination.MAX_STEPS
