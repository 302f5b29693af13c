from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from mixedlap.errors import OrderError
from mixedlap.frackernel import (
    FracKernel,
    compute_normalization_constant,
    gauss_order,
    kernel_panel_integral,
    panel_local_matrix,
    tail_weight,
)
from mixedlap.reference import normalization_constant_gamma


@pytest.mark.parametrize("s", [0.1, 0.25, 0.5, 0.75, 0.9])
def test_constant_matches_gamma_form(s):
    assert compute_normalization_constant(s) == pytest.approx(normalization_constant_gamma(s), rel=1e-12)


def test_constant_half_is_one_over_pi():
    assert abs(compute_normalization_constant(0.5) - 1 / math.pi) < 1e-12


@pytest.mark.parametrize("s", [0.0, 1.0, -0.2, 1.5])
def test_constant_rejects_bad_order(s):
    with pytest.raises(OrderError):
        compute_normalization_constant(s)


def test_tail_weight_against_quad():
    s, R, x = 0.3, 4.0, 0.7
    ref = integrate.quad(lambda y: (y - x) ** (-1 - 2 * s), R, np.inf)[0]
    ref += integrate.quad(lambda y: (x - y) ** (-1 - 2 * s), -np.inf, -R)[0]
    assert tail_weight(x, R, s, 1.0) == pytest.approx(ref, rel=1e-10)
    assert tail_weight(x, R, s, 1.0, in_omega=False) == 0.0


def _hat(v, verts):
    return lambda x: np.interp(x, verts, (verts == v).astype(float))


def _brute(E, F, i, j, s):
    verts, _ = panel_local_matrix(E, F, s)
    fi, fj = _hat(verts[i], verts), _hat(verts[j], verts)

    def inner(x):
        pts = [x] if F[0] < x < F[1] else None
        g = lambda y: (fi(x) - fi(y)) * (fj(x) - fj(y)) * abs(x - y) ** (-1 - 2 * s)
        return integrate.quad(g, F[0], F[1], points=pts, epsabs=1e-15, epsrel=1e-12, limit=200)[0]

    pts = [p for p in F if E[0] < p < E[1]] or None
    return integrate.quad(inner, E[0], E[1], points=pts, epsabs=1e-15, epsrel=1e-12, limit=200)[0]


# The brute-force nested quad complains near the singularity; the
# comparison tolerance below is what matters.
@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize(
    "E, F",
    [((0, 0.25), (0, 0.25)), ((0, 0.25), (0.25, 0.6)), ((0.3, 0.5), (0, 0.3)), ((0, 0.25), (0.5, 0.75))],
)
@pytest.mark.parametrize("s", [0.25, 0.75])
def test_panel_integrals_against_nested_quad(E, F, s):
    verts, mat = panel_local_matrix(E, F, s)
    for i in range(len(verts)):
        for j in range(i, len(verts)):
            ref = _brute(E, F, i, j, s)
            assert abs(mat[i, j] - ref) <= 1e-9 * np.abs(mat).max()


def test_panel_matrix_symmetric_and_annihilates_constants():
    for E, F in [((0, 0.25), (0.25, 0.6)), ((0, 0.25), (0.3, 1.5)), ((0, 1), (1.001, 1.002))]:
        _, mat = panel_local_matrix(E, F, 0.4)
        assert np.allclose(mat, mat.T, rtol=0, atol=1e-14 * np.abs(mat).max())
        assert np.abs(mat.sum(axis=1)).max() <= 1e-12 * np.abs(mat).max()


def test_kernel_panel_integral_scales_with_constant():
    v = kernel_panel_integral((0, 0.25), (0.5, 0.75), 0, 0, 0.5)
    assert kernel_panel_integral((0, 0.25), (0.5, 0.75), 0, 0, 0.5, c_ns=2.0) == pytest.approx(2 * v)


def test_gauss_order_monotone():
    orders = [gauss_order(r) for r in (0.5, 1, 2, 5, 20, 100)]
    assert orders == sorted(orders, reverse=True)
    assert 3 <= min(orders) and max(orders) <= 12


def test_kernel_object():
    k = FracKernel.for_order(0.5)
    assert k.scale == pytest.approx(1 / math.pi)
    assert FracKernel.for_order(0.5, 0).scale == 0
    assert k(0.0, 2.0) == pytest.approx(1 / math.pi / 4)
    with pytest.raises(ValueError):
        FracKernel(0.5, 1.0, 0.5)
