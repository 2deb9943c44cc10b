import math

import numpy as np
import pytest

from ptspectra.discretize import (BasisSpec, Grid, build, build_finite_difference, build_oscillator_basis,
                                  convergence_gap, default_grid, lowest, parity_matrix, perturbation_operator,
                                  pt_residual)
from ptspectra.errors import DiscretizationError
from ptspectra.potentials import OperatorFamily, PotentialSpec, catalog, poly


def test_grid_nodes_symmetric():
    for n in (3, 4, 101, 1000):
        x = Grid(2.5, n).nodes
        assert np.array_equal(x, -x[::-1])
    assert Grid(2.0, 3).spacing == 1.0


def test_fd_kinetic_stencil():
    free = OperatorFamily.schrodinger("free", PotentialSpec())
    H = build_finite_difference(free, 0.0, Grid(2.0, 3)).matrix
    assert np.array_equal(H.real, [[2, -1, 0], [-1, 2, -1], [0, -1, 2]])


def test_fd_harmonic_ground_state():
    op = build(catalog("harmonic"), 0.0, Grid(10.0, 2000))
    ev = np.linalg.eigvalsh(op.matrix)
    assert abs(ev[0] - 1.0) <= 1e-4


def test_matrix_family_rejects_grid():
    with pytest.raises(DiscretizationError):
        build(catalog("jordan2x2"), 0.0, Grid(5.0, 10))
    with pytest.raises(DiscretizationError):
        Grid(1.0, 2)
    with pytest.raises(DiscretizationError):
        BasisSpec(0)


def test_basis_harmonic_exact():
    op = build_oscillator_basis(catalog("harmonic"), 0.0, BasisSpec(40))
    ev = np.sort(np.linalg.eigvals(op.matrix).real)
    assert np.max(np.abs(ev - (2 * np.arange(40) + 1))) <= 1e-12


def test_basis_cubic_is_complex_symmetric_and_pt():
    op = build(catalog("cubic_i"), 0.0, BasisSpec(120))
    assert np.max(np.abs(op.matrix - op.matrix.T)) <= 1e-12 * np.abs(op.matrix).max()
    assert pt_residual(op.matrix, op.parity) <= 1e-10


def _ladder_x4(n):
    # closed-form <m| x^4 |n> for x = (a + a^dagger)/sqrt(2)
    X = np.zeros((n, n))
    for k in range(n):
        X[k, k] = (6 * k * k + 6 * k + 3) / 4
        if k + 2 < n:
            X[k, k + 2] = X[k + 2, k] = (2 * k + 3) * math.sqrt((k + 1) * (k + 2)) / 2
        if k + 4 < n:
            X[k, k + 4] = X[k + 4, k] = math.sqrt((k + 1) * (k + 2) * (k + 3) * (k + 4)) / 4
    return X


def test_quadrature_matches_ladder_x4():
    n = 50
    W = perturbation_operator(catalog("harmonic_quartic"), BasisSpec(n))
    X4 = _ladder_x4(n)
    assert np.max(np.abs(W - X4)) / np.abs(X4).max() <= 1e-10


def test_parity_matrices():
    assert np.array_equal(parity_matrix(Grid(1.0, 3)), np.eye(3)[::-1])
    assert np.array_equal(parity_matrix(BasisSpec(3)), np.diag([1.0, -1.0, 1.0]))
    for d in (Grid(1.0, 7), BasisSpec(9)):
        P = parity_matrix(d)
        assert np.array_equal(P @ P, np.eye(d.size))
        assert np.array_equal(P, P.T)


def test_pt_residual_examples():
    J = catalog("jordan2x2")
    assert pt_residual(J.H0, J.P) == 0.0
    # P conj(H) P - H = -2i I, so the relative Frobenius residual is exactly 2
    assert pt_residual(np.diag([1j, 1j]), np.diag([1.0, -1.0])) == pytest.approx(2.0)
    op = build(catalog("cubic_i"), 0.0, Grid(8.0, 400))
    assert pt_residual(op.matrix, op.parity) <= 1e-12


@pytest.mark.parametrize("name", ["harmonic_quartic", "cubic_i", "sine_g", "rational_g", "poly_lq", "double_well"])
def test_catalog_pt_residual_both_discretizations(name):
    F = catalog(name)
    for eps in (0.0, F.epsilon_max):
        for d in (Grid(8.0, 300), BasisSpec(60, 0.7)):
            op = build(F, eps, d)
            if F.terms_builder is not None and eps > 0:
                # x^2 (1 - eps x)^2 is real but not even: no parity to respect
                continue
            assert pt_residual(op.matrix, op.parity) <= 1e-10, (name, eps, d)


def test_convergence_gap_fd_harmonic():
    H = catalog("harmonic")
    g1 = convergence_gap(H, 0.0, (Grid(10.0, 500), Grid(10.0, 1000)), 5)
    g2 = convergence_gap(H, 0.0, (Grid(10.0, 1000), Grid(10.0, 2000)), 5)
    assert np.all(g2.gaps <= 1e-3)
    assert g2.error_scale < g1.error_scale
    assert g2.fine.error_scale == g2.error_scale


def test_convergence_gap_basis_cubic():
    g = convergence_gap(catalog("cubic_i"), 0.0, (BasisSpec(60, 0.6), BasisSpec(120, 0.6)), 5)
    assert g.error_scale <= 1e-8


def test_convergence_gap_identical_sizes():
    g = convergence_gap(catalog("cubic_i"), 0.0, (BasisSpec(40), BasisSpec(40)), 5)
    assert np.all(g.gaps == 0.0)


def test_default_grid_margin():
    F = catalog("harmonic")
    g = default_grid(F, 0.0)
    assert g.half_width**2 >= 45.0 and g.spacing <= 0.02


def test_fd_and_basis_agree_within_error_scale():
    F = catalog("harmonic_quartic")
    fd = convergence_gap(F, 0.1, (Grid(8.0, 800), Grid(8.0, 1600)), 5)
    ba = convergence_gap(F, 0.1, (BasisSpec(60), BasisSpec(90)), 5)
    a = np.sort(fd.fine_values.real)
    b = np.sort(ba.fine_values.real)
    # FD error is second order; the coarse/fine gap over-estimates it by about 4/3
    assert np.max(np.abs(a - b)) <= 2.0 * (fd.error_scale + ba.error_scale)


def test_lowest_orders_by_modulus():
    v = np.array([5, 1 + 100j, 3, 1])
    assert np.array_equal(lowest(v, 3), [1, 3, 5])
