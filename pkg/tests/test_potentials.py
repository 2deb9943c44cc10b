import numpy as np
import pytest

from ptspectra.errors import PotentialError
from ptspectra.potentials import (OperatorFamily, PotentialSpec, PotentialTerm, available, catalog,
                                  confinement_audit, evaluate, parity_audit, poly, theorem22_applicable)

SCHRODINGER = ["harmonic", "harmonic_quartic", "double_well", "cubic_i", "sine_g", "rational_g", "poly_lq"]


def test_evaluate_examples():
    assert evaluate(poly({4: 1.0}), 2.0) == 16
    V = PotentialSpec((PotentialTerm.monomial(1.0, 2),), (PotentialTerm.sine(1.0),))
    assert evaluate(V, 0.0) == 0
    assert evaluate(poly(odd={3: 1.0}), 1.0) == 1j


def test_term_formulas():
    x = np.array([-1.3, 0.4, 2.0])
    assert np.allclose(PotentialTerm.sine(2.0, 3.0)(x), 2.0 * np.sin(3.0 * x))
    assert np.allclose(PotentialTerm.rational_odd(0.5)(x), 0.5 * x / (x**2 + 1))
    assert np.allclose(PotentialTerm.exp_square(1.0)(x), np.exp(x**2))


def test_exp_square_overflow_is_an_error():
    spec = PotentialSpec((PotentialTerm.exp_square(1.0),), ())
    with pytest.raises(PotentialError):
        evaluate(spec, 40.0)


def test_wrong_parity_rejected_at_construction():
    with pytest.raises(PotentialError):
        PotentialSpec((), (PotentialTerm.monomial(1.0, 2),))
    with pytest.raises(PotentialError):
        PotentialSpec((PotentialTerm.sine(1.0),), ())


def test_parity_audit():
    assert parity_audit(poly({2: 1.0}), 50).max_defect == 0.0
    V = PotentialSpec((PotentialTerm.monomial(1.0, 4),), (PotentialTerm.sine(1.0),))
    assert parity_audit(V, 100).max_defect <= 1e-14
    with pytest.raises(PotentialError):
        parity_audit(V, 1)


@pytest.mark.parametrize("name", SCHRODINGER)
def test_catalog_parity_defects(name):
    F = catalog(name)
    if F.terms_builder is None:
        assert parity_audit(F.V).max_defect <= 1e-12
        assert parity_audit(F.W).max_defect <= 1e-12


def test_theorem22_examples():
    r = theorem22_applicable(poly({6: 1.0}), poly(odd={1: 1.0}))
    assert (r.applicable, r.l, r.r) == (True, 3, 1)
    r = theorem22_applicable(poly({4: 1.0}), poly(odd={3: 1.0}))
    assert (r.applicable, r.l, r.r) == (False, 2, 2)
    with pytest.raises(PotentialError):
        theorem22_applicable(poly(odd={3: 1.0}), poly(odd={1: 1.0}))


def test_theorem22_non_polynomial_reason():
    V = PotentialSpec((PotentialTerm.monomial(1.0, 6),), ())
    W = PotentialSpec((), (PotentialTerm.sine(1.0),))
    r = theorem22_applicable(V, W)
    assert not r.applicable and r.reason == "non_polynomial"


def test_confinement_examples():
    a = confinement_audit(catalog("harmonic"), 0.0, 10.0)
    assert a.growth and a.argmin == 0.0
    assert confinement_audit(catalog("cubic_i"), 0.1, 10.0).growth
    bounded = OperatorFamily.schrodinger("sine", PotentialSpec((), (PotentialTerm.sine(1.0),)))
    assert not confinement_audit(bounded, 0.0, 10.0).growth


@pytest.mark.parametrize("name", SCHRODINGER)
def test_catalog_confining_over_epsilon_range(name):
    F = catalog(name)
    for eps in np.linspace(0.0, F.epsilon_max, 5):
        # the double well's second minimum sits at x = 1/eps
        x_max = max(10.0, 4.0 / eps) if eps > 0 else 10.0
        assert confinement_audit(F, eps, x_max).growth, (name, eps)


def test_jordan_matrices():
    J = catalog("jordan2x2")
    assert np.array_equal(J.H0, np.array([[1, 1j], [1j, -1]]))
    assert np.array_equal(J.perturbation_matrix(), np.array([[0, 1j], [1j, 0]]))
    assert np.array_equal(J.P, np.diag([1.0, -1.0]))


def test_double_well_expansion():
    F = catalog("double_well")
    x = np.linspace(-3, 12, 31)
    for eps in (0.05, 0.2):
        assert np.allclose(F.potential(eps)(x), x**2 * (1 - eps * x) ** 2, rtol=1e-13, atol=1e-12)


def test_degenerate2x2_exact_eigenvalues():
    D = catalog("degenerate2x2")
    for g in (0.3, 1.7):
        ev = np.sort_complex(np.linalg.eigvals(D.matrix_at(g)))
        assert np.allclose(ev, [1 - 1j * g, 1 + 1j * g], atol=1e-14)


def test_unknown_catalog_lists_names():
    with pytest.raises(PotentialError) as exc:
        catalog("nope")
    for name in available():
        assert name in str(exc.value)


def test_poly_lq_requires_l_greater_than_2q():
    with pytest.raises(PotentialError):
        catalog("poly_lq", l=2, q=1)


def test_matrix_family_must_be_pt_symmetric():
    with pytest.raises(PotentialError):
        OperatorFamily.matrix("bad", np.diag([1j, 1j]), np.zeros((2, 2)), np.diag([1.0, -1.0]))
    with pytest.raises(PotentialError):
        OperatorFamily.matrix("bad", np.eye(2), np.zeros((2, 2)), np.array([[1.0, 1.0], [0.0, 1.0]]))


@pytest.mark.parametrize("name", ["jordan2x2", "gap2x2", "cubic_i", "sine_g"])
def test_family_dict_round_trip(name):
    F = catalog(name)
    G = OperatorFamily.from_dict(F.to_dict())
    if F.is_matrix:
        assert np.array_equal(F.matrix_at(0.3), G.matrix_at(0.3))
    else:
        x = np.linspace(-4, 4, 17)
        assert np.allclose(F.potential(0.05)(x), G.potential(0.05)(x), rtol=0, atol=1e-15)
