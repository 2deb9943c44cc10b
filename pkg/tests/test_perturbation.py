from fractions import Fraction

import numpy as np
import pytest

from ptspectra.discretize import BasisSpec, build, perturbation_operator
from ptspectra.errors import PerturbationError
from ptspectra.perturbation import (RSPESeries, locate_exceptional, rspe_coefficients, rspe_reality_check,
                                    track_branches, truncation_slope)
from ptspectra.potentials import catalog


def quartic_series_exact(order):
    """Exact a_n for p^2 + x^2 + eps x^4 (ground state), by polynomial recursion.

    psi = exp(-x^2/2) sum eps^n phi_n(x) turns the eigen-equation into
    -phi_n'' + 2x phi_n' = -x^4 phi_{n-1} + sum_{k=1..n} a_k phi_{n-k};
    the constant coefficient of the right side fixes a_n.
    """
    phis = [{0: Fraction(1)}]
    a = [Fraction(1)]
    for n in range(1, order + 1):
        rhs = {}
        for p, c in phis[n - 1].items():
            rhs[p + 4] = rhs.get(p + 4, 0) - c
        for k in range(1, n):
            for p, c in phis[n - k].items():
                rhs[p] = rhs.get(p, 0) + a[k] * c
        top = max(rhs)
        coef = {}
        for m in range(top, 0, -1):
            # L x^m = 2m x^m - m(m-1) x^(m-2)
            coef[m] = (rhs.get(m, 0) + (m + 2) * (m + 1) * coef.get(m + 2, 0)) / (2 * m)
        a_n = -(rhs.get(0, 0) + 2 * coef.get(2, 0))
        a.append(a_n)
        coef = {m: c for m, c in coef.items() if c != 0}
        phis.append(coef)
    return a


def test_oracle_known_values():
    assert quartic_series_exact(4) == [1, Fraction(3, 4), Fraction(-21, 16), Fraction(333, 64),
                                       Fraction(-30885, 1024)]


def _quartic_series(n_modes, order):
    F = catalog("harmonic_quartic")
    d = BasisSpec(n_modes)
    return rspe_coefficients(build(F, 0.0, d), perturbation_operator(F, d), 1.0, order)


def test_rspe_quartic_against_exact_oracle():
    s = _quartic_series(60, 8)
    exact = np.array([float(x) for x in quartic_series_exact(8)])
    assert np.max(np.abs(s.a - exact) / np.abs(exact)) <= 1e-9


def test_rspe_first_coefficient_gaussian_moment():
    assert abs(_quartic_series(40, 1).a[1] - 0.75) <= 1e-12


def test_rspe_2x2_exact():
    s = rspe_coefficients(np.diag([0.0, 2.0]), np.array([[0.0, 1.0], [1.0, 0.0]]), 0.0, 4)
    # 1 - sqrt(1 + eps^2) = -eps^2/2 + eps^4/8 - ...
    assert np.allclose(s.a, [0, 0, -0.5, 0, 0.125], atol=1e-15)


def test_rspe_jordan_defective():
    J = catalog("jordan2x2")
    with pytest.raises(PerturbationError, match="Jordan"):
        rspe_coefficients(J.H0, J.perturbation_matrix(), 0.0, 2)


def test_rspe_double_eigenvalue_rejected():
    with pytest.raises(PerturbationError, match="multiplicity"):
        rspe_coefficients(np.diag([1.0, 1.0, 3.0]), np.ones((3, 3)), 1.0, 2)


def test_rspe_truncates_when_basis_too_small():
    with pytest.warns(RuntimeWarning, match="truncated"):
        s = _quartic_series(12, 8)
    assert s.truncated and s.order < 8


def test_reality_check_quartic_divergent():
    s60, s90 = _quartic_series(60, 8), _quartic_series(90, 8)
    chk = rspe_reality_check(s60, 1e-8, s90)
    assert chk.verdict == "real_series"
    assert np.all(np.diff(chk.growth_ratios) > 0)


def test_reality_check_poly_lq():
    F = catalog("poly_lq")
    ss = []
    for n in (80, 120):
        d = BasisSpec(n, 0.6)
        ss.append(rspe_coefficients(build(F, 0.0, d), perturbation_operator(F, d), 1.0, 4))
    drift = float(np.max(np.abs(ss[0].a - ss[1].a)))
    assert rspe_reality_check(ss[1], max(drift, 1e-12), ss[0]).verdict == "real_series"


def test_reality_check_counterexample():
    s = RSPESeries(1.0, np.array([1j, 0.5]), 2)
    assert rspe_reality_check(s, 1e-8).verdict == "not_real"


def test_reality_check_tol_below_drift_undecided():
    a = RSPESeries(1.0, np.array([0.75]), 1)
    b = RSPESeries(1.0, np.array([0.75 + 1e-6]), 1)
    assert rspe_reality_check(a, 1e-9, b).verdict == "undecided"


@pytest.mark.parametrize("order", [1, 2, 3])
def test_series_matches_branch_to_order(order):
    F = catalog("harmonic_quartic")
    s = _quartic_series(60, order)
    sl = truncation_slope(F, s, BasisSpec(60))
    assert sl.slope is not None and sl.slope >= order + 0.5


def test_track_jordan_closed_form():
    J = catalog("jordan2x2")
    grid = np.linspace(0.0, 1.0, 101)
    tr = track_branches(J, grid, k=2)
    V = np.sort(tr.values().imag, axis=1)
    r = np.sqrt(grid * (grid + 2))
    assert np.max(np.abs(V - np.column_stack([-r, r]))) <= 1e-10
    assert np.max(np.abs(tr.values().real)) <= 1e-10
    assert "collision" in tr[0].flags[0]
    assert all(v == "conjugate_pair" for b in tr for v in b.verdicts[1:])
    # each branch stays on one sheet after leaving the exceptional point
    assert np.all(np.sign(tr[0].values[1:].imag) == np.sign(tr[0].values[1].imag))


def test_track_gap2x2_real_then_pair():
    G = catalog("gap2x2")
    g = np.linspace(0.0, 2.0, 201)
    tr = track_branches(G, g, k=2)
    exact = 1 + np.sqrt((1 - g**2).astype(complex))
    for i, gi in enumerate(g):
        got = np.sort_complex(np.round(tr.values()[i], 9))
        want = np.sort_complex(np.round(np.array([exact[i], 2 - exact[i]]), 9))
        assert np.max(np.abs(got - want)) <= (1e-7 if abs(gi - 1) < 1e-12 else 1e-10)
        verdicts = {b.verdicts[i] for b in tr}
        if gi < 1:
            assert verdicts == {"real"}
        elif gi > 1:
            assert verdicts == {"conjugate_pair"}
    assert all(b.epsilon_j == pytest.approx(0.99) for b in tr)


def test_track_harmonic_quartic_real_increasing():
    F = catalog("harmonic_quartic")
    grid = np.linspace(0.0, 0.2, 21)
    tr = track_branches(F, grid, BasisSpec(60), k=3, reference=BasisSpec(90))
    V = tr.values()
    assert np.all(np.diff(V.real, axis=0) > 0)
    assert all(v == "real" for b in tr for v in b.verdicts)
    for i, e in enumerate(grid):
        ev = np.sort(np.linalg.eigvalsh(build(F, e, BasisSpec(90)).matrix))[:3]
        assert np.max(np.abs(np.sort(V[i].real) - ev)) <= 1e-8


def test_track_grid_refinement_consistent():
    F = catalog("cubic_i")
    d, ref = BasisSpec(100, 0.6), BasisSpec(140, 0.6)
    a = track_branches(F, np.linspace(0, 0.1, 6), d, k=4, reference=ref).values()
    b = track_branches(F, np.linspace(0, 0.1, 11), d, k=4, reference=ref).values()
    assert np.max(np.abs(a - b[::2])) <= 1e-12


def test_track_workers_deterministic():
    F = catalog("sine_g")
    g = np.linspace(0, 0.1, 6)
    a = track_branches(F, g, BasisSpec(80), k=3, workers=1).values()
    b = track_branches(F, g, BasisSpec(80), k=3, workers=4).values()
    assert np.array_equal(a, b)


def test_track_grid_validation():
    with pytest.raises(PerturbationError):
        track_branches(catalog("gap2x2"), [0.1, 0.2])
    with pytest.raises(PerturbationError):
        track_branches(catalog("gap2x2"), [0.0, 0.2, 0.1])


def test_track_reports_window_entrants():
    # eigenvalues from above enter the window as eps lowers the levels
    import ptspectra.potentials as pot
    F = pot.OperatorFamily.schrodinger("shrink", pot.poly({2: 1.0}), pot.poly({2: -1.0}), epsilon_max=0.9)
    tr = track_branches(F, np.linspace(0, 0.9, 10), BasisSpec(40), k=2)
    assert tr.entrants
    assert 0 not in tr.entrants


@pytest.mark.parametrize("interval, root", [((-1.0, 0.5), 0.0), ((-3.0, -1.0), -2.0)])
def test_locate_exceptional_jordan(interval, root):
    ep = locate_exceptional(catalog("jordan2x2"), interval)
    assert ep.status == "point" and abs(ep.epsilon - root) <= 1e-10
    assert ep.classification == "exceptional"


def test_locate_exceptional_gap2x2():
    ep = locate_exceptional(catalog("gap2x2"), (0.5, 1.5))
    assert abs(ep.epsilon - 1.0) <= 1e-10 and ep.classification == "exceptional"


def test_locate_exceptional_off_center_interval():
    ep = locate_exceptional(catalog("gap2x2"), (0.3, 1.83))
    assert abs(ep.epsilon - 1.0) <= 1e-10 and ep.iterations > 10


def test_locate_exceptional_no_transition():
    ep = locate_exceptional(catalog("degenerate2x2"), (0.0, 1.0))
    assert ep.status == "no_transition" and ep.epsilon is None


def test_locate_exceptional_non_monotone():
    ep = locate_exceptional(catalog("jordan2x2"), (-3.0, 0.5))
    assert ep.status == "non_monotone" and len(ep.subintervals) == 2
