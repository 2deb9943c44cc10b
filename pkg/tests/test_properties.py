import numpy as np
from hypothesis import given, settings, strategies as st

from ptspectra.discretize import Grid, pt_residual
from ptspectra.eigensolve import conjugate_closure_defect, eig, multiplicities
from ptspectra.potentials import PotentialSpec, PotentialTerm, parity_audit
from ptspectra.stability import numerical_range_boundary, range_distance
from ptspectra.verification import random_pt_matrix

seeds = st.integers(0, 2**32 - 1)
sizes = st.integers(2, 12)
FAST = settings(max_examples=40, deadline=None)


@FAST
@given(seeds, sizes)
def test_random_pt_matrix_is_pt_symmetric(seed, n):
    H, P = random_pt_matrix(np.random.default_rng(seed), n)
    assert pt_residual(H, P) <= 1e-13


@FAST
@given(seeds, sizes)
def test_pt_spectrum_closed_under_conjugation(seed, n):
    H, _ = random_pt_matrix(np.random.default_rng(seed), n)
    sp = eig(H)
    # conjugate partners can only be resolved to within each eigenvalue's own error
    err = [p.residual * 1e4 + 1e-10 * sp.norm for p in sp.pairs]
    assert conjugate_closure_defect(sp.values, err) <= 1e-12


@FAST
@given(seeds, sizes)
def test_eigenvalues_inside_numerical_range(seed, n):
    A = np.random.default_rng(seed).standard_normal((n, n)) * (1 + 1j)
    A = A + 1j * np.random.default_rng(seed + 1).standard_normal((n, n))
    nrm = np.linalg.norm(A, 2)
    for lam in np.linalg.eigvals(A):
        assert range_distance(A, lam)[0] <= 1e-10 * nrm


@FAST
@given(seeds, st.integers(2, 8))
def test_numerical_range_boundary_is_convex(seed, n):
    A = np.random.default_rng(seed).standard_normal((n, n)) + 0j
    b = numerical_range_boundary(A, n_angles=32, refine_tol=1e-3)
    pts = b.points
    if len(pts) < 3:
        return
    e = np.diff(np.append(pts, pts[0]))
    turn = (np.conj(e) * np.roll(e, -1)).imag
    # counterclockwise polygon: every turn is a left turn
    assert turn.min() >= -1e-9 * np.linalg.norm(A, 2) ** 2


@FAST
@given(seeds, st.integers(2, 6), st.integers(1, 3))
def test_geometric_multiplicity_bounded_by_algebraic(seed, block, copies):
    rng = np.random.default_rng(seed)
    J = np.diag(np.ones(block - 1), 1)
    n = block * copies + 2
    A = np.zeros((n, n), dtype=complex)
    for c in range(copies):
        A[c * block:(c + 1) * block, c * block:(c + 1) * block] = J
    A[-2, -2], A[-1, -1] = 5.0, -5.0
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    m = multiplicities(Q @ A @ Q.T, 0.0)
    assert m.m_g <= m.m_a
    assert m.m_g == copies and m.m_a == block * copies


monomials = st.builds(PotentialTerm.monomial, st.floats(-5, 5, allow_nan=False), st.integers(0, 8))


@FAST
@given(st.lists(monomials, max_size=4), st.floats(0.1, 10.0))
def test_parity_audit_exact_for_monomials(terms, x_max):
    spec = PotentialSpec(tuple(t for t in terms if t.parity == "even"),
                         tuple(t for t in terms if t.parity == "odd"))
    assert parity_audit(spec, 50, x_max).max_defect == 0.0


@FAST
@given(st.floats(0.5, 50.0), st.integers(3, 400))
def test_grid_nodes_symmetric(L, n):
    x = Grid(L, n).nodes
    assert np.array_equal(x, -x[::-1])
    assert np.all(np.abs(x) < L)
