"""Finite-difference and Hermite-basis discretizations of H(eps) = p^2 + V + eps W."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy.special import roots_hermite

from ._linalg import eigenvalues, pt_defect
from .errors import DiscretizationError
from .potentials import EXP_SQUARE_CLAMP, OperatorFamily, PotentialSpec, confinement_audit


@dataclass(frozen=True)
class Grid:
    """Uniform grid on (-L, L) with Dirichlet walls at +-L."""

    half_width: float
    n_points: int

    def __post_init__(self):
        if not self.half_width > 0:
            raise DiscretizationError("grid half_width must be positive")
        if self.n_points < 3:
            raise DiscretizationError(f"grid needs n_points >= 3, got {self.n_points}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.n_points + 1)

    @property
    def nodes(self) -> np.ndarray:
        i = np.arange(1, self.n_points + 1)
        x = -self.half_width + i * self.spacing
        # symmetrize exactly so parity is an exact permutation
        return 0.5 * (x - x[::-1])

    @property
    def size(self) -> int:
        return self.n_points


@dataclass(frozen=True)
class BasisSpec:
    """Hermite-function basis phi_n(x / omega) / sqrt(omega), n < n_modes."""

    n_modes: int
    omega: float = 1.0

    def __post_init__(self):
        if self.n_modes < 1:
            raise DiscretizationError(f"basis needs n_modes >= 1, got {self.n_modes}")
        if not self.omega > 0:
            raise DiscretizationError("basis scale omega must be positive")

    @property
    def size(self) -> int:
        return self.n_modes


Discretization = Union[Grid, BasisSpec, None]


@dataclass(frozen=True)
class DiscretizedOperator:
    matrix: np.ndarray = field(repr=False)
    parity: np.ndarray = field(repr=False)
    method: str
    epsilon: float = 0.0
    error_scale: float = 0.0
    descriptor: Discretization = None
    family: str = ""

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def nodes(self) -> Optional[np.ndarray]:
        return self.descriptor.nodes if isinstance(self.descriptor, Grid) else None

    def with_error_scale(self, err: float) -> "DiscretizedOperator":
        return replace(self, error_scale=float(err))


def parity_matrix(descriptor) -> np.ndarray:
    """Reflection x -> -x: anti-identity on a grid, diag((-1)^n) in the Hermite basis."""
    if isinstance(descriptor, Grid):
        return np.eye(descriptor.n_points)[::-1].copy()
    if isinstance(descriptor, BasisSpec):
        return np.diag((-1.0) ** np.arange(descriptor.n_modes))
    raise DiscretizationError(f"no parity realization for {descriptor!r}")


def pt_residual(H, P) -> float:
    """Relative Frobenius residual ||P conj(H) P - H||_F / ||H||_F (zero iff PT-symmetric)."""
    return pt_defect(H, P)


def build_finite_difference(family: OperatorFamily, epsilon: float, grid: Grid) -> DiscretizedOperator:
    if family.is_matrix:
        raise DiscretizationError(f"{family.name}: matrix variant has no grid")
    audit = confinement_audit(family, epsilon, grid.half_width, samples=200)
    if not audit.growth:
        warnings.warn(f"{family.name} at eps={epsilon:g}: potential not visibly confining "
                      f"on |x| <= {grid.half_width:g}; truncation may be untrustworthy",
                      RuntimeWarning, stacklevel=2)
    x = grid.nodes
    U = family.potential(epsilon)(x)
    if not np.all(np.isfinite(U)):
        bad = x[~np.isfinite(U)][0]
        raise DiscretizationError(f"non-finite potential value at node x={bad:g}")
    n = grid.n_points
    h2 = grid.spacing**2
    H = np.zeros((n, n), dtype=complex)
    idx = np.arange(n)
    H[idx, idx] = 2.0 / h2 + U
    H[idx[:-1], idx[:-1] + 1] = -1.0 / h2
    H[idx[:-1] + 1, idx[:-1]] = -1.0 / h2
    return DiscretizedOperator(H, parity_matrix(grid), "fd", float(epsilon), 0.0, grid, family.name)


@lru_cache(maxsize=16)
def _hermite_quadrature(n_nodes: int):
    """Gauss-Hermite nodes with per-node rescaled Hermite functions.

    Returns (t, q, lam) with q[j, k] = c_k psi_j(t_k) for unknown positive c_k and
    lam[k] = 1 / sum_j q[j, k]^2, so that sum_k lam q_m q_n f(t_k) approximates
    int psi_m psi_n f dt independently of c_k.  The rescaling keeps large-n,
    large-t values inside double range.
    """
    t, _ = roots_hermite(n_nodes)
    q = np.empty((n_nodes, n_nodes))
    q[0] = 1.0
    if n_nodes > 1:
        q[1] = math.sqrt(2.0) * t
    for j in range(1, n_nodes - 1):
        q[j + 1] = math.sqrt(2.0 / (j + 1)) * t * q[j] - math.sqrt(j / (j + 1)) * q[j - 1]
        big = np.abs(q[j + 1]) > 1e150
        if np.any(big):
            s = np.where(big, np.abs(q[j + 1]), 1.0)
            q[: j + 2] /= s
    lam = 1.0 / np.sum(q * q, axis=0)
    t.setflags(write=False)
    q.setflags(write=False)
    lam.setflags(write=False)
    return t, q, lam


def _ladder(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1)


def build_oscillator_basis(family: OperatorFamily, epsilon: float, basis: BasisSpec) -> DiscretizedOperator:
    """Galerkin matrix <phi_m, (p^2 + V + eps W) phi_n>.

    Kinetic energy and x^2 terms are exact ladder-operator expressions; every
    other term is integrated with Gauss-Hermite quadrature on 2 n_modes + 16 nodes,
    which is exact for polynomial terms of degree <= 2 n_modes + 16 + 1.
    """
    if family.is_matrix:
        raise DiscretizationError(f"{family.name}: matrix variant has no oscillator basis")
    N, b = basis.n_modes, basis.omega
    # square in N+1 modes then cut, so the last diagonal entry is the exact 2N-1
    a = _ladder(N + 1)
    xx = ((a + a.T) @ (a + a.T))[:N, :N] * (b * b / 2.0)
    pp = -((a.T - a) @ (a.T - a))[:N, :N] / (2.0 * b * b)
    H = pp.astype(complex)
    quad_terms = []
    for term, weight in family.potential_terms(epsilon):
        if term.coefficient == 0.0 or weight == 0:
            continue
        if term.kind == "monomial" and term.power == 2:
            H += weight * term.coefficient * xx
        elif term.kind == "monomial" and term.power == 0:
            H += weight * term.coefficient * np.eye(N)
        else:
            quad_terms.append((term, weight))
    if quad_terms:
        t, q, lam = _hermite_quadrature(2 * N + 16)
        x = b * t
        f = np.zeros_like(x, dtype=complex)
        for term, weight in quad_terms:
            if term.kind == "exp_square" and np.max(np.abs(x)) > EXP_SQUARE_CLAMP:
                raise DiscretizationError(
                    f"exp_square quadrature needs nodes beyond |x| <= {EXP_SQUARE_CLAMP}; "
                    f"reduce n_modes or omega")
            f += weight * term(x)
        if not np.all(np.isfinite(f)):
            raise DiscretizationError("non-finite potential value at a quadrature node")
        Q = q[:N]
        H += (Q * (lam * f)) @ Q.T
    return DiscretizedOperator(H, parity_matrix(basis), "basis", float(epsilon), 0.0, basis, family.name)


def build(family: OperatorFamily, epsilon: float, descriptor: Discretization = None) -> DiscretizedOperator:
    """Dispatch on the descriptor; matrix families ignore it."""
    if family.is_matrix:
        if descriptor is not None:
            raise DiscretizationError(f"{family.name}: matrix variant takes no discretization")
        H = family.matrix_at(epsilon)
        return DiscretizedOperator(H, family.P, "matrix", float(epsilon), 0.0, None, family.name)
    if isinstance(descriptor, Grid):
        return build_finite_difference(family, epsilon, descriptor)
    if isinstance(descriptor, BasisSpec):
        return build_oscillator_basis(family, epsilon, descriptor)
    if descriptor is None:
        return build_finite_difference(family, epsilon, default_grid(family, epsilon))
    raise DiscretizationError(f"unknown discretization {descriptor!r}")


def perturbation_operator(family: OperatorFamily, descriptor: Discretization = None) -> np.ndarray:
    """Matrix of dH/deps at eps = 0 in the given discretization (affine families only)."""
    if family.is_matrix:
        return family.perturbation_matrix()
    if family.terms_builder is not None:
        raise DiscretizationError(f"{family.name}: H(eps) is not affine in eps")
    # (p^2 + W) - p^2 in the same discretization
    bare = OperatorFamily.schrodinger(family.name + ":W", family.W)
    zero = OperatorFamily.schrodinger(family.name + ":0", PotentialSpec())
    return build(bare, 0.0, descriptor).matrix - build(zero, 0.0, descriptor).matrix


def default_grid(family: OperatorFamily, epsilon: float = 0.0, e_max_target: float = 20.0,
                 h_max: float = 0.02, L_limit: float = 60.0) -> Grid:
    """Grid with Re U(+-L) >= e_max_target + 25 and spacing <= h_max.

    Potentials whose real part does not confine (e.g. i x^3) use |U| instead.
    """
    U = family.potential(epsilon)
    target = e_max_target + 25.0
    L = None
    for use_real in (True, False):
        for cand in np.arange(1.0, L_limit + 1e-9, 0.5):
            vals = U(np.array([-cand, cand]))
            m = np.min(vals.real) if use_real else np.min(np.abs(vals))
            if m >= target:
                L = float(cand)
                break
        if L is not None:
            break
    if L is None:
        raise DiscretizationError(f"{family.name}: no truncation radius <= {L_limit} reaches the margin")
    n = int(math.ceil(2.0 * L / h_max)) - 1
    return Grid(L, max(n, 3))


@dataclass
class ConvergenceGap:
    fine_values: np.ndarray
    coarse_values: np.ndarray
    gaps: np.ndarray
    ambiguous: list
    error_scale: float
    fine: DiscretizedOperator = field(repr=False)


def lowest(values, k: int) -> np.ndarray:
    """The k eigenvalues of smallest modulus, ordered by (modulus, Re, Im)."""
    v = np.asarray(values, dtype=complex)
    order = np.lexsort((np.round(v.imag, 12), np.round(v.real, 12), np.round(np.abs(v), 10)))
    return v[order[:k]]


def convergence_gap(family: OperatorFamily, epsilon: float, descriptors, k: int,
                    ambiguity_tol: float = 1e-9) -> ConvergenceGap:
    """Compare the k lowest eigenvalues at two resolutions.

    Each of the k lowest fine eigenvalues is paired with its nearest coarse
    eigenvalue; a pairing is flagged ambiguous when a second coarse eigenvalue
    lies within max(ambiguity_tol, 10 * gap).  The max gap becomes the fine
    operator's error_scale.
    """
    if k < 1:
        raise DiscretizationError("k must be >= 1")
    d1, d2 = descriptors
    ops = [build(family, epsilon, d) for d in (d1, d2)]
    coarse, fine = sorted(ops, key=lambda o: o.size)
    ev_f = eigenvalues(fine.matrix)
    ev_c = eigenvalues(coarse.matrix) if coarse is not fine else ev_f
    low = lowest(ev_f, k)
    gaps = np.empty(len(low))
    matched = np.empty(len(low), dtype=complex)
    ambiguous = []
    for i, lam in enumerate(low):
        dist = np.abs(ev_c - lam)
        order = np.argsort(dist)
        matched[i] = ev_c[order[0]]
        gaps[i] = dist[order[0]]
        if len(order) > 1 and dist[order[1]] <= max(ambiguity_tol, 10.0 * gaps[i]):
            ambiguous.append(i)
    err = float(np.max(gaps)) if len(gaps) else 0.0
    return ConvergenceGap(low, matched, gaps, ambiguous, err, fine.with_error_scale(err))


def basis_scale_sweep(family: OperatorFamily, epsilon: float, n_modes: int, scales, k: int = 5):
    """Convergence gap (n_modes vs 3/2 n_modes) for each candidate basis scale."""
    rows = []
    for s in scales:
        cg = convergence_gap(family, epsilon, (BasisSpec(n_modes, s), BasisSpec(int(1.5 * n_modes), s)), k)
        rows.append((float(s), cg.error_scale))
    return rows
