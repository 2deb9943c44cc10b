"""Contour spectral projections, stability verdicts and numerical-range diagnostics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import _linalg
from ._geometry import convex_hull, hull_distance
from .discretize import DiscretizedOperator, Grid, build, default_grid
from .eigensolve import parity_classify
from .errors import ContourError, DiscretizationError, HypothesisError
from .potentials import OperatorFamily


@dataclass(frozen=True)
class Contour:
    center: complex
    radius: float
    n_nodes: int = 64

    def __post_init__(self):
        if not self.radius > 0:
            raise ContourError("contour radius must be positive")
        if self.n_nodes < 8:
            raise ContourError("contour needs at least 8 nodes")

    def nodes(self, n: Optional[int] = None):
        n = n or self.n_nodes
        w = np.exp(2j * np.pi * np.arange(n) / n)
        return self.center + self.radius * w, w

    def validate(self, eigenvalues, margin: float = 0.05):
        """Raise if an eigenvalue lies within margin * radius of the circle."""
        ev = np.asarray(eigenvalues, dtype=complex)
        d = np.abs(np.abs(ev - self.center) - self.radius)
        if ev.size and np.min(d) < margin * self.radius:
            bad = ev[int(np.argmin(d))]
            raise ContourError(
                f"contour |z-{self.center}|={self.radius} passes within {np.min(d):.3g} "
                f"of eigenvalue {bad:.10g}", eigenvalue=complex(bad))

    def enclosed(self, eigenvalues) -> int:
        ev = np.asarray(eigenvalues, dtype=complex)
        return int(np.sum(np.abs(ev - self.center) < self.radius))


@dataclass
class ProjectionResult:
    projector: np.ndarray = field(repr=False)
    rank: int
    idempotency_defect: float
    quadrature_estimate: float
    n_nodes: int
    singular_values: np.ndarray = field(repr=False, default=None)


def _matrix(H):
    return H.matrix if isinstance(H, DiscretizedOperator) else np.asarray(H, dtype=complex)


def _quadrature_sum(A, z, w, radius, bw, workers):
    n = A.shape[0]
    eye = np.eye(n, dtype=complex)

    def node(k):
        return (radius * w[k]) * _linalg.solve_shifted(A, z[k], eye, bw)

    total = np.zeros((n, n), dtype=complex)
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            for R in ex.map(node, range(len(z))):
                total += R
    else:
        for k in range(len(z)):
            total += node(k)
    return total


def spectral_projection(H, contour: Contour, eigenvalues=None, margin: float = 0.05,
                        tol: float = 1e-12, max_nodes: int = 2048, workers: int = 1) -> ProjectionResult:
    """Riesz projector (2 pi i)^-1 \\oint (z - H)^-1 dz by the trapezoidal rule.

    The node count starts at ``contour.n_nodes`` and doubles (reusing the old
    nodes) until successive projectors differ by at most ``tol`` relative, or
    ``max_nodes`` is reached.  The last difference is reported as
    ``quadrature_estimate``.
    """
    A = _matrix(H)
    n = A.shape[0]
    if eigenvalues is None:
        eigenvalues = _linalg.eigenvalues(A)
    contour.validate(eigenvalues, margin)
    bw = _linalg.bandwidth(A)
    N = contour.n_nodes
    z, w = contour.nodes(N)
    S = _quadrature_sum(A, z, w, contour.radius, bw, workers)
    P = S / N
    est = np.inf
    while N < max_nodes:
        # midpoints between the current nodes complete the doubled rule
        z2, w2 = contour.nodes(2 * N)
        S = S + _quadrature_sum(A, z2[1::2], w2[1::2], contour.radius, bw, workers)
        N *= 2
        P_new = S / N
        est = _linalg.spectral_norm(P_new - P)
        P = P_new
        if est <= tol * max(1.0, _linalg.spectral_norm(P)):
            break
    if not np.all(np.isfinite(P)):
        near = np.asarray(eigenvalues)[np.argmin(np.abs(np.abs(np.asarray(eigenvalues) - contour.center) - contour.radius))]
        raise ContourError(f"resolvent solve failed near eigenvalue {near:.10g}", eigenvalue=complex(near))
    enclosed = contour.enclosed(eigenvalues)
    s = _linalg.singular_values_top(P, k=min(n - 2, enclosed + 4) if n > _linalg.DENSE_LIMIT else None)
    rank = int(np.sum(s > 0.5))
    if n <= 2 * _linalg.DENSE_LIMIT:
        defect = _linalg.spectral_norm(P @ P - P)
    else:
        # probe the defect on a few random vectors instead of forming P @ P
        rng = np.random.default_rng(0)
        X = rng.standard_normal((n, 4)) + 1j * rng.standard_normal((n, 4))
        PX = P @ X
        defect = float(np.max(np.linalg.norm(P @ PX - PX, axis=0) / np.linalg.norm(X, axis=0)))
    return ProjectionResult(P, rank, float(defect), float(est), N, s)


@dataclass
class StabilityRow:
    epsilon: float
    rank: Optional[int]
    proj_diff_norm: Optional[float]
    status: str
    message: str = ""


@dataclass
class StabilityReport:
    E: complex
    radius: float
    rank0: int
    rows: list
    verdict: str
    trend_ratio: Optional[float]
    trend_tolerance: float = 0.5

    def to_dict(self) -> dict:
        return {"E": [self.E.real, self.E.imag], "radius": self.radius, "rank0": self.rank0,
                "verdict": self.verdict, "trend_ratio": self.trend_ratio,
                "trend_tolerance": self.trend_tolerance,
                "rows": [{"epsilon": r.epsilon, "rank": r.rank, "proj_diff_norm": r.proj_diff_norm,
                          "verdict": r.status, "message": r.message} for r in self.rows]}


def stability_check(family: OperatorFamily, E: complex, r: float, epsilons: Sequence[float],
                    discretization=None, n_nodes: int = 64, trend_ratio: float = 0.5,
                    noise_floor: float = 1e-10, workers: int = 1) -> StabilityReport:
    """Rank of P(eps) and ||P(eps) - P(0)|| over a decreasing eps sequence.

    Verdicts: ``stable`` when every rank equals rank P(0) and the norm sequence
    decreases (within ``noise_floor``) with last <= trend_ratio * first;
    ``rank_jump`` when some rank exceeds rank P(0); ``undecided`` otherwise.
    """
    eps = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    contour = Contour(complex(E), r, n_nodes)
    op0 = build(family, 0.0, discretization)
    ev0 = _linalg.eigenvalues(op0.matrix)
    if np.min(np.abs(ev0 - E)) > 0.1 * r:
        raise ValueError(f"E={E} is not an eigenvalue of the unperturbed discretization "
                         f"(nearest {ev0[np.argmin(np.abs(ev0 - E))]:.8g})")
    P0 = spectral_projection(op0.matrix, contour, ev0, workers=workers)
    rows = [StabilityRow(0.0, P0.rank, 0.0, "ok")]
    for e in eps:
        op = build(family, e, discretization)
        try:
            Pe = spectral_projection(op.matrix, contour, workers=workers)
        except ContourError as exc:
            rows.append(StabilityRow(e, None, None, "contour_error", str(exc)))
            continue
        diff = _linalg.spectral_norm(Pe.projector - P0.projector)
        status = "ok" if Pe.rank == P0.rank else ("rank_jump" if Pe.rank > P0.rank else "rank_drop")
        rows.append(StabilityRow(e, Pe.rank, diff, status))
    per_eps = rows[1:]
    ratio = None
    if any(row.status == "rank_jump" for row in per_eps):
        verdict = "rank_jump"
    elif any(row.status != "ok" for row in per_eps):
        verdict = "undecided"
    else:
        norms = [row.proj_diff_norm for row in per_eps]
        ratio = norms[-1] / norms[0] if norms[0] > 0 else 0.0
        monotone = all(b <= a + noise_floor for a, b in zip(norms, norms[1:]))
        verdict = "stable" if monotone and ratio <= trend_ratio else "undecided"
    return StabilityReport(complex(E), r, P0.rank, rows, verdict, ratio, trend_ratio)


# ---------------------------------------------------------------------------
# numerical range

_RESTRICTIONS = ("abs", "plus", "minus")


def restriction_indices(nodes, restriction):
    """Coordinates kept by u(x) = 0 on |x| <= n (abs), x <= n (plus) or x >= -n (minus)."""
    kind, n = restriction
    x = np.asarray(nodes)
    if kind == "abs":
        sel = np.abs(x) > n
    elif kind == "plus":
        sel = x > n
    elif kind == "minus":
        sel = x < -n
    else:
        raise ValueError(f"unknown restriction {kind!r}; expected one of {_RESTRICTIONS}")
    idx = np.nonzero(sel)[0]
    if idx.size == 0:
        raise DiscretizationError(f"restriction {restriction} leaves an empty subspace")
    return idx


def _restricted(H, restriction):
    if restriction is None:
        return _matrix(H)
    if not isinstance(H, DiscretizedOperator) or not isinstance(H.descriptor, Grid):
        raise DiscretizationError("restricted numerical ranges need a grid discretization")
    idx = restriction_indices(H.nodes, restriction)
    return H.matrix[np.ix_(idx, idx)]


class _SupportFunction:
    """theta -> (h(theta), p(theta)) for the numerical range of A.

    h is the top eigenvalue of Re(e^{i theta} A) = cos(theta) HA + sin(theta) K with
    HA = (A + A^*)/2 and K = i (A - A^*)/2, and p = <u, A u> for its eigenvector.
    Tridiagonal input keeps only diagonals so each evaluation is O(n).
    """

    def __init__(self, A):
        A = np.asarray(A, dtype=complex)
        self.A = A
        self.n = A.shape[0]
        HA = 0.5 * (A + A.conj().T)
        K = 0.5j * (A - A.conj().T)
        self.tridiagonal = self.n > 64 and _linalg.bandwidth(A) <= 1
        if self.tridiagonal:
            self.diags = [(np.real(np.diagonal(M)), np.diagonal(M, -1)) for M in (HA, K)]
            self.a_diags = (np.diagonal(A, -1), np.diagonal(A), np.diagonal(A, 1))
        else:
            self.HA, self.K = HA, K

    def _apply(self, u):
        if not self.tridiagonal:
            return self.A @ u
        lo, d, up = self.a_diags
        out = d * u
        out[1:] += lo * u[:-1]
        out[:-1] += up * u[1:]
        return out

    def __call__(self, theta):
        c, s = math.cos(theta), math.sin(theta)
        if self.tridiagonal:
            (dh, eh), (dk, ek) = self.diags
            herm_d, herm_e = c * dh + s * dk, c * eh + s * ek
            h, u = _linalg.tridiagonal_extreme(herm_d, herm_e, self.n - 1)
        else:
            h, u = _linalg.extreme_hermitian_eigpair(c * self.HA + s * self.K, largest=True)
        return h, complex(np.vdot(u, self._apply(u)))


def _support(A, theta):
    """(h, p): max eigenvalue of Re(e^{i theta} A) and the boundary point <u, A u>."""
    return _SupportFunction(A)(theta)


def _wrap(t):
    return t - 2 * np.pi if t >= 2 * np.pi else t


@dataclass
class NumericalRangeBoundary:
    points: np.ndarray
    angles: np.ndarray
    support_values: np.ndarray
    restriction: Optional[tuple] = None

    def distance(self, z) -> float:
        """Distance from z to the polygon spanned by the support points (inner approximation)."""
        return hull_distance(self.points, z)

    def separation(self, z) -> float:
        """max_theta Re(e^{i theta} z) - h(theta): a lower bound on dist(z, range)."""
        return float(max(0.0, np.max((np.exp(1j * self.angles) * z).real - self.support_values)))

    def contains(self, z, tol=1e-8) -> bool:
        return self.distance(z) <= tol


def numerical_range_boundary(H, n_angles: int = 64, restriction=None, refine_tol: float = 1e-6,
                             max_points: int = 2048) -> NumericalRangeBoundary:
    """Support points of the numerical range {<u, H u> : |u| = 1}.

    For each angle the top eigenvector of the Hermitian part of e^{i theta} H
    gives a boundary point.  Between adjacent angles a new angle is inserted
    while the corner of the two support lines lies farther than
    ``refine_tol * diameter`` from the chord, so the returned polygon is within
    that tolerance of the true convex boundary.
    """
    if n_angles < 8:
        raise ValueError("n_angles must be >= 8")
    support = _SupportFunction(_restricted(H, restriction))
    thetas = list(np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False))
    data = {t: support(t) for t in thetas}
    pts = np.array([p for _, p in data.values()])
    diam = max(float(np.max(np.abs(pts - pts.mean()))), 1e-300)
    queue = list(zip(thetas, thetas[1:] + [thetas[0] + 2 * np.pi]))
    while queue and len(data) < max_points:
        nxt = []
        for ta, tb in queue:
            ha, pa = data[_wrap(ta)]
            hb, pb = data[_wrap(tb)]
            # corner of the support lines Re(e^{i t} z) = h
            M = np.array([[math.cos(ta), -math.sin(ta)], [math.cos(tb), -math.sin(tb)]])
            if abs(np.linalg.det(M)) < 1e-14:
                continue
            xy = np.linalg.solve(M, [ha, hb])
            corner = complex(xy[0], xy[1])
            if hull_distance(np.array([pa, pb]), corner) <= refine_tol * diam:
                continue
            tm = 0.5 * (ta + tb)
            key = _wrap(tm)
            if key in data:
                continue
            data[key] = support(key)
            nxt += [(ta, tm), (tm, tb)]
        queue = nxt
    angles = np.array(sorted(data))
    hs = np.array([data[t][0] for t in angles])
    points = convex_hull([data[t][1] for t in angles])
    return NumericalRangeBoundary(points, angles, hs, restriction)


def range_distance(A, z, n_angles: int = 48, return_points: bool = False):
    """dist(z, N(A)) as the support-function separation max_theta Re(e^{i theta} z) - h(theta).

    For a point outside a convex set the maximal separation equals the
    distance; it is maximized on a coarse angle grid and then locally.
    Returns (distance, theta); distance 0 means z is inside the range.
    """
    support = A if isinstance(A, _SupportFunction) else _SupportFunction(_matrix(A))
    z = complex(z)

    def sep(t):
        h, _ = support(t)
        return (np.exp(1j * t) * z).real - h

    thetas = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)
    sup = [support(t) for t in thetas]
    vals = np.array([(np.exp(1j * t) * z).real - h for t, (h, _) in zip(thetas, sup)])
    i = int(np.argmax(vals))
    step = 2 * np.pi / n_angles
    res = minimize_scalar(lambda t: -sep(t), bounds=(thetas[i] - step, thetas[i] + step),
                          method="bounded", options={"xatol": 1e-12})
    best_t, best = (res.x, -res.fun) if -res.fun > vals[i] else (thetas[i], vals[i])
    out = (max(0.0, float(best)), float(best_t) % (2 * np.pi))
    if return_points:
        return out + ([p for _, p in sup],)
    return out


@dataclass
class ResolventAudit:
    samples: list
    passed: bool
    n_checked: int
    n_skipped: int
    slack: float


def resolvent_bound_audit(H, z_samples, slack: float = 1e-6, n_angles: int = 48) -> ResolventAudit:
    """Check ||(z - H)^-1|| <= (1 + slack) / dist(z, N) at each sample outside the range.

    When Re z < 0 and the range lies in the closed right half-plane, also check
    ||(z - H)^-1|| <= (1 + slack) / |Re z|.
    """
    A = _matrix(H)
    support = _SupportFunction(A)
    # range in the closed right half-plane iff the Hermitian part is >= 0
    right_half = support(np.pi)[0] <= 1e-12 * max(1.0, np.linalg.norm(A))
    rows, ok, checked, skipped = [], True, 0, 0
    n = A.shape[0]
    for z in z_samples:
        z = complex(z)
        dist, _ = range_distance(support, z, n_angles)
        if dist <= 0.0:
            rows.append({"z": z, "skipped": "inside numerical range hull"})
            skipped += 1
            continue
        rnorm = 1.0 / _linalg.min_singular_value(z * np.eye(n) - A)
        row = {"z": z, "resolvent_norm": rnorm, "dist": dist,
               "bound_ok": bool(rnorm <= (1.0 + slack) / dist)}
        if z.real < 0 and right_half:
            row["halfplane_ok"] = bool(rnorm <= (1.0 + slack) / abs(z.real))
        ok = ok and row["bound_ok"] and row.get("halfplane_ok", True)
        rows.append(row)
        checked += 1
    return ResolventAudit(rows, bool(ok), checked, skipped, slack)


@dataclass
class DistanceBound:
    n_cut: float
    side: str
    lower_bound: float
    hull_distance: float
    theta: float


_SIDE_TO_RESTRICTION = {"both": "abs", "plus": "plus", "minus": "minus"}


def _grid_operator(family, epsilon, grid):
    if grid is None:
        grid = default_grid(family, epsilon)
    return build(family, epsilon, grid)


def distance_at_infinity(family, epsilon: float, z: complex, n_cut: float, side: str = "both",
                         grid: Optional[Grid] = None, n_angles: int = 48,
                         operator: Optional[DiscretizedOperator] = None) -> DistanceBound:
    """Lower bound dist(z, N_n) on d_n(z, eps), with N_n the range restricted beyond n_cut.

    The bound is the support-function separation max_theta Re(e^{i theta} z) - h(theta),
    maximized on a coarse angle grid and then locally; it never exceeds the
    true distance.  ``hull_distance`` is the distance to the inner polygon.
    """
    if side not in _SIDE_TO_RESTRICTION:
        raise ValueError(f"side must be one of {tuple(_SIDE_TO_RESTRICTION)}")
    op = operator if operator is not None else _grid_operator(family, epsilon, grid)
    A = _restricted(op, (_SIDE_TO_RESTRICTION[side], n_cut))
    z = complex(z)
    lower, best_t, pts = range_distance(A, z, n_angles, return_points=True)
    hd = hull_distance(convex_hull(pts), z)
    return DistanceBound(float(n_cut), side, lower, float(hd), best_t)


def distance_sweep(family, epsilon, z, cuts, side="both", grid=None, **kw):
    """distance_at_infinity over increasing cuts; returns (bounds, strictly_increasing, nondecreasing)."""
    op = _grid_operator(family, epsilon, grid)
    out = [distance_at_infinity(family, epsilon, z, c, side, operator=op, **kw) for c in cuts]
    lb = [d.lower_bound for d in out]
    strictly = all(b > a for a, b in zip(lb, lb[1:]))
    nondec = all(b >= a - 1e-9 * max(1.0, abs(a)) for a, b in zip(lb, lb[1:]))
    return out, strictly, nondec


@dataclass
class EnergyConstant:
    a: float
    shift: float
    n_samples: int


def energy_constant(family, epsilon: float, samples: int = 200, grid: Optional[Grid] = None,
                    seed: int = 0, n_eigenvectors: int = 10) -> EnergyConstant:
    """Largest observed <u, p^2 u> / (Re <u, (H + shift) u> + 1) over random and eigen vectors.

    ``shift`` = max(0, -min Re U(x_i)) makes the real part of the potential
    nonnegative on the grid.
    """
    op = _grid_operator(family, epsilon, grid)
    H = op.matrix
    n = op.size
    h2 = op.descriptor.spacing ** 2
    kin = np.zeros((n, n))
    i = np.arange(n)
    kin[i, i] = 2.0 / h2
    kin[i[:-1], i[:-1] + 1] = kin[i[:-1] + 1, i[:-1]] = -1.0 / h2
    U = np.diag(H) - 2.0 / h2
    shift = max(0.0, -float(np.min(U.real)))
    rng = np.random.default_rng(seed)
    vecs = rng.standard_normal((n, samples)) + 1j * rng.standard_normal((n, samples))
    if n_eigenvectors:
        w, v = np.linalg.eig(H) if n <= 2 * _linalg.DENSE_LIMIT else (None, None)
        if v is not None:
            order = np.argsort(np.abs(w))[:n_eigenvectors]
            vecs = np.hstack([vecs, v[:, order]])
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    num = np.real(np.sum(vecs.conj() * (kin @ vecs), axis=0))
    den = np.real(np.sum(vecs.conj() * (H @ vecs), axis=0)) + shift + 1.0
    if np.any(den <= 0):
        raise ValueError(f"shift {shift:g} insufficient: nonpositive denominator")
    return EnergyConstant(float(np.max(num / den)), shift, vecs.shape[1])


# ---------------------------------------------------------------------------
# explicit bound for bounded anti-commuting perturbations


@dataclass(frozen=True)
class Theorem21Bound:
    delta: float
    g_bound: float
    parity_ok: bool
    eigenvalues: tuple = ()


def theorem21_bound(H0, W, P, tol: float = 1e-10) -> Theorem21Bound:
    """Half the minimal level spacing delta of H0, g_bound = delta / ||W||, and the parity hypothesis.

    Hypotheses (H0 normal with real spectrum and commuting with P, W Hermitian
    and anticommuting with P) are hard preconditions; a violation raises
    ``HypothesisError`` naming it.
    """
    H0 = np.asarray(H0, dtype=complex)
    W = np.asarray(W, dtype=complex)
    P = np.asarray(P, dtype=float)
    s0 = max(np.linalg.norm(H0), 1.0)
    sw = max(np.linalg.norm(W), 1.0)
    if np.linalg.norm(H0 @ H0.conj().T - H0.conj().T @ H0) > tol * s0 * s0:
        raise HypothesisError("H0_not_normal", "H0 does not commute with its adjoint")
    if np.linalg.norm(H0 @ P - P @ H0) > tol * s0:
        raise HypothesisError("H0_parity", "H0 does not commute with P")
    if np.linalg.norm(W - W.conj().T) > tol * sw:
        raise HypothesisError("W_not_symmetric", "W is not Hermitian")
    if np.linalg.norm(P @ W + W @ P) > tol * sw:
        raise HypothesisError("anticommutation", "P W != -W P")
    w, V = np.linalg.eig(H0)
    if np.max(np.abs(w.imag)) > tol * s0:
        raise HypothesisError("spectrum_not_real", f"H0 has eigenvalue {w[np.argmax(np.abs(w.imag))]}")
    w = w.real
    order = np.argsort(w)
    w = w[order]
    V = V[:, order]
    clusters, start = [], 0
    for j in range(1, len(w) + 1):
        if j == len(w) or w[j] - w[j - 1] > 1e3 * tol * s0:
            clusters.append((start, j))
            start = j
    distinct = [float(np.mean(w[a:b])) for a, b in clusters]
    gaps = np.diff(distinct)
    delta = float(np.min(gaps) / 2.0) if len(gaps) else math.inf
    wn = float(np.linalg.norm(W, 2))
    g_bound = delta / wn if wn > 0 else math.inf
    parity_ok = True
    for a, b in clusters:
        if b - a < 2:
            continue
        # H0 is normal, so an orthonormal basis of the eigenspace exists; P acts inside it
        Q, _ = np.linalg.qr(V[:, a:b])
        C = np.linalg.eigh(Q.conj().T @ P @ Q)[1]
        labels = {parity_classify(v, P, 1e-6).label for v in (Q @ C).T}
        if len(labels) != 1 or "mixed" in labels:
            parity_ok = False
    return Theorem21Bound(delta, g_bound, parity_ok, tuple(distinct))
