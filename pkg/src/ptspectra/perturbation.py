"""Eigenvalue branches in eps, non-selfadjoint Rayleigh-Schroedinger series, exceptional points."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from ._linalg import eigenvalues
from .discretize import BasisSpec, DiscretizedOperator, Grid, build, lowest
from .eigensolve import conjugate_closure_defect, eig
from .errors import EigenError, PerturbationError
from .potentials import OperatorFamily

UNIT_ROUNDOFF = np.finfo(float).eps


# ---------------------------------------------------------------------------
# branch tracking

@dataclass
class _Node:
    epsilon: float
    values: np.ndarray
    residuals: np.ndarray
    errors: np.ndarray  # convergence gap + roundoff, per eigenvalue


@dataclass
class Branch:
    branch_id: int
    epsilon_grid: np.ndarray
    values: np.ndarray
    residuals: np.ndarray
    errors: np.ndarray
    match_confidence: np.ndarray  # per step; entry 0 is 1 by convention
    flags: list  # one set per node, subset of {collision, left_window, undecided, truncated}
    verdicts: list  # real / conjugate_pair / undecided per node
    epsilon_j: float = 0.0

    @property
    def truncated(self) -> bool:
        return any("truncated" in f for f in self.flags)


@dataclass
class TrackResult:
    """Tracked branches plus per-node bookkeeping; iterates over the branches."""

    branches: list
    epsilon_grid: np.ndarray
    window_radius: float
    entrants: dict  # node index -> eigenvalues inside the window not on any branch
    closure_defects: np.ndarray
    closure_ok: list
    refinements: int = 0

    def __iter__(self):
        return iter(self.branches)

    def __len__(self):
        return len(self.branches)

    def __getitem__(self, i):
        return self.branches[i]

    def values(self) -> np.ndarray:
        """(n_nodes, k) array of branch values."""
        return np.column_stack([b.values for b in self.branches])


def _check_grid(epsilon_grid) -> np.ndarray:
    g = np.asarray(epsilon_grid, dtype=float)
    if g.ndim != 1 or g.size < 1:
        raise PerturbationError("epsilon grid must be a nonempty 1-D sequence")
    if g[0] != 0.0:
        raise PerturbationError(f"epsilon grid must start at 0, got {g[0]}")
    if np.any(np.diff(g) <= 0):
        raise PerturbationError("epsilon grid must be strictly increasing")
    return g


def _solve_node(family, eps, discretization, reference) -> _Node:
    spec = eig(build(family, eps, discretization), left=True)
    vals = spec.values
    err = spec.roundoff_errors()
    if reference is not None:
        ref = eigenvalues(build(family, eps, reference).matrix)
        err = err + np.min(np.abs(vals[:, None] - ref[None, :]), axis=1)
    res = np.array([p.residual for p in spec.pairs])
    return _Node(float(eps), vals, res, err)


def _assign(node: _Node, predictions, alive):
    """Hungarian assignment of live predictions to eigenvalues; returns (index, d1, d2) per branch."""
    out = [None] * len(predictions)
    live = [b for b in range(len(predictions)) if alive[b]]
    if not live:
        return out
    pred = np.array([predictions[b] for b in live])
    cost = np.abs(pred[:, None] - node.values[None, :])
    rows, cols = linear_sum_assignment(cost)
    for r, c in zip(rows, cols):
        d = cost[r].copy()
        d1 = d[c]
        d[c] = np.inf
        out[live[r]] = (int(c), float(d1), float(np.min(d)) if d.size > 1 else np.inf)
    return out


def _ambiguous(node, match, floor):
    idx, d1, d2 = match
    return d1 > node.errors[idx] + floor and d2 < 2.0 * d1


def _collisions(values, errors, tol):
    hit = set()
    for a in range(len(values)):
        for b in range(a + 1, len(values)):
            if not (np.isfinite(values[a]) and np.isfinite(values[b])):
                continue
            if abs(values[a] - values[b]) <= max(tol, errors[a] + errors[b]):
                hit.update((a, b))
    return hit


def _node_verdict(v, err, node: _Node) -> str:
    if abs(v.imag) <= err:
        return "real"
    d = np.abs(node.values - np.conj(v))
    j = int(np.argmin(d))
    if d[j] <= err + node.errors[j]:
        return "conjugate_pair"
    return "undecided"


def track_branches(family: OperatorFamily, epsilon_grid, discretization=None, k: int = 5,
                   reference=None, pair_tol: float = 1e-6, max_refine: int = 6,
                   workers: int = 1) -> TrackResult:
    """Follow the k smallest-modulus eigenvalues at eps=0 along the grid.

    Each node's eigenvalues carry a combined error: the gap to the nearest
    eigenvalue of the ``reference`` discretization (if given) plus a
    first-order roundoff term.  Matching predicts by linear extrapolation and
    assigns with the Hungarian algorithm; an ambiguous step is bisected up to
    ``max_refine`` times before the branch is truncated.  Two branches within
    ``pair_tol`` (relative to the eps=0 scale) or within their combined errors
    are flagged as colliding and their verdicts are undecided.
    """
    grid = _check_grid(epsilon_grid)
    if k < 1:
        raise PerturbationError("k must be >= 1")

    def solve(eps):
        return _solve_node(family, eps, discretization, reference)

    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            nodes = list(pool.map(solve, grid))
    else:
        nodes = [solve(e) for e in grid]

    first = nodes[0]
    k = min(k, len(first.values))
    start = lowest(first.values, k)
    idx0 = []
    for v in start:
        cand = [i for i in np.flatnonzero(first.values == v) if i not in idx0]
        idx0.append(int(cand[0]))
    mods = np.sort(np.abs(first.values))
    scale = max(1.0, float(mods[k - 1]))
    window = float(mods[k - 1] + 0.5 * (mods[k] - mods[k - 1])) if k < len(mods) else math.inf
    tol = pair_tol * scale
    floor = 1e3 * UNIT_ROUNDOFF * scale

    n = len(grid)
    vals = np.full((n, k), np.nan + 0j)
    res = np.full((n, k), np.nan)
    errs = np.full((n, k), np.nan)
    conf = np.ones((n, k))
    flags = [[set() for _ in range(n)] for _ in range(k)]
    alive = [True] * k
    vals[0] = first.values[idx0]
    res[0] = first.residuals[idx0]
    errs[0] = first.errors[idx0]
    history = [[(0.0, vals[0, b])] for b in range(k)]  # accepted (eps, value), including refinements
    collided = _collisions(vals[0], errs[0], tol)
    refinements = 0

    def predict(b, eps):
        h = history[b]
        if len(h) < 2:
            return h[-1][1]
        (e1, v1), (e2, v2) = h[-2], h[-1]
        return v2 + (v2 - v1) * (eps - e2) / (e2 - e1)

    def advance(eps_a, eps_b, node_b, depth, after_collision):
        nonlocal refinements
        preds = [predict(b, eps_b) if alive[b] else None for b in range(k)]
        matches = _assign(node_b, preds, alive)
        got = [node_b.values[m[0]] if m else np.nan for m in matches]
        got_err = [node_b.errors[m[0]] if m else np.nan for m in matches]
        meeting = _collisions(got, got_err, tol)
        bad = [b for b in range(k) if matches[b] is not None and b not in meeting
               and _ambiguous(node_b, matches[b], floor)]
        if after_collision:
            bad = []
        if bad and depth < max_refine:
            mid = 0.5 * (eps_a + eps_b)
            refinements += 1
            advance(eps_a, mid, solve(mid), depth + 1, after_collision)
            return advance(mid, eps_b, node_b, depth + 1, False)
        for b in range(k):
            if b in bad:
                alive[b] = False
                matches[b] = None
            elif matches[b] is not None:
                history[b].append((eps_b, got[b]))
        return matches, set(bad)

    for i in range(1, n):
        matches, lost = advance(grid[i - 1], grid[i], nodes[i], 0, bool(collided))
        node = nodes[i]
        for b in range(k):
            if matches[b] is None:
                flags[b][i].update(("truncated", "undecided"))
                continue
            j, d1, d2 = matches[b]
            vals[i, b] = node.values[j]
            res[i, b] = node.residuals[j]
            errs[i, b] = node.errors[j]
            conf[i, b] = 1.0 if not np.isfinite(d2) or d2 == 0 and d1 == 0 else max(0.0, 1.0 - d1 / d2)
        collided = _collisions(vals[i], errs[i], tol)
    # collisions at node 0 too; recomputed per node for flags
    entrants, closure, closure_ok = {}, np.zeros(n), []
    for i in range(n):
        col = _collisions(vals[i], errs[i], tol)
        node = nodes[i]
        for b in range(k):
            if b in col:
                flags[b][i].add("collision")
            if np.isfinite(vals[i, b]) and abs(vals[i, b]) > window:
                flags[b][i].add("left_window")
        taken = set()
        for b in range(k):
            if np.isfinite(vals[i, b]):
                d = np.abs(node.values - vals[i, b])
                d[list(taken)] = np.inf
                taken.add(int(np.argmin(d)))
        inside = [v for j, v in enumerate(node.values) if j not in taken and abs(v) <= window]
        if inside:
            entrants[i] = np.array(inside)
        live = np.isfinite(vals[i])
        if np.any(live):
            closure[i] = conjugate_closure_defect(vals[i][live])
            closure_ok.append(bool(closure[i] <= max(tol, 2.0 * float(np.max(errs[i][live])))))
        else:
            closure_ok.append(False)

    branches = []
    for b in range(k):
        verdicts = []
        for i in range(n):
            v = vals[i, b]
            if not np.isfinite(v) or flags[b][i] & {"collision", "truncated"}:
                verdicts.append("undecided")
                flags[b][i].add("undecided")
            else:
                verdicts.append(_node_verdict(v, errs[i, b], nodes[i]))
        eps_j = 0.0
        for i in range(n):
            if verdicts[i] != "real":
                break
            eps_j = float(grid[i])
        branches.append(Branch(b, grid.copy(), vals[:, b].copy(), res[:, b].copy(), errs[:, b].copy(),
                               conf[:, b].copy(), flags[b], verdicts, eps_j))
    return TrackResult(branches, grid, window, entrants, closure, closure_ok, refinements)


# ---------------------------------------------------------------------------
# Rayleigh-Schroedinger series

@dataclass
class RSPESeries:
    base: complex
    coefficients: np.ndarray  # a_1 .. a_N
    order: int
    reality_residuals: np.ndarray = field(default=None)
    growth_ratios: np.ndarray = field(default=None)
    condition: float = 1.0
    requested_order: int = 0
    tail_weights: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=complex)
        a = self.a
        if self.reality_residuals is None:
            self.reality_residuals = np.abs(a.imag)
        if self.growth_ratios is None:
            self.growth_ratios = growth_ratios(a)
        if not self.requested_order:
            self.requested_order = self.order

    @property
    def a(self) -> np.ndarray:
        """a_0 .. a_N."""
        return np.concatenate([[self.base], self.coefficients])

    @property
    def truncated(self) -> bool:
        return self.order < self.requested_order

    def __call__(self, epsilon, order: Optional[int] = None):
        a = self.a[: (self.order if order is None else order) + 1]
        return np.polyval(a[::-1], epsilon)

    def to_dict(self) -> dict:
        return {"a": [[float(c.real), float(c.imag)] for c in self.a],
                "growth_ratios": [float(g) for g in self.growth_ratios]}


def growth_ratios(a) -> np.ndarray:
    """|a_{n+1} / a_n| for n >= 1 (the base coefficient is excluded)."""
    a = np.abs(np.asarray(a, dtype=complex))
    num, den = a[2:], a[1:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, np.nan))


def _tail_weight(psi, descriptor) -> float:
    """Fraction of |psi| on the outermost tenth of the discretization."""
    n = len(psi)
    nrm = np.linalg.norm(psi)
    if nrm == 0 or descriptor is None:
        return 0.0
    m = max(2, n // 10)  # at least two modes so a parity-restricted vector still registers
    if isinstance(descriptor, BasisSpec):
        tail = psi[-m:]
    elif isinstance(descriptor, Grid):
        m = max(1, n // 20)
        tail = np.concatenate([psi[:m], psi[-m:]])
    else:
        return 0.0
    return float(np.linalg.norm(tail) / nrm)


def rspe_coefficients(H0, W, E: complex, order: int, min_overlap: float = 1e-6,
                      tail_tol: float = 1e-6, check_multiplicity: bool = True) -> RSPESeries:
    """Perturbation coefficients a_0..a_N of the eigenvalue of H0 + eps W nearest E.

    With <u_L, u_R> = 1, a_n = <u_L, W psi_{n-1}> and
    (H0 - E) psi_n = -W psi_{n-1} + sum_{k=1..n} a_k psi_{n-k}, <u_L, psi_n> = 0,
    solved with the rank-one deflated matrix H0 - E + sigma u_R u_L^*.
    Orders whose correction vector puts more than ``tail_tol`` of its weight on
    the outer tenth of the discretization are dropped with a warning.
    """
    descriptor = H0.descriptor if isinstance(H0, DiscretizedOperator) else None
    A = H0.matrix if isinstance(H0, DiscretizedOperator) else np.asarray(H0, dtype=complex)
    Wm = W.matrix if isinstance(W, DiscretizedOperator) else np.asarray(W, dtype=complex)
    if A.shape != Wm.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise PerturbationError(f"H0 {A.shape} and W {Wm.shape} must be square of equal size")
    if order < 1:
        raise PerturbationError("order must be >= 1")
    n = A.shape[0]
    spec = eig(A, left=True)
    vals = spec.values
    j = int(np.argmin(np.abs(vals - E)))
    pair = spec.pairs[j]
    E0 = pair.value
    overlap = abs(np.vdot(pair.left_vector, pair.right_vector))
    if overlap < min_overlap:
        raise PerturbationError(
            f"eigenvalue {E0:.6g} is defective or nearly so (|<u_L,u_R>| = {overlap:.2e}); "
            "a Jordan block admits no Rayleigh-Schroedinger series")
    others = np.delete(vals, j)
    sep = float(np.min(np.abs(others - E0))) if others.size else 1.0
    if check_multiplicity and sep <= 1e-12 * max(1.0, abs(E0)):
        mult = 1 + int(np.sum(np.abs(others - E0) <= 1e-12 * max(1.0, abs(E0))))
        raise PerturbationError(f"eigenvalue {E0:.6g} has algebraic multiplicity {mult}, not 1")
    if check_multiplicity and others.size:
        from .stability import Contour, spectral_projection
        radius = min(1.0, 0.5 * sep)
        try:
            proj = spectral_projection(A, Contour(E0, radius), eigenvalues=vals)
        except Exception as exc:
            raise PerturbationError(f"could not isolate eigenvalue {E0:.6g}: {exc}") from exc
        if proj.rank != 1:
            raise PerturbationError(f"eigenvalue {E0:.6g} has algebraic multiplicity {proj.rank}, not 1")

    uR = pair.right_vector
    uL = pair.left_vector / np.conj(np.vdot(pair.left_vector, uR))  # <uL, uR> = 1
    sigma = max(sep, 1.0)
    M = A - E0 * np.eye(n) + sigma * np.outer(uR, uL.conj())
    lu = sla.lu_factor(M)

    psi = [uR]
    a = [E0]
    tails = []
    stop = order
    for m in range(1, order + 1):
        Wpsi = Wm @ psi[m - 1]
        a.append(complex(np.vdot(uL, Wpsi)))
        rhs = -Wpsi
        for kk in range(1, m + 1):
            rhs = rhs + a[kk] * psi[m - kk]
        x = sla.lu_solve(lu, rhs)
        x = x - np.vdot(uL, x) * uR  # remove roundoff drift into the eigenspace
        tails.append(_tail_weight(x, descriptor))
        if tails[-1] > tail_tol:
            stop = m
            warnings.warn(f"series truncated at order {m}: correction vector reaches the "
                          f"discretization edge (tail weight {tails[-1]:.1e} > {tail_tol:g})",
                          RuntimeWarning, stacklevel=2)
            break
        psi.append(x)
    coeffs = np.array(a[1:stop + 1], dtype=complex)
    return RSPESeries(complex(E0), coeffs, stop, condition=1.0 / overlap,
                      requested_order=order, tail_weights=np.array(tails))


@dataclass
class RealityCheck:
    verdict: str  # real_series / not_real / undecided
    max_imag: float
    tol: float
    drift: Optional[float]
    growth_ratios: np.ndarray

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "max_imag": self.max_imag, "tol": self.tol,
                "drift": self.drift, "growth_ratios": [float(g) for g in self.growth_ratios]}


def coefficient_drift(series: RSPESeries, reference: RSPESeries) -> float:
    m = min(len(series.a), len(reference.a))
    return float(np.max(np.abs(series.a[:m] - reference.a[:m])))


def rspe_reality_check(series: RSPESeries, tol: float, reference: Optional[RSPESeries] = None) -> RealityCheck:
    """real_series iff max_n |Im a_n| <= tol.

    With a ``reference`` series from another resolution, a tolerance below the
    cross-resolution drift cannot separate roundoff from a real imaginary part
    and the verdict is undecided.
    """
    max_imag = float(np.max(series.reality_residuals))
    drift = coefficient_drift(series, reference) if reference is not None else None
    if drift is not None and tol < drift:
        verdict = "undecided"
    else:
        verdict = "real_series" if max_imag <= tol else "not_real"
    return RealityCheck(verdict, max_imag, float(tol), drift, series.growth_ratios)


@dataclass
class TruncationSlope:
    slope: Optional[float]
    epsilons: np.ndarray
    residuals: np.ndarray
    used: np.ndarray


def truncation_slope(family: OperatorFamily, series: RSPESeries, discretization=None,
                     window=(1e-3, 1e-2), n_points: int = 6, order: Optional[int] = None,
                     floor: Optional[float] = None) -> TruncationSlope:
    """Log-log slope of |lambda(eps) - sum_{n<=N} a_n eps^n| over a small-eps window.

    Points whose residual is below the roundoff floor are excluded; with fewer
    than three usable points the slope is None.
    """
    N = series.order if order is None else order
    eps = np.geomspace(window[0], window[1], n_points)
    r = np.empty(n_points)
    for i, e in enumerate(eps):
        H = build(family, float(e), discretization).matrix
        v = np.linalg.eigvals(H)
        pred = series(e, N)
        r[i] = np.min(np.abs(v - pred))
        if floor is None:
            f = 1e3 * UNIT_ROUNDOFF * max(1.0, abs(pred))
        else:
            f = floor
        r[i] = r[i] if r[i] > f else 0.0
    used = r > 0
    slope = None
    if np.count_nonzero(used) >= 3:
        slope = float(np.polyfit(np.log(eps[used]), np.log(r[used]), 1)[0])
    return TruncationSlope(slope, eps, r, used)


# ---------------------------------------------------------------------------
# exceptional points

@dataclass
class ExceptionalPoint:
    status: str  # point / no_transition / non_monotone
    epsilon: Optional[float]
    classification: Optional[str]  # exceptional / crossing
    coalescence: Optional[float]
    gap: Optional[float]
    iterations: int = 0
    subintervals: list = field(default_factory=list)
    message: str = ""


def _pair_values(family, eps, pair, discretization, vectors=False):
    op = build(family, eps, discretization)
    if vectors:
        spec = eig(op)
        vals = spec.values
    else:
        vals = np.linalg.eigvals(op.matrix)
    k = max(pair) + 1
    low = lowest(vals, k)
    low = low[np.lexsort((low.imag, low.real))]
    i, j = pair
    if not vectors:
        return low[i], low[j]
    out = []
    for v in (low[i], low[j]):
        idx = [t for t, p in enumerate(spec.pairs) if p.value == v]
        out.append(spec.pairs[idx[0] if len(out) == 0 or len(idx) == 1 else idx[-1]])
    return out


def _indicator(family, eps, pair, discretization) -> float:
    # > 0 for a split real pair, < 0 for a complex-conjugate pair
    a, b = _pair_values(family, eps, pair, discretization)
    return float(((a - b) ** 2).real)


def locate_exceptional(family: OperatorFamily, interval, pair=(0, 1), tol: float = 1e-10,
                       discretization=None, n_scan: int = 17, coalescence_min: float = 0.9,
                       max_iter: int = 200) -> ExceptionalPoint:
    """Bisect the sign change of Re((lambda_1 - lambda_2)^2) for a branch pair.

    ``pair`` indexes the smallest-modulus eigenvalues after sorting them by
    (Re, Im).  A pre-scan on ``n_scan`` points must show exactly one sign
    change; otherwise the report lists the subintervals instead of a point.
    """
    lo, hi = map(float, interval)
    if not hi > lo:
        raise PerturbationError(f"empty interval [{lo}, {hi}]")
    if tol <= 0:
        raise PerturbationError("tol must be positive")
    xs = np.linspace(lo, hi, n_scan)
    fs = np.array([_indicator(family, x, pair, discretization) for x in xs])
    scale = max(1.0, float(np.max(np.abs(fs))))
    zero = 1e3 * UNIT_ROUNDOFF * scale
    signs = np.where(np.abs(fs) <= zero, 0, np.sign(fs)).astype(int)
    nz = [(x, s) for x, s in zip(xs, signs) if s != 0]
    changes = []
    for (x1, s1), (x2, s2) in zip(nz, nz[1:]):
        if s1 != s2:
            changes.append((float(x1), float(x2)))
    if not changes:
        kind = "complex pair" if nz and nz[0][1] < 0 else "real pair"
        return ExceptionalPoint("no_transition", None, None, None, None,
                                message=f"{kind} throughout [{lo:g}, {hi:g}]; no transition to locate")
    if len(changes) > 1:
        return ExceptionalPoint("non_monotone", None, None, None, None, subintervals=changes,
                                message=f"{len(changes)} sign changes on the pre-scan; bisect each subinterval")
    a, b = changes[0]
    fa = _indicator(family, a, pair, discretization)
    it = 0
    while b - a > tol and it < max_iter:
        m = 0.5 * (a + b)
        fm = _indicator(family, m, pair, discretization)
        it += 1
        if abs(fm) <= zero:
            a = b = m
            break
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    root = 0.5 * (a + b)
    p1, p2 = _pair_values(family, root, pair, discretization, vectors=True)
    score = float(abs(np.vdot(p1.right_vector, p2.right_vector)))
    gap = float(abs(p1.value - p2.value))
    cls = "exceptional" if score >= coalescence_min else "crossing"
    return ExceptionalPoint("point", root, cls, score, gap, it)
