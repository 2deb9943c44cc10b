"""The acceptance suite: twelve desk-scale checks, each timed against its runtime budget."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import discretize
from .discretize import BasisSpec, Grid, build, lowest, perturbation_operator
from .eigensolve import eig, multiplicities, reality_verdict
from .perturbation import (coefficient_drift, locate_exceptional, rspe_coefficients,
                           track_branches)
from .potentials import catalog
from .stability import (_SupportFunction, distance_sweep, numerical_range_boundary,
                        resolvent_bound_audit, stability_check, theorem21_bound)

SEED = 20240


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict
    tolerance: str
    runtime: float
    budget: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        meas = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        return (f"[{status}] {self.number:2d} {self.name}: {meas} | tol: {self.tolerance} "
                f"| {self.runtime:.2f}s (budget {self.budget:g}s)")


def _short(v):
    if isinstance(v, (float, np.floating)):
        return f"{v:.3g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(str(_short(x)) for x in v) + "]"
    return str(v)


def _ordered_by_imag(v):
    v = np.asarray(v)
    return v[np.argsort(v.imag)]


def c01_jordan_closed_form():
    J = catalog("jordan2x2")
    err = 0.0
    for e in (0.25, 0.5, 1.0):
        got = _ordered_by_imag(np.linalg.eigvals(J.matrix_at(e)))
        r = np.sqrt(e * (e + 2))
        err = max(err, float(np.max(np.abs(got - np.array([-1j * r, 1j * r])))))
    m = multiplicities(J.H0, 0.0)
    passed = err <= 1e-12 and (m.m_g, m.m_a) == (1, 2)
    return passed, {"max_err": err, "m_g": m.m_g, "m_a": m.m_a}, "1e-12; (m_g, m_a) = (1, 2)"


def c02_gap_sharpness():
    G = catalog("gap2x2")
    bad = []
    for g, want in [(0.5, "real"), (0.9, "real"), (0.99, "real"), (0.999, "real"),
                    (1.001, "conjugate_pair"), (1.01, "conjugate_pair"), (1.5, "conjugate_pair"),
                    (2.0, "conjugate_pair")]:
        spec = eig(G.matrix_at(g), left=True)
        got = reality_verdict(spec.values, spec.roundoff_errors()).verdicts
        if any(v != want for v in got):
            bad.append(g)
    bound = theorem21_bound(G.H0, G.Wm, G.P)
    ep = locate_exceptional(G, (0.5, 1.5), tol=1e-11)
    err = abs(ep.epsilon - 1.0) if ep.epsilon is not None else np.inf
    passed = not bad and err <= 1e-10 and abs(bound.g_bound - 1.0) <= 1e-12
    return passed, {"misclassified_g": bad, "g_star_err": err, "g_bound": bound.g_bound}, \
        "verdicts exact; |g*-1| <= 1e-10"


def c03_opposite_parity():
    D = catalog("degenerate2x2")
    ok, err = True, 0.0
    for g in (1e-3, 1e-2, 0.1):
        spec = eig(D.matrix_at(g), left=True)
        rv = reality_verdict(spec.values, spec.roundoff_errors())
        ok = ok and rv.n_pairs == 1
        err = max(err, float(np.max(np.abs(_ordered_by_imag(spec.values) - np.array([1 - 1j * g, 1 + 1j * g])))))
    bound = theorem21_bound(D.H0, D.Wm, D.P)
    passed = ok and not bound.parity_ok
    return passed, {"pair_every_g": ok, "max_err_vs_1pm_ig": err, "parity_ok": bound.parity_ok}, \
        "pair for g in {1e-3, 1e-2, 0.1}; parity_ok false"


def c04_discretization_sanity():
    H = catalog("harmonic")
    exact = np.arange(1, 10, 2, dtype=float)
    # both matrices are Hermitian, so eig takes the symmetric path
    vb = np.sort(lowest(eig(build(H, 0.0, BasisSpec(40))).values, 5).real)
    vf = np.sort(lowest(eig(build(H, 0.0, Grid(10.0, 2000))).values, 5).real)
    eb = float(np.max(np.abs(vb - exact)))
    ef = np.abs(vf - exact)
    passed = eb <= 1e-12 and float(np.max(ef)) <= 1e-4
    return passed, {"basis_max_err": eb, "fd_errs": [float(x) for x in ef]}, "basis 1e-12; fd 1e-4"


def c05_cubic_reality():
    F = catalog("cubic_i")
    v = [lowest(np.linalg.eigvals(build(F, 0.0, BasisSpec(n, 0.6)).matrix), 5) for n in (120, 180)]
    im = float(np.max(np.abs(v[1].imag)))
    drift = float(np.max(np.abs(np.sort_complex(v[1]) - np.sort_complex(v[0]))))
    passed = im <= 1e-6 and drift <= 1e-6
    return passed, {"max_imag": im, "drift": drift, "values": [round(float(x), 8) for x in np.sort(v[1].real)]}, \
        "|Im| <= 1e-6; drift <= 1e-6"


def c06_rspe_first_coefficient():
    F = catalog("harmonic_quartic")
    d = BasisSpec(60)
    s = rspe_coefficients(build(F, 0.0, d), perturbation_operator(F, d), 1.0, 8)
    err = abs(s.a[1] - 0.75)
    g = s.growth_ratios
    increasing = bool(np.all(np.diff(g) > 0)) and s.order == 8
    return err <= 1e-8 and increasing, {"a1_err": float(err), "growth_ratios": [float(x) for x in g]}, \
        "|a1-3/4| <= 1e-8; ratios strictly increasing to n=8"


def c07_series_reality():
    F = catalog("poly_lq")
    series = []
    for n in (80, 120):
        d = BasisSpec(n, 0.6)
        series.append(rspe_coefficients(build(F, 0.0, d), perturbation_operator(F, d), 1.0, 4))
    drift = coefficient_drift(series[1], series[0])
    im = float(np.max(np.abs(series[1].a[1:5].imag)))
    passed = series[1].order == 4 and im <= 10 * drift
    return passed, {"max_imag_a1_a4": im, "drift": drift}, "|Im a_n| <= 10 x drift"


def c08_double_well_rank_jump():
    F = catalog("double_well")
    rep = stability_check(F, 1.0, 0.6, (0.1, 0.05, 0.025), BasisSpec(240, 3.5))
    rank05 = next(r.rank for r in rep.rows if r.epsilon == 0.05)
    passed = rep.rank0 == 1 and rank05 == 2 and rep.verdict == "rank_jump"
    return passed, {"rank0": rep.rank0, "rank_at_0.05": rank05, "verdict": rep.verdict}, \
        "rank 1 -> 2; verdict rank_jump"


def c09_stability_trend():
    F = catalog("harmonic_quartic")
    rep = stability_check(F, 1.0, 0.8, (0.2, 0.1, 0.05, 0.025), BasisSpec(60))
    ranks = [r.rank for r in rep.rows]
    norms = [r.proj_diff_norm for r in rep.rows[1:]]
    ratio = norms[-1] / norms[0]
    passed = all(r == 1 for r in ranks) and ratio <= 0.5
    return passed, {"ranks": ranks, "final_over_initial": ratio, "verdict": rep.verdict}, \
        "ranks 1; final <= 0.5 x initial"


def random_pt_matrix(rng, n):
    """Random H with P conj(H) P = H for a random real symmetric involution P."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    P = Q @ np.diag(rng.choice([-1.0, 1.0], n)) @ Q.T
    P = 0.5 * (P + P.T)
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (A + P @ A.conj() @ P), P


def c10_numerical_range(n_matrices=100, seed=SEED):
    rng = np.random.default_rng(seed)
    incl, pt, audit_ok = 0.0, 0.0, True
    for _ in range(n_matrices):
        n = int(rng.integers(2, 51))
        H, P = random_pt_matrix(rng, n)
        pt = max(pt, discretize.pt_residual(H, P))
        b = numerical_range_boundary(H, refine_tol=1e-4)
        incl = max(incl, max(b.distance(e) for e in np.linalg.eigvals(H)))
        # real shift keeps PT symmetry and puts the range in Re z >= 0.5
        Hs = H + (_SupportFunction(H)(np.pi)[0] + 0.5) * np.eye(n)
        z = -rng.uniform(0.01, 5.0, 20) + 1j * rng.uniform(-5.0, 5.0, 20)
        a = resolvent_bound_audit(Hs, z)
        audit_ok = audit_ok and a.passed and a.n_checked == 20
    J = catalog("jordan2x2").H0
    circle = float(np.max(np.abs(np.abs(numerical_range_boundary(J).points) - 1.0)))
    passed = pt <= 1e-12 and incl <= 1e-8 and audit_ok and circle <= 1e-6
    return passed, {"pt_residual": pt, "max_eig_dist": incl, "audit_ok": audit_ok, "circle_err": circle}, \
        "pt 1e-12; eig-hull 1e-8; circle 1e-6"


def c11_reality_persistence():
    grid = np.linspace(0.0, 0.1, 11)
    out, passed = {}, True
    for name, omega in (("sine_g", 1.0), ("rational_g", 1.0), ("cubic_i", 0.6)):
        F = catalog(name)
        tr = track_branches(F, grid, BasisSpec(120, omega), k=5, reference=BasisSpec(180, omega))
        real = all(v == "real" for b in tr for v in b.verdicts)
        pt = max(discretize.pt_residual(op.matrix, op.parity)
                 for op in (build(F, e, BasisSpec(120, omega)) for e in grid))
        closed = all(tr.closure_ok) and pt <= 1e-10
        passed = passed and real and closed
        out[name] = f"real={real} closure={closed} pt={pt:.1e} eps_j={min(b.epsilon_j for b in tr):g}"
    return passed, out, "verdict real at every node; closure within combined error; pt <= 1e-10"


def c12_distance_growth():
    g = Grid(10.0, 999)
    cuts = (2, 4, 6, 8)
    _, harm_up, _ = distance_sweep(catalog("harmonic"), 0.0, 0.0, cuts, "both", grid=g)
    C = catalog("cubic_i")
    _, plus_up, _ = distance_sweep(C, 0.0, 5.0, cuts, "plus", grid=g)
    _, minus_up, _ = distance_sweep(C, 0.0, 5.0, cuts, "minus", grid=g)
    both, both_up, _ = distance_sweep(C, 0.0, 5.0, cuts, "both", grid=g)
    passed = harm_up and plus_up and minus_up and not both_up
    return passed, {"harmonic_increasing": harm_up, "cubic_plus": plus_up, "cubic_minus": minus_up,
                    "cubic_two_sided": [d.lower_bound for d in both]}, \
        "strict increase; two-sided cubic stalls"


CRITERIA = [
    (1, "jordan2x2 closed form", c01_jordan_closed_form, 1.0),
    (2, "gap2x2 bound sharpness", c02_gap_sharpness, 1.0),
    (3, "opposite-parity instability", c03_opposite_parity, 1.0),
    (4, "harmonic discretization sanity", c04_discretization_sanity, 10.0),
    (5, "reality of p^2 + i x^3", c05_cubic_reality, 30.0),
    (6, "first series coefficient", c06_rspe_first_coefficient, 30.0),
    (7, "reality of series coefficients", c07_series_reality, 60.0),
    (8, "double-well rank jump", c08_double_well_rank_jump, 60.0),
    (9, "stability trend", c09_stability_trend, 60.0),
    (10, "numerical-range properties", c10_numerical_range, 60.0),
    (11, "reality persistence along branches", c11_reality_persistence, 300.0),
    (12, "distance-at-infinity growth", c12_distance_growth, 60.0),
]


def run_criterion(number: int) -> CriterionResult:
    for num, name, fn, budget in CRITERIA:
        if num == number:
            t0 = time.perf_counter()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                passed, measured, tol = fn()
            dt = time.perf_counter() - t0
            return CriterionResult(num, name, bool(passed) and dt < budget, measured, tol, dt, budget)
    raise KeyError(f"no criterion {number}; valid: 1..{len(CRITERIA)}")


def verify_all(subset: Optional[Sequence[int]] = None,
               emit: Optional[Callable[[str], None]] = None) -> list:
    """Run the criteria (all, or ``subset``); an empty subset returns an empty report with a warning."""
    numbers = [c[0] for c in CRITERIA] if subset is None else list(subset)
    if not numbers:
        warnings.warn("empty criterion subset: nothing to verify", UserWarning, stacklevel=2)
        return []
    out = []
    for num in numbers:
        r = run_criterion(num)
        out.append(r)
        if emit is not None:
            emit(r.line())
    return out
