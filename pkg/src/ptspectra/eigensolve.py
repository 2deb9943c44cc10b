"""Dense eigendecomposition with multiplicity, parity and reality classification."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from ._linalg import bandwidth, is_hermitian, tridiagonal_eigh
from .discretize import DiscretizedOperator, lowest
from .errors import EigenError

UNIT_ROUNDOFF = np.finfo(float).eps


@dataclass
class EigenPair:
    value: complex
    right_vector: np.ndarray = field(repr=False)
    left_vector: Optional[np.ndarray] = field(default=None, repr=False)
    residual: float = 0.0

    @property
    def condition(self) -> float:
        """1/|<u_L, u_R>| for unit vectors; inf when left vector missing or orthogonal."""
        if self.left_vector is None:
            return float("nan")
        s = abs(np.vdot(self.left_vector, self.right_vector))
        return float("inf") if s == 0 else 1.0 / s


@dataclass
class Spectrum:
    pairs: list
    size: int
    norm: float
    method: str = "matrix"
    epsilon: float = 0.0
    family: str = ""
    error_scale: float = 0.0

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.pairs], dtype=complex)

    def __len__(self):
        return len(self.pairs)

    def lowest(self, k: int) -> list:
        """The k pairs of smallest modulus."""
        vals = lowest(self.values, k)
        out, used = [], set()
        for v in vals:
            for i, p in enumerate(self.pairs):
                if i not in used and p.value == v:
                    out.append(p)
                    used.add(i)
                    break
        return out

    def roundoff_errors(self) -> np.ndarray:
        """Per-eigenvalue first-order roundoff estimate cond * max(residual, n u ||H||)."""
        floor = self.size * UNIT_ROUNDOFF * self.norm
        out = []
        for p in self.pairs:
            c = p.condition
            c = 1.0 if np.isnan(c) else c
            out.append(c * max(p.residual, floor))
        return np.array(out)


def _sort_key(values, tol):
    # bucket Re and Im so near-ties order the same way on every run
    re = np.round(values.real / tol) * tol
    im = np.round(values.imag / tol) * tol
    return np.lexsort((im, re))


def eig(H, left: bool = False, sort_tol: float = 1e-9) -> Spectrum:
    """All eigenvalues with unit right (and optionally left) eigenvectors, sorted by (Re, Im)."""
    meta = {}
    if isinstance(H, DiscretizedOperator):
        meta = dict(method=H.method, epsilon=H.epsilon, family=H.family, error_scale=H.error_scale)
        A = H.matrix
    else:
        A = np.asarray(H, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise EigenError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise EigenError("matrix has non-finite entries")
    n = A.shape[0]
    try:
        if is_hermitian(A):
            if n > 64 and bandwidth(A) == 1:
                w, vr = tridiagonal_eigh(np.real(np.diagonal(A)), np.diagonal(A, -1))
            elif not np.any(A.imag):
                w, vr = sla.eigh(A.real)
            else:
                w, vr = sla.eigh(A)
            w = w.astype(complex)
            vl = vr if left else None
        elif left:
            w, vl, vr = sla.eig(A, left=True, right=True)
        else:
            w, vr = sla.eig(A)
            vl = None
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenError(f"eigenvalue iteration failed to converge: {exc}") from exc
    vr = vr / np.linalg.norm(vr, axis=0)
    if vl is not None:
        vl = vl / np.linalg.norm(vl, axis=0)
    res = np.linalg.norm(A @ vr - vr * w, axis=0)
    scale = max(float(np.max(np.abs(w))) if n else 1.0, 1.0)
    order = _sort_key(w, sort_tol * scale)
    pairs = [EigenPair(complex(w[i]), vr[:, i], None if vl is None else vl[:, i], float(res[i]))
             for i in order]
    return Spectrum(pairs, n, float(np.linalg.norm(A)), **meta)


@dataclass
class Multiplicity:
    m_g: int
    m_a: int
    singular_values: np.ndarray = field(repr=False)
    flags: list = field(default_factory=list)


def multiplicities(H, lam: complex, rank_tol: float = 1e-8, contour_radius: float = 0.5,
                   n_nodes: int = 64) -> Multiplicity:
    """Geometric multiplicity from the null space of H - lam, algebraic from the contour projector rank."""
    from .stability import Contour, spectral_projection

    A = H.matrix if isinstance(H, DiscretizedOperator) else np.asarray(H, dtype=complex)
    n = A.shape[0]
    s = np.linalg.svd(A - lam * np.eye(n), compute_uv=False)
    smax = s[0] if s[0] > 0 else 1.0
    thresh = rank_tol * smax
    m_g = int(np.sum(s <= thresh)) if s[0] > 0 else n
    flags = []
    if np.any((s > thresh / 10.0) & (s < 10.0 * thresh)):
        flags.append("rank_tol_ambiguous")
    proj = spectral_projection(A, Contour(lam, contour_radius, n_nodes))
    m_a = proj.rank
    if m_g > m_a:
        raise EigenError(f"m_g={m_g} > m_a={m_a} at lambda={lam}: rank threshold or contour is wrong")
    return Multiplicity(m_g, m_a, s, flags)


@dataclass(frozen=True)
class ParityClass:
    label: str
    score: float


def parity_classify(v, P, tol: float = 1e-8) -> ParityClass:
    v = np.asarray(v, dtype=complex)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ValueError("cannot classify the zero vector")
    v = v / nv
    score = float(np.real(np.vdot(v, np.asarray(P) @ v)))
    if score > 1.0 - tol:
        return ParityClass("even", score)
    if score < -(1.0 - tol):
        return ParityClass("odd", score)
    return ParityClass("mixed", score)


@dataclass
class RealityVerdict:
    verdicts: list
    partners: dict
    err: float

    @property
    def n_real(self) -> int:
        return self.verdicts.count("real")

    @property
    def n_pairs(self) -> int:
        return self.verdicts.count("conjugate_pair") // 2

    @property
    def n_undecided(self) -> int:
        return self.verdicts.count("undecided")


def reality_verdict(spectrum, err: float) -> RealityVerdict:
    """Classify each eigenvalue as real, member of a conjugate pair, or undecided.

    ``spectrum`` may be a Spectrum or an array of eigenvalues; ``err`` may be a
    scalar or one tolerance per eigenvalue.
    """
    if isinstance(spectrum, Spectrum):
        if np.any(np.asarray(err) < spectrum.error_scale):
            raise ValueError(f"err must be >= spectrum.error_scale ({spectrum.error_scale:g})")
        values = spectrum.values
    else:
        values = np.asarray(spectrum, dtype=complex)
    tol = np.broadcast_to(np.asarray(err, dtype=float), values.shape)
    verdicts = ["undecided"] * len(values)
    partners = {}
    nonreal = []
    for i, lam in enumerate(values):
        if abs(lam.imag) <= tol[i]:
            verdicts[i] = "real"
        else:
            nonreal.append(i)
    # greedy nearest conjugate matching, upper half-plane against lower
    upper = [i for i in nonreal if values[i].imag > 0]
    lower = set(i for i in nonreal if values[i].imag < 0)
    for i in sorted(upper, key=lambda j: (values[j].real, values[j].imag)):
        best, bd = None, np.inf
        for j in lower:
            d = abs(values[j] - np.conj(values[i]))
            if d < bd:
                best, bd = j, d
        if best is not None and bd <= max(tol[i], tol[best]):
            verdicts[i] = verdicts[best] = "conjugate_pair"
            partners[i], partners[best] = best, i
            lower.discard(best)
    return RealityVerdict(verdicts, partners, float(np.max(tol)) if len(tol) else float(err))


def conjugate_closure_defect(values, errors=None) -> float:
    """Optimal-matching distance between the multisets {lambda} and {conj(lambda)}.

    With per-eigenvalue ``errors`` each matched distance is first reduced by
    the two eigenvalues' errors, so 0 means closed within solver tolerance.
    """
    v = np.asarray(values, dtype=complex)
    if v.size == 0:
        return 0.0
    cost = np.abs(v[:, None] - np.conj(v)[None, :])
    if errors is not None:
        e = np.asarray(errors, dtype=float)
        cost = np.maximum(cost - e[:, None] - e[None, :], 0.0)
    r, c = linear_sum_assignment(cost)
    return float(np.max(cost[r, c]))
