"""Complex potentials V = V+ + iV-, operator families and the scenario catalog.

A potential is a sum of real parity-typed terms.  Terms in ``even_terms`` make
up the real part and must be parity-even; terms in ``odd_terms`` make up the
imaginary part and must be parity-odd.  Wrong placement is rejected when the
spec is built, so ``PotentialSpec`` objects are PT-symmetric by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._linalg import pt_defect
from .errors import PotentialError

TERM_KINDS = ("monomial", "sine", "rational_odd", "exp_square")

# exp(x^2) overflows double precision just past |x| = 26.6
EXP_SQUARE_CLAMP = 26.0


@dataclass(frozen=True)
class PotentialTerm:
    kind: str
    coefficient: float
    power: int = 0
    frequency: float = 1.0

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise PotentialError(f"unknown term kind {self.kind!r}; expected one of {TERM_KINDS}")
        if self.kind == "monomial" and (int(self.power) != self.power or self.power < 0):
            raise PotentialError(f"monomial power must be a nonnegative integer, got {self.power}")
        if not np.isfinite(self.coefficient):
            raise PotentialError("term coefficient must be finite")

    @classmethod
    def monomial(cls, coefficient, power):
        return cls("monomial", float(coefficient), power=int(power))

    @classmethod
    def sine(cls, coefficient, frequency=1.0):
        return cls("sine", float(coefficient), frequency=float(frequency))

    @classmethod
    def rational_odd(cls, coefficient):
        return cls("rational_odd", float(coefficient))

    @classmethod
    def exp_square(cls, coefficient):
        return cls("exp_square", float(coefficient))

    @property
    def parity(self) -> str:
        if self.kind == "monomial":
            return "even" if self.power % 2 == 0 else "odd"
        if self.kind == "exp_square":
            return "even"
        return "odd"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        c = self.coefficient
        if self.kind == "monomial":
            # via |x| so that f(-x) = +-f(x) holds bit for bit
            y = np.abs(x) ** self.power
            return c * (y if self.power % 2 == 0 else np.sign(x) * y)
        if self.kind == "sine":
            return c * np.sin(self.frequency * x)
        if self.kind == "rational_odd":
            return c * x / (x * x + 1.0)
        if np.any(np.abs(x) > EXP_SQUARE_CLAMP):
            raise PotentialError(
                f"exp_square evaluated beyond |x| <= {EXP_SQUARE_CLAMP}: non-finite result")
        return c * np.exp(x * x)

    def scaled(self, factor: float) -> "PotentialTerm":
        return PotentialTerm(self.kind, self.coefficient * factor, self.power, self.frequency)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "coefficient": self.coefficient}
        if self.kind == "monomial":
            d["power"] = self.power
        if self.kind == "sine":
            d["frequency"] = self.frequency
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialTerm":
        return cls(d["kind"], float(d.get("coefficient", 1.0)),
                   power=int(d.get("power", 0)), frequency=float(d.get("frequency", 1.0)))

    def __str__(self):
        c = self.coefficient
        if self.kind == "monomial":
            return f"{c:g}*x^{self.power}"
        if self.kind == "sine":
            return f"{c:g}*sin({self.frequency:g}x)"
        if self.kind == "rational_odd":
            return f"{c:g}*x/(x^2+1)"
        return f"{c:g}*exp(x^2)"


@dataclass(frozen=True)
class PotentialSpec:
    even_terms: tuple = ()
    odd_terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "even_terms", tuple(self.even_terms))
        object.__setattr__(self, "odd_terms", tuple(self.odd_terms))
        for t in self.even_terms:
            if t.parity != "even":
                raise PotentialError(f"term {t} has odd parity but was placed in even_terms (real part)")
        for t in self.odd_terms:
            if t.parity != "odd":
                raise PotentialError(f"term {t} has even parity but was placed in odd_terms (imaginary part)")

    @property
    def terms(self):
        """All terms with their complex weight (1 for the real part, i for the imaginary part)."""
        return [(t, 1.0) for t in self.even_terms] + [(t, 1j) for t in self.odd_terms]

    def __call__(self, x):
        return evaluate(self, x)

    @property
    def is_zero(self) -> bool:
        return not any(t.coefficient != 0.0 for t, _ in self.terms)

    @property
    def is_monomial(self) -> bool:
        return all(t.kind == "monomial" for t, _ in self.terms)

    def to_dict(self) -> dict:
        return {"even": [t.to_dict() for t in self.even_terms],
                "odd": [t.to_dict() for t in self.odd_terms]}

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSpec":
        return cls(tuple(PotentialTerm.from_dict(t) for t in d.get("even", [])),
                   tuple(PotentialTerm.from_dict(t) for t in d.get("odd", [])))

    def __str__(self):
        re = " + ".join(str(t) for t in self.even_terms)
        im = " + ".join(str(t) for t in self.odd_terms)
        if re and im:
            return f"{re} + i({im})"
        return re or (f"i({im})" if im else "0")


def poly(even=None, odd=None) -> PotentialSpec:
    """Shorthand: ``poly({2: 1.0}, {3: 1.0})`` is x^2 + i x^3."""
    even = even or {}
    odd = odd or {}
    return PotentialSpec(tuple(PotentialTerm.monomial(c, k) for k, c in sorted(even.items())),
                         tuple(PotentialTerm.monomial(c, k) for k, c in sorted(odd.items())))


def evaluate(spec: PotentialSpec, x):
    """Value V+(x) + i V-(x); scalar in, complex scalar out."""
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)):
        raise PotentialError("evaluation point must be finite")
    out = np.zeros(x_arr.shape, dtype=complex)
    for term, weight in spec.terms:
        out = out + weight * term(x_arr)
    if not np.all(np.isfinite(out)):
        raise PotentialError("potential evaluated to a non-finite value")
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ParityAudit:
    even_defect: float
    odd_defect: float
    samples: int

    @property
    def max_defect(self) -> float:
        return max(self.even_defect, self.odd_defect)


def parity_audit(spec: PotentialSpec, samples: int = 100, x_max: float = 5.0) -> ParityAudit:
    """Max of |f(x) - f(-x)| over the real part and |g(x) + g(-x)| over the imaginary part."""
    if samples < 2:
        raise PotentialError("parity_audit needs at least 2 samples")
    x = np.linspace(0.0, x_max, samples)
    even = sum((t(x) for t in spec.even_terms), np.zeros_like(x))
    even_m = sum((t(-x) for t in spec.even_terms), np.zeros_like(x))
    odd = sum((t(x) for t in spec.odd_terms), np.zeros_like(x))
    odd_m = sum((t(-x) for t in spec.odd_terms), np.zeros_like(x))
    return ParityAudit(float(np.max(np.abs(even - even_m))),
                       float(np.max(np.abs(odd + odd_m))), samples)


@dataclass(frozen=True)
class Theorem22Check:
    applicable: bool
    l: Optional[int]
    r: Optional[int]
    reason: str = ""


def _monomial_degree(terms):
    nonzero = [t for t in terms if t.coefficient != 0.0]
    if not nonzero:
        return None, 0.0
    top = max(nonzero, key=lambda t: t.power)
    lead = sum(t.coefficient for t in nonzero if t.power == top.power)
    return top.power, lead


def theorem22_applicable(V: PotentialSpec, W: PotentialSpec) -> Theorem22Check:
    """Check whether p^2 + V + igW has the polynomial form with l > 2r.

    ``V`` must be a real even polynomial (only ``even_terms``); ``W`` carries the
    real odd polynomial in its ``odd_terms`` slot, i.e. the PotentialSpec of igW at g=1.
    """
    if V.odd_terms:
        raise PotentialError("V must be real-valued (no odd_terms): V is not even")
    if W.even_terms:
        raise PotentialError("W must enter as igW with W real and odd (only odd_terms)")
    if not (V.is_monomial and W.is_monomial):
        return Theorem22Check(False, None, None, "non_polynomial")
    dv, lead = _monomial_degree(V.even_terms)
    dw, _ = _monomial_degree(W.odd_terms)
    if dv is None or dv == 0:
        return Theorem22Check(False, None, None, "V_constant")
    if lead <= 0:
        return Theorem22Check(False, dv // 2, None, "V_not_confining")
    l = dv // 2
    if dw is None:
        return Theorem22Check(False, l, None, "W_zero")
    r = (dw + 1) // 2
    if l > 2 * r:
        return Theorem22Check(True, l, r, "")
    return Theorem22Check(False, l, r, "l_not_greater_than_2r")


TermList = Sequence[tuple]


@dataclass(frozen=True)
class OperatorFamily:
    """H(eps) = p^2 + V + eps W on L^2(R), or an explicit matrix family.

    Matrix families are H(eps) = H0 + eps * coupling * W with parity matrix P;
    ``coupling = 1j`` realizes H0 + igW with W symmetric.  Families whose
    potential is not affine in eps (the double well) supply ``terms_builder``,
    a function eps -> [(PotentialTerm, complex weight), ...].
    """

    name: str
    variant: str
    epsilon_max: float = 1.0
    V: Optional[PotentialSpec] = None
    W: Optional[PotentialSpec] = None
    H0: Optional[np.ndarray] = field(default=None, compare=False)
    Wm: Optional[np.ndarray] = field(default=None, compare=False)
    P: Optional[np.ndarray] = field(default=None, compare=False)
    coupling: complex = 1.0
    terms_builder: Optional[Callable[[float], list]] = field(default=None, compare=False)
    description: str = ""

    def __post_init__(self):
        if self.variant not in ("schrodinger", "matrix"):
            raise PotentialError(f"unknown family variant {self.variant!r}")
        if not self.epsilon_max > 0:
            raise PotentialError("epsilon_max must be positive")
        if self.variant == "schrodinger":
            if self.V is None:
                raise PotentialError("schrodinger family needs V")
            if self.W is None:
                object.__setattr__(self, "W", PotentialSpec())
        else:
            self._check_matrix()

    def _check_matrix(self, tol=1e-10):
        H0 = np.asarray(self.H0, dtype=complex)
        Wm = np.asarray(self.Wm, dtype=complex)
        P = np.asarray(self.P, dtype=float)
        n = H0.shape[0]
        if H0.shape != (n, n) or Wm.shape != (n, n) or P.shape != (n, n):
            raise PotentialError("H0, W and P must be square matrices of equal size")
        if not np.allclose(P, P.T, atol=0) or not np.allclose(P @ P, np.eye(n), atol=1e-14):
            raise PotentialError("P must be a real symmetric involution")
        if pt_defect(H0, P) > tol:
            raise PotentialError("H0 is not PT-symmetric with respect to P")
        if pt_defect(self.coupling * Wm, P) > tol:
            raise PotentialError("perturbation is not PT-symmetric with respect to P")
        object.__setattr__(self, "H0", H0)
        object.__setattr__(self, "Wm", Wm)
        object.__setattr__(self, "P", P)

    @classmethod
    def schrodinger(cls, name, V, W=None, epsilon_max=1.0, **kw):
        return cls(name=name, variant="schrodinger", V=V, W=W, epsilon_max=epsilon_max, **kw)

    @classmethod
    def matrix(cls, name, H0, W, P, epsilon_max=1.0, coupling=1.0, **kw):
        return cls(name=name, variant="matrix", H0=np.asarray(H0, dtype=complex),
                   Wm=np.asarray(W, dtype=complex), P=np.asarray(P, dtype=float),
                   epsilon_max=epsilon_max, coupling=complex(coupling), **kw)

    @property
    def is_matrix(self) -> bool:
        return self.variant == "matrix"

    def potential_terms(self, epsilon: float) -> list:
        if self.is_matrix:
            raise PotentialError(f"{self.name}: matrix family has no potential")
        if self.terms_builder is not None:
            return list(self.terms_builder(epsilon))
        out = list(self.V.terms)
        if epsilon != 0.0:
            out += [(t, w * epsilon) for t, w in self.W.terms]
        return out

    def potential(self, epsilon: float) -> Callable:
        terms = self.potential_terms(epsilon)

        def f(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros(x.shape, dtype=complex)
            for term, weight in terms:
                out = out + weight * term(x)
            return out

        return f

    def matrix_at(self, epsilon: float) -> np.ndarray:
        if not self.is_matrix:
            raise PotentialError(f"{self.name}: not a matrix family")
        return self.H0 + epsilon * self.coupling * self.Wm

    def perturbation_matrix(self) -> np.ndarray:
        """dH/deps for matrix families."""
        return self.coupling * self.Wm

    def to_dict(self) -> dict:
        if self.terms_builder is not None:
            return {"catalog": self.name}
        if self.is_matrix:
            enc = lambda M: [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(M, dtype=complex)]
            return {"variant": "matrix", "H0": enc(self.H0), "W": enc(self.Wm),
                    "P": np.asarray(self.P).tolist(),
                    "coupling": [self.coupling.real, self.coupling.imag],
                    "epsilon_max": self.epsilon_max}
        return {"variant": "schrodinger", "V": self.V.to_dict(), "W": self.W.to_dict(),
                "epsilon_max": self.epsilon_max}

    @classmethod
    def from_dict(cls, d: dict, name: str = "inline") -> "OperatorFamily":
        if "catalog" in d:
            return catalog(d["catalog"], **d.get("params", {}))
        variant = d.get("variant")
        if variant == "schrodinger":
            return cls.schrodinger(name, PotentialSpec.from_dict(d["V"]),
                                   PotentialSpec.from_dict(d.get("W", {})),
                                   epsilon_max=float(d.get("epsilon_max", 1.0)))
        if variant == "matrix":
            dec = lambda M: np.array([[complex(a, b) for a, b in row] for row in M])
            c = d.get("coupling", [1.0, 0.0])
            return cls.matrix(name, dec(d["H0"]), dec(d["W"]), np.array(d["P"], dtype=float),
                              epsilon_max=float(d.get("epsilon_max", 1.0)),
                              coupling=complex(c[0], c[1]))
        raise PotentialError(f"unknown family variant {variant!r}")


@dataclass(frozen=True)
class ConfinementAudit:
    shells: np.ndarray
    values: np.ndarray
    min_value: float
    argmin: float
    growth: bool


def confinement_audit(family: OperatorFamily, epsilon: float, x_max: float,
                      samples: int = 200) -> ConfinementAudit:
    """Shell minima m(s) = min(|U(s)|, |U(-s)|) of U = V + eps W on s in [0, x_max].

    ``growth`` is true when m is nondecreasing on the outer half [x_max/2, x_max]
    and grows there by at least a factor 1.5, i.e. the potential is visibly
    confining at the truncation radius.
    """
    if family.is_matrix:
        raise PotentialError("confinement_audit needs a schrodinger family")
    s = np.linspace(0.0, x_max, samples)
    U = family.potential(epsilon)
    m = np.minimum(np.abs(U(s)), np.abs(U(-s)))
    tail = m[s >= 0.5 * x_max]
    tol = 1e-12 * max(1.0, float(np.max(np.abs(tail))))
    monotone = bool(np.all(np.diff(tail) >= -tol))
    grows = bool(tail[-1] >= 1.5 * tail[0]) if tail[0] > 0 else bool(tail[-1] > 0)
    i = int(np.argmin(m))
    return ConfinementAudit(s, m, float(m[i]), float(s[i]), monotone and grows)


# ---------------------------------------------------------------------------
# catalog

_PT_PARITY_2 = np.diag([1.0, -1.0])


def _jordan2x2():
    return OperatorFamily.matrix(
        "jordan2x2", [[1, 1j], [1j, -1]], [[0, 1j], [1j, 0]], _PT_PARITY_2,
        epsilon_max=1.0, description="H0=[[1,i],[i,-1]] (Jordan block at 0), W=[[0,i],[i,0]]")


def _gap2x2():
    return OperatorFamily.matrix(
        "gap2x2", np.diag([0.0, 2.0]), [[0, 1], [1, 0]], _PT_PARITY_2,
        epsilon_max=2.0, coupling=1j, description="diag(0,2) + igW, W=[[0,1],[1,0]]")


def _degenerate2x2():
    return OperatorFamily.matrix(
        "degenerate2x2", np.eye(2), [[0, 1], [1, 0]], _PT_PARITY_2,
        epsilon_max=1.0, coupling=1j, description="I + igW, opposite-parity degenerate pair")


def _harmonic():
    return OperatorFamily.schrodinger("harmonic", poly({2: 1.0}), PotentialSpec(),
                                      epsilon_max=1.0, description="p^2 + x^2")


def _harmonic_quartic():
    return OperatorFamily.schrodinger("harmonic_quartic", poly({2: 1.0}), poly({4: 1.0}),
                                      epsilon_max=0.2, description="p^2 + x^2 + eps x^4")


def _double_well_terms(eps):
    # x^2 (1 - eps x)^2 expanded per eps; not affine in eps
    return [(PotentialTerm.monomial(1.0, 2), 1.0),
            (PotentialTerm.monomial(-2.0 * eps, 3), 1.0),
            (PotentialTerm.monomial(eps * eps, 4), 1.0)]


def _double_well():
    return OperatorFamily.schrodinger("double_well", poly({2: 1.0}), PotentialSpec(),
                                      epsilon_max=0.2, terms_builder=_double_well_terms,
                                      description="p^2 + x^2 (1 - eps x)^2")


def _cubic_i():
    return OperatorFamily.schrodinger("cubic_i", poly(odd={3: 1.0}), poly({4: 1.0}, {3: 1.0}),
                                      epsilon_max=0.1, description="p^2 + i x^3, W = x^4 + i x^3")


def _sine_g(g=0.1, n=1):
    V = PotentialSpec((PotentialTerm.monomial(1.0, 2 * n),), (PotentialTerm.sine(g),))
    return OperatorFamily.schrodinger("sine_g", V, poly({4: 1.0}, {3: 1.0}), epsilon_max=0.1,
                                      description=f"p^2 + x^{2 * n} + i {g:g} sin x, W = x^4 + i x^3")


def _rational_g(g=0.1, n=1):
    V = PotentialSpec((PotentialTerm.monomial(1.0, 2 * n),), (PotentialTerm.rational_odd(g),))
    return OperatorFamily.schrodinger("rational_g", V, poly({4: 1.0}, {3: 1.0}), epsilon_max=0.1,
                                      description=f"p^2 + x^{2 * n} + i {g:g} x/(x^2+1), W = x^4 + i x^3")


def _poly_lq(g=0.1, l=3, q=1):
    if not l > 2 * q:
        raise PotentialError(f"poly_lq needs l > 2q, got l={l}, q={q}")
    V = poly({2 * l: 1.0}, {2 * q - 1: g})
    return OperatorFamily.schrodinger("poly_lq", V, poly({2: 1.0}, {1: 1.0}), epsilon_max=0.1,
                                      description=f"p^2 + x^{2 * l} + i {g:g} x^{2 * q - 1}, W = x^2 + i x")


_CATALOG = {
    "jordan2x2": _jordan2x2,
    "gap2x2": _gap2x2,
    "degenerate2x2": _degenerate2x2,
    "harmonic": _harmonic,
    "harmonic_quartic": _harmonic_quartic,
    "double_well": _double_well,
    "cubic_i": _cubic_i,
    "sine_g": _sine_g,
    "rational_g": _rational_g,
    "poly_lq": _poly_lq,
}


def available() -> list:
    return list(_CATALOG)


def catalog(name: str, **params) -> OperatorFamily:
    """Return the named scenario family; keyword params (g, n, l, q) where supported."""
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise PotentialError(f"unknown scenario {name!r}; available: {', '.join(_CATALOG)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise PotentialError(f"scenario {name!r} does not accept parameters {sorted(params)}") from exc
