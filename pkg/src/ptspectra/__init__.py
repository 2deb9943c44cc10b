"""Spectral analysis of PT-symmetric operator families H(eps) = p^2 + V + eps W and matrix analogues."""

from .discretize import BasisSpec, DiscretizedOperator, Grid, build, perturbation_operator, pt_residual
from .eigensolve import Spectrum, eig, multiplicities, reality_verdict
from .errors import (ContourError, DiscretizationError, EigenError, HypothesisError, PerturbationError,
                     PotentialError, PTSpectraError)
from .perturbation import locate_exceptional, rspe_coefficients, rspe_reality_check, track_branches
from .potentials import OperatorFamily, PotentialSpec, PotentialTerm, catalog, poly
from .stability import Contour, numerical_range_boundary, spectral_projection, stability_check

__version__ = "0.1.0"
