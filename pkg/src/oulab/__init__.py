"""Numerical laboratory for finite-dimensional Ornstein-Uhlenbeck
semigroups: operator-norm gap certificates, Gaussian measure
comparisons, and generator spectra."""

__version__ = "0.1.0"

from .budget import DEFAULT_BUDGET, Budget
from .engine import (
    Estimate,
    OUSystem,
    apply_generator,
    invariant_measure,
    ou_apply,
    ou_field,
    simulate_paths,
    transition_law,
)
from .errors import OULabError
from .fields import ScalarField
from .measures import GaussianMeasure, TVEstimate, fh_classify, tv_distance
from .normgap import (
    DichotomyVerdict,
    WitnessReport,
    buc_gap,
    cosine_witness,
    dichotomy_classify,
    disjoint_balls_witness,
    l1_invariant_gap,
    l1_lebesgue_gap,
)
from .spectral import (
    ComplexGrid,
    RieszProjection,
    SpectralMap,
    heat_approx_eigenvector,
    resolvent_map,
    riesz_projection,
    transport_eigenfunction,
)

__all__ = [
    "Budget",
    "DEFAULT_BUDGET",
    "ComplexGrid",
    "DichotomyVerdict",
    "Estimate",
    "GaussianMeasure",
    "OULabError",
    "OUSystem",
    "RieszProjection",
    "ScalarField",
    "SpectralMap",
    "TVEstimate",
    "WitnessReport",
    "apply_generator",
    "buc_gap",
    "cosine_witness",
    "dichotomy_classify",
    "disjoint_balls_witness",
    "fh_classify",
    "heat_approx_eigenvector",
    "invariant_measure",
    "l1_invariant_gap",
    "l1_lebesgue_gap",
    "ou_apply",
    "ou_field",
    "resolvent_map",
    "riesz_projection",
    "simulate_paths",
    "transition_law",
    "transport_eigenfunction",
    "tv_distance",
]
