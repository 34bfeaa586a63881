"""Multivariate adaptive regression splines fit by an L1-budgeted LASSO."""

__version__ = "0.1.0"

from .basis import (
    BasisIndex,
    KnotGrid,
    MarsModel,
    Term,
    build_knots,
    design_matrix,
    enumerate_basis,
    eval_model,
    eval_term,
    evaluate,
    vmars_finite,
)
from .errors import (
    ArgumentError,
    DegenerateRangeError,
    DomainError,
    MarsLassoError,
    NumericError,
    StructuralError,
    UnsupportedOrderError,
)
from .estimator import (
    FitConfig,
    ScalingTransform,
    fit,
    load_model,
    loss,
    predict,
    save_model,
    scale_apply,
    scale_fit,
    scale_invert,
    to_original_domain,
)
from .lattice import LatticeField, LatticeShape, diff, fit_lattice, h2, reconstruct, v2, v2_via_h2
from .selection import CvConfig, CvResult, cross_validate, default_grid
from .sim import ExperimentSpec, RiskReport, lattice_design, run_experiment, test_function
from .solver import LassoProblem, LassoSolution, certify, project_l1, solve
from .variation import SmoothFunction, vmars_smooth
