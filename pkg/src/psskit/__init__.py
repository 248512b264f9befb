"""Polynomial superlevel-set approximation of semialgebraic sets and uniform sampling on them."""

from .approx import (
    ContainmentReport,
    PssResult,
    SemialgSet,
    bounding_box,
    containment_check,
    fit_points,
    inner_pss,
    outer_pss,
)
from .errors import (
    CheckFailure,
    InputError,
    PsskitError,
    RelaxationOrderError,
    SamplingError,
    SolverError,
    UnboundedSetError,
)
from .estimators import InnerPSS, OuterPSS, PointCloudPSS
from .moments import Box, box_moment, l1_norm, objective_vector
from .poly import GramDecomposition, MultiPoly, expand_gram, monomial_basis
from .sampler import PolyDensity, SampleBatch, acceptance_rate, draw_poly_density, uniform_sample
from .solve import SolverSettings, solve_conic, solve_lp

__version__ = "0.1.0"

__all__ = [
    "Box",
    "CheckFailure",
    "ContainmentReport",
    "GramDecomposition",
    "InnerPSS",
    "InputError",
    "MultiPoly",
    "OuterPSS",
    "PointCloudPSS",
    "PolyDensity",
    "PsskitError",
    "PssResult",
    "RelaxationOrderError",
    "SampleBatch",
    "SamplingError",
    "SemialgSet",
    "SolverError",
    "SolverSettings",
    "UnboundedSetError",
    "acceptance_rate",
    "bounding_box",
    "box_moment",
    "containment_check",
    "draw_poly_density",
    "expand_gram",
    "fit_points",
    "inner_pss",
    "l1_norm",
    "monomial_basis",
    "objective_vector",
    "outer_pss",
    "solve_conic",
    "solve_lp",
    "uniform_sample",
]
