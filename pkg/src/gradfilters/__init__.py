"""Gradient methods for discrete ill-posed least squares, viewed through SVD filter factors."""

import logging

from .filters import (check_agreement, filter_convergence_report, filters_direct,
                      filters_from_polynomial, filters_nonscaled, replay_polynomials)
from .problems import Problem, add_noise, generate_blur, generate_heat, make_problem
from .scalings import ScalingDescriptor
from .solver import (IterationRecord, MethodConfig, RunHistory, best_iterate, landweber_mode,
                     run, run_projected, run_unconstrained)
from .spectral import FilterSet, SvdTriple, svd, tikhonov_filters, tsvd_filters
from .steplengths import select_steplength

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "FilterSet", "IterationRecord", "MethodConfig", "Problem", "RunHistory", "ScalingDescriptor",
    "SvdTriple", "add_noise", "best_iterate", "check_agreement", "filter_convergence_report",
    "filters_direct", "filters_from_polynomial", "filters_nonscaled", "generate_blur",
    "generate_heat", "landweber_mode", "make_problem", "replay_polynomials", "run",
    "run_projected", "run_unconstrained", "select_steplength", "svd", "tikhonov_filters",
    "tsvd_filters",
]
