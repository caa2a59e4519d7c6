"""Elastic shape analysis of spherically parametrized surfaces.

Geodesics and distances under the split elastic metric on one-forms,
modulo reparametrization and rotation, plus SRNF comparisons and
Karcher means.
"""
from .diffeo import build_map, compose, jacobian_det, resample, step_bound
from .energy import DiscretePath, energy_parametrized, linear_path, path_length
from .grid import GridError, SphericalGrid, build_grid, check_surface, integrate
from .harmonics import surface_basis, vectorfield_basis
from .metric import (FULL_WEIGHTS, SRNF_WEIGHTS, MetricWeights, RankDeficiencyError,
                     decompose, split_metric, srnf, srnf_l2_distance)
from .optim import OptimizeConfig, minimize
from .pipelines import (MatchConfig, MatchResult, initialize_reparam, karcher_mean, match,
                        match_mod_rigid, match_parametrized, match_unparametrized_cd,
                        match_unparametrized_joint, srnf_comparison)
from .shapes import synth_shape

__version__ = "0.1.0"

__all__ = [
    "build_map", "compose", "jacobian_det", "resample", "step_bound",
    "DiscretePath", "energy_parametrized", "linear_path", "path_length",
    "GridError", "SphericalGrid", "build_grid", "check_surface", "integrate",
    "surface_basis", "vectorfield_basis",
    "FULL_WEIGHTS", "SRNF_WEIGHTS", "MetricWeights", "RankDeficiencyError",
    "decompose", "split_metric", "srnf", "srnf_l2_distance",
    "OptimizeConfig", "minimize",
    "MatchConfig", "MatchResult", "initialize_reparam", "karcher_mean", "match",
    "match_mod_rigid", "match_parametrized", "match_unparametrized_cd",
    "match_unparametrized_joint", "srnf_comparison",
    "synth_shape",
]
