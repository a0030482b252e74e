"""Explainable k-clustering via randomized threshold trees."""

from .core import (CostReport, InputError, Node, ThresholdCut, ThresholdTree, assign_point,
                   cost_of_tree, cost_to_centers, lp_pow_distance)
from .geometry import (BoundingBox, DimensionIntervalSet, IntervalDecomposition, all_intervals,
                       bounding_box, interval_decomposition, pseudo_distance)
from .samplers import (CutDistribution, min_separated_pair, rng_stream, sample_dp_cut,
                       sample_uniform_cut, theta_inverse_cdf)
from .builders import BuildTrace, build_imm_min_cut, build_lp, build_modified, build_uniform

__all__ = [
    "CostReport", "InputError", "Node", "ThresholdCut", "ThresholdTree", "assign_point",
    "cost_of_tree", "cost_to_centers", "lp_pow_distance",
    "BoundingBox", "DimensionIntervalSet", "IntervalDecomposition", "all_intervals",
    "bounding_box", "interval_decomposition", "pseudo_distance",
    "CutDistribution", "min_separated_pair", "rng_stream", "sample_dp_cut",
    "sample_uniform_cut", "theta_inverse_cdf",
    "BuildTrace", "build_imm_min_cut", "build_lp", "build_modified", "build_uniform",
]
