"""Compressive threshold tomography for N-qudit systems.

Plan a small set of product measurement settings from the measured diagonal
of a density matrix, simulate their counts, and reconstruct the state by
low-rank maximum likelihood.
"""
from .errors import TomographyError
from .generators import ObservableCatalog, build_catalog, eigensystem
from .measurement import (CountsRecord, ReadoutNoiseModel, probabilities, sample_counts,
                          setting_expectation, simulate_plan)
from .planner import (TomographyPlan, build_plan, element_contribution, full_qst_plan,
                      overlap_matrix, overlap_tensor, prune, setting_for_element, sort_by_weight)
from .reconstruction import (FitConfig, FitReport, LikelihoodProblem, fidelity, fit, likelihood,
                             progressive_fit)
from .states import (SparseStateVector, ghz_state, mix, random_circuit_state, to_density,
                     w_state_block_tree, w_state_direct)
from .thresholds import (DiagonalMeasurement, TargetElement, ThresholdPolicy, gini_index,
                         gini_threshold, noise_calibrated_threshold, select_targets)
from .tqst import CostReport, cost_report, tqst_projector

__version__ = "0.1.0"

__all__ = [
    "CostReport", "CountsRecord", "DiagonalMeasurement", "FitConfig", "FitReport",
    "LikelihoodProblem", "ObservableCatalog", "ReadoutNoiseModel", "SparseStateVector",
    "TargetElement", "ThresholdPolicy", "TomographyError", "TomographyPlan", "build_catalog",
    "build_plan", "cost_report", "eigensystem", "element_contribution", "fidelity", "fit",
    "full_qst_plan", "ghz_state", "gini_index", "gini_threshold", "likelihood", "mix",
    "noise_calibrated_threshold", "overlap_matrix", "overlap_tensor", "probabilities",
    "progressive_fit", "prune", "random_circuit_state", "sample_counts", "select_targets",
    "setting_expectation", "setting_for_element", "simulate_plan", "sort_by_weight",
    "to_density", "tqst_projector", "w_state_block_tree", "w_state_direct",
]
