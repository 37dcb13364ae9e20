"""Typology-guided source selection and adversarial transfer planning."""

from .correlation import TransferScoreMatrix, distance_transfer_correlation, load_score_matrix
from .distances import DistanceMatrix, build_distance_matrix, combined_distance
from .errors import ComputationError, IncomparablePairError, TransferPlanError, ValidationError
from .features import FeatureClass, FeatureTable, FeatureVector, load_feature_table
from .fitting import MetricWeights, fit_weights, preset_dcomb
from .selection import Clustering, build_relation_graph, pam, select_k

__version__ = "0.1.0"

__all__ = [
    "Clustering", "ComputationError", "DistanceMatrix", "FeatureClass", "FeatureTable",
    "FeatureVector", "IncomparablePairError", "MetricWeights", "TransferPlanError",
    "TransferScoreMatrix", "ValidationError", "build_distance_matrix", "build_relation_graph",
    "combined_distance", "distance_transfer_correlation", "fit_weights", "load_feature_table",
    "load_score_matrix", "pam", "preset_dcomb", "select_k",
]
