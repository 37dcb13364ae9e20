"""Desk-scale simulator for adversarial multi-domain transfer."""

from .data import (DomainDataset, SyntheticTaskSpec, clustered_domains, domain_directions,
                   gen_synthetic, linear_probe_accuracy)
from .nets import grad_reverse, graph_reconstruction_loss
from .scenarios import (divergent_two_cluster, medoid_selection, relational_transfer,
                        three_cluster_spec)
from .train import MODES, TrainConfig, TrainResult, curves_csv, evaluate_transfer, train

__all__ = [
    "DomainDataset", "MODES", "SyntheticTaskSpec", "TrainConfig", "TrainResult",
    "clustered_domains", "curves_csv", "divergent_two_cluster", "domain_directions",
    "evaluate_transfer", "medoid_selection", "relational_transfer", "three_cluster_spec",
    "gen_synthetic", "grad_reverse", "graph_reconstruction_loss", "linear_probe_accuracy", "train",
]
