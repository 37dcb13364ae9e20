"""Ready-made synthetic experiments.

``relational_transfer`` compares erm, dann and grda when the labeled
sources form one cluster and the unlabeled targets another.
``medoid_selection`` compares erm trained on the medoid source set with
erm trained on random source sets of the same size.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from ..selection import build_relation_graph, enumerate_configurations
from .data import SyntheticTaskSpec, clustered_domains, gen_synthetic
from .train import TrainConfig, TrainResult, train

# divergent scenario: cluster 1 carries a reversed shortcut and shifted class balance
DIVERGENT_KNOBS = {"cluster_shift": 2.0, "spurious": 1.5, "prior_shift": 1.5}
DIVERGENT_LAMBDA = 2.0


def divergent_two_cluster(seed: int = 0, per_cluster: int = 4,
                          rotation: float = math.pi / 3) -> SyntheticTaskSpec:
    return SyntheticTaskSpec(clustered_domains(2, per_cluster), cluster_rotation=rotation,
                             seed=seed, **DIVERGENT_KNOBS)


def relational_transfer(spec: SyntheticTaskSpec, modes=("erm", "dann", "grda"),
                        source_clusters=(0,), lam: float = DIVERGENT_LAMBDA,
                        **train_kw) -> dict[str, TrainResult]:
    """Train each mode on labeled ``source_clusters``; the rest enter unlabeled.

    Results are evaluated on held-out samples of the unlabeled domains.
    """
    c = spec.clustering
    graph = build_relation_graph(c)
    sources = {l for i in source_clusters for l in c.members(i)}
    data = [d if d.domain in sources else d.unlabeled() for d in gen_synthetic(spec)]
    evals = [d for d in gen_synthetic(spec, "test") if d.domain not in sources]
    out = {}
    for mode in modes:
        cfg = TrainConfig(mode=mode, lam=lam, seed=spec.seed,
                          graph=graph if mode == "grda" else None, **train_kw)
        out[mode] = train(data, cfg, evals)
    return out


def three_cluster_spec(seed: int = 0, rotation: float = math.pi / 3,
                       within_noise: float = 0.3) -> SyntheticTaskSpec:
    return SyntheticTaskSpec(clustered_domains(3, 3), cluster_rotation=rotation,
                             within_noise=within_noise, seed=seed)


def medoid_selection(spec: SyntheticTaskSpec, n_random: int = 5,
                     **train_kw) -> tuple[float, list[float]]:
    """All-domain mean accuracy of erm on the medoid set and on random source sets.

    Random sets have the medoid set's size, exclude the medoid set itself
    and any set inside a single cluster (drawn with ``spec.seed``).
    """
    c = spec.clustering
    train_sets = gen_synthetic(spec)
    test_sets = gen_synthetic(spec, "test")
    configs = enumerate_configurations(c, 1, n_random, seed=spec.seed, n_intra=0,
                                       random_size=c.k)

    def score(sources) -> float:
        data = [d for d in train_sets if d.domain in sources]
        r = train(data, TrainConfig(mode="erm", seed=spec.seed, **train_kw), test_sets)
        return r.target_accuracy(list(c.langs))

    medoid = score(set(c.medoids))
    randoms = [score(cfg.sources) for cfg in configs if cfg.kind == "random"]
    return medoid, randoms


def with_seed(spec: SyntheticTaskSpec, seed: int) -> SyntheticTaskSpec:
    return replace(spec, seed=seed)


def mean_accuracy(results: dict[str, TrainResult]) -> dict[str, float]:
    return {m: float(np.mean(list(r.accuracy.values()))) for m, r in results.items()}
