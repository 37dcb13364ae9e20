"""Synthetic multi-domain binary classification tasks with planted cluster structure.

Every cluster gets a unit label direction in the plane of the first two
input coordinates; successive clusters are rotated by ``cluster_rotation``.
Member domains perturb their cluster direction by ``within_noise`` (medoid
domains keep it exactly).  Inputs are standard normal and the label is the
sign of the input's projection on the domain direction.

Three optional knobs add the domain shift that gives unlabeled data
something to align (all default to zero, which leaves the plain generator):

``cluster_shift``
    mean offset of cluster ``c`` along the last input coordinate,
    ``c * cluster_shift``.  Pure nuisance, carries no label signal.
``spurious``
    within cluster 0 the last coordinate also moves by ``+spurious`` for
    positives and ``-spurious`` for negatives; in every other cluster the
    sign is reversed.  A shortcut that only holds inside cluster 0.
``prior_shift``
    member domains are shifted by ``+/- prior_shift`` along their own label
    direction (alternating by member order), which moves their class
    balance away from 50/50.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ValidationError
from ..selection import Clustering


@dataclass(frozen=True)
class SyntheticTaskSpec:
    clustering: Clustering
    input_dim: int = 8
    samples_per_domain: int = 400
    cluster_rotation: float = 0.0
    within_noise: float = 0.0
    seed: int = 0
    cluster_shift: float = 0.0
    spurious: float = 0.0
    prior_shift: float = 0.0
    test_samples: int = 1000

    def __post_init__(self):
        if self.n_domains < 2:
            raise ValidationError("need at least 2 domains")
        if self.input_dim < 2 or (self.input_dim < 3 and (self.cluster_shift or self.spurious)):
            raise ValidationError("input_dim must be >= 2 (>= 3 with a nuisance coordinate)")
        if not 0 <= self.cluster_rotation <= math.pi / 2 + 1e-12:
            raise ValidationError("cluster_rotation must lie in [0, pi/2]")
        if self.within_noise < 0 or self.prior_shift < 0:
            raise ValidationError("noise and shift magnitudes must be non-negative")
        if self.samples_per_domain < 1 or self.test_samples < 1:
            raise ValidationError("sample counts must be positive")

    @property
    def n_domains(self) -> int:
        return len(self.clustering.langs)

    @property
    def domains(self) -> tuple[str, ...]:
        return self.clustering.langs

    def to_json(self) -> str:
        d = asdict(self)
        d["clustering"] = json.loads(self.clustering.to_json())
        return json.dumps(d, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SyntheticTaskSpec":
        d = json.loads(text)
        d["clustering"] = Clustering.from_json(json.dumps(d["clustering"]))
        return cls(**d)


@dataclass(frozen=True)
class DomainDataset:
    domain: str
    inputs: np.ndarray = field(repr=False)
    labels: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.labels is not None and len(self.labels) != len(self.inputs):
            raise ValidationError(f"{self.domain}: {len(self.labels)} labels for {len(self.inputs)} inputs")

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def unlabeled(self) -> "DomainDataset":
        return DomainDataset(self.domain, self.inputs, None)


def domain_directions(spec: SyntheticTaskSpec) -> dict[str, np.ndarray]:
    """Unit label direction of every domain."""
    rng = np.random.default_rng([spec.seed, 0])
    c = spec.clustering
    out = {}
    for i in range(c.k):
        angle = i * spec.cluster_rotation
        base = np.zeros(spec.input_dim)
        base[0], base[1] = math.cos(angle), math.sin(angle)
        for lang in c.members(i):
            if lang == c.medoids[i] or spec.within_noise == 0:
                out[lang] = base
                continue
            xi = rng.standard_normal(spec.input_dim)
            xi /= np.linalg.norm(xi)
            w = base + spec.within_noise * xi
            out[lang] = w / np.linalg.norm(w)
    return out


def _prior_offsets(spec: SyntheticTaskSpec) -> dict[str, float]:
    c = spec.clustering
    out = {}
    for i in range(c.k):
        sign = 1.0
        for lang in c.members(i):
            if lang == c.medoids[i]:
                out[lang] = 0.0
            else:
                out[lang] = sign * spec.prior_shift
                sign = -sign
    return out


def gen_synthetic(spec: SyntheticTaskSpec, split: str = "train") -> list[DomainDataset]:
    """Labeled datasets for every domain, in clustering order.

    ``split="test"`` draws an independent held-out sample of
    ``spec.test_samples`` per domain from the same label functions.
    """
    if split not in ("train", "test"):
        raise ValidationError(f"unknown split {split!r}")
    n = spec.samples_per_domain if split == "train" else spec.test_samples
    dirs = domain_directions(spec)
    offsets = _prior_offsets(spec)
    c = spec.clustering
    out = []
    for d_idx, lang in enumerate(c.langs):
        rng = np.random.default_rng([spec.seed, 1 + d_idx, 0 if split == "train" else 1])
        cluster = c.assignment[lang]
        w = dirs[lang]
        x = rng.standard_normal((n, spec.input_dim))
        x += offsets[lang] * w
        y = (x @ w > 0).astype(np.float64)
        if spec.cluster_shift or spec.spurious:
            sign = 1.0 if cluster == 0 else -1.0
            x[:, -1] += cluster * spec.cluster_shift + sign * spec.spurious * (2 * y - 1)
        out.append(DomainDataset(lang, x, y))
    return out


def linear_probe_accuracy(train: DomainDataset, test: DomainDataset) -> float:
    """Least-squares linear probe fit on ``train``, accuracy on ``test``."""
    X = np.hstack([train.inputs, np.ones((len(train.inputs), 1))])
    coef, *_ = np.linalg.lstsq(X, 2 * train.labels - 1, rcond=None)
    Xt = np.hstack([test.inputs, np.ones((len(test.inputs), 1))])
    pred = (Xt @ coef > 0).astype(float)
    return float(np.mean(pred == test.labels))


def clustered_domains(n_clusters: int, per_cluster: int, prefix: str = "d") -> Clustering:
    """Clustering over synthetic domain ids ``d00, d01, ...``; first of each group is its medoid."""
    groups, k = [], 0
    for _ in range(n_clusters):
        groups.append([f"{prefix}{k + j:02d}" for j in range(per_cluster)])
        k += per_cluster
    return Clustering.from_groups(groups)
