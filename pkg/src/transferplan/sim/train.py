"""Training loops for plain source training (erm), uniform domain-adversarial
training (dann) and graph-relational adversarial training (grda).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import ComputationError, ValidationError
from ..selection import Clustering, DeltaReport, LanguageGraph, add_aggregates
from .data import DomainDataset
from .nets import MLP, grad_reverse, graph_reconstruction_loss

MODES = ("erm", "dann", "grda")
METHOD_NAMES = {"grda": "ZSCL-R", "dann": "DANN"}


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "erm"
    width: int = 32
    depth: int = 2
    lam: float = 1.0
    ramp: bool = True
    lr: float = 0.05
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0
    disc_hidden: int = 32
    node_dim: int = 8
    # extra unlabeled minibatch from every source domain for the adversary
    unlabeled_sources: bool = False
    graph: LanguageGraph | None = field(default=None, compare=False)
    label: str = "medoids*"
    scale: str = "small"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.lam < 0:
            raise ValidationError("lambda must be non-negative")
        if self.epochs < 1 or self.batch_size < 1 or self.width < 1 or self.depth < 1:
            raise ValidationError("epochs, batch size, width and depth must be positive")
        if self.lr <= 0:
            raise ValidationError("learning rate must be positive")
        if self.mode == "grda" and self.graph is None:
            raise ValidationError("grda mode needs a domain graph")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("graph")
        return d


@dataclass
class TrainResult:
    mode: str
    seed: int
    accuracy: dict
    f1: dict
    task_loss: list
    adv_loss: list
    sources: list
    targets: list
    label: str = "medoids*"
    scale: str = "small"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    def target_accuracy(self, domains=None) -> float:
        domains = self.targets if domains is None else domains
        return float(np.mean([self.accuracy[d] for d in domains]))

    def target_f1(self, domains=None) -> float:
        domains = self.targets if domains is None else domains
        return float(np.mean([self.f1[d] for d in domains]))


def lambda_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear ramp from 0 to ``cfg.lam`` over the first half of training."""
    if not cfg.ramp:
        return cfg.lam
    half = max(1, total_steps // 2)
    return cfg.lam * min(1.0, step / half)


def _binary_f1(pred: np.ndarray, y: np.ndarray) -> float:
    tp = float(np.sum((pred == 1) & (y == 1)))
    fp = float(np.sum((pred == 1) & (y == 0)))
    fn = float(np.sum((pred == 0) & (y == 1)))
    return 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)


class _Model:
    def __init__(self, input_dim: int, n_domains: int, cfg: TrainConfig):
        g_main = torch.Generator().manual_seed(cfg.seed)
        # own generator: the adversary must not shift encoder/head initialization
        g_adv = torch.Generator().manual_seed(cfg.seed + 7919)
        self.encoder = MLP([input_dim] + [cfg.width] * cfg.depth, g_main, out_act=True)
        self.head = MLP([cfg.width, 1], g_main)
        self.adversary = None
        if cfg.mode == "dann":
            self.adversary = MLP([cfg.width, cfg.disc_hidden, n_domains], g_adv)
        elif cfg.mode == "grda":
            self.adversary = MLP([cfg.width, cfg.disc_hidden, cfg.node_dim], g_adv)

    def parameters(self):
        params = list(self.encoder.parameters()) + list(self.head.parameters())
        if self.adversary is not None:
            params += list(self.adversary.parameters())
        return params

    @torch.no_grad()
    def predict(self, x: np.ndarray) -> np.ndarray:
        logits = self.head(self.encoder(torch.as_tensor(x, dtype=torch.float32)))
        return (logits.squeeze(1) > 0).numpy().astype(float)


def train(datasets: Sequence[DomainDataset], config: TrainConfig,
          eval_sets: Sequence[DomainDataset] | None = None) -> TrainResult:
    """Train on labeled sources, optionally aligning with unlabeled domains.

    Datasets with labels are sources; datasets without labels only enter
    the adversarial objective.  Every step draws ``batch_size`` examples
    from each domain.  Evaluation runs on ``eval_sets`` (labeled), or on
    the labeled training sets when omitted.
    """
    cfg = config
    datasets = list(datasets)
    names = [d.domain for d in datasets]
    if len(set(names)) != len(names):
        raise ValidationError("duplicate domain in datasets")
    src = [i for i, d in enumerate(datasets) if d.labeled]
    tgt = [i for i, d in enumerate(datasets) if not d.labeled]
    if not src:
        raise ValidationError("at least one labeled source dataset is required")
    dims = {d.inputs.shape[1] for d in datasets}
    if len(dims) != 1:
        raise ValidationError("datasets differ in input dimension")
    input_dim = dims.pop()

    adjacency = None
    if cfg.mode == "grda":
        if set(cfg.graph.nodes) != set(names):
            raise ValidationError("graph nodes must equal the domain set")
        order = [cfg.graph.nodes.index(n) for n in names]
        adjacency = torch.as_tensor(np.asarray(cfg.graph.adjacency)[np.ix_(order, order)])

    model = _Model(input_dim, len(datasets), cfg)
    opt = torch.optim.SGD(model.parameters(), lr=cfg.lr)
    rng = np.random.default_rng([cfg.seed, 2])
    X = [torch.as_tensor(d.inputs, dtype=torch.float32) for d in datasets]
    Y = [None if d.labels is None else torch.as_tensor(d.labels, dtype=torch.float32)
         for d in datasets]
    steps = min(len(d.inputs) for d in datasets) // cfg.batch_size
    if steps < 1:
        raise ValidationError("batch_size exceeds the smallest dataset")
    total = steps * cfg.epochs

    task_curve, adv_curve = [], []
    step = 0
    for epoch in range(cfg.epochs):
        perms = [rng.permutation(len(d.inputs)) for d in datasets]
        extra = ([rng.permutation(len(datasets[i].inputs)) for i in src]
                 if cfg.unlabeled_sources and model.adversary is not None else None)
        t_sum = a_sum = 0.0
        for s in range(steps):
            idx = [torch.as_tensor(p[s * cfg.batch_size:(s + 1) * cfg.batch_size]) for p in perms]
            xs = torch.cat([X[i][idx[i]] for i in src])
            ys = torch.cat([Y[i][idx[i]] for i in src])
            e_src = model.encoder(xs)
            task = F.binary_cross_entropy_with_logits(model.head(e_src).squeeze(1), ys)
            loss = task
            if model.adversary is not None:
                lam = lambda_at(step, total, cfg)
                parts = [e_src]
                if tgt:
                    parts.append(model.encoder(torch.cat([X[i][idx[i]] for i in tgt])))
                dom = [torch.full((len(idx[i]),), i, dtype=torch.long) for i in src + tgt]
                if extra is not None:
                    sl = slice(s * cfg.batch_size, (s + 1) * cfg.batch_size)
                    parts.append(model.encoder(torch.cat(
                        [X[i][torch.as_tensor(p[sl])] for i, p in zip(src, extra)])))
                    dom += [torch.full((cfg.batch_size,), i, dtype=torch.long) for i in src]
                dom = torch.cat(dom)
                out = model.adversary(grad_reverse(torch.cat(parts), lam))
                if cfg.mode == "dann":
                    adv = F.cross_entropy(out, dom)
                else:
                    adv = graph_reconstruction_loss(out, dom, adjacency)
                loss = task + adv
                a_sum += float(adv.detach())
            opt.zero_grad()
            loss.backward()
            opt.step()
            t_sum += float(task.detach())
            step += 1
        t_mean, a_mean = t_sum / steps, a_sum / steps
        if not (math.isfinite(t_mean) and math.isfinite(a_mean)):
            raise ComputationError(f"non-finite loss at epoch {epoch}")
        task_curve.append(t_mean)
        adv_curve.append(a_mean)

    evals = list(eval_sets) if eval_sets is not None else [datasets[i] for i in src]
    acc, f1 = {}, {}
    for d in evals:
        if d.labels is None:
            raise ValidationError(f"evaluation set {d.domain} has no labels")
        pred = model.predict(d.inputs)
        acc[d.domain] = float(np.mean(pred == d.labels))
        f1[d.domain] = _binary_f1(pred, d.labels)
    return TrainResult(cfg.mode, cfg.seed, acc, f1, task_curve, adv_curve,
                       [names[i] for i in src], [names[i] for i in tgt], cfg.label, cfg.scale)


def evaluate_transfer(results: Sequence[TrainResult], clustering: Clustering | None = None,
                      task: str = "synthetic") -> DeltaReport:
    """F1 deltas (in points) of adversarial runs over the matching erm runs.

    Runs are matched on (label, scale, seed).  Each label yields one row for
    its whole target set plus, with a clustering, one ``<medoid>*`` row per
    cluster holding targets.  Columns are (scale, ZSCL-R / DANN).
    """
    base = {(r.label, r.scale, r.seed): r for r in results if r.mode == "erm"}
    rows: dict = {}
    labels, scales, methods = [], [], []
    for r in results:
        if r.mode == "erm":
            continue
        key = (r.label, r.scale, r.seed)
        if key not in base:
            raise ValidationError(f"no erm baseline for label={r.label} scale={r.scale} seed={r.seed}")
        b = base[key]
        groups = [(r.label, r.targets)]
        if clustering is not None:
            for i, med in enumerate(clustering.medoids):
                members = [d for d in r.targets if clustering.assignment.get(d) == i]
                if members:
                    groups.append((f"{med}*", members))
        method = METHOD_NAMES[r.mode]
        if method not in methods:
            methods.append(method)
        if r.scale not in scales:
            scales.append(r.scale)
        for label, doms in groups:
            if label not in labels:
                labels.append(label)
            delta = 100 * (r.target_f1(doms) - b.target_f1(doms))
            rows.setdefault((label, r.scale, method), []).append(delta)
    cells = {k: float(np.mean(v)) for k, v in rows.items()}
    order = [m for m in ("ZSCL-R", "DANN") if m in methods]
    return add_aggregates(DeltaReport(task, labels, scales, order, cells))


def curves_csv(results: Sequence[TrainResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode", "seed", "epoch", "task_loss", "adv_loss"])
    for r in results:
        for e, (t, a) in enumerate(zip(r.task_loss, r.adv_loss)):
            w.writerow([r.mode, r.seed, e, repr(t), repr(a)])
    return buf.getvalue()
