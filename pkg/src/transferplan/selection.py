"""Source-language selection: k-medoids clustering, relation graphs,
transfer configurations and delta reports against random baselines.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .distances import DistanceMatrix
from .errors import ComputationError, ValidationError

BRUTE_FORCE_LIMIT = 10 ** 6
TASK_AVG = "task_avg"
MODEL_AVG = "model_avg"


@dataclass(frozen=True)
class Clustering:
    """k-medoids partition.  Cluster ``i`` is the one whose medoid is ``medoids[i]``."""

    langs: tuple[str, ...]
    medoids: tuple[str, ...]
    assignment: Mapping[str, int] = field(repr=False)
    cost: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "langs", tuple(self.langs))
        object.__setattr__(self, "medoids", tuple(self.medoids))
        object.__setattr__(self, "assignment", dict(self.assignment))
        if set(self.assignment) != set(self.langs):
            raise ValidationError("every language must be assigned exactly once")
        for i, m in enumerate(self.medoids):
            if self.assignment.get(m) != i:
                raise ValidationError(f"medoid {m} is not assigned to its own cluster {i}")
        if any(not 0 <= c < self.k for c in self.assignment.values()):
            raise ValidationError("cluster index out of range")

    @property
    def k(self) -> int:
        return len(self.medoids)

    def members(self, cluster: int) -> tuple[str, ...]:
        return tuple(l for l in self.langs if self.assignment[l] == cluster)

    def clusters(self) -> list[tuple[str, ...]]:
        return [self.members(i) for i in range(self.k)]

    def sizes(self) -> list[int]:
        return [len(c) for c in self.clusters()]

    def to_json(self) -> str:
        return json.dumps({
            "k": self.k, "medoids": list(self.medoids),
            "assignment": {l: self.assignment[l] for l in self.langs},
            "cost": self.cost,
        }, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Clustering":
        d = json.loads(text)
        assignment = d["assignment"]
        return cls(tuple(assignment), tuple(d["medoids"]), assignment, float(d.get("cost", 0.0)))

    @classmethod
    def from_groups(cls, groups: Sequence[Sequence[str]]) -> "Clustering":
        """Build from explicit groups; the first language of each group is its medoid."""
        langs, assignment = [], {}
        for i, g in enumerate(groups):
            for l in g:
                langs.append(l)
                assignment[l] = i
        return cls(tuple(langs), tuple(g[0] for g in groups), assignment)


def _symmetric_values(D: DistanceMatrix) -> np.ndarray:
    v = np.asarray(D.values, dtype=float)
    if not np.array_equal(v, v.T):
        warnings.warn(f"{D.metric}: asymmetric distance matrix symmetrized by averaging",
                      stacklevel=3)
        v = (v + v.T) / 2
    return v


def _cost(V: np.ndarray, medoids: Sequence[int]) -> tuple[float, np.ndarray]:
    """Total member-to-medoid distance; medoids cost nothing (self-distance ignored)."""
    sub = V[:, list(medoids)]
    nearest = np.argmin(sub, axis=1)
    for c, m in enumerate(medoids):
        nearest[m] = c
    d = sub[np.arange(len(V)), nearest]
    d[list(medoids)] = 0.0
    return float(d.sum()), nearest


def _clustering(D, V, medoids) -> Clustering:
    order = sorted(medoids)
    cost, nearest = _cost(V, order)
    assignment = {D.langs[i]: int(nearest[i]) for i in range(len(D.langs))}
    return Clustering(D.langs, tuple(D.langs[m] for m in order), assignment, cost)


def _check_k(D, k):
    n = len(D.langs)
    if not 1 <= k <= n:
        raise ValidationError(f"k={k} out of range 1..{n}")


def _swap(V, medoids, cost, priority, max_iter, history):
    k = len(medoids)
    for _ in range(max_iter):
        best_swap, best_cost = None, cost
        for pos in range(k):
            for cand in priority:
                if cand in medoids:
                    continue
                trial = medoids.copy()
                trial[pos] = cand
                c, _ = _cost(V, trial)
                if c < best_cost - 1e-12:
                    best_swap, best_cost = trial, c
        if best_swap is None:
            break
        medoids, cost = best_swap, best_cost
        if history is not None:
            history.append(cost)
    return medoids, cost


def pam(D: DistanceMatrix, k: int, seed: int = 0, n_init: int = 10, max_iter: int = 1000,
        history: list | None = None) -> Clustering:
    """Partitioning Around Medoids: greedy BUILD then best-improvement SWAP.

    SWAP also runs from ``n_init`` seeded random medoid sets and the
    cheapest local optimum wins (BUILD's on ties).  ``history``, when a
    list, receives the cost after BUILD and after every accepted swap of
    the BUILD-started run.
    """
    _check_k(D, k)
    V = _symmetric_values(D)
    n = len(V)
    rng = np.random.default_rng(seed)
    priority = [int(i) for i in rng.permutation(n)]

    medoids: list[int] = []
    for _ in range(k):
        best, best_cost = None, math.inf
        for cand in priority:
            if cand in medoids:
                continue
            c, _ = _cost(V, medoids + [cand])
            if c < best_cost:
                best, best_cost = cand, c
        medoids.append(best)
    cost, _ = _cost(V, medoids)
    if history is not None:
        history.append(cost)
    medoids, cost = _swap(V, medoids, cost, priority, max_iter, history)

    if k < n:
        for _ in range(n_init):
            start = [int(i) for i in rng.choice(n, size=k, replace=False)]
            c0, _ = _cost(V, start)
            m, c = _swap(V, start, c0, priority, max_iter, None)
            if c < cost - 1e-12:
                medoids, cost = m, c
    return _clustering(D, V, medoids)


def brute_force_medoids(D: DistanceMatrix, k: int) -> Clustering:
    """Globally optimal medoid set by enumeration; ties go to the lexicographically smallest set."""
    _check_k(D, k)
    n = len(D.langs)
    if math.comb(n, k) > BRUTE_FORCE_LIMIT:
        raise ValidationError(f"C({n},{k}) exceeds the brute-force limit of {BRUTE_FORCE_LIMIT}")
    V = _symmetric_values(D)
    best, best_cost = None, math.inf
    for combo in itertools.combinations(range(n), k):
        c, _ = _cost(V, combo)
        if c < best_cost:
            best, best_cost = combo, c
    return _clustering(D, V, best)


def count_medoid_sets(n: int, k: int) -> int:
    return sum(1 for _ in itertools.combinations(range(n), k))


def select_k(D: DistanceMatrix, min_size: int = 3, seed: int = 0) -> tuple[int, Clustering]:
    """Largest k whose PAM clustering gives every cluster at least ``min_size`` members."""
    n = len(D.langs)
    if min_size < 1 or n < min_size:
        raise ValidationError(f"need at least min_size={min_size} languages, got {n}")
    for k in range(n // min_size, 0, -1):
        c = pam(D, k, seed)
        if min(c.sizes()) >= min_size:
            return k, c
    raise ComputationError("no feasible k")  # unreachable: k=1 always satisfies


@dataclass(frozen=True)
class LanguageGraph:
    nodes: tuple[str, ...]
    adjacency: np.ndarray = field(repr=False)
    role: Mapping[str, str] = field(default_factory=dict)

    def edges(self) -> list[tuple[str, str]]:
        n = len(self.nodes)
        return [(self.nodes[i], self.nodes[j]) for i in range(n) for j in range(i + 1, n)
                if self.adjacency[i, j]]

    def to_json(self) -> str:
        return json.dumps({
            "nodes": list(self.nodes),
            "adjacency": self.adjacency.astype(int).tolist(),
            "role": {l: self.role[l] for l in self.nodes},
        }, indent=2) + "\n"

    def to_dot(self) -> str:
        lines = ["graph languages {"]
        for l in self.nodes:
            shape = "doublecircle" if self.role.get(l) == "medoid" else "circle"
            lines.append(f'  {l} [shape={shape}];')
        for a, b in self.edges():
            red = self.role.get(a) == "medoid" and self.role.get(b) == "medoid"
            lines.append(f"  {a} -- {b}" + (" [color=red];" if red else ";"))
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_relation_graph(c: Clustering) -> LanguageGraph:
    """Each member joined to its own medoid, plus a clique over the medoids."""
    idx = {l: i for i, l in enumerate(c.langs)}
    A = np.zeros((len(c.langs), len(c.langs)), dtype=np.int8)
    for l in c.langs:
        m = c.medoids[c.assignment[l]]
        if l != m:
            A[idx[l], idx[m]] = A[idx[m], idx[l]] = 1
    for a, b in itertools.combinations(c.medoids, 2):
        A[idx[a], idx[b]] = A[idx[b], idx[a]] = 1
    role = {l: "medoid" if l in c.medoids else "member" for l in c.langs}
    return LanguageGraph(c.langs, A, role)


def graph_diameter(g: LanguageGraph) -> int:
    """Longest shortest path, by BFS from every node."""
    n = len(g.nodes)
    nbrs = [np.flatnonzero(g.adjacency[i]) for i in range(n)]
    diameter = 0
    for src in range(n):
        dist = [-1] * n
        dist[src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in nbrs[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        if min(dist) < 0:
            raise ComputationError("graph is disconnected")
        diameter = max(diameter, max(dist))
    return diameter


@dataclass(frozen=True)
class TransferConfiguration:
    kind: str
    sources: frozenset
    targets: frozenset
    label: str = ""

    KINDS = ("inter_cluster", "intra_cluster", "random")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown configuration kind {self.kind!r}")
        if not self.sources:
            raise ValidationError("a configuration needs at least one source language")
        object.__setattr__(self, "sources", frozenset(self.sources))
        object.__setattr__(self, "targets", frozenset(self.targets))

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "label": self.label, "sources": sorted(self.sources),
                "targets": sorted(self.targets)}


def enumerate_configurations(c: Clustering, n_sources: int, n_random: int, seed: int = 0,
                             n_intra: int = 3, random_size: int | None = None
                             ) -> list[TransferConfiguration]:
    """Inter-cluster, intra-cluster and random transfer configurations.

    One inter-cluster configuration (all medoids to all languages); up to
    ``n_intra`` distinct intra-cluster source sets of size ``n_sources`` per
    cluster; ``n_random`` random source sets of size ``random_size``
    (default ``n_sources``) that are neither the medoid set nor contained
    in a single cluster.
    """
    clusters = c.clusters()
    if n_sources < 1 or n_sources > min(len(m) for m in clusters):
        raise ValidationError(f"N_s={n_sources} exceeds the smallest cluster size {min(c.sizes())}")
    rng = np.random.default_rng(seed)
    everyone = frozenset(c.langs)
    medoid_set = frozenset(c.medoids)
    configs = [TransferConfiguration("inter_cluster", medoid_set, everyone, "medoids*")]

    for i, members in enumerate(clusters):
        subsets = list(itertools.combinations(members, n_sources))
        take = min(n_intra, len(subsets))
        picks = sorted(rng.choice(len(subsets), size=take, replace=False))
        for p in picks:
            configs.append(TransferConfiguration(
                "intra_cluster", frozenset(subsets[p]), frozenset(members), f"{c.medoids[i]}*"))

    size = n_sources if random_size is None else random_size
    if n_random:
        cluster_sets = [frozenset(m) for m in clusters]
        eligible = [frozenset(s) for s in itertools.combinations(c.langs, size)
                    if frozenset(s) != medoid_set
                    and not any(frozenset(s) <= m for m in cluster_sets)]
        if n_random > len(eligible):
            raise ValidationError(f"only {len(eligible)} eligible random configurations, "
                                  f"{n_random} requested")
        picks = sorted(rng.choice(len(eligible), size=n_random, replace=False))
        for p in picks:
            configs.append(TransferConfiguration("random", eligible[p], everyone, "random"))
    return configs


@dataclass
class DeltaReport:
    """Table of F1 deltas: rows are configuration labels, columns (scale, method).

    Aggregate rows/columns use the labels ``task_avg`` and ``model_avg``.
    """

    task: str
    labels: list[str]
    scales: list[str]
    methods: list[str] = field(default_factory=lambda: ["delta"])
    cells: dict = field(default_factory=dict)  # (label, scale, method) -> float

    def value(self, label, scale, method=None) -> float:
        return self.cells[(label, scale, method or self.methods[0])]

    def rows(self) -> list[tuple[str, str, str, float]]:
        return [(l, s, m, self.cells[(l, s, m)])
                for l in self.labels for s in self.scales for m in self.methods
                if (l, s, m) in self.cells]


def add_aggregates(report: DeltaReport) -> DeltaReport:
    """Fill missing ``model_avg`` column and ``task_avg`` row cells with means.

    Cells already present are kept verbatim.
    """
    base_labels = [l for l in report.labels if l != TASK_AVG]
    base_scales = [s for s in report.scales if s != MODEL_AVG]
    cells = dict(report.cells)
    for m in report.methods:
        for l in base_labels:
            if (l, MODEL_AVG, m) not in cells:
                vals = [cells[(l, s, m)] for s in base_scales if (l, s, m) in cells]
                if vals:
                    cells[(l, MODEL_AVG, m)] = float(np.mean(vals))
        for s in base_scales + [MODEL_AVG]:
            if (TASK_AVG, s, m) not in cells:
                vals = [cells[(l, s, m)] for l in base_labels if (l, s, m) in cells]
                if vals:
                    cells[(TASK_AVG, s, m)] = float(np.mean(vals))
    return DeltaReport(report.task, base_labels + [TASK_AVG], base_scales + [MODEL_AVG],
                       list(report.methods), cells)


def delta_report(runs: Iterable, task: str = "", scales: Sequence[str] | None = None
                 ) -> DeltaReport:
    """Mean configuration F1 minus mean random F1, per (configuration label, scale).

    ``runs`` holds ``(label, kind, scale, f1)`` tuples; every scale needs at
    least one ``random`` run.
    """
    runs = list(runs)
    seen_scales = []
    for _, _, s, _ in runs:
        if s not in seen_scales:
            seen_scales.append(s)
    scales = list(scales) if scales is not None else seen_scales
    baseline = {}
    for s in scales:
        vals = [f for _, kind, sc, f in runs if kind == "random" and sc == s]
        if not vals:
            raise ValidationError(f"no random baseline run for scale {s!r}")
        baseline[s] = float(np.mean(vals))
    labels = []
    grouped: dict = {}
    for label, kind, s, f in runs:
        if kind == "random":
            continue
        if label not in labels:
            labels.append(label)
        grouped.setdefault((label, s), []).append(f)
    cells = {}
    for (label, s), vals in grouped.items():
        if s in baseline:
            cells[(label, s, "delta")] = float(np.mean(vals)) - baseline[s]
    for v in cells.values():
        if not math.isfinite(v):
            raise ComputationError("non-finite delta")
    return add_aggregates(DeltaReport(task, labels, scales, ["delta"], cells))


def fmt1(v: float) -> str:
    s = f"{v:.1f}"
    return "0.0" if s == "-0.0" else s


def delta_table_csv(reports: Sequence[DeltaReport], method_names: Mapping[str, str] | None = None
                    ) -> str:
    """Render reports in the published table layout (one decimal place)."""
    method_names = method_names or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    first = reports[0]
    single = first.methods == ["delta"]
    header = ["task", "config"]
    for s in first.scales:
        for m in first.methods:
            name = s.upper()
            header.append(name if single else f"{name}:{method_names.get(m, m)}")
    w.writerow(header)
    for r in reports:
        for l in r.labels:
            row = [r.task, l]
            for s in r.scales:
                for m in r.methods:
                    v = r.cells.get((l, s, m))
                    row.append("" if v is None else fmt1(v))
            w.writerow(row)
    return buf.getvalue()


def load_delta_csv(text: str) -> list[DeltaReport]:
    """Parse long-format delta rows ``task,config,scale,method,delta``.

    ``method`` may be blank for single-method tables.  Aggregate cells that
    are present are rendered as given; missing ones are computed.
    """
    reader = csv.DictReader(io.StringIO(text))
    need = {"task", "config", "scale", "delta"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise ValidationError(f"delta CSV needs columns {sorted(need)} (+ optional 'method')")
    by_task: dict[str, DeltaReport] = {}
    for lineno, row in enumerate(reader, start=2):
        task = row["task"].strip()
        label = row["config"].strip()
        scale = row["scale"].strip().lower()
        method = (row.get("method") or "").strip() or "delta"
        try:
            v = float(row["delta"])
        except ValueError:
            raise ValidationError(f"line {lineno}: non-numeric delta {row['delta']!r}") from None
        if not math.isfinite(v):
            raise ValidationError(f"line {lineno}: delta must be finite")
        rep = by_task.setdefault(task, DeltaReport(task, [], [], [], {}))
        if label not in rep.labels:
            rep.labels.append(label)
        if scale not in rep.scales:
            rep.scales.append(scale)
        if method not in rep.methods:
            rep.methods.append(method)
        rep.cells[(label, scale, method)] = v
    if not by_task:
        raise ValidationError("delta CSV has no rows")
    return [add_aggregates(r) for r in by_task.values()]


def aggregate_discrepancies(report: DeltaReport, tol: float = 0.1) -> list[str]:
    """Supplied aggregate cells that differ from the recomputed mean by more than ``tol``."""
    plain = DeltaReport(report.task, list(report.labels), list(report.scales), list(report.methods),
                        {k: v for k, v in report.cells.items()
                         if k[0] != TASK_AVG and k[1] != MODEL_AVG})
    plain = add_aggregates(plain)
    out = []
    for key, v in report.cells.items():
        if key in plain.cells and (key[0] == TASK_AVG or key[1] == MODEL_AVG):
            if abs(plain.cells[key] - v) > tol:
                out.append(f"{report.task} {key}: given {v}, recomputed {plain.cells[key]:.3f}")
    return out


def load_runs_csv(text: str) -> dict[str, list]:
    """Parse raw run scores ``task,config,kind,scale,f1`` grouped by task."""
    reader = csv.DictReader(io.StringIO(text))
    need = {"task", "config", "kind", "scale", "f1"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise ValidationError(f"run CSV needs columns {sorted(need)}")
    out: dict[str, list] = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            f1 = float(row["f1"])
        except ValueError:
            raise ValidationError(f"line {lineno}: non-numeric f1") from None
        out.setdefault(row["task"].strip(), []).append(
            (row["config"].strip(), row["kind"].strip(), row["scale"].strip().lower(), f1))
    return out
