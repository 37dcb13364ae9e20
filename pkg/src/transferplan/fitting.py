"""Simplex-constrained weight fitting for combined distance metrics.

The objective is the mean predictive score (negated per-source Pearson) of
the blended distance matrix across every score setting supplied.  The
search is an exhaustive simplex lattice followed by deterministic
pairwise-transfer refinement.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .correlation import TransferScoreMatrix, _pearson_rows, _plan
from .distances import DistanceMatrix, _check_weights, blend_rows, canonical_metric
from .errors import ComputationError, ValidationError

MAX_COMPONENTS = 6
REFINE_MIN_STEP = 1e-3


@dataclass(frozen=True)
class MetricWeights:
    components: tuple[str, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        comps = tuple(canonical_metric(c) for c in self.components)
        if len(comps) != len(self.weights):
            raise ValidationError("components and weights differ in length")
        if len(set(comps)) != len(comps):
            raise ValidationError("duplicate component metric")
        w = _check_weights(self.weights)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", tuple(float(v) for v in w))

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.components, self.weights))


@dataclass(frozen=True)
class FitResult:
    weights: MetricWeights
    objective: float
    candidates_evaluated: int

    def to_json(self) -> str:
        return json.dumps({
            "components": list(self.weights.components),
            "weights": list(self.weights.weights),
            "objective": self.objective,
            "candidates_evaluated": self.candidates_evaluated,
        }, indent=2) + "\n"


def preset_dcomb() -> MetricWeights:
    """Joint combined metric: 0.4 anderberg-syntax + 0.2 inner-phonology + 0.4 anderberg-inventory."""
    return MetricWeights(("anderberg-syntax", "inner-phonology", "anderberg-inventory"),
                         (0.4, 0.2, 0.4))


def simplex_lattice(n: int, step: float) -> np.ndarray:
    """All weight vectors on the simplex with resolution ``step``, lexicographically ascending."""
    m = round(1 / step)
    if step <= 0 or abs(m * step - 1) > 1e-9:
        raise ValidationError(f"grid step {step} does not divide 1 evenly")
    rows = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            rows.append(prefix + [remaining])
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, slots - 1)

    rec([], m, n)
    return np.array(rows, dtype=float) / m


class _Objective:
    """Batched evaluator: mean predictive score for many weight vectors at once."""

    def __init__(self, components: Sequence[DistanceMatrix], S_list: Sequence[TransferScoreMatrix],
                 exclude_self: bool = True):
        if not components:
            raise ValidationError("no component metrics given")
        if not S_list:
            raise ValidationError("no score matrices given")
        langs = components[0].langs
        for c in components:
            if c.langs != langs:
                raise ValidationError(f"{c.metric}: language order differs from {components[0].metric}")
            if not c.normalized:
                raise ValidationError(f"{c.metric}: component matrices must be normalized")
        stacked = np.stack([c.values for c in components])
        self.n_components = len(components)
        self.settings = []
        for S in S_list:
            plan = _plan(components[0], S, exclude_self)
            rows = [(stacked[:, p.d_row, :][:, p.d_cols], p.scores) for p in plan]
            self.settings.append(rows)
        self.evaluations = 0

    def __call__(self, W: np.ndarray) -> np.ndarray:
        W = np.atleast_2d(np.asarray(W, dtype=float))
        self.evaluations += W.shape[0]
        per_setting = []
        for rows in self.settings:
            rho = np.stack([-_pearson_rows(blend_rows(W, R), y) for R, y in rows], axis=1)
            defined = ~np.isnan(rho)
            cnt = defined.sum(axis=1)
            total = np.where(defined, rho, 0.0).sum(axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                per_setting.append(np.where(cnt > 0, total / np.maximum(cnt, 1), np.nan))
        return np.mean(np.stack(per_setting, axis=1), axis=1)


def _select(components, weights) -> list[DistanceMatrix]:
    by_name = {c.metric: c for c in components}
    try:
        return [by_name[m] for m in weights.components]
    except KeyError as exc:
        raise ValidationError(f"no component matrix for metric {exc.args[0]}") from None


def objective(weights: MetricWeights, components: Sequence[DistanceMatrix],
              S_list: Sequence[TransferScoreMatrix], exclude_self: bool = True) -> float:
    """Mean predictive score of the blended metric across ``S_list``.

    ``components`` may be a superset; they are matched to ``weights`` by metric id.
    """
    mats = _select(components, weights)
    return float(_Objective(mats, S_list, exclude_self)(np.array(weights.weights))[0])


def _best_index(W: np.ndarray, vals: np.ndarray) -> int:
    """Highest objective; ties go to the lexicographically smallest weight vector."""
    finite = ~np.isnan(vals)
    if not finite.any():
        return -1
    top = np.max(vals[finite])
    tied = np.flatnonzero(finite & (vals == top))
    order = sorted(tied, key=lambda i: tuple(W[i]))
    return int(order[0])


def fit_weights(components: Sequence[DistanceMatrix], S_list: Sequence[TransferScoreMatrix],
                grid_step: float = 0.05, exclude_self: bool = True,
                refine: bool = True) -> FitResult:
    if not components:
        raise ValidationError("fit_weights needs at least one component")
    if len(components) > MAX_COMPONENTS:
        raise ValidationError(f"at most {MAX_COMPONENTS} components are supported")
    names = tuple(c.metric for c in components)
    f = _Objective(list(components), S_list, exclude_self)
    W = simplex_lattice(len(components), grid_step)
    vals = f(W)
    i = _best_index(W, vals)
    if i < 0:
        raise ComputationError("objective is undefined for every lattice candidate")
    w, best = W[i].copy(), float(vals[i])

    h = grid_step / 2
    n = len(components)
    while refine and n > 1 and h >= REFINE_MIN_STEP:
        moves = []
        for a in range(n):
            for b in range(n):
                if a != b and w[b] >= h:
                    cand = w.copy()
                    cand[a] += h
                    cand[b] -= h
                    moves.append(cand)
        if not moves:
            h /= 2
            continue
        M = np.array(moves)
        mv = f(M)
        j = _best_index(M, mv)
        if j >= 0 and mv[j] > best:
            w, best = M[j], float(mv[j])
        else:
            h /= 2

    w = np.clip(w, 0.0, None)
    renorm = w / w.sum()
    if float(f(renorm)[0]) >= best:
        w = renorm
    final = float(f(w)[0])
    return FitResult(MetricWeights(names, tuple(w)), final, f.evaluations)


def fits_to_csv(fits: dict) -> str:
    """Per-setting weight vectors: one row per (task, scale), one column per metric."""
    metrics = sorted({m for r in fits.values() for m in r.weights.components})
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["task", "scale", *metrics, "objective"])
    for (task, scale), r in fits.items():
        d = r.weights.as_dict()
        wr.writerow([task, scale, *(repr(d.get(m, 0.0)) for m in metrics),
                     "" if math.isnan(r.objective) else repr(r.objective)])
    return buf.getvalue()
