"""Distance-versus-transfer correlation analysis.

The predictive score of a distance metric for one source language is the
negated Pearson correlation between its distance row and the transfer F1
row, so that a good predictor scores close to +1.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .distances import (BASE_METRICS, DistanceMatrix, all_base_matrices, canonical_metric,
                        shared_languages)
from .errors import ComputationError, TransferPlanError, ValidationError
from .features import check_language

log = logging.getLogger(__name__)

SCALES = ("small", "base", "large")


@dataclass(frozen=True)
class TransferScoreMatrix:
    """Source x target F1 scores for one (task, model scale) experiment."""

    task: str
    scale: str
    langs_src: tuple[str, ...]
    langs_tgt: tuple[str, ...]
    f1: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.scale not in SCALES:
            raise ValidationError(f"scale must be one of {SCALES}, got {self.scale!r}")
        src = tuple(check_language(l) for l in self.langs_src)
        tgt = tuple(check_language(l) for l in self.langs_tgt)
        if len(src) < 2 or len(tgt) < 2:
            raise ValidationError("score matrix needs at least 2 source and 2 target languages")
        if len(set(src)) != len(src) or len(set(tgt)) != len(tgt):
            raise ValidationError("duplicate language in score matrix")
        f1 = np.array(self.f1, dtype=float)
        if f1.shape != (len(src), len(tgt)):
            raise ValidationError(f"score shape {f1.shape} does not match {len(src)}x{len(tgt)}")
        obs = f1[~np.isnan(f1)]
        if np.any(~np.isfinite(obs)) or np.any(obs < 0) or np.any(obs > 100):
            raise ValidationError("F1 scores must lie in [0, 100]")
        f1.setflags(write=False)
        object.__setattr__(self, "langs_src", src)
        object.__setattr__(self, "langs_tgt", tgt)
        object.__setattr__(self, "f1", f1)

    @property
    def setting(self) -> tuple[str, str]:
        return (self.task, self.scale)


def load_score_matrix(path) -> TransferScoreMatrix:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"score file not found: {path}")
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    meta = {}
    if lines and lines[0].startswith("#"):
        for tok in lines.pop(0)[1:].split():
            k, _, v = tok.partition("=")
            meta[k] = v
    if "task" not in meta or "scale" not in meta:
        raise ValidationError(f"{path}: missing '# task=<t> scale=<s>' metadata line")
    if not lines:
        raise ValidationError(f"{path}: no score rows")
    header = [h.strip() for h in lines[0].split(",")]
    if header[0] != "src\\tgt":
        raise ValidationError(f"{path}: header must start with 'src\\tgt'")
    tgt = header[1:]
    src, rows = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(header):
            raise ValidationError(f"{path}:{lineno}: expected {len(header)} cells, got {len(cells)}")
        src.append(cells[0])
        try:
            rows.append([math.nan if c == "NA" else float(c) for c in cells[1:]])
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: non-numeric score") from None
    return TransferScoreMatrix(meta["task"], meta["scale"], tuple(src), tuple(tgt), np.array(rows))


def save_score_matrix(S: TransferScoreMatrix, path) -> None:
    lines = [f"# task={S.task} scale={S.scale}", "src\\tgt," + ",".join(S.langs_tgt)]
    for i, s in enumerate(S.langs_src):
        cells = ["NA" if np.isnan(v) else repr(float(v)) for v in S.f1[i]]
        lines.append(s + "," + ",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def pearson(xs, ys) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("pearson needs two 1-d sequences of equal length")
    if x.size < 2:
        raise ValidationError("pearson needs at least 2 observations")
    r = _pearson_rows(x[None], y)[0]
    if math.isnan(r):
        raise ComputationError("pearson is undefined for a zero-variance input")
    return r


def _pearson_rows(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pearson of every row of ``X`` against ``y``; NaN where a variance is zero."""
    xc = X - X.mean(axis=-1, keepdims=True)
    yc = y - y.mean()
    sxx = np.sum(xc * xc, axis=-1)
    syy = np.sum(yc * yc)
    sxy = np.sum(xc * yc, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = sxy / np.sqrt(sxx * syy)
    r = np.where((sxx == 0) | (syy == 0), np.nan, r)
    return np.clip(r, -1.0, 1.0)


@dataclass
class CorrelationReport:
    metric: str
    task: str | None = None
    scale: str | None = None
    per_source: dict = field(default_factory=dict)   # lang -> float, or None if undefined
    mean: float = math.nan
    n_undefined: int = 0
    error: str | None = None

    @property
    def settings(self) -> list[tuple[str, str]]:
        return [(self.task, self.scale)]

    def to_dict(self) -> dict:
        return {
            "metric": self.metric, "task": self.task, "scale": self.scale,
            "per_source": self.per_source,
            "mean": None if math.isnan(self.mean) else self.mean,
            "n_undefined": self.n_undefined, "error": self.error,
        }


@dataclass(frozen=True)
class _SourceRow:
    """Index plan for one source language: which distance columns pair with which scores."""

    source: str
    d_row: int
    d_cols: np.ndarray
    scores: np.ndarray


def _plan(D: DistanceMatrix, S: TransferScoreMatrix, exclude_self: bool) -> list[_SourceRow]:
    d_index = {l: i for i, l in enumerate(D.langs)}
    plan = []
    for si, s in enumerate(S.langs_src):
        if s not in d_index:
            continue
        cols, scores = [], []
        for ti, t in enumerate(S.langs_tgt):
            if t not in d_index or (exclude_self and t == s):
                continue
            v = S.f1[si, ti]
            if np.isnan(v):
                continue
            cols.append(d_index[t])
            scores.append(v)
        if len(cols) < 3:
            raise ComputationError(
                f"source {s}: only {len(cols)} shared targets with scores (need at least 3)")
        plan.append(_SourceRow(s, d_index[s], np.array(cols), np.array(scores)))
    if not plan:
        raise ComputationError("distance matrix and score matrix share no source language")
    return plan


def _row_scores(plan: list[_SourceRow], row_values) -> np.ndarray:
    """Predictive scores, shape (n_candidates, n_sources).

    ``row_values(src_row)`` returns the candidate distance rows restricted to
    the plan's columns, shape (n_candidates, n_targets).
    """
    return np.stack([-_pearson_rows(row_values(p), p.scores) for p in plan], axis=1)


def _summarize(metric, S, plan, rho: np.ndarray) -> CorrelationReport:
    per = {}
    for p, r in zip(plan, rho):
        per[p.source] = None if np.isnan(r) else float(r)
    defined = [v for v in per.values() if v is not None]
    n_undef = len(per) - len(defined)
    if n_undef:
        log.warning("%s on %s/%s: %d source(s) with zero-variance rows excluded from the mean",
                    metric, S.task, S.scale, n_undef)
    mean = float(np.mean(defined)) if defined else math.nan
    return CorrelationReport(metric, S.task, S.scale, per, mean, n_undef)


def distance_transfer_correlation(D: DistanceMatrix, S: TransferScoreMatrix,
                                  exclude_self: bool = True, pooled: bool = False
                                  ) -> CorrelationReport:
    """Per-source predictive score of a distance matrix for transfer F1.

    For each source language, rho* = -pearson(distance row, score row) over
    the shared targets with observed scores; the report mean averages the
    defined per-source values.  With ``pooled`` a single correlation over
    all (source, target) pairs is reported as the mean instead.
    """
    plan = _plan(D, S, exclude_self)
    if pooled:
        d = np.concatenate([D.values[p.d_row, p.d_cols] for p in plan])
        y = np.concatenate([p.scores for p in plan])
        r = -_pearson_rows(d[None], y)[0]
        if np.isnan(r):
            raise ComputationError(f"{D.metric}: pooled correlation undefined (zero variance)")
        return CorrelationReport(D.metric, S.task, S.scale, {}, float(r), 0)
    rho = _row_scores(plan, lambda p: D.values[p.d_row, p.d_cols][None])[0]
    return _summarize(D.metric, S, plan, rho)


def _setting_key(S: TransferScoreMatrix):
    return (S.task, SCALES.index(S.scale))


def correlation_sweep(tables, S_list: Sequence[TransferScoreMatrix],
                      metrics: Sequence[str] = BASE_METRICS, exclude_self: bool = True,
                      extra: Sequence[DistanceMatrix] = (), pooled: bool = False
                      ) -> list[CorrelationReport]:
    """One report per (metric, task, scale), ordered by metric then task then scale.

    A metric that cannot be built yields reports carrying ``error``; the
    remaining metrics are unaffected.
    """
    settings = sorted(S_list, key=_setting_key)
    langs = shared_languages(list(tables.values())) if tables else None
    matrices: dict[str, DistanceMatrix | Exception] = {}
    for metric in metrics:
        name = canonical_metric(metric)
        try:
            matrices[name] = all_base_matrices(tables, [metric], langs=langs)[name]
        except TransferPlanError as exc:
            matrices[name] = exc
    for dm in extra:
        matrices[dm.metric] = dm
    reports = []
    for name, dm in matrices.items():
        for S in settings:
            if isinstance(dm, Exception):
                reports.append(CorrelationReport(name, S.task, S.scale, error=str(dm)))
                continue
            try:
                reports.append(distance_transfer_correlation(dm, S, exclude_self, pooled))
            except TransferPlanError as exc:
                reports.append(CorrelationReport(name, S.task, S.scale, error=str(exc)))
    return reports


def reports_to_csv(reports: Sequence[CorrelationReport]) -> str:
    langs = sorted({l for r in reports for l in r.per_source})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "task", "scale", "mean", "n_undefined", *langs, "error"])
    for r in reports:
        cells = []
        for l in langs:
            v = r.per_source.get(l)
            cells.append("" if v is None else repr(v))
        w.writerow([r.metric, r.task, r.scale, "" if math.isnan(r.mean) else repr(r.mean),
                    r.n_undefined, *cells, r.error or ""])
    return buf.getvalue()


def reports_to_json(reports: Sequence[CorrelationReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
