"""Pairwise language distances over typological feature tables.

Fourteen base metrics: four binary measures (hamming, jaccard, inner,
anderberg) on each of syntax, phonology and inventory, plus Euclidean
distance on fam and geo.  A weighted blend of normalized base matrices is
tagged ``combined``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ComputationError, IncomparablePairError, ValidationError
from .features import FeatureClass, FeatureTable, FeatureVector, align_pair, check_language

BINARY_KINDS = ("hamming", "jaccard", "inner", "anderberg")
TYPOLOGICAL = (FeatureClass.SYNTAX, FeatureClass.PHONOLOGY, FeatureClass.INVENTORY)
COMBINED = "combined"

BASE_METRICS = tuple(
    f"{kind}-{fc.value}" for fc in TYPOLOGICAL for kind in BINARY_KINDS
) + ("euclid-fam", "euclid-geo")

_ALIASES = {"ander": "anderberg", "euclidean": "euclid"}


def parse_metric(metric_id: str) -> tuple[str, FeatureClass | None]:
    """Split ``"anderberg-syntax"`` into ``("anderberg", FeatureClass.SYNTAX)``.

    Accepts the short ``ander-`` prefix.  ``combined`` has no feature class.
    """
    if metric_id == COMBINED:
        return COMBINED, None
    kind, sep, fc = metric_id.partition("-")
    kind = _ALIASES.get(kind, kind)
    canonical = f"{kind}-{fc}"
    if not sep or canonical not in BASE_METRICS:
        raise ValidationError(f"unknown metric {metric_id!r}; expected one of {', '.join(BASE_METRICS)}")
    return kind, FeatureClass(fc)


def canonical_metric(metric_id: str) -> str:
    kind, fc = parse_metric(metric_id)
    return COMBINED if fc is None else f"{kind}-{fc.value}"


class ContingencyCounts(NamedTuple):
    a: int  # both 1
    b: int  # x=1, y=0
    c: int  # x=0, y=1
    d: int  # both 0

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d


def contingency(x, y) -> ContingencyCounts:
    """Agreement counts of two binary vectors over co-observed dimensions."""
    xs, ys, _ = align_pair(x, y)
    a = int(np.sum((xs == 1) & (ys == 1)))
    b = int(np.sum((xs == 1) & (ys == 0)))
    c = int(np.sum((xs == 0) & (ys == 1)))
    d = int(np.sum((xs == 0) & (ys == 0)))
    return ContingencyCounts(a, b, c, d)


def anderberg_similarity(counts: ContingencyCounts) -> float:
    a, b, c, d = counts
    n = counts.n
    num = (max(a, b) + max(c, d) + max(a, c) + max(b, d)
           - max(a + c, b + d) - max(a + b, c + d))
    return num / (2 * n)


def binary_distance(kind: str, counts: ContingencyCounts) -> float:
    """Distance in [0, 1] from contingency counts.

    ``anderberg`` similarity spans [0, 0.5], hence ``1 - 2*S``.
    """
    kind = _ALIASES.get(kind, kind)
    a, b, c, d = counts
    n = counts.n
    if n < 1 or min(counts) < 0:
        raise ValidationError(f"invalid contingency counts {tuple(counts)}")
    # each form is one integer division, so results are correctly rounded rationals
    if kind == "hamming":
        return (b + c) / n
    if kind == "jaccard":
        union = a + b + c
        return 0.0 if union == 0 else (b + c) / union
    if kind == "inner":
        return (n - a) / n
    if kind == "anderberg":
        num = (max(a, b) + max(c, d) + max(a, c) + max(b, d)
               - max(a + c, b + d) - max(a + b, c + d))
        return (n - num) / n
    raise ValidationError(f"unknown binary metric {kind!r}")


def euclidean_distance(x, y) -> float:
    xv = x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=float)
    yv = y.values if isinstance(y, FeatureVector) else np.asarray(y, dtype=float)
    if xv.shape != yv.shape:
        raise ValidationError(f"dimension mismatch: {xv.shape} vs {yv.shape}")
    if np.isnan(xv).any() or np.isnan(yv).any():
        raise ComputationError("Euclidean distance is undefined with missing cells")
    return float(np.sqrt(np.sum((xv - yv) ** 2)))


@dataclass(frozen=True)
class DistanceMatrix:
    """Square matrix of language distances; row index is the first argument."""

    metric: str
    langs: tuple[str, ...]
    values: np.ndarray = field(repr=False)
    normalized: bool = False
    degenerate: bool = False

    def __post_init__(self):
        langs = tuple(check_language(l) for l in self.langs)
        if len(set(langs)) != len(langs):
            raise ValidationError("duplicate language in distance matrix")
        values = np.array(self.values, dtype=float)
        if values.shape != (len(langs), len(langs)):
            raise ValidationError(f"matrix shape {values.shape} does not match {len(langs)} languages")
        if not np.all(np.isfinite(values)):
            raise ComputationError(f"{self.metric}: non-finite distance values")
        values.setflags(write=False)
        object.__setattr__(self, "langs", langs)
        object.__setattr__(self, "values", values)

    def index(self, lang: str) -> int:
        return self.langs.index(lang)

    def __getitem__(self, pair) -> float:
        s, t = pair
        return float(self.values[self.index(s), self.index(t)])

    def off_diagonal(self) -> np.ndarray:
        n = len(self.langs)
        return self.values[~np.eye(n, dtype=bool)]

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.values, self.values.T))

    def reorder(self, langs: Sequence[str]) -> "DistanceMatrix":
        idx = [self.index(l) for l in langs]
        return DistanceMatrix(self.metric, tuple(langs), self.values[np.ix_(idx, idx)],
                              self.normalized, self.degenerate)


def normalize(dm: DistanceMatrix) -> DistanceMatrix:
    """Min-max rescale over off-diagonal entries.

    The same affine map is applied to the diagonal.  A constant off-diagonal
    maps to zeros and the result is flagged degenerate.
    """
    off = dm.off_diagonal()
    if off.size == 0:
        return DistanceMatrix(dm.metric, dm.langs, dm.values - dm.values, True, True)
    lo, hi = float(off.min()), float(off.max())
    if hi == lo:
        return DistanceMatrix(dm.metric, dm.langs, dm.values - lo, True, True)
    if dm.normalized and lo == 0.0 and hi == 1.0:
        return dm
    return DistanceMatrix(dm.metric, dm.langs, (dm.values - lo) / (hi - lo), True, False)


def _pair_distance(kind, fc, x, y):
    if kind == "euclid":
        return euclidean_distance(x, y)
    return binary_distance(kind, contingency(x, y))


def build_distance_matrix(table: FeatureTable, metric: str, normalize_values: bool = True,
                          langs: Sequence[str] | None = None) -> DistanceMatrix:
    """All-pairs distances for one base metric.

    Diagonal entries are computed, not forced to zero.
    """
    kind, fc = parse_metric(metric)
    if fc is None:
        raise ValidationError("use combined_distance for the combined metric")
    if table.feature_class is not fc:
        raise ValidationError(
            f"metric {metric} needs a {fc.value} table, got {table.feature_class.value}")
    langs = table.languages if langs is None else tuple(langs)
    n = len(langs)
    out = np.empty((n, n))
    for i, s in enumerate(langs):
        for j in range(i, n):
            t = langs[j]
            try:
                v = _pair_distance(kind, fc, table[s], table[t])
            except IncomparablePairError:
                raise IncomparablePairError(
                    f"{canonical_metric(metric)}: languages {s} and {t} share no observed feature",
                    pair=(s, t)) from None
            except ComputationError as exc:
                raise ComputationError(f"{canonical_metric(metric)}: pair ({s}, {t}): {exc}") from None
            out[i, j] = out[j, i] = v
    dm = DistanceMatrix(canonical_metric(metric), langs, out)
    return normalize(dm) if normalize_values else dm


def _check_weights(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValidationError("weights must be a non-empty sequence")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValidationError(f"weights must be finite and non-negative, got {w.tolist()}")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValidationError(f"weights must sum to 1, got {w.sum()!r}")
    return w


def blend_rows(weights: np.ndarray, stacked: np.ndarray) -> np.ndarray:
    """Weighted sum over axis 0 of ``stacked`` for each row of ``weights``.

    ``weights`` is (n_candidates, n_components), ``stacked`` is
    (n_components, ...).  Accumulates component by component so each entry
    is computed identically regardless of how many candidates are batched.
    """
    weights = np.atleast_2d(weights)
    extra = (1,) * (stacked.ndim - 1)
    out = np.zeros((weights.shape[0],) + stacked.shape[1:])
    for i in range(stacked.shape[0]):
        out += weights[:, i].reshape((-1,) + extra) * stacked[i][None]
    return out


def combined_distance(components: Sequence[tuple[DistanceMatrix, float]]) -> DistanceMatrix:
    """Entrywise weighted sum of normalized matrices sharing one language order."""
    if not components:
        raise ValidationError("combined_distance needs at least one component")
    mats = [m for m, _ in components]
    w = _check_weights([wt for _, wt in components])
    langs = mats[0].langs
    for m in mats:
        if m.langs != langs:
            raise ValidationError(f"{m.metric}: language list differs from {mats[0].metric}")
        if not m.normalized:
            raise ValidationError(f"{m.metric}: component matrices must be normalized")
    values = blend_rows(w, np.stack([m.values for m in mats]))[0]
    return DistanceMatrix(COMBINED, langs, values, normalized=True)


def all_base_matrices(tables: dict, metrics: Sequence[str] = BASE_METRICS,
                      normalize_values: bool = True, langs=None) -> dict[str, DistanceMatrix]:
    """Build every requested base metric whose feature table is available."""
    tables = {FeatureClass(k): t for k, t in tables.items()}
    out = {}
    for metric in metrics:
        _, fc = parse_metric(metric)
        table = tables.get(fc)
        if table is None:
            raise ValidationError(f"no {fc.value} feature table for metric {metric}")
        out[canonical_metric(metric)] = build_distance_matrix(table, metric, normalize_values, langs)
    return out


def shared_languages(tables) -> tuple[str, ...]:
    sets = [set(t.languages) for t in tables]
    return tuple(sorted(set.intersection(*sets))) if sets else ()


def metric_correlation_matrix(matrices: Sequence[DistanceMatrix]) -> np.ndarray:
    """Pearson correlation between metrics over off-diagonal language pairs."""
    langs = matrices[0].langs
    n = len(langs)
    iu = np.triu_indices(n, k=1)
    cols = []
    for m in matrices:
        if m.langs != langs:
            m = m.reorder(langs)
        cols.append(m.values[iu])
    data = np.array(cols)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.atleast_2d(np.corrcoef(data))


def format_float(v: float) -> str:
    return repr(float(v))


def save_distance_matrix(dm: DistanceMatrix, path) -> None:
    lines = [f"# metric={dm.metric} normalized={str(dm.normalized).lower()}",
             "lang," + ",".join(dm.langs)]
    for i, s in enumerate(dm.langs):
        lines.append(s + "," + ",".join(format_float(v) for v in dm.values[i]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_distance_matrix(path) -> DistanceMatrix:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"distance matrix file not found: {path}")
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    meta = {}
    if lines and lines[0].startswith("#"):
        for tok in lines.pop(0)[1:].split():
            k, _, v = tok.partition("=")
            meta[k] = v
    if not lines:
        raise ValidationError(f"{path}: no matrix rows")
    header = lines[0].split(",")
    if header[0] != "lang":
        raise ValidationError(f"{path}: header must start with 'lang'")
    langs = tuple(h.strip() for h in header[1:])
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(rows) >= len(langs) or cells[0].strip() != langs[len(rows)]:
            raise ValidationError(f"{path}:{lineno}: row order must match header")
        try:
            rows.append([float(c) for c in cells[1:]])
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: non-numeric cell") from None
    if any(len(r) != len(langs) for r in rows) or len(rows) != len(langs):
        raise ValidationError(f"{path}: matrix is not square")
    metric = meta.get("metric", COMBINED)
    if metric != COMBINED:
        metric = canonical_metric(metric)
    normalized = meta.get("normalized", "false").lower() == "true"
    values = np.array(rows)
    degenerate = False
    if normalized and len(langs) > 1:
        off = values[~np.eye(len(langs), dtype=bool)]
        degenerate = bool(off.max() == off.min())
    return DistanceMatrix(metric, langs, values, normalized, degenerate)


__all__ = [
    "BASE_METRICS", "BINARY_KINDS", "COMBINED", "ContingencyCounts", "DistanceMatrix",
    "all_base_matrices", "anderberg_similarity", "binary_distance", "blend_rows",
    "build_distance_matrix", "canonical_metric", "combined_distance", "contingency",
    "euclidean_distance", "load_distance_matrix", "metric_correlation_matrix", "normalize",
    "parse_metric", "save_distance_matrix", "shared_languages",
]
