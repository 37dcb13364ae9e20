"""Typological feature tables and the language registry.

Feature values live in float arrays; ``MISSING`` cells are NaN.  Binary
classes (fam, syntax, phonology, inventory) hold 0/1/MISSING, geo holds
finite non-negative reals.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import IncomparablePairError, ValidationError

MISSING = float("nan")

# Default registry: the 17 languages covered by the two IE benchmarks.
DEFAULT_LANGUAGES = (
    "ara", "deu", "eng", "fas", "fra", "hin", "ita", "jpn", "kor",
    "nld", "pol", "por", "rus", "spa", "swe", "tur", "ukr",
)

_LANG_RE = re.compile(r"^[a-z]{3}$")


class FeatureClass(str, enum.Enum):
    FAM = "fam"
    GEO = "geo"
    SYNTAX = "syntax"
    PHONOLOGY = "phonology"
    INVENTORY = "inventory"

    @property
    def is_binary(self) -> bool:
        return self is not FeatureClass.GEO


def check_language(code: str) -> str:
    if not isinstance(code, str) or not _LANG_RE.match(code):
        raise ValidationError(f"invalid language code {code!r}: expected 3 lowercase ASCII letters")
    return code


def check_registry(codes) -> tuple[str, ...]:
    codes = tuple(check_language(c) for c in codes)
    seen = set()
    for c in codes:
        if c in seen:
            raise ValidationError(f"duplicate language {c!r} in registry")
        seen.add(c)
    return codes


@dataclass(frozen=True)
class FeatureVector:
    feature_class: FeatureClass
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_class", FeatureClass(self.feature_class))
        _validate_cells(self.feature_class, values)

    def __len__(self):
        return len(self.values)

    @property
    def observed(self) -> np.ndarray:
        return ~np.isnan(self.values)


def _validate_cells(fc: FeatureClass, values: np.ndarray, where: str = "") -> None:
    if values.ndim != 1:
        raise ValidationError(f"{where}feature vector must be one-dimensional")
    missing = np.isnan(values)
    if fc.is_binary:
        obs = values[~missing]
        if not np.all((obs == 0) | (obs == 1)):
            raise ValidationError(f"{where}binary class {fc.value} holds a value outside {{0, 1, ?}}")
    else:
        if missing.any():
            raise ValidationError(f"{where}geo vectors may not contain missing cells")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValidationError(f"{where}geo cells must be finite and non-negative")


@dataclass(frozen=True)
class FeatureTable:
    """Immutable mapping ``language -> FeatureVector`` for one feature class."""

    feature_class: FeatureClass
    dims: int
    rows: Mapping[str, FeatureVector] = field(repr=False)

    def __post_init__(self):
        fc = FeatureClass(self.feature_class)
        object.__setattr__(self, "feature_class", fc)
        if self.dims < 1:
            raise ValidationError("feature table needs at least one dimension")
        rows = {}
        for lang, vec in self.rows.items():
            check_language(lang)
            if not isinstance(vec, FeatureVector):
                vec = FeatureVector(fc, vec)
            if vec.feature_class is not fc:
                raise ValidationError(f"row {lang}: class {vec.feature_class.value} != {fc.value}")
            if len(vec) != self.dims:
                raise ValidationError(
                    f"dimension mismatch: row {lang} has {len(vec)} cells, table declares {self.dims}")
            rows[lang] = vec
        if len(rows) < 2:
            raise ValidationError("feature table needs at least 2 languages")
        object.__setattr__(self, "rows", MappingProxyType(rows))

    @property
    def languages(self) -> tuple[str, ...]:
        """Languages in sorted order, so results never depend on file row order."""
        return tuple(sorted(self.rows))

    def __getitem__(self, lang: str) -> FeatureVector:
        return self.rows[lang]

    def __contains__(self, lang) -> bool:
        return lang in self.rows

    def __len__(self):
        return len(self.rows)

    def matrix(self, langs=None) -> np.ndarray:
        langs = self.languages if langs is None else langs
        return np.vstack([self.rows[l].values for l in langs])

    @classmethod
    def from_dict(cls, feature_class, rows: Mapping[str, object]) -> "FeatureTable":
        fc = FeatureClass(feature_class)
        vecs = {k: FeatureVector(fc, v) for k, v in rows.items()}
        dims = {len(v) for v in vecs.values()}
        if len(dims) > 1:
            raise ValidationError(f"dimension mismatch across rows: lengths {sorted(dims)}")
        return cls(fc, dims.pop() if dims else 0, vecs)


def _parse_cell(token: str, fc: FeatureClass, where: str) -> float:
    token = token.strip()
    if fc.is_binary:
        if token == "?":
            return MISSING
        if token in ("0", "1"):
            return float(token)
        raise ValidationError(f"{where}: cell {token!r} is not one of 0, 1, ?")
    if token == "?":
        raise ValidationError(f"{where}: geo vectors may not contain missing cells")
    try:
        return float(token)
    except ValueError:
        raise ValidationError(f"{where}: cell {token!r} is not a decimal number") from None


def load_feature_table(path, feature_class) -> FeatureTable:
    """Read a feature CSV (``lang,f1,...,fN``) into a validated table."""
    fc = FeatureClass(feature_class)
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"feature file not found: {path}")
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    if header[0] != "lang" or len(header) < 2:
        raise ValidationError(f"{path}: header must start with 'lang' followed by feature names")
    dims = len(header) - 1
    rows: dict[str, FeatureVector] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        where = f"{path}:{lineno}"
        lang = cells[0].strip()
        try:
            check_language(lang)
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
        if lang in rows:
            raise ValidationError(f"{where}: duplicate language {lang!r}")
        if len(cells) - 1 != dims:
            raise ValidationError(
                f"{where}: dimension mismatch, row {lang} has {len(cells) - 1} cells, header declares {dims}")
        values = np.array([_parse_cell(c, fc, where) for c in cells[1:]])
        rows[lang] = FeatureVector(fc, values)
    return FeatureTable(fc, dims, rows)


def _format_cell(v: float, fc: FeatureClass) -> str:
    if np.isnan(v):
        return "?"
    if fc.is_binary:
        return str(int(v))
    return repr(float(v))


def save_feature_table(table: FeatureTable, path) -> None:
    fc = table.feature_class
    out = ["lang," + ",".join(f"f{i + 1}" for i in range(table.dims))]
    for lang in table.languages:
        out.append(lang + "," + ",".join(_format_cell(v, fc) for v in table[lang].values))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def align_pair(x: FeatureVector, y: FeatureVector):
    """Restrict two binary vectors to their co-observed dimensions.

    Returns ``(x_kept, y_kept, n_obs)``.  Raises
    :class:`IncomparablePairError` when nothing is co-observed.
    """
    if isinstance(x, FeatureVector) and isinstance(y, FeatureVector) \
            and x.feature_class is not y.feature_class:
        raise ValidationError("cannot align vectors of different feature classes")
    xv, yv = _binary_values(x), _binary_values(y)
    if len(xv) != len(yv):
        raise ValidationError(f"dimension mismatch: {len(xv)} vs {len(yv)}")
    keep = ~(np.isnan(xv) | np.isnan(yv))
    n_obs = int(keep.sum())
    if n_obs == 0:
        raise IncomparablePairError("no co-observed dimensions")
    return xv[keep].astype(np.int8), yv[keep].astype(np.int8), n_obs


def _binary_values(v) -> np.ndarray:
    if isinstance(v, FeatureVector):
        if not v.feature_class.is_binary:
            raise ValidationError(f"class {v.feature_class.value} is not binary")
        return v.values
    return np.asarray(v, dtype=float)
