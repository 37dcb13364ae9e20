from pathlib import Path

import numpy as np
import pytest

from transferplan.correlation import TransferScoreMatrix, save_score_matrix
from transferplan.distances import build_distance_matrix
from transferplan.features import (DEFAULT_LANGUAGES, MISSING, FeatureClass, FeatureTable,
                                   save_feature_table)

DATA = Path(__file__).parent / "data"

DIMS = {"fam": 12, "geo": 4, "syntax": 40, "phonology": 20, "inventory": 30}


def random_table(fc, langs=DEFAULT_LANGUAGES, dims=None, seed=0, missing=0.1) -> FeatureTable:
    fc = FeatureClass(fc)
    rng = np.random.default_rng([seed, list(FeatureClass).index(fc)])
    dims = dims or DIMS[fc.value]
    if fc is FeatureClass.GEO:
        vals = rng.uniform(0, 10, size=(len(langs), dims))
    else:
        vals = rng.integers(0, 2, size=(len(langs), dims)).astype(float)
        if fc is not FeatureClass.FAM:
            vals[rng.random(vals.shape) < missing] = MISSING
    return FeatureTable.from_dict(fc, {l: v for l, v in zip(langs, vals)})


def random_tables(langs=DEFAULT_LANGUAGES, seed=0, missing=0.1) -> dict:
    return {fc: random_table(fc, langs, seed=seed, missing=missing) for fc in FeatureClass}


def scores_from_distance(D, task, scale, noise=0.0, seed=0) -> TransferScoreMatrix:
    """Transfer scores that fall linearly with distance, plus optional noise."""
    rng = np.random.default_rng(seed)
    f1 = 100 * (1 - D.values) * 0.8 + 10 + noise * rng.standard_normal(D.values.shape)
    return TransferScoreMatrix(task, scale, D.langs, D.langs, np.clip(f1, 0, 100))


@pytest.fixture
def tables():
    return random_tables()


@pytest.fixture
def feature_dir(tmp_path, tables):
    d = tmp_path / "features"
    d.mkdir()
    for fc, t in tables.items():
        save_feature_table(t, d / f"{fc.value}.csv")
    return d


@pytest.fixture
def score_files(tmp_path, tables):
    D = build_distance_matrix(tables[FeatureClass.SYNTAX], "ander-syntax")
    paths = []
    for i, (task, scale) in enumerate([("MED", "small"), ("MED", "base"), ("SMILER", "small")]):
        S = scores_from_distance(D, task, scale, noise=2.0, seed=i)
        p = tmp_path / f"scores_{task}_{scale}.csv"
        save_score_matrix(S, p)
        paths.append(p)
    return paths


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: trains small networks (seconds to a minute)")



# acceptance criteria register (number, title, passed, detail, seconds) here
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail, secs in sorted(ACCEPTANCE):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {status}  {title}: {detail} [{secs:.2f}s]")
    passed = sum(1 for r in ACCEPTANCE if r[2])
    terminalreporter.write_line(f"{passed}/{len(ACCEPTANCE)} acceptance criteria passed")
