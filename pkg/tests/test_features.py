import numpy as np
import pytest

from transferplan.errors import IncomparablePairError, ValidationError
from transferplan.features import (MISSING, FeatureClass, FeatureTable, FeatureVector, align_pair,
                                   check_language, load_feature_table, save_feature_table)

from conftest import random_table


def test_language_codes():
    assert check_language("eng") == "eng"
    for bad in ["EN", "en", "engl", "e1g", ""]:
        with pytest.raises(ValidationError):
            check_language(bad)


def test_binary_cells_validated():
    FeatureVector(FeatureClass.SYNTAX, [0, 1, MISSING])
    with pytest.raises(ValidationError):
        FeatureVector(FeatureClass.SYNTAX, [0, 2, 1])
    with pytest.raises(ValidationError):
        FeatureVector(FeatureClass.GEO, [1.0, MISSING])
    with pytest.raises(ValidationError):
        FeatureVector(FeatureClass.GEO, [-1.0, 2.0])


def test_table_dims_and_size():
    with pytest.raises(ValidationError):
        FeatureTable.from_dict("syntax", {"eng": [0, 1], "deu": [1, 1, 0]})
    with pytest.raises(ValidationError):
        FeatureTable.from_dict("syntax", {"eng": [0, 1]})
    t = FeatureTable.from_dict("syntax", {"eng": [0, 1], "deu": [1, 1], "ara": [0, 0]})
    assert t.languages == ("ara", "deu", "eng")
    assert t.matrix().shape == (3, 2)


@pytest.mark.parametrize("fc", list(FeatureClass))
def test_csv_round_trip(tmp_path, fc):
    t = random_table(fc, seed=3)
    p = tmp_path / "t.csv"
    save_feature_table(t, p)
    back = load_feature_table(p, fc)
    assert back.languages == t.languages
    np.testing.assert_array_equal(back.matrix(), t.matrix())


def test_load_errors_name_the_problem(tmp_path):
    missing = tmp_path / "nope.csv"
    with pytest.raises(ValidationError, match="nope.csv"):
        load_feature_table(missing, "syntax")
    p = tmp_path / "bad.csv"
    p.write_text("lang,f1,f2\neng,0,1\ndeu,1\n")
    with pytest.raises(ValidationError, match="dimension mismatch"):
        load_feature_table(p, "syntax")
    p.write_text("lang,f1\neng,0\neng,1\n")
    with pytest.raises(ValidationError, match="duplicate"):
        load_feature_table(p, "syntax")
    p.write_text("lang,f1\neng,x\ndeu,1\n")
    with pytest.raises(ValidationError):
        load_feature_table(p, "syntax")


def test_align_pair_drops_missing_either_side():
    x = FeatureVector(FeatureClass.SYNTAX, [1, MISSING, 0, 1, 0])
    y = FeatureVector(FeatureClass.SYNTAX, [1, 1, MISSING, 0, 0])
    xs, ys, n = align_pair(x, y)
    assert n == 3
    assert xs.tolist() == [1, 1, 0] and ys.tolist() == [1, 0, 0]


def test_align_pair_incomparable():
    x = FeatureVector(FeatureClass.SYNTAX, [1, MISSING])
    y = FeatureVector(FeatureClass.SYNTAX, [MISSING, 0])
    with pytest.raises(IncomparablePairError):
        align_pair(x, y)


def test_align_pair_class_mismatch():
    x = FeatureVector(FeatureClass.SYNTAX, [1, 0])
    y = FeatureVector(FeatureClass.PHONOLOGY, [1, 0])
    with pytest.raises(ValidationError):
        align_pair(x, y)
