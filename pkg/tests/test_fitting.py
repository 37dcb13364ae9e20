import json
from math import comb

import numpy as np
import pytest

from transferplan.correlation import TransferScoreMatrix, distance_transfer_correlation
from transferplan.distances import DistanceMatrix, combined_distance, normalize
from transferplan.errors import ValidationError
from transferplan.fitting import (MetricWeights, fit_weights, fits_to_csv, objective, preset_dcomb,
                                  simplex_lattice)

LANGS6 = ("ara", "deu", "eng", "fra", "hin", "jpn")
METRICS3 = ("hamming-syntax", "inner-phonology", "jaccard-inventory")


def random_components(seed, names=METRICS3, langs=LANGS6):
    rng = np.random.default_rng(seed)
    out = []
    for name in names:
        A = rng.random((len(langs), len(langs)))
        out.append(normalize(DistanceMatrix(name, langs, (A + A.T) / 2)))
    return out


def planted_scores(D, task="MED", scale="small"):
    f1 = 100 * (1 - D.values)
    np.fill_diagonal(f1, 100.0)
    return TransferScoreMatrix(task, scale, D.langs, D.langs, f1)


def test_preset_dcomb_exact():
    w = preset_dcomb()
    assert w.as_dict() == {"anderberg-syntax": 0.4, "inner-phonology": 0.2,
                           "anderberg-inventory": 0.4}


@pytest.mark.parametrize("n,step", [(2, 0.1), (3, 0.05), (4, 0.25), (6, 0.2)])
def test_lattice_cardinality(n, step):
    W = simplex_lattice(n, step)
    m = round(1 / step)
    assert len(W) == comb(m + n - 1, n - 1)
    np.testing.assert_allclose(W.sum(axis=1), 1.0)
    assert [tuple(r) for r in W] == sorted(tuple(r) for r in W)


def test_lattice_rejects_uneven_step():
    with pytest.raises(ValidationError):
        simplex_lattice(3, 0.3)


def test_weights_validation():
    with pytest.raises(ValidationError):
        MetricWeights(("hamming-syntax", "inner-syntax"), (0.7, 0.7))
    with pytest.raises(ValidationError):
        MetricWeights(("hamming-syntax", "hamming-syntax"), (0.5, 0.5))
    with pytest.raises(ValidationError):
        MetricWeights(("cosine-syntax",), (1.0,))


@pytest.mark.parametrize("seed", range(5))
def test_planted_recovery(seed):
    comps = random_components(seed)
    k = seed % 3
    res = fit_weights(comps, [planted_scores(comps[k])])
    want = [0.0, 0.0, 0.0]
    want[k] = 1.0
    assert list(res.weights.weights) == want
    assert res.objective == pytest.approx(1.0)


def test_planted_mixture_near_optimum():
    comps = random_components(42)
    target = combined_distance([(comps[0], 0.3), (comps[1], 0.5), (comps[2], 0.2)])
    res = fit_weights(comps, [planted_scores(target)])
    assert res.objective == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(res.weights.weights, [0.3, 0.5, 0.2], atol=0.01)


def test_refinement_never_worse_than_lattice():
    comps = random_components(3)
    rng = np.random.default_rng(0)
    f1 = rng.uniform(20, 80, size=(6, 6))
    S = TransferScoreMatrix("MED", "small", LANGS6, LANGS6, f1)
    coarse = fit_weights(comps, [S], grid_step=0.25, refine=False)
    fine = fit_weights(comps, [S], grid_step=0.25, refine=True)
    assert fine.objective >= coarse.objective
    assert fine.candidates_evaluated > coarse.candidates_evaluated


def test_objective_matches_direct_correlation():
    comps = random_components(8)
    S = planted_scores(comps[1])
    w = MetricWeights(METRICS3, (0.2, 0.5, 0.3))
    D = combined_distance(list(zip(comps, w.weights)))
    direct = distance_transfer_correlation(D, S).mean
    assert objective(w, comps, [S]) == pytest.approx(direct, abs=1e-12)


def test_objective_averages_settings():
    comps = random_components(9)
    S1, S2 = planted_scores(comps[0], "MED"), planted_scores(comps[2], "SMILER")
    w = MetricWeights(METRICS3, (0.5, 0.0, 0.5))
    both = objective(w, comps, [S1, S2])
    assert both == pytest.approx((objective(w, comps, [S1]) + objective(w, comps, [S2])) / 2)


def test_fit_is_deterministic():
    comps = random_components(11)
    S = planted_scores(combined_distance([(comps[0], 0.5), (comps[2], 0.5)]))
    a, b = fit_weights(comps, [S]), fit_weights(comps, [S])
    assert a == b
    assert json.loads(a.to_json())["components"] == list(METRICS3)


def test_too_many_components():
    comps = random_components(0, names=("hamming-syntax", "jaccard-syntax", "inner-syntax",
                                        "anderberg-syntax", "hamming-phonology",
                                        "jaccard-phonology", "inner-phonology"))
    with pytest.raises(ValidationError):
        fit_weights(comps, [planted_scores(comps[0])])


def test_fits_csv():
    comps = random_components(1)
    fits = {("MED", "small"): fit_weights(comps, [planted_scores(comps[0])], grid_step=0.5)}
    text = fits_to_csv(fits)
    assert text.splitlines()[0] == "task,scale,hamming-syntax,inner-phonology,jaccard-inventory,objective"
    assert text.splitlines()[1].startswith("MED,small,1.0,0.0,0.0,")
