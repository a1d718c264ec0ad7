import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zeroevent import eventdetector as ed
from zeroevent.errors import (ConfigError, DataError, DimensionMismatch, EmptyCollection,
                              EmptyInput)
from zeroevent.pipeline import SyntheticSpec, make_synthetic
from zeroevent.textmodels import CLM_SOURCES, ELM_SOURCES, WEIGHTINGS

SMALL = SyntheticSpec(n_events=3, n_concepts=30, n_videos=90, eval_positives=5, eval_related=2,
                      train_positives=5, train_related=3, train_background=20, seed=3)


def det(entries, design=None):
    return ed.EventDetector("E", tuple(entries), design)


def loop_relevance(d_idx, d_scores, v, dist):
    """Straight transcription of each relevance measure, one video at a time."""
    x = [v[i] for i in d_idx]
    d = list(d_scores)
    if not any(x):
        return -math.inf
    if dist == "cosine":
        return sum(a * b for a, b in zip(x, d)) / (math.hypot(*x) * math.hypot(*d))
    if dist == "euclidean":
        return -math.sqrt(sum((a - b) ** 2 for a, b in zip(x, d)))
    if dist == "hist_intersect":
        return sum(min(a / sum(x), b / sum(d)) for a, b in zip(x, d))
    if dist == "chi2":
        xs = [a / sum(x) for a in x]
        ds = [b / sum(d) for b in d]
        return -sum((b - a) ** 2 / (b + a + ed.CHI2_EPS) for a, b in zip(xs, ds))
    if dist == "kullback":
        xe = [a + ed.KL_EPS for a in x]
        de = [b + ed.KL_EPS for b in d]
        xs = [a / sum(xe) for a in xe]
        ds = [b / sum(de) for b in de]
        return -sum(b * math.log(b / a) for a, b in zip(xs, ds))
    raise AssertionError(dist)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(ed.DISTANCES))
def test_relevance_matches_loop_reference(seed, dist):
    rng = np.random.default_rng(seed)
    n_c = int(rng.integers(3, 12))
    k = int(rng.integers(1, n_c + 1))
    idx = rng.choice(n_c, k, replace=False)
    scores = np.sort(rng.uniform(0.01, 1, k))[::-1]
    values = rng.uniform(0, 1, (6, n_c)) * (rng.uniform(size=(6, n_c)) < 0.6)
    d = det(zip(idx.tolist(), scores.tolist()))
    got = ed.relevance_scores(d, values, dist)
    for row, g in zip(values, got):
        want = loop_relevance(idx, scores, row, dist)
        if want == -math.inf:
            assert g == -math.inf
        else:
            assert g == pytest.approx(want, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("dist", ed.DISTANCES)
def test_exact_match_ranks_first(dist):
    d = det([(2, 0.9), (0, 0.5)])
    values = np.array([[0.5, 0.0, 0.9], [0.1, 0.9, 0.2], [0.0, 1.0, 0.0]])
    ranked = ed.rank_videos(d, ed.VideoCollection(("match", "other", "zero"), values), dist)
    assert ranked.ids[0] == "match"
    assert ranked.items[-1] == ("zero", -math.inf)


def test_distance_errors():
    d = det([(5, 1.0)])
    with pytest.raises(DimensionMismatch):
        ed.relevance_scores(d, np.ones((1, 3)), "cosine")
    with pytest.raises(ConfigError):
        ed.relevance_scores(det([(0, 1.0)]), np.ones((1, 3)), "hamming")
    with pytest.raises(EmptyCollection):
        ed.rank_videos(det([(0, 1.0)]), [])


def test_detector_validation_and_vector():
    with pytest.raises(DataError):
        det([])
    with pytest.raises(DataError):
        det([(1, 0.5), (1, 0.4)])
    with pytest.raises(DataError):
        det([(1, 0.1), (2, 0.4)])
    d = det([(3, 0.5), (1, 0.25)])
    assert d.to_vector(5).tolist() == [0, 0.25, 0, 0.5, 0]
    assert d.k == 2


def test_top_k_ties_by_concept_index():
    d = ed.top_k("E", [7, 3, 5, 1], np.array([0.5, 0.9, 0.5, 0.5]), 3)
    assert d.entries == ((3, 0.9), (1, 0.5), (5, 0.5))
    with pytest.raises(ConfigError):
        ed.top_k("E", [0, 1], np.zeros(2), 3)


def test_ranked_list_ties_by_id():
    r = ed.RankedList.from_scores(["b", "a", "c"], [1.0, 1.0, 2.0])
    assert r.ids == ["c", "a", "b"]
    assert ed.RankedList.from_mapping(r.as_dict()) == r


def test_aggregate_keyframes():
    assert ed.aggregate_keyframes([[0, 1], [1, 3]]).tolist() == [0.5, 2.0]
    with pytest.raises(EmptyInput):
        ed.aggregate_keyframes([])
    with pytest.raises(DimensionMismatch):
        ed.aggregate_keyframes([[0, 1], [1]])


def test_design_tag_round_trip():
    d = ed.DesignChoice("Visual", "Wikipedia", "tfidf", "spectral")
    assert ed.DesignChoice.from_tag(d.tag) == d
    with pytest.raises(ConfigError):
        ed.DesignChoice.from_tag("Visual/Google")


@pytest.fixture(scope="module")
def small():
    return make_synthetic(SMALL)


def test_builder_matches_direct_construction(small):
    builder = ed.DetectorBuilder(small.pool, small.store, small.corpora)
    for ev in small.events[:2]:
        for e in ELM_SOURCES:
            for c in CLM_SOURCES:
                for w in WEIGHTINGS:
                    for op in ("spectral", "hausdorff", "max_entry"):
                        design = ed.DesignChoice(e, c, w, op)
                        a = builder.build(ev, design, 5)
                        b = ed.build_detector(ev, small.pool, design, 5, small.store, small.corpora)
                        assert [x for x, _ in a.entries] == [x for x, _ in b.entries]
                        np.testing.assert_allclose(a.scores, b.scores, rtol=1e-12, atol=1e-12)


def test_missing_corpora_warn_but_build(small):
    from zeroevent.textmodels import CorpusStore
    d = ed.build_detector(small.events[0], small.pool, ed.DesignChoice(), 3, small.store,
                          CorpusStore(None))
    assert d.k == 3
    assert len(d.warnings) == len(small.pool)
    assert np.all(d.scores == 0)


def test_file_round_trips(tmp_path):
    coll = ed.VideoCollection(("v1", "v2"), np.array([[0.0, 0.5], [1.0, 0.25]]))
    ed.write_model_vectors(tmp_path / "mv.csv", coll)
    back = ed.read_model_vectors(tmp_path / "mv.csv")
    assert back.ids == coll.ids and np.array_equal(back.values, coll.values)

    (tmp_path / "neg.csv").write_text("#Nc=2\nv1,-0.5,0.5\n")
    assert ed.read_model_vectors(tmp_path / "neg.csv").values.tolist() == [[0.0, 0.5]]
    (tmp_path / "bad.csv").write_text("#Nc=3\nv1,0.5,0.5\n")
    with pytest.raises(DimensionMismatch):
        ed.read_model_vectors(tmp_path / "bad.csv")

    d = det([(1, 0.75), (0, 0.5)], ed.DesignChoice())
    ed.write_detector(tmp_path / "d.txt", d)
    assert ed.read_detector(tmp_path / "d.txt") == d

    r = ed.rank_videos(d, coll)
    ed.write_ranked_list(tmp_path / "r.csv", r)
    assert ed.read_ranked_list(tmp_path / "r.csv") == r
