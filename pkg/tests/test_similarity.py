import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from zeroevent.errors import ConfigError, DataError, EmptyModel
from zeroevent.similarity import (MATRIX_OPS, PairCache, TermVectorStore, all_matrix_scores,
                                  matrix_score, read_term_vectors, similarity_matrix,
                                  spectral_norm, term_similarity, write_term_vectors)
from zeroevent.textmodels import LanguageModel

from oracles import cosine_sparse

VECS = {
    "dog": {0: 1.0, 1: 2.0},
    "puppy": {0: 2.0, 1: 2.0, 3: 0.5},
    "car": {2: 3.0},
    "engine": {2: 1.0, 3: 1.0},
}


@pytest.fixture
def store():
    return TermVectorStore(VECS, 4)


def test_term_similarity_matches_cosine(store):
    for a in VECS:
        for b in VECS:
            want = 1.0 if a == b else cosine_sparse(VECS[a], VECS[b])
            assert term_similarity(a, b, store) == pytest.approx(want, abs=1e-12)


def test_term_similarity_edge_cases(store):
    assert term_similarity("Dog", "dog", store) == 1.0
    assert term_similarity("zebra", "zebra", store) == 1.0
    assert term_similarity("zebra", "dog", store) == 0.0
    assert term_similarity("dog", "car", store) == 0.0


def test_term_similarity_symmetric_and_cached(store):
    cache = PairCache()
    s1 = term_similarity("dog", "puppy", store, cache)
    assert len(cache) == 1
    assert term_similarity("puppy", "dog", store, cache) == s1


def test_store_validation():
    with pytest.raises(DataError):
        TermVectorStore({"x": {0: -1.0}}, 2)
    with pytest.raises(DataError):
        TermVectorStore({"x": {5: 1.0}}, 2)
    with pytest.raises(DataError):
        TermVectorStore({"x": {0: 0.0}}, 2)


def test_similarity_matrix_shape_order_and_range(store):
    elm = LanguageModel((("dog", 3.0), ("car", 1.0), ("zebra", 1.0)), 5)
    clm = ["engine", "puppy"]
    s = similarity_matrix(elm, clm, store)
    assert s.shape == (3, 2)
    assert s[0, 1] == pytest.approx(cosine_sparse(VECS["dog"], VECS["puppy"]))
    assert s[1, 0] == pytest.approx(cosine_sparse(VECS["car"], VECS["engine"]))
    assert np.all(s[2] == 0)
    assert np.all((s >= 0) & (s <= 1))


def test_similarity_matrix_identity_terms_and_cache(store):
    s = similarity_matrix(["zebra", "dog"], ["zebra", "Dog"], store)
    assert s[0, 0] == 1.0 and s[1, 1] == 1.0
    cache = PairCache()
    cache.put("dog", "car", 0.25)
    s2 = similarity_matrix(["dog"], ["car", "puppy"], store, cache)
    assert s2[0, 0] == 0.25
    assert cache.get("puppy", "dog") == pytest.approx(s2[0, 1])


def test_similarity_matrix_empty(store):
    with pytest.raises(EmptyModel):
        similarity_matrix([], ["dog"], store)


def test_pair_cache_persistence(tmp_path):
    c = PairCache(tmp_path / "cache.tsv")
    c.put("b", "a", 0.5)
    c.save()
    again = PairCache(tmp_path / "cache.tsv")
    assert again.get("a", "b") == 0.5
    with pytest.raises(ConfigError):
        PairCache().save()


def test_term_vector_round_trip(tmp_path, store):
    write_term_vectors(tmp_path / "tv.txt", VECS, 4)
    back = read_term_vectors(tmp_path / "tv.txt")
    assert back.dim == 4 and sorted(back.terms) == sorted(VECS)
    assert back.vector("puppy") == VECS["puppy"]
    (tmp_path / "bad.txt").write_text("dog 0:1\n")
    with pytest.raises(DataError):
        read_term_vectors(tmp_path / "bad.txt")


def test_unknown_operator():
    with pytest.raises(ConfigError):
        matrix_score(np.ones((2, 2)), "trace")


def test_hausdorff_is_median_of_row_maxima():
    s = np.array([[0.1, 0.9], [0.2, 0.3], [0.5, 0.4], [0.0, 0.0]])
    # row maxima 0.9, 0.3, 0.5, 0.0 -> median 0.4
    assert matrix_score(s, "hausdorff") == pytest.approx(0.4)


unit_matrices = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda shape: arrays(np.float64, shape, elements=st.floats(0, 1, width=32)))


@settings(max_examples=150, deadline=None)
@given(unit_matrices)
def test_operator_inequalities(s):
    sc = all_matrix_scores(s)
    two = np.linalg.norm(s, 2)
    assert sc["spectral"] == pytest.approx(two, abs=1e-8)
    assert sc["max_entry"] <= sc["spectral"] + 1e-9
    assert sc["spectral"] <= sc["frobenius"] + 1e-9
    assert sc["hausdorff"] <= sc["max_entry"]
    assert sc["spectral"] <= np.sqrt(sc["inf_norm"] * np.abs(s).sum(axis=0).max()) + 1e-9
    assert all(v >= 0 for v in sc.values())


@settings(max_examples=50, deadline=None)
@given(unit_matrices)
def test_operators_invariant_to_column_permutation(s):
    perm = np.random.default_rng(0).permutation(s.shape[1])
    a, b = all_matrix_scores(s), all_matrix_scores(s[:, perm])
    for op in MATRIX_OPS:
        assert a[op] == pytest.approx(b[op], abs=1e-9)


def test_spectral_degenerate_cases():
    assert spectral_norm(np.zeros((3, 2))) == 0.0
    assert spectral_norm(np.eye(4)) == pytest.approx(1.0, abs=1e-12)
    # top singular direction orthogonal to the all-ones vector
    s = np.array([[1.0, -1.0], [0.0, 0.0]])
    assert spectral_norm(s) == pytest.approx(np.sqrt(2), abs=1e-12)
