import math

import pytest
from hypothesis import given, settings, strategies as st

from zeroevent import textmodels as tm
from zeroevent.errors import ConfigError, DataError, EmptyCorpus, EmptySource


def event(**kw):
    base = dict(event_id="E1", title="Birthday party",
                free_text="People sing songs and eat cake at a birthday party.",
                visual_cues=("cake", "candles", "balloons"), audio_cues=("singing", "cheering"))
    base.update(kw)
    return tm.EventDescription(**base)


def test_tokenize_strips_markup_stopwords_and_digits():
    assert tm.tokenize("<p>The 2 dogs &amp; 3 cats</p> ran!") == ["dogs", "cats", "ran"]
    assert tm.tokenize("Don't stop") == ["stop"]
    assert tm.tokenize("snake_case") == ["snake", "case"]


def test_tokenize_custom_stopwords():
    assert tm.tokenize("the cat", stopwords=frozenset({"cat"})) == ["the"]


def test_bundled_stopwords_loaded():
    assert {"the", "and", "of"} <= tm.STOPWORDS
    assert all("'" not in w for w in tm.STOPWORDS)


@pytest.mark.parametrize("source,expected", [
    ("Title", {"birthday", "party"}),
    ("Visual", {"cake", "candles", "balloons"}),
])
def test_elm_sources(source, expected):
    assert set(tm.build_elm(event(), source).terms) == expected


def test_audiovisual_counts_all_fields():
    lm = tm.build_elm(event(), "AudioVisual")
    w = dict(lm.entries)
    assert w["cake"] == 2 and w["birthday"] == 1 and w["singing"] == 1
    assert lm.entries[0] == ("cake", 2.0)


def test_title_elm_terms_come_from_title():
    ev = event(title="Landing a fish", free_text="fishing boat lake")
    title_terms = set(tm.tokenize(ev.title))
    assert set(tm.build_elm(ev, "Title").terms) <= title_terms


def test_elm_capacity_and_tie_order():
    ev = event(visual_cues=("delta", "alpha", "charlie", "bravo"))
    lm = tm.build_elm(ev, "Visual", n=2)
    assert lm.terms == ["alpha", "bravo"]
    assert lm.capacity == 2


def test_empty_source_raises():
    with pytest.raises(EmptySource):
        tm.build_elm(event(visual_cues=()), "Visual")
    with pytest.raises(EmptySource):
        tm.build_elm(event(visual_cues=("the of",)), "Visual")


def test_unknown_source_and_bad_capacity():
    with pytest.raises(ConfigError):
        tm.build_elm(event(), "Smell")
    with pytest.raises(ConfigError):
        tm.build_elm(event(), "Title", n=0)


def test_event_and_concept_validation():
    with pytest.raises(DataError):
        event(title="  ")
    with pytest.raises(DataError):
        tm.ConceptEntry(-1, "dog")
    with pytest.raises(DataError):
        tm.ConceptEntry(0, "")


def test_language_model_invariants():
    with pytest.raises(DataError):
        tm.LanguageModel((("a", 1.0), ("a", 2.0)), 5)
    with pytest.raises(DataError):
        tm.LanguageModel((("a", 1.0), ("b", 1.0)), 1)
    with pytest.raises(DataError):
        tm.LanguageModel((("a", 0.0),), 1)
    lm = tm.LanguageModel.from_weights({"b": 2, "a": 2, "c": 5, "z": 0}, 10)
    assert lm.entries == (("c", 5.0), ("a", 2.0), ("b", 2.0))


def corpus(docs, tag="google-style", idx=0):
    return tm.DocumentCorpus(idx, tuple(docs), tag)


def test_bow_raw_and_tfidf_by_hand():
    docs = ["dog dog park", "dog ball", "ball ball ball"]
    raw = tm.build_bow(corpus(docs), "raw-count")
    assert raw == {"dog": 3.0, "park": 1.0, "ball": 4.0}
    tfidf = tm.build_bow(corpus(docs), "tfidf")
    assert tfidf["park"] == pytest.approx(math.log(3))
    assert tfidf["dog"] == pytest.approx(3 * math.log(3 / 2))
    assert tfidf["ball"] == pytest.approx(4 * math.log(3 / 2))


def test_bow_term_in_every_document_gets_zero():
    assert tm.build_bow(corpus(["dog cat", "dog"]), "tfidf")["dog"] == 0.0


def test_bow_errors():
    with pytest.raises(EmptyCorpus):
        tm.build_bow(corpus([]))
    with pytest.raises(ConfigError):
        tm.build_bow(corpus(["a"]), "bm25")


def test_clm_title_only():
    c = tm.ConceptEntry(3, "Golden retriever", ("dog",))
    lm = tm.build_clm(c, tm.DocumentCorpus.title_only(c))
    assert dict(lm.entries) == {"dog": 1.0, "golden": 1.0, "retriever": 1.0}


def test_clm_anchor_terms_survive_cap():
    c = tm.ConceptEntry(0, "kayak")
    docs = ["river river river water water paddle boat", "river water kayak"]
    lm = tm.build_clm(c, corpus(docs), "raw-count", m=2)
    assert "kayak" in lm.terms
    assert dict(lm.entries)["kayak"] == 4.0
    assert lm.terms == ["kayak", "river"]


def test_clm_mismatched_corpus_and_empty_title():
    with pytest.raises(DataError):
        tm.build_clm(tm.ConceptEntry(1, "dog"), corpus(["dog"], idx=2))
    c = tm.ConceptEntry(0, "the")
    with pytest.raises(EmptySource):
        tm.build_clm(c, tm.DocumentCorpus.title_only(c))


def test_bad_corpus_tag():
    with pytest.raises(ConfigError):
        tm.DocumentCorpus(0, ("x",), "bing-style")


words = st.lists(st.sampled_from(["dog", "cat", "bird", "fish", "tree", "park", "ball"]),
                 min_size=1, max_size=12)


@settings(max_examples=60, deadline=None)
@given(st.lists(words, min_size=1, max_size=5), st.integers(1, 6),
       st.sampled_from(tm.WEIGHTINGS))
def test_clm_properties(docs, m, weighting):
    c = tm.ConceptEntry(0, "dog")
    try:
        lm = tm.build_clm(c, corpus([" ".join(d) for d in docs]), weighting, m)
    except EmptyCorpus:
        return
    assert len(lm) <= m
    assert "dog" in lm.terms
    ws = [w for _, w in lm.entries]
    assert ws == sorted(ws, reverse=True)
    assert all(w > 0 for w in ws)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.text(min_size=0, max_size=20), max_size=4))
def test_tokenize_total(chunks):
    for tok in tm.tokenize(" ".join(chunks)):
        assert tok == tok.lower() and tok and not tok.isdigit()
        assert tok not in tm.STOPWORDS


def test_file_round_trips(tmp_path):
    pool = [tm.ConceptEntry(0, "dog", ("puppy", "hound")), tm.ConceptEntry(5, "cat")]
    tm.write_concept_pool(tmp_path / "c.tsv", pool)
    assert tm.read_concept_pool(tmp_path / "c.tsv") == pool

    ev = event()
    tm.write_event_kit(tmp_path / "E1.txt", ev)
    assert tm.read_event_kit(tmp_path / "E1.txt") == ev
    assert tm.read_event_kits(tmp_path) == [ev]

    co = corpus(["first doc", "second doc"], idx=5)
    tm.write_corpus(tmp_path / "corp", co)
    assert tm.read_corpus(tmp_path / "corp", "google-style", pool[1]) == co
    store = tm.CorpusStore(tmp_path / "corp")
    assert store.get("google-style", pool[1]) == co

    lm = tm.LanguageModel((("dog", 2.5), ("cat", 1.0)), 4)
    tm.write_language_model(tmp_path / "x.lm", lm)
    assert tm.read_language_model(tmp_path / "x.lm") == lm


def test_concept_pool_rejects_duplicates(tmp_path):
    (tmp_path / "c.tsv").write_text("0\tdog\n0\tcat\n")
    with pytest.raises(DataError):
        tm.read_concept_pool(tmp_path / "c.tsv")
