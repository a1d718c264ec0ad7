import numpy as np
import pytest

from zeroevent import pseudotraining as pt
from zeroevent.errors import DimensionMismatch, EmptyBackground, InsufficientEvents, InsufficientSamples
from zeroevent.eventdetector import DesignChoice, DetectorBuilder
from zeroevent.pipeline import SyntheticSpec, make_synthetic
from zeroevent.rdsvm import TrainConfig, decision_function

SPEC = SyntheticSpec(n_events=3, n_concepts=30, n_videos=90, eval_positives=5, eval_related=2,
                     train_positives=5, train_related=3, train_background=20, seed=5)


@pytest.fixture(scope="module")
def setup():
    data = make_synthetic(SPEC)
    builder = DetectorBuilder(data.pool, data.store, data.corpora)
    pseudo = {ev.event_id: pt.generate_pseudo_positives(ev, builder, pt.detector_grid(), 5)
              for ev in data.events}
    return data, builder, pseudo


def test_detector_grid_size():
    grid = pt.detector_grid()
    assert len(grid) == 90 and len(set(grid)) == 90
    assert grid[0] == DesignChoice("Title", "Title", "tfidf", "spectral")


def test_pseudo_positives_unique_and_bounded(setup):
    data, _, pseudo = setup
    for ev in data.events:
        samples = pseudo[ev.event_id]
        keys = {s.vector.tobytes() for s in samples}
        assert len(keys) == len(samples)
        # Title/Title combos collapse to one, so at most 90 - 9 samples
        assert 1 <= len(samples) <= 81
        for s in samples:
            assert s.event_id == ev.event_id
            assert len(s.nonzero) <= 5
            assert s.vector.shape == (SPEC.n_concepts,)


def test_title_title_collapsed(setup):
    _, _, pseudo = setup
    for samples in pseudo.values():
        tt = [s for s in samples if s.provenance.elm_source == "Title"
              and s.provenance.clm_source == "Title"]
        assert len(tt) <= 1


def test_failures_recorded(setup):
    data, builder, _ = setup
    from zeroevent.textmodels import EventDescription
    ev = EventDescription("X", "the of", "", (), ())
    failures = []
    out = pt.generate_pseudo_positives(ev, builder, pt.detector_grid(), 5, failures)
    assert out == [] and len(failures) == 81
    with pytest.raises(InsufficientSamples):
        pt.generate_pseudo_positives(ev, builder, [], 5)


def test_assemble_negatives(setup):
    data, _, pseudo = setup
    e0 = data.events[0].event_id
    neg = pt.assemble_negatives(e0, "pseudo", pseudo)
    assert len(neg) == sum(len(v) for k, v in pseudo.items() if k != e0)
    with pytest.raises(InsufficientEvents):
        pt.assemble_negatives(e0, "pseudo", {e0: pseudo[e0]})
    bg = pt.assemble_negatives(e0, "real", pseudo, data.train_videos)
    assert bg.shape == data.train_videos.values.shape
    with pytest.raises(EmptyBackground):
        pt.assemble_negatives(e0, "real", pseudo, None)


def test_trained_detector_prefers_own_event(setup):
    data, _, pseudo = setup
    cfg = TrainConfig(folds=2, C_grid=(1.0, 8.0), gamma_grid=(0.5, 2.0), c_grid=(1.0,))
    e0 = data.events[0].event_id
    model = pt.train_pseudo_detector(pseudo[e0], pt.assemble_negatives(e0, "pseudo", pseudo), cfg)
    own = decision_function(model, pt.l2_rows([s.vector for s in pseudo[e0]])).mean()
    other = decision_function(model, pt.l2_rows(pt.assemble_negatives(e0, "pseudo", pseudo))).mean()
    assert own > other
    with pytest.raises(DimensionMismatch):
        pt.train_pseudo_detector(pseudo[e0], np.ones((3, 4)), cfg)
    with pytest.raises(InsufficientSamples):
        pt.train_pseudo_detector([], np.ones((3, 4)), cfg)


def test_l2_rows():
    X = pt.l2_rows([[3.0, 4.0], [0.0, 0.0]])
    assert X.tolist() == [[0.6, 0.8], [0.0, 0.0]]


def test_pseudo_file_round_trip(tmp_path, setup):
    _, _, pseudo = setup
    samples = [s for k in sorted(pseudo) for s in pseudo[k]]
    pt.write_pseudo_samples(tmp_path / "p.csv", samples)
    back = pt.read_pseudo_samples(tmp_path / "p.csv", SPEC.n_concepts)
    flat = [s for k in sorted(back) for s in back[k]]
    assert len(flat) == len(samples)
    for a, b in zip(samples, flat):
        assert a.provenance == b.provenance and np.array_equal(a.vector, b.vector)
    with pytest.raises(DimensionMismatch):
        pt.read_pseudo_samples(tmp_path / "p.csv", 2)
