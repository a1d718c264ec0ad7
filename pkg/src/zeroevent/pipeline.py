"""Experiment orchestration: configs, synthetic data, design sweeps and modes.

Pipeline modes
--------------
``T0``
    zero-example detector applied to model vectors.
``T10-pseudo`` / ``T10-real``
    SVM trained on pseudo-positive detectors against pseudo-negatives
    (other events' pseudo-positives) or real background videos.
``P10``
    SVM on 10 true positives against background.
``R10``
    relevance-degree SVM on 10 positives plus related videos.
``R10p``
    relevance-degree SVM on 10 positives plus pseudo-positives as related.
``A+B``
    late fusion (mean of normalized scores) of modes A and B.

Few-example modes repeat over seeded draws of positives and report the
mean AP over draws.
"""
from __future__ import annotations

import concurrent.futures as cf
import csv
import io
import itertools
import logging
import math
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import textmodels as tm
from .errors import ConfigError, DataError, MissingInput, ZeroEventError
from .eventdetector import (DEFAULT_K, DISTANCES, DesignChoice, DetectorBuilder, RankedList,
                            VideoCollection, rank_videos, read_model_vectors,
                            write_model_vectors, write_ranked_list)
from .fusion_eval import (GroundTruth, average_precision, format_table, late_fuse,
                          mean_average_precision, read_ground_truth, write_ground_truth)
from .pseudotraining import (assemble_negatives, detector_grid, generate_pseudo_positives, l2_rows,
                             train_pseudo_detector)
from .rdsvm import (DEFAULT_C_GRID, DEFAULT_GAMMA_GRID, DEFAULT_RELEVANCE_GRID, Dataset,
                    TrainConfig, auto_relevance_train, decision_function, nearest_to_median,
                    train_cv)
from .similarity import MATRIX_OPS, TermVectorStore, read_term_vectors, write_term_vectors

log = logging.getLogger(__name__)

BASE_MODES = ("T0", "T10-pseudo", "T10-real", "P10", "R10", "R10p")
FEW_EXAMPLE_MODES = ("P10", "R10", "R10p")


# --- configuration ----------------------------------------------------------

def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(eval_pow(t)) for t in text.split(",") if t.strip())


def eval_pow(token: str) -> float:
    """Parse a float, also accepting ``2^k`` powers."""
    token = token.strip()
    if "^" in token:
        base, exp = token.split("^")
        return float(base) ** float(exp)
    return float(token)


def _strs(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


_PATH_KEYS = ("concepts", "events", "corpus", "term_vectors", "videos", "ground_truth",
              "train_videos", "train_ground_truth", "stopwords")


@dataclass
class ExperimentConfig:
    """Every knob of an experiment.

    Read from a ``key = value`` file (``#`` comments, comma-separated
    lists, ``2^k`` allowed in numeric grids); relative paths resolve
    against the file's directory.
    """

    concepts: Path | None = None
    events: Path | None = None
    corpus: Path | None = None
    term_vectors: Path | None = None
    videos: Path | None = None
    ground_truth: Path | None = None
    train_videos: Path | None = None
    train_ground_truth: Path | None = None
    stopwords: Path | None = None

    elm_sources: tuple[str, ...] = tm.ELM_SOURCES
    clm_sources: tuple[str, ...] = tm.CLM_SOURCES
    weightings: tuple[str, ...] = tm.WEIGHTINGS
    operators: tuple[str, ...] = MATRIX_OPS
    distances: tuple[str, ...] = DISTANCES
    design: str = "AudioVisual/Google/raw-count/hausdorff"
    distance: str = "cosine"
    K: int = DEFAULT_K
    N: int = tm.DEFAULT_N
    M: int = tm.DEFAULT_M

    modes: tuple[str, ...] = ("T0",)
    seed: int = 0
    draws: int = 10
    n_positive: int = 10
    n_related: int = 10
    C_grid: tuple[float, ...] = DEFAULT_C_GRID
    gamma_grid: tuple[float, ...] = DEFAULT_GAMMA_GRID
    c_grid: tuple[float, ...] = DEFAULT_RELEVANCE_GRID
    folds: int = 5
    svm_tol: float = 1e-3
    related_as_positive: bool = False
    ap_depth: int | None = None
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)
    out: Path = Path("results")

    def __post_init__(self):
        self.validate_choices()

    def validate_choices(self) -> None:
        for name, allowed in (("elm_sources", tm.ELM_SOURCES), ("clm_sources", tm.CLM_SOURCES),
                              ("weightings", tm.WEIGHTINGS), ("operators", MATRIX_OPS),
                              ("distances", DISTANCES)):
            bad = [v for v in getattr(self, name) if v not in allowed]
            if bad:
                raise ConfigError(f"{name}: unknown value(s) {bad}")
        d = self.design_choice
        if (d.elm_source not in tm.ELM_SOURCES or d.clm_source not in tm.CLM_SOURCES
                or d.weighting not in tm.WEIGHTINGS or d.operator not in MATRIX_OPS):
            raise ConfigError(f"bad design {self.design!r}")
        if self.distance not in DISTANCES:
            raise ConfigError(f"unknown distance {self.distance!r}")
        for mode in self.modes:
            for part in mode.split("+"):
                if part not in BASE_MODES:
                    raise ConfigError(f"unknown mode {part!r}")
        if self.K < 1 or self.N < 1 or self.M < 1:
            raise ConfigError("K, N and M must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.draws < 1 or self.n_positive < 1:
            raise ConfigError("draws and n_positive must be >= 1")

    @property
    def design_choice(self) -> DesignChoice:
        return DesignChoice.from_tag(self.design)

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(C_grid=self.C_grid, gamma_grid=self.gamma_grid, c_grid=self.c_grid,
                           folds=self.folds, tol=self.svm_tol, seed=self.seed, jobs=self.jobs)

    def combos(self) -> list[tuple[DesignChoice, str]]:
        """The full C1 x C2a x C2b x C3 x C4 product, in enumeration order."""
        return [(DesignChoice(e, c, w, o), dist) for e, c, w, o, dist in itertools.product(
            self.elm_sources, self.clm_sources, self.weightings, self.operators, self.distances)]

    def check_paths(self, keys: Sequence[str] = _PATH_KEYS) -> None:
        for key in keys:
            p = getattr(self, key)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{key}: path {p} does not exist")

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_CONVERTERS = {
    "elm_sources": _strs, "clm_sources": _strs, "weightings": _strs, "operators": _strs,
    "distances": _strs, "modes": _strs, "C_grid": _floats, "gamma_grid": _floats,
    "c_grid": _floats, "K": int, "N": int, "M": int, "seed": int, "draws": int,
    "n_positive": int, "n_related": int, "folds": int, "jobs": int, "svm_tol": float,
    "related_as_positive": _bool, "ap_depth": lambda s: int(s) if s else None,
    "design": str, "distance": str, "out": Path,
}


def parse_config_text(text: str, base: Path = Path(".")) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = val
    return convert_config_values(values, base)


def convert_config_values(values: Mapping[str, object], base: Path = Path(".")) -> dict:
    known = {f.name for f in fields(ExperimentConfig)}
    out = {}
    for key, val in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if not isinstance(val, str):
            out[key] = val
        elif key in _PATH_KEYS:
            p = Path(val)
            out[key] = p if p.is_absolute() else base / p
        else:
            try:
                out[key] = _CONVERTERS[key](val)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {val!r}") from exc
    return out


def load_config(path: str | Path | None = None, overrides: Mapping[str, object] | None = None,
                check_paths: bool = True) -> ExperimentConfig:
    values = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        values = parse_config_text(path.read_text("utf-8"), path.parent)
    values.update(convert_config_values(overrides or {}))
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if check_paths:
        cfg.check_paths()
    return cfg


# --- data bundle ------------------------------------------------------------

@dataclass
class ExperimentData:
    pool: list[tm.ConceptEntry]
    events: list[tm.EventDescription]
    corpora: tm.CorpusStore
    store: TermVectorStore
    videos: VideoCollection
    gt: GroundTruth
    train_videos: VideoCollection | None = None
    train_gt: GroundTruth | None = None
    stopwords: frozenset[str] | None = None
    planted: dict[str, list[int]] = field(default_factory=dict)

    @property
    def n_concepts(self) -> int:
        return self.videos.n_concepts

    def builder(self, cfg: ExperimentConfig) -> DetectorBuilder:
        return DetectorBuilder(self.pool, self.store, self.corpora, cfg.N, cfg.M, self.stopwords)


def load_data(cfg: ExperimentConfig) -> ExperimentData:
    missing = [k for k in ("concepts", "events", "term_vectors", "videos", "ground_truth")
               if getattr(cfg, k) is None]
    if missing:
        raise ConfigError(f"config lacks {', '.join(missing)}")
    stop = tm.load_stopwords(cfg.stopwords) if cfg.stopwords else None
    pool = tm.read_concept_pool(cfg.concepts)
    videos = read_model_vectors(cfg.videos)
    if pool and max(c.concept_index for c in pool) >= videos.n_concepts:
        raise DataError("concept pool indices exceed the model-vector dimension")
    train = read_model_vectors(cfg.train_videos) if cfg.train_videos else None
    if train is not None and train.n_concepts != videos.n_concepts:
        raise DataError("training and evaluation model vectors differ in dimension")
    return ExperimentData(
        pool=pool,
        events=tm.read_event_kits(cfg.events),
        corpora=tm.CorpusStore(Path(cfg.corpus) if cfg.corpus else None),
        store=read_term_vectors(cfg.term_vectors),
        videos=videos,
        gt=read_ground_truth(cfg.ground_truth),
        train_videos=train,
        train_gt=read_ground_truth(cfg.train_ground_truth) if cfg.train_ground_truth else None,
        stopwords=stop,
    )


# --- synthetic corpus -------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Desk-scale stand-in for a real event-detection benchmark.

    Each event owns a topic vocabulary and a few planted concepts. Google
    style corpora of planted concepts talk about their event's topic;
    Wikipedia style corpora are corrupted and talk about a random other
    event. Positive videos fire on their event's planted concepts, related
    videos fire weaker on part of them, and Gaussian noise of width
    ``sigma`` is added to every model-vector entry.
    """

    n_events: int = 10
    n_concepts: int = 200
    n_videos: int = 500
    sigma: float = 0.05
    seed: int = 0
    planted_per_event: int = 3
    planted: tuple[tuple[int, ...], ...] | None = None
    eval_positives: int = 20
    eval_related: int = 5
    train_positives: int = 20
    train_related: int = 25
    train_background: int = 250
    related_shift: float = 0.45
    topic_words: int = 12
    vocab_size: int = 0
    docs_per_concept: int = 5
    doc_length: int = 40

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if not 0 <= self.related_shift <= 1:
            raise ConfigError("related_shift must lie in [0, 1]")
        if self.n_events * (self.eval_positives + self.eval_related) > self.n_videos:
            raise ConfigError("n_videos too small for the requested positives and related")
        if self.planted is not None:
            if len(self.planted) != self.n_events:
                raise ConfigError("need one planted concept set per event")
            for row in self.planted:
                if any(not 0 <= c < self.n_concepts for c in row):
                    raise ConfigError("planted concept index out of range")
        elif self.n_events * self.planted_per_event > self.n_concepts:
            raise ConfigError("not enough concepts for disjoint planted sets")


_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _make_words(rng: np.random.Generator, count: int, stop: frozenset[str]) -> list[str]:
    syllables = [c + v for c in _CONSONANTS for v in _VOWELS]
    words: list[str] = []
    seen = set()
    while len(words) < count:
        w = "".join(syllables[i] for i in rng.integers(0, len(syllables), 3))
        if w not in seen and w not in stop:
            seen.add(w)
            words.append(w)
    return words


def make_synthetic(spec: SyntheticSpec) -> ExperimentData:
    """Build a complete planted dataset in memory."""
    rng = np.random.default_rng(spec.seed)
    E, C = spec.n_events, spec.n_concepts
    T = spec.topic_words
    n_filler = 40
    n_extra = max(0, spec.vocab_size - (E * T + C * 10 + n_filler))
    words = _make_words(rng, E * T + C * 10 + n_filler + n_extra, tm.STOPWORDS)
    event_words = [words[e * T:(e + 1) * T] for e in range(E)]
    off = E * T
    concept_words = [words[off + c * 10: off + (c + 1) * 10] for c in range(C)]
    off += C * 10
    filler = words[off:off + n_filler]
    extra = words[off + n_filler:]

    if spec.planted is not None:
        planted = [list(p) for p in spec.planted]
    else:
        perm = rng.permutation(C)
        P = spec.planted_per_event
        planted = [sorted(int(x) for x in perm[e * P:(e + 1) * P]) for e in range(E)]
    owner = {c: e for e, cs in enumerate(planted) for c in cs}

    # article space: one block per event topic, per concept, and for filler
    ev_block, c_block, f_block = 30, 8, 40
    A = E * ev_block + C * c_block + f_block
    vectors: dict[str, dict[int, float]] = {}

    def topic_vector(block_start, block_len, frac=0.6):
        k = max(1, int(round(frac * block_len)))
        arts = rng.choice(block_len, size=k, replace=False) + block_start
        vec = {int(a): float(w) for a, w in zip(arts, rng.uniform(0.5, 1.5, k))}
        for a in rng.choice(A, size=2, replace=False):
            vec.setdefault(int(a), float(rng.uniform(0.05, 0.15)))
        return vec

    for e in range(E):
        for w in event_words[e]:
            vectors[w] = topic_vector(e * ev_block, ev_block)
    for c in range(C):
        for i, w in enumerate(concept_words[c]):
            vec = topic_vector(E * ev_block + c * c_block, c_block)
            if c in owner and i < 3:
                # names of planted concepts are partly about their event
                for a, wt in topic_vector(owner[c] * ev_block, ev_block, 0.3).items():
                    vec[a] = vec.get(a, 0.0) + 0.5 * wt
            vectors[w] = vec
    for w in filler:
        vectors[w] = topic_vector(E * ev_block + C * c_block, f_block, 0.3)
    for w in extra:
        vectors[w] = {int(a): float(rng.uniform(0.1, 1.0)) for a in rng.choice(A, size=3, replace=False)}

    # concept pool: title = 1-2 own words, subtitles use the next words
    pool = []
    for c in range(C):
        cw = concept_words[c]
        n_title = 1 + int(rng.integers(0, 2))
        n_sub = int(rng.integers(0, 3))
        subs = tuple(" ".join(cw[n_title + 1 + s:n_title + 2 + s]) for s in range(n_sub))
        pool.append(tm.ConceptEntry(c, " ".join(cw[:n_title]), subs))

    def document(own, topical, mix):
        L = spec.doc_length
        n_own = int(mix[0] * L)
        n_fill = int(mix[1] * L)
        toks = list(rng.choice(own, n_own)) + list(rng.choice(filler, n_fill))
        if topical is not None:
            toks += list(rng.choice(topical, L - n_own - n_fill))
        else:
            toks += list(rng.choice(own, L - n_own - n_fill))
        rng.shuffle(toks)
        return " ".join(toks)

    corpora = tm.CorpusStore(None)
    for c in range(C):
        own = concept_words[c]
        topical = event_words[owner[c]] if c in owner else None
        google = tuple(document(own, topical, (0.4, 0.3)) for _ in range(spec.docs_per_concept))
        decoys = [e for e in range(E) if c not in owner or e != owner[c]]
        decoy = event_words[int(rng.choice(decoys))] if decoys else None
        wiki = tuple(document(own, decoy, (0.4, 0.3)) for _ in range(spec.docs_per_concept))
        corpora.add(tm.DocumentCorpus(c, google, "google-style"))
        corpora.add(tm.DocumentCorpus(c, wiki, "wikipedia-style"))

    events = []
    width = max(3, len(str(E)))
    for e in range(E):
        ew = event_words[e]
        title = " ".join(ew[:2])
        names = [pool[c].title for c in planted[e]]
        visual = [*names, " ".join(ew[2:4]), ew[4], " ".join(ew[5:7])]
        audio = [ew[7], " ".join(ew[8:10])]
        free = list(rng.choice(ew, 20)) + list(rng.choice(filler, 15))
        rng.shuffle(free)
        events.append(tm.EventDescription(f"E{e:0{width}d}", title, " ".join(free),
                                          tuple(visual), tuple(audio)))

    videos, gt = _synthetic_videos(spec, rng, planted, events, "v", spec.n_videos,
                                   spec.eval_positives, spec.eval_related)
    n_train = E * (spec.train_positives + spec.train_related) + spec.train_background
    train, train_gt = _synthetic_videos(spec, rng, planted, events, "t", n_train,
                                        spec.train_positives, spec.train_related)
    return ExperimentData(pool, events, corpora, TermVectorStore(vectors, A), videos, gt,
                          train, train_gt, None,
                          {ev.event_id: planted[e] for e, ev in enumerate(events)})


def _synthetic_videos(spec, rng, planted, events, prefix, n, n_pos, n_rel):
    E, C = spec.n_events, spec.n_concepts
    base = rng.uniform(0.0, 0.05, size=(n, C))
    kind = []  # (label kind, event)
    for e in range(E):
        kind += [("positive", e)] * n_pos + [("related", e)] * n_rel
    kind += [("background", -1)] * (n - len(kind))
    for row, (label, e) in enumerate(kind):
        if label == "positive":
            base[row, planted[e]] = rng.uniform(0.7, 1.0, len(planted[e]))
            extra = rng.choice(C, 3, replace=False)
            base[row, extra] = np.maximum(base[row, extra], rng.uniform(0.2, 0.6, 3))
        elif label == "related":
            # the positive distribution, scaled down towards the background
            base[row, planted[e]] = (1 - spec.related_shift) * rng.uniform(0.7, 1.0, len(planted[e]))
            extra = rng.choice(C, 3, replace=False)
            base[row, extra] = np.maximum(base[row, extra], rng.uniform(0.2, 0.6, 3))
        else:
            m = int(rng.integers(3, 6))
            extra = rng.choice(C, m, replace=False)
            base[row, extra] = rng.uniform(0.3, 1.0, m)
    noise = np.random.default_rng([spec.seed, 7 if prefix == "v" else 11]).standard_normal((n, C))
    values = np.maximum(base + spec.sigma * noise, 0.0)
    order = rng.permutation(n)
    width = len(str(n - 1))
    ids = [f"{prefix}{int(i):0{width}d}" for i in order]
    gt = GroundTruth()
    for vid, (label, e) in zip(ids, kind):
        for f, ev in enumerate(events):
            gt.add(vid, ev.event_id, label if f == e else "background")
    coll = VideoCollection(tuple(ids), values).subset(sorted(ids))
    return coll, gt


def write_dataset_files(data: ExperimentData, out: str | Path) -> Path:
    """Write a data bundle in the on-disk formats and return its config path."""
    out = Path(out)
    (out / "events").mkdir(parents=True, exist_ok=True)
    tm.write_concept_pool(out / "concepts.tsv", data.pool)
    for ev in data.events:
        tm.write_event_kit(out / "events" / f"{ev.event_id}.txt", ev)
    for tag in ("google-style", "wikipedia-style"):
        for c in data.pool:
            corpus = data.corpora.get(tag, c)
            if corpus.documents:
                tm.write_corpus(out / "corpus", corpus)
    vecs = {t: data.store.vector(t) for t in data.store.terms}
    write_term_vectors(out / "term_vectors.txt", vecs, data.store.dim)
    write_model_vectors(out / "videos.csv", data.videos)
    write_ground_truth(out / "ground_truth.csv", data.gt)
    lines = ["concepts = concepts.tsv", "events = events", "corpus = corpus",
             "term_vectors = term_vectors.txt", "videos = videos.csv",
             "ground_truth = ground_truth.csv"]
    if data.train_videos is not None:
        write_model_vectors(out / "train_videos.csv", data.train_videos)
        write_ground_truth(out / "train_ground_truth.csv", data.train_gt)
        lines += ["train_videos = train_videos.csv", "train_ground_truth = train_ground_truth.csv"]
    if data.planted:
        (out / "planted.tsv").write_text(
            "".join(f"{e}\t{','.join(map(str, cs))}\n" for e, cs in sorted(data.planted.items())),
            encoding="utf-8")
    (out / "dataset.cfg").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out / "dataset.cfg"


def generate_synthetic(spec: SyntheticSpec, out: str | Path) -> Path:
    """Generate a planted dataset and write it under ``out``; returns the config path."""
    return write_dataset_files(make_synthetic(spec), out)


# --- sweep ------------------------------------------------------------------

@dataclass
class SweepResult:
    events: list[str]
    rows: list[dict]

    def sorted_rows(self) -> list[dict]:
        return sorted(self.rows, key=lambda r: (-_sort_map(r["MAP"]), r["index"]))

    def best(self) -> dict:
        return self.sorted_rows()[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "index", "C1", "C2a", "C2b", "C3", "C4", "duplicate_of", "MAP",
                    *self.events, "error"])
        for rank, r in enumerate(self.sorted_rows(), 1):
            w.writerow([rank, r["index"], *r["combo"], "" if r["duplicate_of"] is None else
                        r["duplicate_of"], _fmt(r["MAP"]), *(_fmt(r["aps"].get(e)) for e in self.events),
                        r["error"] or ""])
        return buf.getvalue()

    def to_table(self, top: int | None = None) -> str:
        rows = [[rank, *r["combo"], _fmt(r["MAP"])]
                for rank, r in enumerate(self.sorted_rows()[:top], 1)]
        return format_table(["#", "ELM", "CLM", "Weighting", "Operator", "Distance", "MAP"], rows)


def _sort_map(v):
    return -math.inf if v is None else v


def _fmt(v):
    return "" if v is None else f"{v:.6f}"


def _evaluate_lists(lists: Mapping[str, RankedList], gt: GroundTruth, cfg: ExperimentConfig):
    aps = {}
    for event, ranked in lists.items():
        try:
            aps[event] = average_precision(ranked, gt, event, cfg.related_as_positive, cfg.ap_depth)
        except ZeroEventError:
            aps[event] = None
    defined = [a for a in aps.values() if a is not None]
    return aps, (mean_average_precision(defined) if defined else None)


def run_sweep(cfg: ExperimentConfig, data: ExperimentData | None = None) -> SweepResult:
    """Evaluate every design-choice combination on the evaluation videos.

    A failing combination is logged and kept as a row with its error.
    Combinations whose detectors and distance coincide with an earlier
    row's are marked ``duplicate_of`` that row.
    """
    data = data or load_data(cfg)
    builder = data.builder(cfg)
    events = data.events
    combos = cfg.combos()

    # concept-score tables first, concurrently per event
    keys = sorted({(e, d.elm_source, d.clm_source, d.weighting) for e in range(len(events))
                   for d, _ in combos})

    def warm(key):
        e, elm, clm, w = key
        try:
            builder.scores(events[e], elm, clm, w)
        except ZeroEventError as exc:
            log.warning("event %s %s/%s/%s: %s", events[e].event_id, elm, clm, w, exc)

    with cf.ThreadPoolExecutor(max(1, cfg.jobs)) as pool:
        list(pool.map(warm, keys))

    def evaluate(index):
        design, dist = combos[index]
        lists = {}
        signature = []
        try:
            for ev in events:
                det = builder.build(ev, design, cfg.K)
                signature.append(det.entries)
                lists[ev.event_id] = rank_videos(det, data.videos, dist)
            aps, m = _evaluate_lists(lists, data.gt, cfg)
            error = None
        except ZeroEventError as exc:
            log.error("combo %s/%s failed: %s", design.tag, dist, exc)
            aps, m, error = {}, None, f"{type(exc).__name__}: {exc}"
            signature = None
        return {"index": index, "combo": (design.elm_source, design.clm_source, design.weighting,
                                          design.operator, dist),
                "aps": aps, "MAP": m, "error": error, "signature": signature}

    with cf.ThreadPoolExecutor(max(1, cfg.jobs)) as pool:
        rows = list(pool.map(evaluate, range(len(combos))))

    first: dict = {}
    for r in rows:
        sig = r.pop("signature")
        key = None if sig is None else (tuple(sig), r["combo"][4])
        r["duplicate_of"] = first.get(key) if key is not None else None
        if key is not None and key not in first:
            first[key] = r["index"]
    return SweepResult([e.event_id for e in events], rows)


# --- modes ------------------------------------------------------------------

@dataclass
class ModeResult:
    mode: str
    lists: dict[str, list[RankedList]]
    aps: dict[str, float | None]
    MAP: float | None
    info: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["event_id", self.mode])
        for e in sorted(self.aps):
            w.writerow([e, _fmt(self.aps[e])])
        w.writerow(["MAP", _fmt(self.MAP)])
        return buf.getvalue()


class ModeRunner:
    """Runs pipeline modes on one data bundle, caching shared pieces.

    Ranked lists are indexed by draw; zero-example modes have a single
    list reused for every draw.
    """

    def __init__(self, cfg: ExperimentConfig, data: ExperimentData, pseudo=None):
        self.cfg = cfg
        self.data = data
        self.builder = data.builder(cfg)
        self._pseudo = pseudo
        self._cache: dict[str, dict[str, list[RankedList]]] = {}
        self.info: dict[str, dict] = {}

    # pieces -----------------------------------------------------------------
    def pseudo_positives(self):
        if self._pseudo is None:
            combos = detector_grid(self.cfg.elm_sources, self.cfg.clm_sources,
                                   self.cfg.weightings, self.cfg.operators)
            self._pseudo = {ev.event_id: generate_pseudo_positives(ev, self.builder, combos, self.cfg.K)
                            for ev in self.data.events}
        return self._pseudo

    def _need_train(self, mode):
        if self.data.train_videos is None or self.data.train_gt is None:
            raise MissingInput(f"mode {mode} needs training videos and ground truth")

    def _rank_svm(self, model, normalize=True) -> RankedList:
        X = self.data.videos.values
        scores = decision_function(model, l2_rows(X) if normalize else X)
        return RankedList.from_scores(self.data.videos.ids, scores)

    def _positive_draw(self, event_index: int, event_id: str, draw: int) -> list[str]:
        pos = self.data.train_gt.videos(event_id, "positive")
        if len(pos) < 1:
            raise MissingInput(f"event {event_id} has no training positives")
        rng = np.random.default_rng([self.cfg.seed, draw, event_index])
        k = min(self.cfg.n_positive, len(pos))
        return sorted(pos[i] for i in rng.choice(len(pos), k, replace=False))

    def _background(self, event_id):
        bg = self.data.train_gt.videos(event_id, "background")
        # other events' positives are background for this event but not "rest of world"
        world = [v for v in bg if all(self.data.train_gt.label(v, e) == "background"
                                      for e in self.data.train_gt.events)]
        return self.data.train_videos.subset(world).values

    # modes ------------------------------------------------------------------
    def t0(self):
        design = self.cfg.design_choice
        return {ev.event_id: [rank_videos(self.builder.build(ev, design, self.cfg.K),
                                          self.data.videos, self.cfg.distance)]
                for ev in self.data.events}

    def t10(self, neg_mode):
        pseudo = self.pseudo_positives()
        tc = self.cfg.train_config
        out = {}
        for ev in self.data.events:
            if neg_mode == "real":
                self._need_train("T10-real")
                negatives = self._background(ev.event_id)
            else:
                negatives = assemble_negatives(ev.event_id, "pseudo", pseudo)
            model = train_pseudo_detector(pseudo[ev.event_id], negatives, tc)
            self.info.setdefault(f"T10-{neg_mode}", {})[ev.event_id] = dict(model.meta)
            out[ev.event_id] = [self._rank_svm(model)]
        return out

    def few(self, mode):
        self._need_train(mode)
        tc = self.cfg.train_config
        pseudo = self.pseudo_positives() if mode == "R10p" else None
        out = {}
        for e, ev in enumerate(self.data.events):
            bg = l2_rows(self._background(ev.event_id))
            if mode == "R10":
                rel_ids = self.data.train_gt.videos(ev.event_id, "related")
                rel_pool = l2_rows(self.data.train_videos.subset(rel_ids).values) if rel_ids else np.zeros((0, bg.shape[1]))
            elif mode == "R10p":
                rel_pool = l2_rows(np.vstack([p.vector for p in pseudo[ev.event_id]]))
            else:
                rel_pool = None
            related = None
            if rel_pool is not None and len(rel_pool):
                k = min(self.cfg.n_related, len(rel_pool))
                related = rel_pool[nearest_to_median(rel_pool, k)]
            lists = []
            for draw in range(self.cfg.draws):
                pos = l2_rows(self.data.train_videos.subset(self._positive_draw(e, ev.event_id, draw)).values)
                tcd = replace(tc, seed=self.cfg.seed * 1000 + draw)
                if mode == "P10":
                    model = train_cv(Dataset.from_groups(pos, bg), tcd)
                    model.meta["branch"] = "none"
                else:
                    model = auto_relevance_train(pos, bg, related, tcd)
                self.info.setdefault(mode, {}).setdefault(ev.event_id, []).append(dict(model.meta))
                lists.append(self._rank_svm(model))
            out[ev.event_id] = lists
        return out

    def base(self, mode) -> dict[str, list[RankedList]]:
        if mode not in self._cache:
            if mode == "T0":
                self._cache[mode] = self.t0()
            elif mode == "T10-pseudo":
                self._cache[mode] = self.t10("pseudo")
            elif mode == "T10-real":
                self._cache[mode] = self.t10("real")
            elif mode in FEW_EXAMPLE_MODES:
                self._cache[mode] = self.few(mode)
            else:
                raise ConfigError(f"unknown mode {mode!r}")
        return self._cache[mode]

    def lists(self, mode: str) -> dict[str, list[RankedList]]:
        parts = mode.split("+")
        if len(parts) == 1:
            return self.base(mode)
        per_part = [self.base(p) for p in parts]
        out = {}
        for ev in self.data.events:
            n = max(len(p[ev.event_id]) for p in per_part)
            out[ev.event_id] = [late_fuse([p[ev.event_id][d if len(p[ev.event_id]) > 1 else 0]
                                           for p in per_part]) for d in range(n)]
        return out

    def run(self, mode: str) -> ModeResult:
        lists = self.lists(mode)
        aps = {}
        for event, per_draw in lists.items():
            vals = []
            for ranked in per_draw:
                try:
                    vals.append(average_precision(ranked, self.data.gt, event,
                                                  self.cfg.related_as_positive, self.cfg.ap_depth))
                except ZeroEventError:
                    pass
            aps[event] = float(np.mean(vals)) if vals else None
        defined = [a for a in aps.values() if a is not None]
        m = mean_average_precision(defined) if defined else None
        return ModeResult(mode, lists, aps, m, {p: self.info.get(p) for p in mode.split("+")})


def run_mode(cfg: ExperimentConfig, mode: str, data: ExperimentData | None = None,
             runner: ModeRunner | None = None) -> ModeResult:
    runner = runner or ModeRunner(cfg, data or load_data(cfg))
    return runner.run(mode)


# --- reports ----------------------------------------------------------------

def write_mode_outputs(result: ModeResult, out: str | Path) -> None:
    """Ranked-list files per event (and draw) plus the per-event AP report."""
    out = Path(out)
    d = out / "ranked" / result.mode
    d.mkdir(parents=True, exist_ok=True)
    for event, per_draw in sorted(result.lists.items()):
        if len(per_draw) == 1:
            write_ranked_list(d / f"{event}.csv", per_draw[0])
        else:
            for i, ranked in enumerate(per_draw):
                write_ranked_list(d / f"{event}_draw{i}.csv", ranked)
    (out / f"report_{result.mode}.csv").write_text(result.to_csv(), encoding="utf-8")


def modes_table(results: Sequence[ModeResult]) -> str:
    events = sorted({e for r in results for e in r.aps})
    header = ["Event", *(r.mode for r in results)]
    rows = [[e, *(_fmt(r.aps.get(e)) for r in results)] for e in events]
    rows.append(["MAP", *(_fmt(r.MAP) for r in results)])
    return format_table(header, rows)


def write_sweep_outputs(result: SweepResult, out: str | Path, plot_data: bool = False) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(result.to_csv(), encoding="utf-8")
    (out / "sweep.txt").write_text(result.to_table(), encoding="utf-8")
    if plot_data:
        best = result.best()
        lines = [f"# {' / '.join(best['combo'])}"] + [
            f"{e}\t{_fmt(best['aps'].get(e))}" for e in result.events]
        (out / "sweep_best_per_event.dat").write_text("\n".join(lines) + "\n", encoding="utf-8")
