"""Zero-example event detectors and their application to video model vectors."""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (ConfigError, DataError, DimensionMismatch, EmptyCollection,
                     EmptyCorpus, EmptyInput, EmptySource)
from .similarity import MATRIX_OPS, TermVectorStore, matrix_score, similarity_matrix
from .textmodels import (DEFAULT_M, DEFAULT_N, SOURCE_TAGS, ConceptEntry, CorpusStore,
                         EventDescription, LanguageModel, build_clm, build_elm)

log = logging.getLogger(__name__)

DISTANCES = ("cosine", "hist_intersect", "kullback", "chi2", "euclidean")
DEFAULT_K = 10
KL_EPS = 1e-10
CHI2_EPS = 1e-10


@dataclass(frozen=True)
class DesignChoice:
    elm_source: str = "AudioVisual"
    clm_source: str = "Google"
    weighting: str = "raw-count"
    operator: str = "hausdorff"

    @property
    def tag(self) -> str:
        return f"{self.elm_source}/{self.clm_source}/{self.weighting}/{self.operator}"

    @classmethod
    def from_tag(cls, tag: str) -> "DesignChoice":
        parts = tag.split("/")
        if len(parts) != 4:
            raise ConfigError(f"bad design-choice tag {tag!r}")
        return cls(*parts)


@dataclass(frozen=True)
class EventDetector:
    event_id: str
    entries: tuple[tuple[int, float], ...]
    design_choice: DesignChoice | None = None
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        idx = [c for c, _ in self.entries]
        if not idx:
            raise DataError("detector must hold at least one concept")
        if len(set(idx)) != len(idx):
            raise DataError("detector concept indices must be unique")
        scores = np.array([s for _, s in self.entries], dtype=float)
        if not np.all(np.isfinite(scores)):
            raise DataError("detector scores must be finite")
        if np.any(np.diff(scores) > 0):
            raise DataError("detector entries must be sorted by score")

    @property
    def concepts(self) -> np.ndarray:
        return np.array([c for c, _ in self.entries], dtype=np.int64)

    @property
    def scores(self) -> np.ndarray:
        return np.array([s for _, s in self.entries], dtype=float)

    @property
    def k(self) -> int:
        return len(self.entries)

    def to_vector(self, n_concepts: int) -> np.ndarray:
        """Embed the detector in concept space, zeros off its K concepts."""
        v = np.zeros(n_concepts)
        v[self.concepts] = self.scores
        return v


@dataclass(frozen=True)
class ModelVector:
    video_id: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise DataError(f"model vector of {self.video_id!r} must be a finite 1-d array")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class VideoCollection:
    """Model vectors of many videos stacked as rows."""

    ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != len(self.ids):
            raise DataError("collection values must be (n_videos, n_concepts)")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("video ids must be unique")
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "values", v)

    @classmethod
    def from_vectors(cls, vectors: Sequence[ModelVector]) -> "VideoCollection":
        if not vectors:
            return cls((), np.zeros((0, 0)))
        dims = {len(mv.values) for mv in vectors}
        if len(dims) != 1:
            raise DimensionMismatch("model vectors differ in length")
        return cls(tuple(mv.video_id for mv in vectors), np.vstack([mv.values for mv in vectors]))

    @property
    def n_concepts(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        for vid, row in zip(self.ids, self.values):
            yield ModelVector(vid, row)

    def subset(self, ids: Iterable[str]) -> "VideoCollection":
        pos = {v: i for i, v in enumerate(self.ids)}
        ids = list(ids)
        return VideoCollection(tuple(ids), self.values[[pos[v] for v in ids]])


@dataclass(frozen=True)
class RankedList:
    """Videos sorted by relevance, descending, ties by video id."""

    items: tuple[tuple[str, float], ...]

    def __post_init__(self):
        ids = [v for v, _ in self.items]
        if len(set(ids)) != len(ids):
            raise DataError("ranked list video ids must be unique")

    @classmethod
    def from_scores(cls, ids: Sequence[str], scores: Sequence[float]) -> "RankedList":
        pairs = sorted(zip(ids, (float(s) for s in scores)), key=lambda p: (-p[1], p[0]))
        return cls(tuple(pairs))

    @classmethod
    def from_mapping(cls, scores: Mapping[str, float]) -> "RankedList":
        return cls.from_scores(list(scores), list(scores.values()))

    @property
    def ids(self) -> list[str]:
        return [v for v, _ in self.items]

    @property
    def scores(self) -> np.ndarray:
        return np.array([s for _, s in self.items], dtype=float)

    def as_dict(self) -> dict[str, float]:
        return dict(self.items)

    def __len__(self):
        return len(self.items)


def aggregate_keyframes(frames: Sequence[Sequence[float]]) -> np.ndarray:
    """Video-level model vector as the mean of its keyframe vectors."""
    if len(frames) == 0:
        raise EmptyInput("no keyframes to aggregate")
    lengths = {len(f) for f in frames}
    if len(lengths) != 1:
        raise DimensionMismatch(f"keyframe vectors differ in length: {sorted(lengths)}")
    return np.mean(np.asarray(frames, dtype=float), axis=0)


# --- detector construction ----------------------------------------------------

def concept_scores(elm: LanguageModel, clms: Sequence[LanguageModel | None],
                   store: TermVectorStore, ops: Sequence[str] = MATRIX_OPS) -> np.ndarray:
    """Score every concept under each matrix operator.

    Returns an array of shape ``(len(clms), len(ops))``; a missing CLM
    (``None``) scores 0 everywhere.
    """
    out = np.zeros((len(clms), len(ops)))
    for i, clm in enumerate(clms):
        if clm is None:
            continue
        s = similarity_matrix(elm, clm, store)
        out[i] = [matrix_score(s, op) for op in ops]
    return out


def top_k(event_id: str, pool_indices: Sequence[int], scores: np.ndarray, k: int,
          design: DesignChoice | None = None, warnings: Sequence[str] = ()) -> EventDetector:
    if not 1 <= k <= len(pool_indices):
        raise ConfigError(f"K={k} outside [1, {len(pool_indices)}]")
    order = sorted(range(len(pool_indices)), key=lambda i: (-scores[i], pool_indices[i]))[:k]
    entries = tuple((int(pool_indices[i]), float(scores[i])) for i in order)
    return EventDetector(event_id, entries, design, tuple(warnings))


def build_clms(pool: Sequence[ConceptEntry], clm_source: str, weighting: str,
               corpora: CorpusStore, m: int = DEFAULT_M, stopwords=None):
    """CLM per concept plus a warning per concept that could not be built."""
    tag = SOURCE_TAGS[clm_source]
    clms: list[LanguageModel | None] = []
    warnings = []
    for concept in pool:
        try:
            clms.append(build_clm(concept, corpora.get(tag, concept), weighting, m, stopwords))
        except (EmptyCorpus, EmptySource) as exc:
            clms.append(None)
            warnings.append(f"concept {concept.concept_index}: {exc}")
    return clms, warnings


def build_detector(event: EventDescription, pool: Sequence[ConceptEntry],
                   design: DesignChoice, k: int, store: TermVectorStore,
                   corpora: CorpusStore, n: int = DEFAULT_N, m: int = DEFAULT_M,
                   stopwords=None) -> EventDetector:
    """Rank the concept pool against an event description and keep the top K.

    Concepts whose language model cannot be built score 0 and are listed
    in ``detector.warnings``.
    """
    if not 1 <= k <= len(pool):
        raise ConfigError(f"K={k} outside [1, {len(pool)}]")
    if design.operator not in MATRIX_OPS:
        raise ConfigError(f"unknown matrix operator {design.operator!r}")
    elm = build_elm(event, design.elm_source, n, stopwords)
    clms, warnings = build_clms(pool, design.clm_source, design.weighting, corpora, m, stopwords)
    for w in warnings:
        log.warning("event %s: %s", event.event_id, w)
    scores = concept_scores(elm, clms, store, (design.operator,))[:, 0]
    return top_k(event.event_id, [c.concept_index for c in pool], scores, k, design, warnings)


# --- detector application -----------------------------------------------------

def relevance_scores(det: EventDetector, values: np.ndarray, dist: str) -> np.ndarray:
    """Relevance of each row of ``values`` (videos x concepts) to a detector.

    Distances are negated so that larger always means more relevant; a
    video whose selected entries are all zero gets ``-inf``.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if det.concepts.max() >= values.shape[1]:
        raise DimensionMismatch("detector references concepts beyond the model-vector length")
    d = det.scores
    v = values[:, det.concepts]
    zero = ~np.any(v != 0, axis=1)
    if not np.any(d != 0):
        return np.full(len(values), -np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        if dist == "cosine":
            out = (v @ d) / (np.linalg.norm(v, axis=1) * np.linalg.norm(d))
        elif dist == "hist_intersect":
            dn = d / d.sum()
            vn = v / v.sum(axis=1, keepdims=True)
            out = np.minimum(dn, vn).sum(axis=1)
        elif dist == "kullback":
            ds = d + KL_EPS
            ds = ds / ds.sum()
            vs = v + KL_EPS
            vs = vs / vs.sum(axis=1, keepdims=True)
            out = -(ds * np.log(ds / vs)).sum(axis=1)
        elif dist == "chi2":
            dn = d / d.sum()
            vn = v / v.sum(axis=1, keepdims=True)
            out = -((dn - vn) ** 2 / (dn + vn + CHI2_EPS)).sum(axis=1)
        elif dist == "euclidean":
            out = -np.linalg.norm(v - d, axis=1)
        else:
            raise ConfigError(f"unknown distance {dist!r}")
    out[zero] = -np.inf
    return out


def video_relevance(det: EventDetector, mv: ModelVector | np.ndarray, dist: str = "cosine") -> float:
    values = mv.values if isinstance(mv, ModelVector) else np.asarray(mv, dtype=float)
    return float(relevance_scores(det, values[None, :], dist)[0])


def rank_videos(det: EventDetector, collection: VideoCollection | Sequence[ModelVector],
                dist: str = "cosine") -> RankedList:
    if not isinstance(collection, VideoCollection):
        collection = VideoCollection.from_vectors(list(collection))
    if len(collection) == 0:
        raise EmptyCollection("no videos to rank")
    return RankedList.from_scores(collection.ids, relevance_scores(det, collection.values, dist))


# --- file formats -----------------------------------------------------------

def read_model_vectors(path: str | Path) -> VideoCollection:
    """Read ``#Nc=<int>`` then ``video_id,v0,v1,...``; negatives clamp to 0."""
    nc = None
    ids = []
    rows = []
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#Nc="):
            nc = int(line[4:])
            continue
        if line.startswith("#"):
            continue
        vid, *vals = line.split(",")
        row = np.array([float(x) for x in vals])
        if nc is not None and len(row) != nc:
            raise DimensionMismatch(f"{path}:{lineno}: expected {nc} values, got {len(row)}")
        if not np.all(np.isfinite(row)):
            raise DataError(f"{path}:{lineno}: non-finite model-vector entry")
        ids.append(vid)
        rows.append(row)
    if nc is None:
        raise DataError(f"{path}: missing #Nc=<int> header")
    values = np.maximum(np.vstack(rows), 0.0) if rows else np.zeros((0, nc))
    return VideoCollection(tuple(ids), values)


def write_model_vectors(path: str | Path, collection: VideoCollection) -> None:
    lines = [f"#Nc={collection.n_concepts}"]
    for vid, row in zip(collection.ids, collection.values):
        lines.append(vid + "," + ",".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_detector(path: str | Path, det: EventDetector) -> None:
    lines = [det.event_id]
    if det.design_choice is not None:
        lines.append(f"# design={det.design_choice.tag}")
    lines += [f"{c},{s!r}" for c, s in det.entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_detector(path: str | Path) -> EventDetector:
    lines = [l for l in Path(path).read_text("utf-8").splitlines() if l.strip()]
    event_id = lines[0]
    design = None
    entries = []
    for line in lines[1:]:
        if line.startswith("# design="):
            design = DesignChoice.from_tag(line[len("# design="):])
        elif not line.startswith("#"):
            c, s = line.split(",")
            entries.append((int(c), float(s)))
    return EventDetector(event_id, tuple(entries), design)


def write_ranked_list(path: str | Path, ranked: RankedList) -> None:
    lines = ["video_id,score"] + [f"{v},{s!r}" for v, s in ranked.items]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_ranked_list(path: str | Path) -> RankedList:
    items = []
    for line in Path(path).read_text("utf-8").splitlines()[1:]:
        if line.strip():
            v, s = line.rsplit(",", 1)
            items.append((v, float(s)))
    return RankedList.from_scores([v for v, _ in items], [s for _, s in items])


class DetectorBuilder:
    """Builds detectors for many events and design choices, sharing work.

    CLMs are built once per (source, weighting) and the similarity matrix
    of each (event, ELM source, CLM variant, concept) is reduced under
    every operator in one pass, so a sweep over operators costs nothing
    extra. Results match :func:`build_detector`.
    """

    def __init__(self, pool: Sequence[ConceptEntry], store: TermVectorStore, corpora: CorpusStore,
                 n: int = DEFAULT_N, m: int = DEFAULT_M, stopwords=None):
        self.pool = list(pool)
        self.indices = [c.concept_index for c in self.pool]
        self.store = store
        self.corpora = corpora
        self.n = n
        self.m = m
        self.stopwords = stopwords
        self._clms: dict = {}
        self._scores: dict = {}
        self._lock = threading.Lock()

    @property
    def n_concepts(self) -> int:
        return max(self.indices) + 1

    def clms(self, clm_source: str, weighting: str):
        # title-only CLMs ignore the weighting
        key = (clm_source, weighting if clm_source != "Title" else "raw-count")
        with self._lock:
            if key not in self._clms:
                self._clms[key] = build_clms(self.pool, clm_source, key[1], self.corpora,
                                             self.m, self.stopwords)
            return self._clms[key]

    def scores(self, event: EventDescription, elm_source: str, clm_source: str,
               weighting: str) -> np.ndarray:
        """Concept x operator score table, operators in ``MATRIX_OPS`` order."""
        wkey = weighting if clm_source != "Title" else "raw-count"
        key = (event.event_id, elm_source, clm_source, wkey)
        hit = self._scores.get(key)
        if hit is not None:
            return hit
        elm = build_elm(event, elm_source, self.n, self.stopwords)
        clms, _ = self.clms(clm_source, weighting)
        # one sparse product against every CLM term, sliced per concept
        cols = [t for clm in clms if clm is not None for t in clm.terms]
        table = np.zeros((len(clms), len(MATRIX_OPS)))
        if cols:
            block = similarity_matrix(elm, cols, self.store)
            start = 0
            for i, clm in enumerate(clms):
                if clm is None:
                    continue
                s = block[:, start:start + len(clm)]
                start += len(clm)
                table[i] = [matrix_score(s, op) for op in MATRIX_OPS]
        self._scores[key] = table
        return table

    def warnings(self, clm_source: str, weighting: str) -> list[str]:
        return self.clms(clm_source, weighting)[1]

    def build(self, event: EventDescription, design: DesignChoice, k: int = DEFAULT_K) -> EventDetector:
        if design.operator not in MATRIX_OPS:
            raise ConfigError(f"unknown matrix operator {design.operator!r}")
        table = self.scores(event, design.elm_source, design.clm_source, design.weighting)
        col = table[:, MATRIX_OPS.index(design.operator)]
        return top_k(event.event_id, self.indices, col, k, design,
                     self.warnings(design.clm_source, design.weighting))
