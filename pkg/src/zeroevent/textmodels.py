"""Event and concept language models.

An event language model (ELM) is a ranked word list extracted from an
event kit; a concept language model (CLM) is the analogous list for one
concept of the pool, optionally enriched with a local document corpus.
"""
from __future__ import annotations

import html
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, DataError, EmptyCorpus, EmptySource

ELM_SOURCES = ("Title", "Visual", "AudioVisual")
CLM_SOURCES = ("Title", "Google", "Wikipedia")
WEIGHTINGS = ("tfidf", "raw-count")

SOURCE_TAGS = {
    "Title": "title-only",
    "Google": "google-style",
    "Wikipedia": "wikipedia-style",
}

DEFAULT_N = 30
DEFAULT_M = 50

_TAG_RE = re.compile(r"<[^>]*>")
_TOKEN_RE = re.compile(r"[^\W_]+")


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a stop-word file (one word per line); the bundled list by default."""
    if path is None:
        text = resources.files("zeroevent").joinpath("data/stopwords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


STOPWORDS = load_stopwords()


def tokenize(text: str, stopwords: Iterable[str] | None = None) -> list[str]:
    """Split text into lowercase terms.

    HTML tags are stripped, entities unescaped, and punctuation acts as a
    separator. Tokens made only of digits and stop words are dropped.

    >>> tokenize("Riding a bike! <b>bike</b>")
    ['riding', 'bike', 'bike']
    """
    stop = STOPWORDS if stopwords is None else stopwords
    text = html.unescape(_TAG_RE.sub(" ", text)).lower()
    return [t for t in _TOKEN_RE.findall(text) if not t.isdigit() and t not in stop]


@dataclass(frozen=True)
class EventDescription:
    event_id: str
    title: str
    free_text: str = ""
    visual_cues: tuple[str, ...] = ()
    audio_cues: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.event_id:
            raise DataError("event_id must be non-empty")
        if not self.title.strip():
            raise DataError(f"event {self.event_id!r} has an empty title")
        object.__setattr__(self, "visual_cues", tuple(self.visual_cues))
        object.__setattr__(self, "audio_cues", tuple(self.audio_cues))


@dataclass(frozen=True)
class ConceptEntry:
    concept_index: int
    title: str
    subtitles: tuple[str, ...] = ()

    def __post_init__(self):
        if self.concept_index < 0:
            raise DataError("concept_index must be non-negative")
        if not self.title.strip():
            raise DataError(f"concept {self.concept_index} has an empty title")
        object.__setattr__(self, "subtitles", tuple(self.subtitles))


@dataclass(frozen=True)
class LanguageModel:
    """Ranked (term, weight) list, heaviest first, ties by term."""

    entries: tuple[tuple[str, float], ...]
    capacity: int

    def __post_init__(self):
        terms = [t for t, _ in self.entries]
        if len(set(terms)) != len(terms):
            raise DataError("language model terms must be unique")
        if len(self.entries) > self.capacity:
            raise DataError("language model exceeds its capacity")
        if any(w <= 0 for _, w in self.entries):
            raise DataError("language model weights must be positive")

    @classmethod
    def from_weights(cls, weights: Mapping[str, float], capacity: int) -> "LanguageModel":
        ranked = sorted(((t, float(w)) for t, w in weights.items() if w > 0),
                        key=lambda tw: (-tw[1], tw[0]))
        return cls(tuple(ranked[:capacity]), capacity)

    @property
    def terms(self) -> list[str]:
        return [t for t, _ in self.entries]

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class DocumentCorpus:
    concept_index: int
    documents: tuple[str, ...]
    source_tag: str = "google-style"

    def __post_init__(self):
        if self.source_tag not in SOURCE_TAGS.values():
            raise ConfigError(f"unknown corpus source tag {self.source_tag!r}")
        object.__setattr__(self, "documents", tuple(self.documents))

    @classmethod
    def title_only(cls, concept: ConceptEntry) -> "DocumentCorpus":
        return cls(concept.concept_index, (concept.title, *concept.subtitles), "title-only")


def build_bow(corpus: DocumentCorpus, weighting: str = "raw-count",
              stopwords: Iterable[str] | None = None) -> dict[str, float]:
    """Bag-of-words weights over a corpus.

    ``raw-count`` gives the total term frequency; ``tfidf`` multiplies it
    by ``ln(D / df)``. Terms present in every document get weight 0.
    """
    if weighting not in WEIGHTINGS:
        raise ConfigError(f"unknown weighting {weighting!r}")
    if not corpus.documents:
        raise EmptyCorpus(f"corpus for concept {corpus.concept_index} has no documents")
    tf: Counter[str] = Counter()
    df: Counter[str] = Counter()
    for doc in corpus.documents:
        toks = tokenize(doc, stopwords)
        tf.update(toks)
        df.update(set(toks))
    if weighting == "raw-count":
        return {t: float(n) for t, n in tf.items()}
    n_docs = len(corpus.documents)
    return {t: n * math.log(n_docs / df[t]) for t, n in tf.items()}


def _elm_text(event: EventDescription, source: str) -> list[str]:
    if source == "Title":
        return [event.title]
    if source == "Visual":
        return list(event.visual_cues)
    if source == "AudioVisual":
        return [*event.visual_cues, *event.audio_cues, event.free_text]
    raise ConfigError(f"unknown ELM source {source!r}")


def build_elm(event: EventDescription, source: str = "AudioVisual", n: int = DEFAULT_N,
              stopwords: Iterable[str] | None = None) -> LanguageModel:
    """Event language model from one of the Title, Visual or AudioVisual sources.

    Multi-word cues are split into unigrams; weights are term frequencies
    within the selected text and the ``n`` most frequent terms are kept.
    """
    if n < 1:
        raise ConfigError("ELM capacity must be >= 1")
    counts: Counter[str] = Counter()
    for chunk in _elm_text(event, source):
        counts.update(tokenize(chunk, stopwords))
    if not counts:
        raise EmptySource(f"{source} source of event {event.event_id!r} has no terms")
    return LanguageModel.from_weights(counts, n)


def build_clm(concept: ConceptEntry, corpus: DocumentCorpus, weighting: str = "raw-count",
              m: int = DEFAULT_M, stopwords: Iterable[str] | None = None) -> LanguageModel:
    """Concept language model of at most ``m`` terms.

    Title and subtitle terms always survive the cap and take the largest
    corpus weight (1 for a title-only corpus); the remaining slots go to
    the heaviest corpus terms.
    """
    if m < 1:
        raise ConfigError("CLM capacity must be >= 1")
    if corpus.concept_index != concept.concept_index:
        raise DataError(f"corpus of concept {corpus.concept_index} given for concept "
                        f"{concept.concept_index}")
    anchor = set()
    for text in (concept.title, *concept.subtitles):
        anchor.update(tokenize(text, stopwords))

    if corpus.source_tag == "title-only":
        if not anchor:
            raise EmptySource(f"concept {concept.concept_index} title has no terms")
        return LanguageModel.from_weights({t: 1.0 for t in anchor}, m)

    bow = build_bow(corpus, weighting, stopwords)
    top = max(bow.values(), default=0.0)
    anchor_weight = top if top > 0 else 1.0
    kept = sorted(anchor)[:m]
    weights = {t: anchor_weight for t in kept}
    rest = sorted(((t, w) for t, w in bow.items() if w > 0 and t not in anchor),
                  key=lambda tw: (-tw[1], tw[0]))
    weights.update(rest[:m - len(kept)])
    if not weights:
        raise EmptyCorpus(f"corpus of concept {concept.concept_index} yields no terms")
    return LanguageModel.from_weights(weights, m)


# --- file formats -----------------------------------------------------------

def read_concept_pool(path: str | Path) -> list[ConceptEntry]:
    """Parse ``index<TAB>title<TAB>sub1|sub2`` rows."""
    pool = []
    seen = set()
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise DataError(f"{path}:{lineno}: expected index<TAB>title[<TAB>subtitles]")
        idx = int(parts[0])
        if idx in seen:
            raise DataError(f"{path}:{lineno}: duplicate concept index {idx}")
        seen.add(idx)
        subs = [s for s in parts[2].split("|") if s] if len(parts) > 2 else []
        pool.append(ConceptEntry(idx, parts[1], tuple(subs)))
    return sorted(pool, key=lambda c: c.concept_index)


def write_concept_pool(path: str | Path, pool: Sequence[ConceptEntry]) -> None:
    lines = [f"{c.concept_index}\t{c.title}\t{'|'.join(c.subtitles)}" for c in pool]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_SECTIONS = ("title", "free_text", "visual_cues", "audio_cues")


def read_event_kit(path: str | Path, event_id: str | None = None) -> EventDescription:
    """Parse an event kit with ``[title]``, ``[free_text]``, ``[visual_cues]``
    and ``[audio_cues]`` sections. The event id defaults to the file stem."""
    path = Path(path)
    sections: dict[str, list[str]] = {s: [] for s in _SECTIONS}
    current = None
    for line in path.read_text("utf-8").splitlines():
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1]
            if current not in sections:
                raise DataError(f"{path}: unknown section [{current}]")
            continue
        if current is None:
            if stripped:
                raise DataError(f"{path}: text before the first section")
            continue
        if stripped:
            sections[current].append(stripped)
    return EventDescription(
        event_id=event_id or path.stem,
        title=" ".join(sections["title"]),
        free_text="\n".join(sections["free_text"]),
        visual_cues=tuple(sections["visual_cues"]),
        audio_cues=tuple(sections["audio_cues"]),
    )


def write_event_kit(path: str | Path, event: EventDescription) -> None:
    parts = ["[title]", event.title, "", "[free_text]", event.free_text, "",
             "[visual_cues]", *event.visual_cues, "", "[audio_cues]", *event.audio_cues]
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def read_event_kits(directory: str | Path) -> list[EventDescription]:
    events = [read_event_kit(p) for p in sorted(Path(directory).glob("*.txt"))]
    ids = [e.event_id for e in events]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate event ids")
    return events


def _doc_key(p: Path):
    return (int(p.stem), "") if p.stem.isdigit() else (math.inf, p.stem)


def read_corpus(root: str | Path, source_tag: str, concept: ConceptEntry) -> DocumentCorpus:
    """Load ``<root>/<source_tag>/<concept_index>/<doc_n>.txt``.

    A title-only corpus is synthesized from the concept entry itself; a
    missing directory gives an empty corpus.
    """
    if source_tag == "title-only":
        return DocumentCorpus.title_only(concept)
    d = Path(root) / source_tag / str(concept.concept_index)
    docs = [p.read_text("utf-8") for p in sorted(d.glob("*.txt"), key=_doc_key)] if d.is_dir() else []
    return DocumentCorpus(concept.concept_index, tuple(docs), source_tag)


def write_corpus(root: str | Path, corpus: DocumentCorpus) -> None:
    d = Path(root) / corpus.source_tag / str(corpus.concept_index)
    d.mkdir(parents=True, exist_ok=True)
    for n, doc in enumerate(corpus.documents):
        (d / f"{n}.txt").write_text(doc, encoding="utf-8")


@dataclass
class CorpusStore:
    """Lazily loaded corpora keyed by (source tag, concept index)."""

    root: Path | None
    _cache: dict = field(default_factory=dict, repr=False)

    def get(self, source_tag: str, concept: ConceptEntry) -> DocumentCorpus:
        key = (source_tag, concept.concept_index)
        if key not in self._cache:
            if source_tag != "title-only" and self.root is None:
                self._cache[key] = DocumentCorpus(concept.concept_index, (), source_tag)
            else:
                self._cache[key] = read_corpus(self.root or ".", source_tag, concept)
        return self._cache[key]

    def add(self, corpus: DocumentCorpus) -> None:
        self._cache[(corpus.source_tag, corpus.concept_index)] = corpus


def write_language_model(path: str | Path, lm: LanguageModel) -> None:
    lines = [f"#capacity={lm.capacity}"] + [f"{t}\t{w!r}" for t, w in lm.entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_language_model(path: str | Path) -> LanguageModel:
    capacity = None
    entries = []
    for line in Path(path).read_text("utf-8").splitlines():
        if line.startswith("#capacity="):
            capacity = int(line.split("=", 1)[1])
        elif line.strip():
            t, w = line.split("\t")
            entries.append((t, float(w)))
    return LanguageModel(tuple(entries), capacity if capacity is not None else len(entries))
