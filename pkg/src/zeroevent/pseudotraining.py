"""Pseudo-positive samples from textual detectors, and SVMs trained on them.

Every design choice (ELM source, CLM source, weighting, matrix operator)
yields a different detector for the same event. Embedded in concept space,
each detector becomes one pseudo-positive training vector.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (DataError, DimensionMismatch, EmptyBackground, InsufficientEvents,
                     InsufficientSamples, ZeroEventError)
from .eventdetector import DEFAULT_K, DesignChoice, DetectorBuilder
from .rdsvm import Dataset, SvmModel, TrainConfig, train_cv
from .similarity import MATRIX_OPS
from .textmodels import CLM_SOURCES, ELM_SOURCES, WEIGHTINGS, EventDescription

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PseudoSample:
    event_id: str
    vector: np.ndarray
    provenance: DesignChoice

    @property
    def nonzero(self) -> list[tuple[int, float]]:
        idx = np.flatnonzero(self.vector)
        return [(int(i), float(self.vector[i])) for i in idx]


def detector_grid(elm_sources=ELM_SOURCES, clm_sources=CLM_SOURCES, weightings=WEIGHTINGS,
                  operators=MATRIX_OPS) -> list[DesignChoice]:
    """All (C1, C2a, C2b, C3) combinations; 3 * 3 * 2 * 5 = 90 by default."""
    return [DesignChoice(*combo) for combo in
            itertools.product(elm_sources, clm_sources, weightings, operators)]


def _collapsed(combos: Sequence[DesignChoice]) -> list[DesignChoice]:
    # Title ELM against Title CLM: one sample regardless of operator/weighting
    out = []
    seen_title = False
    for d in combos:
        if d.elm_source == "Title" and d.clm_source == "Title":
            if seen_title:
                continue
            seen_title = True
        out.append(d)
    return out


def generate_pseudo_positives(event: EventDescription, builder: DetectorBuilder,
                              combos: Sequence[DesignChoice], k: int = DEFAULT_K,
                              failures: list | None = None) -> list[PseudoSample]:
    """One sample per design choice, exact duplicates removed (first kept).

    Combos that fail (e.g. an empty ELM source) are skipped and recorded
    in ``failures`` as ``(tag, message)`` pairs.
    """
    if not combos:
        raise InsufficientSamples("no design choices given")
    n_c = builder.n_concepts
    samples = []
    seen = set()
    for design in _collapsed(combos):
        try:
            det = builder.build(event, design, k)
        except ZeroEventError as exc:
            log.warning("event %s, %s: %s", event.event_id, design.tag, exc)
            if failures is not None:
                failures.append((design.tag, str(exc)))
            continue
        vec = det.to_vector(n_c)
        key = vec.tobytes()
        if key in seen:
            continue
        seen.add(key)
        samples.append(PseudoSample(event.event_id, vec, design))
    return samples


def assemble_negatives(event_id: str, mode: str, all_pseudo: Mapping[str, Sequence[PseudoSample]],
                       background=None) -> np.ndarray:
    """Negative vectors: other events' pseudo-positives, or real background videos."""
    if mode == "pseudo":
        others = [e for e in sorted(all_pseudo) if e != event_id]
        if not others:
            raise InsufficientEvents("pseudo-negatives need at least two event classes")
        rows = [s.vector for e in others for s in all_pseudo[e]]
        if not rows:
            raise InsufficientEvents("other events produced no pseudo-positives")
        return np.vstack(rows)
    if mode == "real":
        if background is None or len(background) == 0:
            raise EmptyBackground("real negatives need a background collection")
        values = getattr(background, "values", background)
        return np.atleast_2d(np.asarray(values, dtype=float))
    raise DataError(f"unknown negative mode {mode!r}")


def l2_rows(X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return X / np.where(norms > 0, norms, 1.0)


def train_pseudo_detector(pseudo_positives, negatives, cfg: TrainConfig = TrainConfig()) -> SvmModel:
    """Cross-validated standard SVM on l2-normalized pseudo-positives vs negatives."""
    pos = np.vstack([getattr(p, "vector", p) for p in pseudo_positives]) if len(pseudo_positives) else None
    neg = np.atleast_2d(np.asarray(negatives, dtype=float)) if len(negatives) else None
    if pos is None or neg is None:
        raise InsufficientSamples("pseudo training needs positives and negatives")
    if pos.shape[1] != neg.shape[1]:
        raise DimensionMismatch("pseudo-positives and negatives live in different spaces")
    return train_cv(Dataset.from_groups(l2_rows(pos), l2_rows(neg)), cfg)


# --- file format ------------------------------------------------------------

def write_pseudo_samples(path: str | Path, samples: Iterable[PseudoSample]) -> None:
    """CSV rows ``event_id,combo_tag,idx:score;idx:score;...``."""
    lines = []
    for s in samples:
        body = ";".join(f"{i}:{v!r}" for i, v in s.nonzero)
        lines.append(f"{s.event_id},{s.provenance.tag},{body}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_pseudo_samples(path: str | Path, n_concepts: int) -> dict[str, list[PseudoSample]]:
    out: dict[str, list[PseudoSample]] = {}
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        event_id, tag, body = line.split(",", 2)
        vec = np.zeros(n_concepts)
        for pair in filter(None, body.split(";")):
            i, v = pair.split(":")
            if not 0 <= int(i) < n_concepts:
                raise DimensionMismatch(f"{path}:{lineno}: concept index {i} out of range")
            vec[int(i)] = float(v)
        out.setdefault(event_id, []).append(PseudoSample(event_id, vec, DesignChoice.from_tag(tag)))
    return out
