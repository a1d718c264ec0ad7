"""Late fusion of ranked lists and AP / MAP evaluation."""
from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AllUndefined, DataError, EmptyList, IdMismatch, NoPositives
from .eventdetector import RankedList

_EXACT_AP_LIMIT = 2000

LABELS = ("positive", "related", "background")


class GroundTruth:
    """Per-event video labels: positive, related or background."""

    def __init__(self, labels: Mapping[tuple[str, str], str] | None = None):
        self._by_event: dict[str, dict[str, str]] = defaultdict(dict)
        for (video, event), label in (labels or {}).items():
            self.add(video, event, label)

    def add(self, video_id: str, event_id: str, label: str) -> None:
        if label not in LABELS:
            raise DataError(f"unknown label {label!r} for {video_id}/{event_id}")
        prev = self._by_event[event_id].get(video_id)
        if prev is not None and prev != label:
            raise DataError(f"conflicting labels for {video_id}/{event_id}")
        self._by_event[event_id][video_id] = label

    @property
    def events(self) -> list[str]:
        return sorted(self._by_event)

    def labels(self, event_id: str) -> dict[str, str]:
        return dict(self._by_event.get(event_id, {}))

    def videos(self, event_id: str, label: str) -> list[str]:
        return sorted(v for v, l in self._by_event.get(event_id, {}).items() if l == label)

    def label(self, video_id: str, event_id: str) -> str:
        try:
            return self._by_event[event_id][video_id]
        except KeyError:
            raise DataError(f"no label for video {video_id!r} in event {event_id!r}") from None

    def rows(self):
        for event in self.events:
            for video, label in sorted(self._by_event[event].items()):
                yield video, event, label


def read_ground_truth(path: str | Path) -> GroundTruth:
    gt = GroundTruth()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row or row[0].startswith("#") or row == ["video_id", "event_id", "label"]:
                continue
            gt.add(row[0], row[1], row[2])
    return gt


def write_ground_truth(path: str | Path, gt: GroundTruth) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["video_id", "event_id", "label"])
        w.writerows(gt.rows())


def normalize_scores(ranked: RankedList) -> RankedList:
    """Min-max scale scores to [0, 1]; a constant list maps to 0.5.

    ``-inf`` sentinels (unscorable videos) map to 0.
    """
    if len(ranked) == 0:
        raise EmptyList("cannot normalize an empty ranked list")
    s = ranked.scores
    finite = np.isfinite(s)
    if not finite.any():
        out = np.full(len(s), 0.5)
    else:
        lo, hi = s[finite].min(), s[finite].max()
        if hi == lo:
            out = np.where(finite, 0.5, 0.0)
        else:
            out = np.where(finite, (s - lo) / (hi - lo), 0.0)
    return RankedList(tuple(zip(ranked.ids, out.tolist())))


def late_fuse(lists: Sequence[RankedList]) -> RankedList:
    """Arithmetic mean of min-max normalized scores, re-sorted."""
    if not lists:
        raise EmptyList("nothing to fuse")
    ids = sorted(lists[0].ids)
    for other in lists[1:]:
        if sorted(other.ids) != ids:
            raise IdMismatch("ranked lists cover different videos")
    total = dict.fromkeys(ids, 0.0)
    for ranked in lists:
        for vid, s in normalize_scores(ranked).items:
            total[vid] += s
    n = len(lists)
    return RankedList.from_scores(ids, [total[v] / n for v in ids])


def ap_from_relevance(relevant: Sequence[bool], depth: int | None = None) -> float:
    """AP of a ranked 0/1 relevance vector, first element ranked highest.

    With ``depth`` only the first ``depth`` ranks contribute precision,
    still divided by the total number of relevant items.
    """
    rel = np.asarray(relevant, dtype=bool)
    n_rel = int(rel.sum())
    if n_rel == 0:
        raise NoPositives("average precision is undefined without positives")
    ranks = np.flatnonzero(rel[:depth] if depth is not None else rel) + 1
    if n_rel > _EXACT_AP_LIMIT:
        return math.fsum(np.arange(1, len(ranks) + 1) / ranks) / n_rel
    # exact rational sum, rounded once
    total = sum(Fraction(h, int(k)) for h, k in enumerate(ranks, 1))
    return float(total / n_rel)


def ap_from_scores(scores: Sequence[float], relevant: Sequence[bool]) -> float:
    """AP of items ranked by score, descending; ties keep input order."""
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    return ap_from_relevance(np.asarray(relevant, dtype=bool)[order])


def average_precision(ranked: RankedList, gt: GroundTruth, event_id: str,
                      related_as_positive: bool = False, depth: int | None = None) -> float:
    """AP over the full ranked list; related videos count as non-positive
    unless ``related_as_positive`` is set."""
    labels = gt.labels(event_id)
    positive = {"positive", "related"} if related_as_positive else {"positive"}
    rel = []
    for vid in ranked.ids:
        try:
            rel.append(labels[vid] in positive)
        except KeyError:
            raise DataError(f"video {vid!r} has no label for event {event_id!r}") from None
    return ap_from_relevance(rel, depth)


def mean_average_precision(aps: Iterable[float | None]) -> float:
    """Mean of the defined APs (``None`` or NaN entries are skipped)."""
    aps = list(aps)
    if not aps:
        raise EmptyList("no APs to average")
    defined = [a for a in aps if a is not None and not math.isnan(a)]
    if not defined:
        raise AllUndefined("every AP is undefined")
    return math.fsum(defined) / len(defined)


def evaluate(lists: Mapping[str, RankedList], gt: GroundTruth, **kw) -> dict[str, float | None]:
    """Per-event AP; events without positives map to ``None``."""
    out: dict[str, float | None] = {}
    for event in sorted(lists):
        try:
            out[event] = average_precision(lists[event], gt, event, **kw)
        except NoPositives:
            out[event] = None
    return out


def _fmt(ap):
    return "" if ap is None else f"{ap:.4f}"


def report_csv(per_event: Mapping[str, float | None], label: str = "AP") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["event_id", label])
    for event in sorted(per_event):
        w.writerow([event, _fmt(per_event[event])])
    w.writerow(["MAP", f"{mean_average_precision(per_event.values()):.4f}"])
    return buf.getvalue()


def format_table(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    """Fixed-width text table with a rule under the header."""
    cells = [[str(h) for h in header]] + [[f"{c:.4f}" if isinstance(c, float) else str(c)
                                          for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
