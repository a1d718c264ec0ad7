"""Explicit-semantic-analysis term relatedness and ELM x CLM matrix scores."""
from __future__ import annotations

import threading
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DataError, EmptyModel
from .textmodels import LanguageModel

MATRIX_OPS = ("spectral", "inf_norm", "frobenius", "max_entry", "hausdorff")


class TermVectorStore:
    """Sparse non-negative term -> article-space weight vectors.

    Rows are kept l2-normalized in a CSR matrix so that a block of cosine
    similarities is a single sparse product.
    """

    def __init__(self, vectors: Mapping[str, Mapping[int, float]], dim: int):
        self.dim = int(dim)
        terms = sorted(vectors)
        self._index = {t: i for i, t in enumerate(terms)}
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for t in terms:
            vec = vectors[t]
            items = sorted((int(k), float(w)) for k, w in vec.items() if w != 0)
            if not items:
                raise DataError(f"term vector for {t!r} is all zero")
            for k, w in items:
                if w < 0:
                    raise DataError(f"negative weight in term vector for {t!r}")
                if not 0 <= k < self.dim:
                    raise DataError(f"article index {k} out of range for {t!r}")
                indices.append(k)
                data.append(w)
            indptr.append(len(indices))
        raw = sp.csr_matrix((np.array(data, dtype=float), np.array(indices, dtype=np.int64),
                             np.array(indptr, dtype=np.int64)), shape=(len(terms), self.dim))
        norms = np.sqrt(np.asarray(raw.multiply(raw).sum(axis=1)).ravel())
        unit = sp.diags(1.0 / np.where(norms > 0, norms, 1.0)) @ raw
        # trailing all-zero row stands in for out-of-vocabulary terms
        self._unit = sp.vstack([unit, sp.csr_matrix((1, self.dim))]).tocsr()
        self._raw = raw

    def __contains__(self, term: str) -> bool:
        return term.lower() in self._index

    def __len__(self):
        return len(self._index)

    @property
    def terms(self) -> list[str]:
        return list(self._index)

    def vector(self, term: str) -> dict[int, float]:
        i = self._index.get(term.lower())
        if i is None:
            return {}
        row = self._raw.getrow(i)
        return dict(zip(row.indices.tolist(), row.data.tolist()))

    def unit_rows(self, terms: Sequence[str]) -> sp.csr_matrix:
        oov = len(self._index)
        rows = [self._index.get(t.lower(), oov) for t in terms]
        return self._unit[rows]


def read_term_vectors(path: str | Path) -> TermVectorStore:
    """Read ``#A=<dim>`` then ``term idx:weight idx:weight ...`` lines."""
    dim = None
    vectors: dict[str, dict[int, float]] = {}
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#A="):
            dim = int(line[3:])
            continue
        if line.startswith("#"):
            continue
        term, *pairs = line.split()
        vec = {}
        for p in pairs:
            k, w = p.split(":")
            vec[int(k)] = float(w)
        if term.lower() in vectors:
            raise DataError(f"{path}:{lineno}: duplicate term {term!r}")
        vectors[term.lower()] = vec
    if dim is None:
        raise DataError(f"{path}: missing #A=<dim> header")
    return TermVectorStore(vectors, dim)


def write_term_vectors(path: str | Path, vectors: Mapping[str, Mapping[int, float]], dim: int) -> None:
    lines = [f"#A={dim}"]
    for term in sorted(vectors):
        pairs = " ".join(f"{k}:{w!r}" for k, w in sorted(vectors[term].items()))
        lines.append(f"{term} {pairs}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class PairCache:
    """Thread-safe memo of term-pair similarities, persisted as TSV."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._data: dict[tuple[str, str], float] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            for line in self.path.read_text("utf-8").splitlines():
                a, b, s = line.split("\t")
                self._data[(a, b)] = float(s)

    @staticmethod
    def _key(a, b):
        return (a, b) if a <= b else (b, a)

    def get(self, a: str, b: str):
        return self._data.get(self._key(a, b))

    def put(self, a: str, b: str, value: float) -> None:
        with self._lock:
            self._data[self._key(a, b)] = value

    def __len__(self):
        return len(self._data)

    def save(self, path: str | Path | None = None) -> None:
        target = Path(path) if path else self.path
        if target is None:
            raise ConfigError("no cache path given")
        with self._lock:
            lines = [f"{a}\t{b}\t{s!r}" for (a, b), s in sorted(self._data.items())]
        target.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def term_similarity(a: str, b: str, store: TermVectorStore, cache: PairCache | None = None) -> float:
    """Cosine of the two terms' article vectors.

    Identical terms score 1 even when out of vocabulary; any other pair
    involving an unknown term scores 0.
    """
    a, b = a.lower(), b.lower()
    if a == b:
        return 1.0
    if cache is not None:
        hit = cache.get(a, b)
        if hit is not None:
            return hit
    if a not in store or b not in store:
        value = 0.0
    else:
        rows = store.unit_rows([a, b])
        value = float(np.clip(rows[0].multiply(rows[1]).sum(), 0.0, 1.0))
    if cache is not None:
        cache.put(a, b, value)
    return value


def _terms(model) -> list[str]:
    return model.terms if isinstance(model, LanguageModel) else list(model)


def similarity_matrix(elm: LanguageModel | Sequence[str], clm: LanguageModel | Sequence[str],
                      store: TermVectorStore, cache: PairCache | None = None) -> np.ndarray:
    """N x M matrix of term similarities, rows in ELM order, columns in CLM order."""
    rows, cols = _terms(elm), _terms(clm)
    if not rows or not cols:
        raise EmptyModel("similarity matrix needs two non-empty language models")
    s = (store.unit_rows(rows) @ store.unit_rows(cols).T).toarray()
    np.clip(s, 0.0, 1.0, out=s)
    lr = np.array([t.lower() for t in rows], dtype=object)
    lc = np.array([t.lower() for t in cols], dtype=object)
    s[lr[:, None] == lc[None, :]] = 1.0
    if cache is not None:
        for i, a in enumerate(rows):
            for j, b in enumerate(cols):
                hit = cache.get(a.lower(), b.lower())
                if hit is None:
                    cache.put(a.lower(), b.lower(), float(s[i, j]))
                else:
                    s[i, j] = hit
    return s


def spectral_norm(s: np.ndarray, tol: float = 1e-10, max_iter: int = 1000) -> float:
    """Largest singular value by power iteration on the Gram matrix.

    The iterate is the Gram matrix itself, squared and rescaled each step,
    so k steps amount to 2**k plain power steps; the eigenvalue is then
    read off as a Rayleigh quotient along the all-ones start direction.
    """
    s = np.asarray(s, dtype=float)
    gram = s.T @ s if s.shape[1] <= s.shape[0] else s @ s.T
    scale = np.trace(gram)
    if scale == 0:
        return 0.0
    g = gram / scale
    for _ in range(max_iter):
        g2 = g @ g
        g2 /= np.linalg.norm(g2)
        done = np.max(np.abs(g2 - g)) <= tol * 1e-3
        g = g2
        if done:
            break
    v = g @ np.ones(g.shape[0])
    if not np.any(v):
        v = g[:, np.argmax(np.abs(g).sum(axis=0))]
    lam = float(v @ gram @ v) / float(v @ v)
    return float(np.sqrt(max(lam, 0.0)))


def matrix_score(s: np.ndarray, op: str) -> float:
    """Reduce a similarity matrix to a single relatedness score."""
    s = np.asarray(s, dtype=float)
    if op == "spectral":
        return spectral_norm(s)
    if op == "inf_norm":
        return float(np.max(np.abs(s).sum(axis=1)))
    if op == "frobenius":
        return float(np.sqrt(np.sum(s * s)))
    if op == "max_entry":
        return float(np.max(s))
    if op == "hausdorff":
        return float(np.median(np.max(s, axis=1)))
    raise ConfigError(f"unknown matrix operator {op!r}")


def all_matrix_scores(s: np.ndarray) -> dict[str, float]:
    return {op: matrix_score(s, op) for op in MATRIX_OPS}
