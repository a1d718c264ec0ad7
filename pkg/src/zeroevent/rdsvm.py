"""Relevance-degree SVM: kernel SVM with per-sample slack weights.

Samples flagged as related (``u = 1``) have their slack penalty scaled by a
global relevance degree ``c`` in (0, 1], i.e. box constraint
``0 <= alpha_i <= C * c`` instead of ``C``. The dual is solved by SMO with
second-order working-set selection.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit
from scipy.spatial.distance import cdist

from .errors import (ConfigError, DataError, DimensionMismatch, InsufficientSamples,
                     NonConvergence, SingleClass, ZeroEventError)
from .fusion_eval import ap_from_scores

log = logging.getLogger(__name__)

DEFAULT_C_GRID = tuple(2.0 ** k for k in range(-5, 16, 2))
DEFAULT_GAMMA_GRID = tuple(2.0 ** k for k in range(-15, 4, 2))
DEFAULT_RELEVANCE_GRID = tuple(round(0.1 * k, 1) for k in range(1, 11))
KERNELS = ("rbf", "linear")
_TAU = 1e-12


@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray
    y: int
    u: int = 0

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        if not np.all(np.isfinite(f)):
            raise DataError("sample features must be finite")
        if self.y not in (1, -1):
            raise DataError(f"label must be +1 or -1, got {self.y!r}")
        if self.u not in (0, 1):
            raise DataError(f"relevance flag must be 0 or 1, got {self.u!r}")
        object.__setattr__(self, "features", f)


@dataclass(frozen=True)
class Dataset:
    """Row-stacked samples: features ``X``, labels ``y`` and relevance flags ``u``."""

    X: np.ndarray
    y: np.ndarray
    u: np.ndarray
    ids: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        u = np.asarray(self.u, dtype=np.int64).ravel()
        if X.shape[0] != len(y) or len(y) != len(u):
            raise DimensionMismatch("X, y and u must have the same number of rows")
        if not np.all(np.isfinite(X)):
            raise DataError("features must be finite")
        if not np.all(np.isin(y, (1.0, -1.0))):
            raise DataError("labels must be +1 or -1")
        if not np.all(np.isin(u, (0, 1))):
            raise DataError("relevance flags must be 0 or 1")
        ids = tuple(self.ids) if self.ids else tuple(str(i) for i in range(len(y)))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledSample]) -> "Dataset":
        if not samples:
            raise InsufficientSamples("empty dataset")
        dims = {len(s.features) for s in samples}
        if len(dims) != 1:
            raise DimensionMismatch("samples differ in dimension")
        return cls(np.vstack([s.features for s in samples]),
                   np.array([s.y for s in samples]), np.array([s.u for s in samples]))

    @classmethod
    def from_groups(cls, positives, negatives, related=None, related_label: int = 1) -> "Dataset":
        """Stack true positives, true negatives and related samples (``u = 1``)."""
        parts = [np.atleast_2d(np.asarray(positives, dtype=float)),
                 np.atleast_2d(np.asarray(negatives, dtype=float))]
        y = [np.ones(len(parts[0])), -np.ones(len(parts[1]))]
        u = [np.zeros(len(parts[0]), dtype=np.int64), np.zeros(len(parts[1]), dtype=np.int64)]
        if related is not None and len(related):
            r = np.atleast_2d(np.asarray(related, dtype=float))
            parts.append(r)
            y.append(np.full(len(r), float(related_label)))
            u.append(np.ones(len(r), dtype=np.int64))
        return cls(np.vstack(parts), np.concatenate(y), np.concatenate(u))

    def __len__(self):
        return len(self.y)

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx], self.u[idx], tuple(self.ids[i] for i in idx))


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    gamma: float = 1.0
    c: float = 1.0
    kernel: str = "rbf"
    tol: float = 1e-3
    max_iter: int = 10_000_000
    folds: int = 5
    C_grid: tuple[float, ...] = DEFAULT_C_GRID
    gamma_grid: tuple[float, ...] = DEFAULT_GAMMA_GRID
    c_grid: tuple[float, ...] = DEFAULT_RELEVANCE_GRID
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.C <= 0 or self.gamma <= 0:
            raise ConfigError("C and gamma must be positive")
        if not 0 < self.c <= 1:
            raise ConfigError("relevance degree c must lie in (0, 1]")
        if self.kernel not in KERNELS:
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.folds < 2:
            raise ConfigError("need at least 2 folds")
        if any(v <= 0 for v in (*self.C_grid, *self.gamma_grid)):
            raise ConfigError("grid values must be positive")
        if any(not 0 < v <= 1 for v in self.c_grid):
            raise ConfigError("relevance grid must lie in (0, 1]")


@dataclass(frozen=True)
class SvmModel:
    X: np.ndarray
    alpha: np.ndarray
    y: np.ndarray
    u: np.ndarray
    b: float
    kernel: str = "rbf"
    gamma: float = 1.0
    C: float = 1.0
    c: float = 1.0
    n_iter: int = 0
    kkt_gap: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def upper(self) -> np.ndarray:
        return box_bounds(self.u, self.C, self.c)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.alpha > 0)

    @property
    def dim(self) -> int:
        return self.X.shape[1]


def box_bounds(u: np.ndarray, C: float, c: float) -> np.ndarray:
    """Per-sample upper bound C * g(u): C for true samples, C * c for related."""
    return C * np.where(np.asarray(u) == 1, c, 1.0)


def rbf_kernel(x, z, gamma: float) -> float:
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise DimensionMismatch(f"kernel arguments differ in shape: {x.shape} vs {z.shape}")
    d = x - z
    return float(np.exp(-gamma * np.dot(d, d)))


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str = "rbf", gamma: float = 1.0) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"feature dimensions differ: {A.shape[1]} vs {B.shape[1]}")
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        return np.exp(-gamma * cdist(A, B, "sqeuclidean"))
    raise ConfigError(f"unknown kernel {kernel!r}")


@njit(cache=True, nogil=True)
def _smo(K, y, upper, eps, max_iter):
    n = K.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    QD = np.empty(n)
    for t in range(n):
        QD[t] = K[t, t]
    it = 0
    gap = np.inf
    while it < max_iter:
        gmax = -np.inf
        i = -1
        for t in range(n):
            if y[t] > 0:
                if alpha[t] < upper[t] and -G[t] >= gmax:
                    gmax = -G[t]
                    i = t
            elif alpha[t] > 0 and G[t] >= gmax:
                gmax = G[t]
                i = t
        gmax2 = -np.inf
        j = -1
        obj_min = np.inf
        for t in range(n):
            if y[t] > 0:
                if alpha[t] > 0:
                    gd = gmax + G[t]
                    if G[t] >= gmax2:
                        gmax2 = G[t]
                    if gd > 0 and i >= 0:
                        quad = QD[i] + QD[t] - 2.0 * y[i] * y[i] * y[t] * K[i, t]
                        if quad <= 0:
                            quad = _TAU
                        obj = -(gd * gd) / quad
                        if obj <= obj_min:
                            j = t
                            obj_min = obj
            elif alpha[t] < upper[t]:
                gd = gmax - G[t]
                if -G[t] >= gmax2:
                    gmax2 = -G[t]
                if gd > 0 and i >= 0:
                    quad = QD[i] + QD[t] + 2.0 * y[i] * y[i] * y[t] * K[i, t]
                    if quad <= 0:
                        quad = _TAU
                    obj = -(gd * gd) / quad
                    if obj <= obj_min:
                        j = t
                        obj_min = obj
        gap = gmax + gmax2
        if gap < eps or j == -1:
            break
        it += 1

        Ci = upper[i]
        Cj = upper[j]
        Qij = y[i] * y[j] * K[i, j]
        old_i = alpha[i]
        old_j = alpha[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Qij
            if quad <= 0:
                quad = _TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > Ci - Cj:
                if alpha[i] > Ci:
                    alpha[i] = Ci
                    alpha[j] = Ci - diff
            elif alpha[j] > Cj:
                alpha[j] = Cj
                alpha[i] = Cj + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Qij
            if quad <= 0:
                quad = _TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > Ci:
                if alpha[i] > Ci:
                    alpha[i] = Ci
                    alpha[j] = total - Ci
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > Cj:
                if alpha[j] > Cj:
                    alpha[j] = Cj
                    alpha[i] = total - Cj
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total
        di = alpha[i] - old_i
        dj = alpha[j] - old_j
        for t in range(n):
            G[t] += y[t] * (y[i] * K[i, t] * di + y[j] * K[j, t] * dj)

    # bias from free vectors, or the midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    n_free = 0
    s_free = 0.0
    for t in range(n):
        yg = y[t] * G[t]
        if alpha[t] >= upper[t]:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            s_free += yg
    if n_free > 0:
        rho = s_free / n_free
    else:
        rho = (ub + lb) / 2.0
    return alpha, rho, it, gap


def _fit_kernel(K, y, upper, tol, max_iter):
    alpha, rho, it, gap = _smo(np.ascontiguousarray(K, dtype=float),
                               np.ascontiguousarray(y, dtype=float),
                               np.ascontiguousarray(upper, dtype=float), float(tol), int(max_iter))
    if it >= max_iter and gap >= tol:
        raise NonConvergence(f"SMO stopped after {it} iterations with KKT gap {gap:.3g}", gap)
    return alpha, -rho, it, gap


def _as_dataset(data) -> Dataset:
    if isinstance(data, Dataset):
        return data
    return Dataset.from_samples(list(data))


def train(data: Dataset | Sequence[LabeledSample], cfg: TrainConfig = TrainConfig()) -> SvmModel:
    """Solve the weighted-slack SVM dual for fixed (C, gamma, c)."""
    ds = _as_dataset(data)
    if not (np.any(ds.y > 0) and np.any(ds.y < 0)):
        raise SingleClass("training needs samples of both labels")
    upper = box_bounds(ds.u, cfg.C, cfg.c)
    K = kernel_matrix(ds.X, ds.X, cfg.kernel, cfg.gamma)
    alpha, b, it, gap = _fit_kernel(K, ds.y, upper, cfg.tol, cfg.max_iter)
    return SvmModel(ds.X, alpha, ds.y, ds.u, b, cfg.kernel, cfg.gamma, cfg.C, cfg.c, it, gap)


def decision_function(model: SvmModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.dim:
        raise DimensionMismatch(f"expected {model.dim} features, got {X.shape[1]}")
    sv = model.support
    K = kernel_matrix(X, model.X[sv], model.kernel, model.gamma)
    return K @ (model.alpha[sv] * model.y[sv]) + model.b


def predict(model: SvmModel, x) -> float:
    """Decision value f(x) = sum_i alpha_i y_i k(x_i, x) + b."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("predict takes a single feature vector")
    return float(decision_function(model, x[None, :])[0])


def dual_objective(alpha, K, y) -> float:
    """Dual objective sum(alpha) - 1/2 alpha' Q alpha, with Q = yy' * K."""
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ K @ ay)


def kkt_violation(model: SvmModel) -> float:
    """Largest violation of the KKT conditions over the training samples."""
    f = decision_function(model, model.X)
    yf = model.y * f
    up = model.upper
    at_zero = model.alpha <= 0
    at_top = model.alpha >= up
    free = ~at_zero & ~at_top
    v = np.zeros(len(yf))
    v[at_zero] = np.maximum(0.0, 1.0 - yf[at_zero])
    v[at_top] = np.maximum(0.0, yf[at_top] - 1.0)
    v[free] = np.abs(yf[free] - 1.0)
    return float(v.max()) if len(v) else 0.0


# --- model selection --------------------------------------------------------

def stratified_folds(ds: Dataset, folds: int, seed: int) -> np.ndarray:
    """Fold number per sample; each (y, u) group is shuffled and dealt round-robin."""
    rng = np.random.default_rng(seed)
    assign = np.empty(len(ds), dtype=np.int64)
    offset = 0
    for y_val, u_val in ((1.0, 0), (-1.0, 0), (1.0, 1), (-1.0, 1)):
        idx = np.flatnonzero((ds.y == y_val) & (ds.u == u_val))
        idx = idx[rng.permutation(len(idx))]
        assign[idx] = (np.arange(len(idx)) + offset) % folds
        offset += len(idx)
    return assign


@dataclass(frozen=True)
class CVResult:
    C: float
    gamma: float
    c: float
    ap: float
    cells: tuple[tuple[float, float, float, float], ...] = ()


def _fold_ap(K, ds, assign, fold, C, c, cfg) -> float | None:
    # related samples always train; validation ranks true samples only
    held = (assign == fold) & (ds.u == 0)
    tr = np.flatnonzero(~held)
    va = np.flatnonzero(held)
    relevant = ds.y[va] > 0
    if not relevant.any():
        return None
    try:
        if not (np.any(ds.y[tr] > 0) and np.any(ds.y[tr] < 0)):
            raise SingleClass("fold lacks one label")
        upper = box_bounds(ds.u[tr], C, c)
        alpha, b, _, _ = _fit_kernel(K[np.ix_(tr, tr)], ds.y[tr], upper, cfg.tol, cfg.max_iter)
    except ZeroEventError as exc:
        log.warning("fold %d at C=%g c=%g failed: %s", fold, C, c, exc)
        return 0.0
    scores = K[np.ix_(va, tr)] @ (alpha * ds.y[tr]) + b
    return ap_from_scores(scores, relevant)


def _cell_ap(K, ds, assign, C, c, cfg) -> float:
    aps = [_fold_ap(K, ds, assign, f, C, c, cfg) for f in range(cfg.folds)]
    aps = [a for a in aps if a is not None]
    return float(np.mean(aps)) if aps else 0.0


def cross_validate(data: Dataset | Sequence[LabeledSample], cfg: TrainConfig = TrainConfig()) -> CVResult:
    """Two-stage model selection by mean fold average precision.

    Stage 1 grid-searches (C, gamma) with c = 1; stage 2 line-searches c
    with (C, gamma) fixed. Related samples stay in every training split;
    a validation fold ranks its true samples and true positives are the
    relevant ones. Ties keep the earlier grid cell, and for c
    the larger value.
    """
    ds = _as_dataset(data)
    if not (np.any(ds.y > 0) and np.any(ds.y < 0)):
        raise SingleClass("cross-validation needs samples of both labels")
    assign = stratified_folds(ds, cfg.folds, cfg.seed)
    gammas = cfg.gamma_grid if cfg.kernel == "rbf" else (cfg.gamma,)
    grid = [(C, g) for C in cfg.C_grid for g in gammas]
    kernels = {g: kernel_matrix(ds.X, ds.X, cfg.kernel, g) for g in gammas}

    def stage1(cell):
        C, g = cell
        return _cell_ap(kernels[g], ds, assign, C, 1.0, cfg)

    with ThreadPoolExecutor(max(1, cfg.jobs)) as pool:
        aps1 = list(pool.map(stage1, grid)) if cfg.jobs > 1 else [stage1(c) for c in grid]
    cells = [(C, g, 1.0, ap) for (C, g), ap in zip(grid, aps1)]
    best = int(np.argmax(aps1))
    C, g = grid[best]
    best_c, best_ap = 1.0, aps1[best]
    if np.any(ds.u == 1):
        for c in sorted(set(cfg.c_grid), reverse=True):
            if c == 1.0:
                continue
            ap = _cell_ap(kernels[g], ds, assign, C, c, cfg)
            cells.append((C, g, c, ap))
            if ap > best_ap:
                best_c, best_ap = c, ap
    return CVResult(C, g, best_c, best_ap, tuple(cells))


def train_cv(data, cfg: TrainConfig = TrainConfig()) -> SvmModel:
    """Cross-validate, then retrain on all data with the selected parameters."""
    ds = _as_dataset(data)
    res = cross_validate(ds, cfg)
    model = train(ds, replace(cfg, C=res.C, gamma=res.gamma, c=res.c))
    model.meta.update(cv_ap=res.ap, C=res.C, gamma=res.gamma, c=res.c)
    return model


def auto_relevance_train(positives, negatives, related=None,
                         cfg: TrainConfig = TrainConfig()) -> SvmModel:
    """Pick between related-as-weighted-positive and related-as-weighted-negative.

    Both branches are cross-validated; the one with the higher mean fold AP
    wins (ties go to the negative branch) and is retrained on all samples.
    ``model.meta["branch"]`` records ``"p"``, ``"n"`` or ``"none"``.
    """
    positives = np.atleast_2d(np.asarray(positives, dtype=float))
    negatives = np.atleast_2d(np.asarray(negatives, dtype=float))
    if positives.size == 0 or negatives.size == 0:
        raise InsufficientSamples("need positives and negatives")
    if related is None or len(related) == 0:
        model = train_cv(Dataset.from_groups(positives, negatives), cfg)
        model.meta["branch"] = "none"
        return model
    ds_p = Dataset.from_groups(positives, negatives, related, related_label=1)
    ds_n = Dataset.from_groups(positives, negatives, related, related_label=-1)
    res_p = cross_validate(ds_p, cfg)
    res_n = cross_validate(ds_n, cfg)
    branch, ds, res = ("p", ds_p, res_p) if res_p.ap > res_n.ap else ("n", ds_n, res_n)
    model = train(ds, replace(cfg, C=res.C, gamma=res.gamma, c=res.c))
    model.meta.update(branch=branch, cv_ap=res.ap, cv_ap_p=res_p.ap, cv_ap_n=res_n.ap,
                      C=res.C, gamma=res.gamma, c=res.c)
    return model


def nearest_to_median(vectors, k: int) -> np.ndarray:
    """Indices of the k vectors closest (Euclidean) to the component-wise median."""
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if k > len(V) or k < 0:
        raise InsufficientSamples(f"cannot select {k} of {len(V)} samples")
    med = np.median(V, axis=0)
    dist = np.linalg.norm(V - med, axis=1)
    return np.argsort(dist, kind="stable")[:k]


def select_related_subset(related, k: int) -> list[np.ndarray]:
    V = np.atleast_2d(np.asarray(related, dtype=float))
    return [V[i] for i in nearest_to_median(V, k)]


# --- file formats -----------------------------------------------------------

def read_dataset(path: str | Path) -> Dataset:
    """CSV rows ``video_id,y,u,f0,f1,...`` (an optional header is skipped)."""
    ids, ys, us, rows = [], [], [], []
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#") or line.startswith("video_id,"):
            continue
        vid, y, u, *feat = line.split(",")
        ids.append(vid)
        ys.append(int(y))
        us.append(int(u))
        rows.append([float(x) for x in feat])
    if len({len(r) for r in rows}) > 1:
        raise DimensionMismatch(f"{path}: rows differ in feature count")
    return Dataset(np.array(rows), np.array(ys), np.array(us), tuple(ids))


def write_dataset(path: str | Path, ds: Dataset) -> None:
    d = ds.X.shape[1]
    lines = ["video_id,y,u," + ",".join(f"f{i}" for i in range(d))]
    for vid, y, u, row in zip(ds.ids, ds.y, ds.u, ds.X):
        lines.append(f"{vid},{int(y)},{int(u)}," + ",".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_model(path: str | Path, model: SvmModel) -> None:
    """Text dump of kernel parameters, bias and support rows ``alpha,y,u,features``."""
    head = [f"#kernel={model.kernel}", f"#gamma={model.gamma!r}", f"#C={model.C!r}",
            f"#c={model.c!r}", f"#b={model.b!r}", f"#dim={model.dim}"]
    for key in sorted(model.meta):
        head.append(f"#meta.{key}={model.meta[key]!r}")
    rows = []
    for i in model.support:
        rows.append(",".join([repr(float(model.alpha[i])), str(int(model.y[i])), str(int(model.u[i]))]
                             + [repr(float(x)) for x in model.X[i]]))
    Path(path).write_text("\n".join(head + rows) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> SvmModel:
    params: dict[str, str] = {}
    meta: dict[str, object] = {}
    alpha, ys, us, rows = [], [], [], []
    for line in Path(path).read_text("utf-8").splitlines():
        if not line.strip():
            continue
        if line.startswith("#meta."):
            key, val = line[6:].split("=", 1)
            try:
                meta[key] = float(val)
            except ValueError:
                meta[key] = val.strip("'\"")
        elif line.startswith("#"):
            key, val = line[1:].split("=", 1)
            params[key] = val
        else:
            a, y, u, *feat = line.split(",")
            alpha.append(float(a))
            ys.append(float(y))
            us.append(int(u))
            rows.append([float(x) for x in feat])
    dim = int(params["dim"])
    X = np.array(rows, dtype=float).reshape(len(rows), dim)
    return SvmModel(X, np.array(alpha), np.array(ys), np.array(us, dtype=np.int64),
                    float(params["b"]), params["kernel"], float(params["gamma"]),
                    float(params["C"]), float(params["c"]), meta=meta)
