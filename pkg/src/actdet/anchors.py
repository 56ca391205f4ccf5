"""K-means clustering of ground-truth box shapes into anchor priors, and
elbow-based selection of the number of anchors."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from actdet.annot import FrameAnnotation
from actdet.errors import InputError

METRICS = ("euclidean", "iou")


@dataclass(frozen=True)
class AnchorSet:
    """Centroids are ``(w, h)`` rows sorted by area ascending; ``labels`` refer
    to that order. ``history`` holds the inertia after seeding and after each
    iteration (the last entry equals ``inertia``)."""

    centroids: np.ndarray
    inertia: float
    k: int
    seed: int
    labels: np.ndarray
    history: tuple[float, ...]
    metric: str = "euclidean"

    def to_json(self) -> str:
        return json.dumps({
            "k": self.k,
            "inertia": self.inertia,
            "anchors": [[float(w), float(h)] for w, h in self.centroids],
            "metric": self.metric,
            "seed": self.seed,
        }, indent=2) + "\n"


@dataclass(frozen=True)
class KSelection:
    k: int
    profile: tuple[tuple[int, float], ...]
    runs: dict[int, AnchorSet] = field(repr=False)
    reruns: tuple[int, ...] = ()

    def profile_csv(self) -> str:
        return "k,inertia\n" + "".join(f"{k},{v!r}\n" for k, v in self.profile)


def load_anchors(text: str) -> np.ndarray:
    try:
        rec = json.loads(text)
        arr = np.asarray(rec["anchors"], dtype=float)
    except (ValueError, KeyError, TypeError) as e:
        raise InputError(f"bad anchors file: {e}") from None
    if arr.ndim != 2 or arr.shape[1] != 2 or not np.all(arr > 0):
        raise InputError("anchors must be a list of positive [w, h] pairs")
    return arr


def _as_samples(samples) -> np.ndarray:
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2:
        raise InputError(f"samples must have shape (n, 2), got {X.shape}")
    if not np.all(np.isfinite(X)) or np.any(X <= 0) or np.any(X > 1):
        raise InputError("shape samples must satisfy 0 < w, h <= 1")
    return X


def _distances(X: np.ndarray, C: np.ndarray, metric: str) -> np.ndarray:
    if metric == "euclidean":
        diff = X[:, None, :] - C[None, :, :]
        return np.einsum("nkd,nkd->nk", diff, diff)
    # 1 - IoU of boxes sharing a common center
    inter = np.minimum(X[:, None, 0], C[None, :, 0]) * np.minimum(X[:, None, 1], C[None, :, 1])
    union = X[:, None, 0] * X[:, None, 1] + C[None, :, 0] * C[None, :, 1] - inter
    return 1.0 - inter / union


def _inertia(X, C, labels, metric) -> float:
    if metric == "euclidean":
        diff = X - C[labels]
        return float(np.einsum("nd,nd->", diff, diff))
    return float(_distances(X, C, metric)[np.arange(len(X)), labels].sum())


def _farthest_first(X, k, seed, metric) -> np.ndarray:
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(len(X)))]
    dmin = _distances(X, X[chosen], metric)[:, 0]
    for _ in range(1, k):
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, _distances(X, X[[nxt]], metric)[:, 0])
    return X[chosen].copy()


def _update(X, C, labels, k, metric):
    """Recompute means; an empty cluster takes the sample farthest from its
    own centroid (among clusters that can spare one)."""
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        d = _distances(X, C, metric)[np.arange(len(X)), labels]
        d[counts[labels] <= 1] = -1.0
        i = int(np.argmax(d))
        if d[i] < 0:
            break
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] += 1
    C = C.copy()
    for j in range(k):
        members = X[labels == j]
        if len(members):
            C[j] = members.mean(axis=0)
    return C, labels


def _hartigan(X, C, labels, k, max_moves):
    """Single-point transfers that strictly lower the squared-error objective."""
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k).astype(float)
    idx = np.arange(len(X))
    for _ in range(max_moves):
        d = _distances(X, C, "euclidean")
        own = d[idx, labels]
        n_own = counts[labels]
        with np.errstate(divide="ignore", invalid="ignore"):
            removal = np.where(n_own > 1, n_own / (n_own - 1) * own, -np.inf)
        delta = counts / (counts + 1) * d - removal[:, None]
        delta[idx, labels] = np.inf
        i, j = np.unravel_index(np.argmin(delta), delta.shape)
        total = float(own.sum())
        if not delta[i, j] < -1e-12 * max(total, 1e-300):
            break
        a = labels[i]
        labels[i] = j
        counts[a] -= 1
        counts[j] += 1
        C = C.copy()
        C[a] = X[labels == a].mean(axis=0)
        C[j] = X[labels == j].mean(axis=0)
    return C, labels


def _run(X, k, seed, tol, max_iter, metric, init=None):
    C = _farthest_first(X, k, seed, metric) if init is None else np.array(init, dtype=float)
    labels = np.argmin(_distances(X, C, metric), axis=1)
    history = [_inertia(X, C, labels, metric)]
    for _ in range(max_iter):
        C, labels_upd = _update(X, C, labels, k, metric)
        new_labels = np.argmin(_distances(X, C, metric), axis=1)
        cur = _inertia(X, C, new_labels, metric)
        history.append(cur)
        prev = history[-2]
        stable = np.array_equal(new_labels, labels_upd)
        labels = new_labels
        if stable or prev == 0.0 or (prev - cur) / prev < tol:
            break
    if metric == "euclidean":
        C, labels = _update(X, C, labels, k, metric)
        C, labels = _hartigan(X, C, labels, k, max_moves=10 * len(X))
        history.append(_inertia(X, C, labels, metric))
    return C, labels, history


def kmeans_anchors(samples, k: int, seed: int = 42, tol: float = 1e-6, max_iter: int = 100,
                   metric: str = "euclidean", restarts: int = 1, init=None) -> AnchorSet:
    """Cluster normalized (w, h) box shapes into ``k`` anchors.

    Lloyd iterations from deterministic farthest-first seeding (first center
    drawn with ``seed``), stopped when the relative inertia gain drops below
    ``tol``. For the euclidean metric a final pass of single-point transfers
    leaves no point whose move to another cluster would lower the inertia.
    ``restarts > 1`` repeats with derived seeds and keeps the lowest inertia.
    """
    X = _as_samples(samples)
    if metric not in METRICS:
        raise InputError(f"metric must be one of {METRICS}")
    if k < 1:
        raise InputError("k must be >= 1")
    if len(X) < k:
        raise InputError(f"need at least k={k} samples, got {len(X)}")
    if tol <= 0:
        raise InputError("tol must be > 0")
    if restarts < 1:
        raise InputError("restarts must be >= 1")
    if init is not None and np.shape(init) != (k, 2):
        raise InputError(f"init must have shape ({k}, 2)")

    best = None
    for r in range(restarts):
        run_seed = seed if r == 0 else seed + 1_000_003 * r
        C, labels, history = _run(X, k, run_seed, tol, max_iter, metric, init if r == 0 else None)
        if best is None or history[-1] < best[2][-1]:
            best = (C, labels, history)
    C, labels, history = best

    order = np.lexsort((C[:, 1], C[:, 0], C[:, 0] * C[:, 1]))
    rank = np.empty(k, dtype=int)
    rank[order] = np.arange(k)
    return AnchorSet(C[order], float(history[-1]), k, seed, rank[labels], tuple(history), metric)


def select_k(samples, k_min: int, k_max: int, seed: int = 42, **kwargs) -> KSelection:
    """Run k-means for every K in ``[k_min, k_max]`` and pick the elbow: the K
    with the largest second difference of the inertia profile (smaller K on
    ties; ``k_min`` when there is no interior K or no positive curvature).

    If some K comes out worse than K-1 it is rerun from the K-1 centroids plus
    the worst-fit sample, which guarantees a non-increasing profile.
    """
    X = _as_samples(samples)
    n_distinct = len(np.unique(X, axis=0))
    if not 1 <= k_min < k_max <= n_distinct:
        raise InputError(f"need 1 <= k_min < k_max <= {n_distinct} distinct samples, got [{k_min}, {k_max}]")
    metric = kwargs.get("metric", "euclidean")
    runs: dict[int, AnchorSet] = {}
    reruns = []
    for k in range(k_min, k_max + 1):
        res = kmeans_anchors(X, k, seed, **kwargs)
        prev = runs.get(k - 1)
        if prev is not None and res.inertia > prev.inertia:
            d = _distances(X, prev.centroids, metric).min(axis=1)
            init = np.vstack([prev.centroids, X[int(np.argmax(d))]])
            alt = kmeans_anchors(X, k, seed, init=init, **{**kwargs, "restarts": 1})
            if alt.inertia < res.inertia:
                res = alt
            reruns.append(k)
        runs[k] = res
    profile = tuple((k, runs[k].inertia) for k in range(k_min, k_max + 1))
    inertias = [v for _, v in profile]
    chosen, best = k_min, 0.0
    for i in range(1, len(inertias) - 1):
        curv = inertias[i - 1] - 2 * inertias[i] + inertias[i + 1]
        if curv > best:
            chosen, best = k_min + i, curv
    return KSelection(chosen, profile, runs, tuple(reruns))


def shapes_from_frames(frames: Iterable[FrameAnnotation], image_w: float | None = None,
                       image_h: float | None = None) -> np.ndarray:
    """Normalized (w, h) of every ground-truth box.

    Image size defaults to the largest x_max / y_max seen in the data.
    """
    boxes = [g.bbox for fa in frames for g in fa.boxes]
    if not boxes:
        raise InputError("no ground-truth boxes to cluster")
    if image_w is None:
        image_w = max(b.x_max for b in boxes)
    if image_h is None:
        image_h = max(b.y_max for b in boxes)
    if image_w <= 0 or image_h <= 0:
        raise InputError("image size must be positive")
    wh = np.array([(b.width / image_w, b.height / image_h) for b in boxes])
    if np.any(wh > 1 + 1e-12):
        raise InputError("box larger than the image size")
    return np.minimum(wh, 1.0)
