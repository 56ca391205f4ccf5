"""Class-imbalance weighting: focal weight (1 - P)^alpha, effective-number
weight (1 - beta^n) / (1 - beta) over per-class frame counts, their product,
and a weighted negative log-likelihood built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from actdet.annot import DatasetStats
from actdet.errors import InputError

DEFAULT_ALPHA = 2.0
DEFAULT_BETA = 0.7
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ImbalanceParams:
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InputError(f"alpha must be > 0, got {self.alpha}")
        if not 0.0 <= self.beta < 1.0:
            raise InputError(f"beta must be in [0, 1), got {self.beta}")


@dataclass(frozen=True)
class ClassWeights:
    """``w2[c]`` is the effective-number weight of class ``c``; with
    ``inverted`` it is the reciprocal form (1 - beta) / (1 - beta^n)."""

    frame_counts: Mapping[int, int]
    w2: Mapping[int, float]
    params: ImbalanceParams
    inverted: bool = False

    def __getitem__(self, class_id: int) -> float:
        try:
            return self.w2[class_id]
        except KeyError:
            raise InputError(f"unknown class {class_id}") from None

    def to_csv(self) -> str:
        rows = ["action_index,n_frames,w2"]
        for c in sorted(self.w2):
            rows.append(f"{c + 1},{self.frame_counts[c]},{self.w2[c]!r}")
        return "\n".join(rows) + "\n"


def focal_weight(p: float, alpha: float = DEFAULT_ALPHA) -> float:
    if not 0.0 <= p <= 1.0:
        raise InputError(f"probability {p!r} outside [0, 1]")
    if not alpha > 0:
        raise InputError(f"alpha must be > 0, got {alpha}")
    return (1.0 - p) ** alpha


def _w2(n: int, beta: float, inverted: bool) -> float:
    if n == 0:
        return 0.0
    if inverted:
        return (1.0 - beta) / (1.0 - beta**n)
    return (1.0 - beta**n) / (1.0 - beta)


def effective_number_weights(frame_counts: Mapping[int, int] | Sequence[int], beta: float = DEFAULT_BETA,
                             alpha: float = DEFAULT_ALPHA, inverted: bool = False) -> ClassWeights:
    """Per-class effective-number weights.

    A class with no frames gets weight 0. ``frame_counts`` may be a mapping
    class_id -> n or a sequence indexed by class id.
    """
    params = ImbalanceParams(alpha, beta)
    counts = dict(frame_counts) if isinstance(frame_counts, Mapping) else dict(enumerate(frame_counts))
    for c, n in counts.items():
        if isinstance(n, bool) or not isinstance(n, int) or n < 0:
            raise InputError(f"frame count for class {c} must be a non-negative integer, got {n!r}")
    w2 = {c: _w2(n, beta, inverted) for c, n in counts.items()}
    return ClassWeights(counts, w2, params, inverted)


def weights_from_stats(stats: DatasetStats, params: ImbalanceParams = ImbalanceParams(),
                       inverted: bool = False) -> ClassWeights:
    return effective_number_weights(stats.frame_counts(), params.beta, params.alpha, inverted)


def combined_weight(p: float, class_id: int, weights: ClassWeights) -> float:
    return focal_weight(p, weights.params.alpha) * weights[class_id]


def weighted_focal_ce(probs: Sequence[float], target: int, weights: ClassWeights) -> float:
    """w1(P_t) * w2(t) * -ln(P_t), with P_t floored at 1e-12 inside the log."""
    s = math.fsum(probs)
    if abs(s - 1.0) > 1e-6 or any(not 0.0 <= p <= 1.0 for p in probs):
        raise InputError(f"probabilities must lie in [0, 1] and sum to 1 (sum={s})")
    if not 0 <= target < len(probs):
        raise InputError(f"target {target} outside the probability vector")
    p = probs[target]
    # + 0.0 turns the -0.0 of a perfect prediction into 0.0
    return combined_weight(p, target, weights) * -math.log(max(p, PROB_FLOOR)) + 0.0
