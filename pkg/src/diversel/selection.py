"""Greedy diversity-aware selection kernels.

Two metrics share one greedy loop: with cosine the step score is
alpha * r_i - (1 - alpha) * max_{j in W} cos(i, j)  (classic MMR), and with
Euclidean the penalty term becomes max_{j in W} (-dist(i, j)), i.e. the
score rewards distance from the recent picks. W is the sliding window of
the most recently selected items. fps_pure is the reward-free sampler with
both the classical max-of-min aggregation and the max-of-max variant.

All scoring runs in float64 regardless of the storage dtype; ties always
break toward the lowest candidate index so results are deterministic at
any parallelism level.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .corpus import EmbeddingMatrix
from .errors import ParameterError

UNBOUNDED_WINDOW_SENTINEL = 1_000_000  # grid value meaning "all selected items"


class Metric(enum.Enum):
    COSINE = "cosine"
    EUCLIDEAN = "euclidean"


class FpsAggregation(enum.Enum):
    CLASSICAL_MIN = "classical-min"  # argmax of min distance to selected
    PAPER_MAX = "paper-max"          # argmax of max distance to selected


class BudgetKind(enum.Enum):
    COMPRESSION_RATIO = "cr"
    MAX_TOKENS = "tmax"


@dataclass(frozen=True)
class TokenBudget:
    kind: BudgetKind
    value: float

    def __post_init__(self):
        if self.kind is BudgetKind.COMPRESSION_RATIO:
            if not 0.0 < self.value <= 1.0:
                raise ParameterError(
                    f"compression ratio must be in (0, 1], got {self.value}")
        else:
            if self.value < 1 or self.value != int(self.value):
                raise ParameterError(
                    f"max-tokens budget must be a positive integer, got {self.value}")

    @classmethod
    def ratio(cls, c_r: float) -> "TokenBudget":
        return cls(BudgetKind.COMPRESSION_RATIO, float(c_r))

    @classmethod
    def max_tokens(cls, t_max: int) -> "TokenBudget":
        return cls(BudgetKind.MAX_TOKENS, int(t_max))

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "value": self.value}


@dataclass(frozen=True)
class SelectionConfig:
    """Greedy selection parameters.

    window=None means unbounded: the penalty looks at every selected item.
    fps_aggregation only affects fps_pure, not select().
    """

    alpha: float
    window: int | None
    metric: Metric
    budget: TokenBudget
    fps_aggregation: FpsAggregation = FpsAggregation.CLASSICAL_MIN

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.window is not None and self.window < 0:
            raise ParameterError(f"window must be >= 0, got {self.window}")

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "w": UNBOUNDED_WINDOW_SENTINEL if self.window is None else self.window,
            "metric": self.metric.value,
            "budget": self.budget.to_json(),
            "fps_aggregation": self.fps_aggregation.value,
        }


def window_from_grid(w: int) -> int | None:
    """Map a grid/CLI w value to the config field; >= 1e6 means unbounded."""
    if w < 0:
        raise ParameterError(f"w must be >= 0, got {w}")
    return None if w >= UNBOUNDED_WINDOW_SENTINEL else w


@dataclass(frozen=True)
class Pick:
    index: int
    score: float
    cum_tokens: int
    reward: float  # pure relevance r_i, kept for score-ranked reordering

    def to_json(self) -> dict:
        return {"index": self.index, "score": self.score,
                "cum_tokens": self.cum_tokens}


@dataclass
class SelectionResult:
    picks: list[Pick]
    config: SelectionConfig

    @property
    def indices(self) -> list[int]:
        return [p.index for p in self.picks]

    @property
    def total_tokens(self) -> int:
        return self.picks[-1].cum_tokens if self.picks else 0

    def to_json(self) -> dict:
        return {
            "picks": [p.to_json() for p in self.picks],
            "config": self.config.to_json(),
        }


def _as_f64_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    return arr


def cosine_sim(u, v) -> float:
    """dot(u, v) / (|u| |v|); both vectors must be nonzero."""
    a = _as_f64_vector(u, "u")
    b = _as_f64_vector(v, "v")
    if a.shape != b.shape:
        raise ParameterError(f"dim mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ParameterError("cosine similarity undefined for zero-norm input")
    return float(np.dot(a, b) / (na * nb))


def euclid_dist(u, v) -> float:
    a = _as_f64_vector(u, "u")
    b = _as_f64_vector(v, "v")
    if a.shape != b.shape:
        raise ParameterError(f"dim mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(np.linalg.norm(a - b))


def _candidate_array(candidates: EmbeddingMatrix | np.ndarray) -> np.ndarray:
    if isinstance(candidates, EmbeddingMatrix):
        return candidates.vectors.astype(np.float64)
    arr = np.asarray(candidates, dtype=np.float64)
    if arr.ndim != 2:
        raise ParameterError(f"candidates must be 2-D, got ndim={arr.ndim}")
    return arr


def _cos_to_point(X: np.ndarray, row_norms: np.ndarray, p: np.ndarray) -> np.ndarray:
    pn = np.linalg.norm(p)
    return (X @ p) / (row_norms * pn)


def _dist_to_point(X: np.ndarray, p: np.ndarray,
                   scratch: np.ndarray | None = None) -> np.ndarray:
    # Direct differences keep dist(x, x) exactly zero, unlike the
    # norm-expansion identity; scratch avoids re-allocating N x d temporaries
    # inside the greedy loop.
    diff = np.subtract(X, p, out=scratch)
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def reward_scores(query, candidates: EmbeddingMatrix | np.ndarray,
                  metric: Metric) -> np.ndarray:
    """Relevance of each candidate to the query.

    Cosine: r_i = cos(query, cand_i). Euclidean: r_i = -dist(query, cand_i),
    so higher is closer for both metrics.
    """
    X = _candidate_array(candidates)
    if X.shape[0] == 0:
        return np.zeros(0, dtype=np.float64)
    q = _as_f64_vector(query, "query")
    if q.shape[0] != X.shape[1]:
        raise ParameterError(f"dim mismatch: query {q.shape[0]} vs candidates {X.shape[1]}")
    if metric is Metric.COSINE:
        qn = np.linalg.norm(q)
        row_norms = np.linalg.norm(X, axis=1)
        if qn == 0.0 or (row_norms == 0.0).any():
            raise ParameterError("cosine similarity undefined for zero-norm input")
        return (X @ q) / (row_norms * qn)
    return -_dist_to_point(X, q)


def resolve_budget(budget: TokenBudget, total_tokens: int) -> int:
    """Token cap for a selection run over a corpus of total_tokens tokens."""
    if total_tokens < 1:
        raise ParameterError(f"total_tokens must be >= 1, got {total_tokens}")
    if budget.kind is BudgetKind.COMPRESSION_RATIO:
        return max(1, math.floor(budget.value * total_tokens))
    return int(budget.value)


def select(query, candidates: EmbeddingMatrix | np.ndarray,
           token_counts, cfg: SelectionConfig) -> SelectionResult:
    """Greedy diversity-aware selection under a token budget.

    At each step the argmax over remaining candidates of
    alpha * r_i - (1 - alpha) * P(i) wins, where P(i) is the maximum
    similarity (cosine) or negated minimum distance (Euclidean) to the
    min(w, |S|) most recently selected items, and 0 while nothing is
    selected. Ties break to the lowest index. Selection terminates at the
    first winner whose tokens would overflow the resolved budget.
    """
    X = _candidate_array(candidates)
    n = X.shape[0]
    if n == 0:
        raise ParameterError("candidate set is empty")
    tokens = np.asarray(token_counts, dtype=np.int64)
    if tokens.shape != (n,):
        raise ParameterError(
            f"token_counts length {tokens.shape} does not match {n} candidates")
    if (tokens < 1).any():
        raise ParameterError("token counts must all be >= 1")

    rewards = reward_scores(query, X, cfg.metric)
    budget = resolve_budget(cfg.budget, int(tokens.sum()))
    window = n if cfg.window is None else min(cfg.window, n)

    if cfg.metric is Metric.COSINE:
        row_norms = np.linalg.norm(X, axis=1)
        scratch = None
    else:
        scratch = np.empty_like(X)

    remaining = np.ones(n, dtype=bool)
    window_penalties: list[np.ndarray] = []  # similarity of all cands to each recent pick
    picks: list[Pick] = []
    cum_tokens = 0
    neg_inf = -np.inf

    while remaining.any():
        if window == 0 or not picks:
            penalty = np.zeros(n, dtype=np.float64)
        else:
            penalty = window_penalties[0]
            for extra in window_penalties[1:]:
                penalty = np.maximum(penalty, extra)
        scores = cfg.alpha * rewards - (1.0 - cfg.alpha) * penalty
        scores = np.where(remaining, scores, neg_inf)
        winner = int(np.argmax(scores))
        if cum_tokens + int(tokens[winner]) > budget:
            break
        cum_tokens += int(tokens[winner])
        picks.append(Pick(index=winner, score=float(scores[winner]),
                          cum_tokens=cum_tokens, reward=float(rewards[winner])))
        remaining[winner] = False
        if window > 0:
            p = X[winner].copy()  # scratch aliases X rows otherwise
            if cfg.metric is Metric.COSINE:
                sims = _cos_to_point(X, row_norms, p)
            else:
                sims = -_dist_to_point(X, p, scratch)
            window_penalties.append(sims)
            if len(window_penalties) > window:
                window_penalties.pop(0)

    return SelectionResult(picks=picks, config=cfg)


def fps_pure(points: EmbeddingMatrix | np.ndarray, k: int, seed: int = 0,
             aggregation: FpsAggregation = FpsAggregation.CLASSICAL_MIN,
             start_index: int | None = None) -> list[int]:
    """Reward-free farthest point sampling.

    The start point is drawn uniformly by a seeded RNG unless start_index
    pins it. CLASSICAL_MIN then repeatedly takes the point farthest from
    its nearest selected neighbor (the well-spread form); PAPER_MAX takes
    the point with the largest distance to any selected point.
    """
    X = _candidate_array(points)
    n = X.shape[0]
    if n < 1:
        raise ParameterError("point set is empty")
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    if start_index is None:
        start = int(np.random.default_rng(seed).integers(n))
    else:
        if not 0 <= start_index < n:
            raise ParameterError(f"start_index {start_index} out of range")
        start = start_index

    order = [start]
    remaining = np.ones(n, dtype=bool)
    remaining[start] = False
    agg = _dist_to_point(X, X[start])
    for _ in range(k - 1):
        masked = np.where(remaining, agg, -np.inf)
        winner = int(np.argmax(masked))
        order.append(winner)
        remaining[winner] = False
        dists = _dist_to_point(X, X[winner])
        if aggregation is FpsAggregation.CLASSICAL_MIN:
            agg = np.minimum(agg, dists)
        else:
            agg = np.maximum(agg, dists)
    return order
