"""Brute-force greedy reference, deliberately independent of the engine.

Plain-Python math only; every score is recomputed from scratch each step
with an explicit window slice, so any bookkeeping bug in the incremental
engine shows up as a sequence mismatch.
"""

from __future__ import annotations

import math


def _dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def _cos(u, v):
    return _dot(u, v) / (math.sqrt(_dot(u, u)) * math.sqrt(_dot(v, v)))


def _dist(u, v):
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(u, v)))


def greedy_oracle(query, candidates, token_counts, alpha, window, metric,
                  budget_tokens):
    """Reference pick sequence. window=None means unbounded; metric is
    'cosine' or 'euclidean'. Returns [(index, score, cum_tokens), ...]."""
    n = len(candidates)
    selected: list[int] = []
    picks = []
    cum = 0
    remaining = set(range(n))
    while remaining:
        w = len(selected) if window is None else min(window, len(selected))
        recent = selected[len(selected) - w:] if w > 0 else []
        best_i = None
        best_score = None
        for i in sorted(remaining):
            if metric == "cosine":
                reward = _cos(query, candidates[i])
                penalty = max((_cos(candidates[i], candidates[j])
                               for j in recent), default=0.0)
            else:
                reward = -_dist(query, candidates[i])
                penalty = max((-_dist(candidates[i], candidates[j])
                               for j in recent), default=0.0)
            score = alpha * reward - (1.0 - alpha) * penalty
            if best_score is None or score > best_score:
                best_i, best_score = i, score
        if cum + token_counts[best_i] > budget_tokens:
            break
        cum += token_counts[best_i]
        selected.append(best_i)
        remaining.remove(best_i)
        picks.append((best_i, best_score, cum))
    return picks


def descending_reward_order(query, candidates, metric):
    """Similarity-only baseline ranking: descending reward, ties by index."""
    rewards = []
    for i, cand in enumerate(candidates):
        if metric == "cosine":
            rewards.append(_cos(query, cand))
        else:
            rewards.append(-_dist(query, cand))
    return [i for i, _ in sorted(enumerate(rewards), key=lambda t: (-t[1], t[0]))]
