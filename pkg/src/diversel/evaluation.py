"""Metrics and experiment drivers.

Answer recall is normalized substring containment, measured twice per the
benchmark protocol: on the selected text before any LLM call (pre-LLM) and
on the LLM response (post-LLM). ROUGE-1/2/L support summarization scoring.
sweep() drives the two-level (alpha, w) hyperparameter search and
bench_latency() times the selection kernels on synthetic corpora.
"""

from __future__ import annotations

import enum
import io
import json
import math
import statistics
import time
import unicodedata
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import Corpus, EmbeddingMatrix
from .errors import DataFormatError, ExternalServiceError, ParameterError
from . import llm as llm_mod
from .ann import ClusterIndex, route_query
from .reorder import OrderingKind, OrderingScheme, order
from .selection import (SelectionConfig, SelectionResult, select,
                        window_from_grid)

COARSE_ALPHA_GRID = (0.0, 0.25, 0.5, 0.7, 0.8, 0.9, 0.95, 1.0)
COARSE_W_GRID = (0, 10, 100, 1000, 1_000_000)
GRANULAR_W_BASE = (1, 2, 3, 5, 10, 20, 30, 50, 100, 300, 1000)


@dataclass(frozen=True)
class QaExample:
    query: str
    answers: tuple[str, ...]
    doc_ids: tuple[str, ...] | None = None  # None = search every document

    def __post_init__(self):
        if not self.answers or all(not a.strip() for a in self.answers):
            raise ParameterError("a QA example needs at least one non-empty answer")


def read_qa_examples(path) -> list[QaExample]:
    """Parse a QA examples JSONL file: {"query", "answers", "doc_ids"?}."""
    examples: list[QaExample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                doc_ids = obj.get("doc_ids")
                examples.append(QaExample(
                    query=obj["query"],
                    answers=tuple(obj["answers"]),
                    doc_ids=tuple(doc_ids) if doc_ids is not None else None,
                ))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    return examples


def normalize_text(s: str) -> str:
    """Lowercase, drop Unicode punctuation, collapse whitespace runs."""
    out = []
    for ch in s.lower():
        if unicodedata.category(ch).startswith("P"):
            continue
        out.append(" " if ch.isspace() else ch)
    return " ".join("".join(out).split())


def answer_recall(text: str, answers) -> bool:
    """True iff any normalized answer is a substring of the normalized text."""
    answers = list(answers)
    if not answers:
        raise ParameterError("answers list is empty")
    hay = normalize_text(text)
    for ans in answers:
        needle = normalize_text(ans)
        if needle and needle in hay:
            return True
    return False


def _ngrams(tokens: list[str], n: int) -> dict[tuple[str, ...], int]:
    counts: dict[tuple[str, ...], int] = {}
    for i in range(len(tokens) - n + 1):
        gram = tuple(tokens[i:i + n])
        counts[gram] = counts.get(gram, 0) + 1
    return counts


def _prf(overlap: float, cand_total: float, ref_total: float) -> tuple[float, float, float]:
    p = overlap / cand_total if cand_total > 0 else 0.0
    r = overlap / ref_total if ref_total > 0 else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def rouge_n(candidate: str, reference: str, n: int) -> tuple[float, float, float]:
    """Clipped n-gram overlap (precision, recall, f1) over normalized tokens."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    cand = normalize_text(candidate).split()
    ref = normalize_text(reference).split()
    cand_grams = _ngrams(cand, n)
    ref_grams = _ngrams(ref, n)
    overlap = sum(min(c, ref_grams.get(g, 0)) for g, c in cand_grams.items())
    return _prf(overlap, sum(cand_grams.values()), sum(ref_grams.values()))


def _lcs_len(xs: list[str], ys: list[str]) -> int:
    if not xs or not ys:
        return 0
    prev = [0] * (len(ys) + 1)
    for x in xs:
        cur = [0]
        for j, y in enumerate(ys, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> tuple[float, float, float]:
    """LCS-based (precision, recall, f1) over normalized tokens."""
    cand = normalize_text(candidate).split()
    ref = normalize_text(reference).split()
    lcs = _lcs_len(cand, ref)
    return _prf(lcs, len(cand), len(ref))


@dataclass
class EvalReport:
    pre_llm_recall: float
    post_llm_recall: float | None
    pre_flags: list[bool]
    post_flags: list[bool | None]
    llm_errors: int
    config: SelectionConfig
    scheme_label: str
    select_latencies_ms: list[float] = field(default_factory=list)

    @property
    def mean_latency_ms(self) -> float:
        return statistics.fmean(self.select_latencies_ms) if self.select_latencies_ms else 0.0

    def to_json(self) -> dict:
        return {
            "pre_llm_recall": self.pre_llm_recall,
            "post_llm_recall": self.post_llm_recall,
            "per_example": {
                "pre": self.pre_flags,
                "post": self.post_flags,
            },
            "llm_errors": self.llm_errors,
            "config": self.config.to_json(),
            "scheme": self.scheme_label,
            "mean_select_latency_ms": self.mean_latency_ms,
        }


def _candidate_rows(corpus: Corpus, example: QaExample,
                    query_vec: np.ndarray,
                    index: ClusterIndex | None,
                    pool_target: int | None) -> list[int]:
    if example.doc_ids is not None:
        rows = corpus.rows_for_docs(list(example.doc_ids))
        if not rows:
            raise DataFormatError(
                f"no segments found for doc_ids {example.doc_ids!r}")
        return rows
    if index is not None:
        target = pool_target if pool_target is not None else index.cap
        return route_query(index, query_vec, target)
    return list(range(corpus.n_segments))


def select_for_example(corpus: Corpus, example: QaExample,
                       query_vec: np.ndarray, cfg: SelectionConfig,
                       index: ClusterIndex | None = None,
                       pool_target: int | None = None
                       ) -> tuple[SelectionResult, list[int]]:
    """Run selection for one example; returns the result plus the corpus
    rows backing each candidate index."""
    rows = _candidate_rows(corpus, example, query_vec, index, pool_target)
    sub = corpus.embeddings.vectors[np.asarray(rows, dtype=np.intp)]
    counts = [corpus.segments[i].n_tokens for i in rows]
    result = select(query_vec, sub, counts, cfg)
    return result, rows


def run_qa_eval(corpus: Corpus, examples: list[QaExample],
                query_vectors: EmbeddingMatrix | np.ndarray,
                cfg: SelectionConfig,
                scheme: OrderingScheme = OrderingScheme(OrderingKind.INDEX_SORT),
                llm: llm_mod.LlmConfig | None = None,
                index: ClusterIndex | None = None,
                pool_target: int | None = None) -> EvalReport:
    """Two-metric QA evaluation loop.

    Per example: select segments for its query vector, test whether any
    gold answer appears in the selected text (pre-LLM recall); when an LLM
    client is configured, assemble the prompt in scheme order, call it, and
    test the response (post-LLM recall). Transport failures are excluded
    from the post-LLM denominator but counted and reported.
    """
    qvecs = query_vectors.vectors if isinstance(query_vectors, EmbeddingMatrix) \
        else np.asarray(query_vectors)
    if qvecs.ndim != 2 or qvecs.shape[0] != len(examples):
        raise ParameterError(
            f"query_vectors rows {qvecs.shape} must match {len(examples)} examples")

    pre_flags: list[bool] = []
    post_flags: list[bool | None] = []
    latencies: list[float] = []
    llm_errors = 0

    for i, example in enumerate(examples):
        qvec = qvecs[i]
        t0 = time.perf_counter()
        result, rows = select_for_example(corpus, example, qvec, cfg,
                                          index=index, pool_target=pool_target)
        latencies.append((time.perf_counter() - t0) * 1e3)
        picked_rows = [rows[p.index] for p in result.picks]
        selected_text = " ".join(corpus.segments[r].text for r in picked_rows)
        pre_flags.append(answer_recall(selected_text, example.answers))

        if llm is None:
            post_flags.append(None)
            continue
        if not result.picks:
            post_flags.append(False)  # nothing selected, nothing to ask
            continue
        local_order = order(result, [corpus.segments[r] for r in rows], scheme)
        ordered_segments = [corpus.segments[rows[j]] for j in local_order]
        prompt = llm_mod.build_qa_prompt(ordered_segments, example.query)
        try:
            response = llm_mod.complete(llm, prompt)
        except ExternalServiceError:
            llm_errors += 1
            post_flags.append(None)
            continue
        post_flags.append(answer_recall(response, example.answers))

    pre_recall = statistics.fmean(pre_flags) if pre_flags else 0.0
    answered = [f for f in post_flags if f is not None]
    post_recall = statistics.fmean(answered) if (llm is not None and answered) else None
    return EvalReport(
        pre_llm_recall=pre_recall,
        post_llm_recall=post_recall,
        pre_flags=pre_flags,
        post_flags=post_flags,
        llm_errors=llm_errors,
        config=cfg,
        scheme_label=scheme.label(),
        select_latencies_ms=latencies,
    )


class SweepPhase(enum.Enum):
    COARSE = "coarse"
    GRANULAR = "granular"


@dataclass(frozen=True)
class PhaseSpec:
    phase: SweepPhase
    alpha_grid: tuple[float, ...]
    w_grid: tuple[int, ...]  # raw grid values; >= 1e6 means unbounded

    @classmethod
    def coarse(cls) -> "PhaseSpec":
        return cls(SweepPhase.COARSE, COARSE_ALPHA_GRID, COARSE_W_GRID)

    @classmethod
    def granular(cls, best_alpha: float, best_w: int,
                 coarse_w_grid: tuple[int, ...] = COARSE_W_GRID) -> "PhaseSpec":
        """Neighborhood grid around the coarse winner.

        Alphas are best +/- {0.05, 0.10, 0.15} clipped to [0, 1]; w values
        come from the granular base restricted to the interval between the
        coarse neighbors of the best w.
        """
        alphas = sorted({round(min(1.0, max(0.0, best_alpha + d)), 4)
                         for d in (-0.15, -0.10, -0.05, 0.05, 0.10, 0.15)})
        ws = sorted(set(coarse_w_grid))
        pos = ws.index(best_w)
        lo = ws[pos - 1] if pos > 0 else ws[pos]
        hi = ws[pos + 1] if pos + 1 < len(ws) else ws[pos]
        w_vals = tuple(w for w in GRANULAR_W_BASE if lo <= w <= hi)
        if not w_vals:
            w_vals = (best_w,)
        return cls(SweepPhase.GRANULAR, tuple(alphas), w_vals)


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    w: int
    recall: float
    latency_ms: float


@dataclass
class SweepReport:
    rows: list[SweepRow]
    best: tuple[float, int]
    phase: SweepPhase

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("alpha,w,recall,latency_ms\n")
        for r in self.rows:
            buf.write(f"{r.alpha},{r.w},{r.recall:.6f},{r.latency_ms:.3f}\n")
        return buf.getvalue()


def _sweep_rank_key(row: SweepRow) -> tuple:
    # Max recall; ties -> lower latency, then lower w, then higher alpha.
    w_for_ties = math.inf if row.w >= 1_000_000 else row.w
    return (-row.recall, row.latency_ms, w_for_ties, -row.alpha)


def sweep(corpus: Corpus, examples: list[QaExample],
          query_vectors: EmbeddingMatrix | np.ndarray,
          base_cfg: SelectionConfig, phase_spec: PhaseSpec,
          index: ClusterIndex | None = None) -> SweepReport:
    """Evaluate pre-LLM recall over every (alpha, w) cell of the phase grid."""
    if not phase_spec.alpha_grid or not phase_spec.w_grid:
        raise ParameterError("sweep grids must be non-empty")
    rows: list[SweepRow] = []
    for alpha in phase_spec.alpha_grid:
        for w in phase_spec.w_grid:
            cfg = replace(base_cfg, alpha=alpha, window=window_from_grid(w))
            report = run_qa_eval(corpus, examples, query_vectors, cfg, index=index)
            rows.append(SweepRow(alpha=alpha, w=w,
                                 recall=report.pre_llm_recall,
                                 latency_ms=report.mean_latency_ms))
    best_row = min(rows, key=_sweep_rank_key)
    return SweepReport(rows=rows, best=(best_row.alpha, best_row.w),
                       phase=phase_spec.phase)


@dataclass(frozen=True)
class BenchRow:
    n: int
    metric: str
    alpha: float
    w: int
    budget_tokens: int
    median_ms: float
    iqr_ms: float
    repetitions: int


def bench_to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    buf.write("n,metric,alpha,w,budget_tokens,median_ms,iqr_ms,repetitions\n")
    for r in rows:
        buf.write(f"{r.n},{r.metric},{r.alpha},{r.w},{r.budget_tokens},"
                  f"{r.median_ms:.3f},{r.iqr_ms:.3f},{r.repetitions}\n")
    return buf.getvalue()


def bench_latency(corpus_sizes: list[int], cfgs: list[SelectionConfig],
                  repetitions: int = 5, dim: int = 384, seed: int = 0,
                  tokens_per_item: int = 64) -> list[BenchRow]:
    """Wall-clock select() timing on synthetic seeded corpora.

    One row per (size, config) with the median and IQR over repetitions;
    a warm-up call per cell is excluded. Runs on a single worker so timings
    are not polluted by contention.
    """
    if repetitions < 3:
        raise ParameterError(f"repetitions must be >= 3, got {repetitions}")
    rows: list[BenchRow] = []
    for n in corpus_sizes:
        rng = np.random.default_rng(seed + n)
        X = rng.standard_normal((n, dim)).astype(np.float32)
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        query = rng.standard_normal(dim)
        query /= np.linalg.norm(query)
        counts = [tokens_per_item] * n
        for cfg in cfgs:
            select(query, X, counts, cfg)  # warm-up
            samples = []
            for _ in range(repetitions):
                t0 = time.perf_counter()
                select(query, X, counts, cfg)
                samples.append((time.perf_counter() - t0) * 1e3)
            q1, med, q3 = statistics.quantiles(samples, n=4)
            rows.append(BenchRow(
                n=n, metric=cfg.metric.value, alpha=cfg.alpha,
                w=cfg.window if cfg.window is not None else 1_000_000,
                budget_tokens=int(cfg.budget.value),
                median_ms=med, iqr_ms=q3 - q1, repetitions=repetitions))
    return rows
