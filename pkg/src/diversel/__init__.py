"""diversel: diversity-aware retrieval selection under token budgets."""

__version__ = "0.1.0"

from .corpus import (Corpus, EmbeddingMatrix, Segment, count_tokens,
                     load_corpus, mean_embedding, read_demb, split_chunks,
                     split_sentences, write_demb, write_segments)
from .errors import (DataFormatError, DiverselError, ExternalServiceError,
                     ParameterError)
from .selection import (BudgetKind, FpsAggregation, Metric, Pick,
                        SelectionConfig, SelectionResult, TokenBudget,
                        cosine_sim, euclid_dist, fps_pure, resolve_budget,
                        reward_scores, select)
from .reorder import OrderingKind, OrderingScheme, order, parse_scheme
from .ann import (ClusterIndex, KMeansModel, PcaModel, build_index, choose_k,
                  kmeans_fit, load_index, pca_fit, pca_transform, route_query,
                  save_index)
from .evaluation import (EvalReport, PhaseSpec, QaExample, SweepPhase,
                         SweepReport, answer_recall, bench_latency,
                         normalize_text, read_qa_examples, rouge_l, rouge_n,
                         run_qa_eval, sweep)
from .llm import (JudgeOutcome, LlmConfig, LlmMode, Preference,
                  build_qa_prompt, build_summary_prompt, complete, judge_pair)

__all__ = [
    "__version__",
    "Corpus", "EmbeddingMatrix", "Segment", "count_tokens", "load_corpus",
    "mean_embedding", "read_demb", "split_chunks", "split_sentences",
    "write_demb", "write_segments",
    "DataFormatError", "DiverselError", "ExternalServiceError", "ParameterError",
    "BudgetKind", "FpsAggregation", "Metric", "Pick", "SelectionConfig",
    "SelectionResult", "TokenBudget", "cosine_sim", "euclid_dist", "fps_pure",
    "resolve_budget", "reward_scores", "select",
    "OrderingKind", "OrderingScheme", "order", "parse_scheme",
    "ClusterIndex", "KMeansModel", "PcaModel", "build_index", "choose_k",
    "kmeans_fit", "load_index", "pca_fit", "pca_transform", "route_query",
    "save_index",
    "EvalReport", "PhaseSpec", "QaExample", "SweepPhase", "SweepReport",
    "answer_recall", "bench_latency", "normalize_text", "read_qa_examples",
    "rouge_l", "rouge_n", "run_qa_eval", "sweep",
    "JudgeOutcome", "LlmConfig", "LlmMode", "Preference", "build_qa_prompt",
    "build_summary_prompt", "complete", "judge_pair",
]
