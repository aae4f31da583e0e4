"""Single executable for the whole pipeline.

Subcommands: ingest, index, select, ask, summarize, eval, sweep, bench,
fps-demo. Every command writes a run manifest next to its output artifact.
Exit codes: 0 success, 2 usage error, 3 data/format error, 4 external
service error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import requests

from . import __version__
from .ann import build_index, load_index, route_query, save_index
from .corpus import (load_corpus, mean_embedding, read_demb, split_chunks,
                     split_sentences, write_segments)
from .errors import (DataFormatError, ExternalServiceError, ParameterError)
from .evaluation import (PhaseSpec, bench_latency, bench_to_csv,
                         read_qa_examples, rouge_l, rouge_n, run_qa_eval,
                         sweep)
from .llm import (LlmConfig, LlmMode, build_summary_prompt, complete)
from .manifest import RunManifest, manifest_path_for
from .reorder import order, parse_scheme
from .selection import (FpsAggregation, Metric, SelectionConfig, TokenBudget,
                        fps_pure, select, window_from_grid)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_EXTERNAL = 4


def _add_corpus_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--segments", required=True, help="segments JSONL file")
    p.add_argument("--embeddings", required=True, help="DEMB embedding file")
    p.add_argument("--tokenizer", default="whitespace",
                   choices=["whitespace", "external"])


def _add_selection_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.7,
                   help="reward weight in [0,1]; 1 disables diversity")
    p.add_argument("--w", default="unbounded",
                   help="recency window size, or 'unbounded'")
    p.add_argument("--metric", default="cosine",
                   choices=[m.value for m in Metric])
    p.add_argument("--cr", type=float, default=None,
                   help="compression-ratio budget in (0,1]")
    p.add_argument("--tmax", type=int, default=None,
                   help="absolute token budget")


def _add_llm_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--llm-model", default=None)
    p.add_argument("--llm-mock", action="store_true",
                   help="use the deterministic local mock backend")
    p.add_argument("--llm-url", default="", help="chat-completions base URL")
    p.add_argument("--llm-api-key-env", default="LLM_API_KEY")
    p.add_argument("--timeout-s", type=float, default=30.0)


def _parse_window(raw: str) -> int | None:
    if raw.strip().lower() == "unbounded":
        return None
    try:
        return window_from_grid(int(raw))
    except ValueError as exc:
        raise ParameterError(f"bad window value {raw!r}") from exc


def _budget_from_args(args) -> TokenBudget:
    if (args.cr is None) == (args.tmax is None):
        raise ParameterError("exactly one of --cr / --tmax is required")
    if args.cr is not None:
        return TokenBudget.ratio(args.cr)
    return TokenBudget.max_tokens(args.tmax)


def _config_from_args(args) -> SelectionConfig:
    return SelectionConfig(
        alpha=args.alpha,
        window=_parse_window(args.w),
        metric=Metric(args.metric),
        budget=_budget_from_args(args),
    )


def _llm_from_args(args) -> LlmConfig | None:
    if args.llm_model is None:
        return None
    mode = LlmMode.MOCK if (args.llm_mock or not args.llm_url) else LlmMode.LIVE
    return LlmConfig(model=args.llm_model, mode=mode, base_url=args.llm_url,
                     api_key_env=args.llm_api_key_env, timeout_s=args.timeout_s)


def _fetch_query_vector(args, dim: int) -> np.ndarray:
    if (args.query_demb is None) == (args.query_text is None):
        raise ParameterError("exactly one of --query-demb / --query-text is required")
    if args.query_demb:
        q = read_demb(args.query_demb)
        if q.shape[0] != 1:
            raise DataFormatError(
                f"{args.query_demb}: expected a single query row, got {q.shape[0]}")
        return q[0]
    if not args.embed_url:
        raise ParameterError(
            "--query-text needs --embed-url (an embedding sidecar endpoint)")
    try:
        resp = requests.post(args.embed_url.rstrip("/") + "/embed",
                             json={"text": args.query_text}, timeout=30)
        resp.raise_for_status()
        payload = resp.json()
    except requests.RequestException as exc:
        raise ExternalServiceError(f"embed endpoint failed: {exc}") from exc
    vec = payload["embedding"] if isinstance(payload, dict) else payload
    q = np.asarray(vec, dtype=np.float32)
    if q.ndim != 1 or q.shape[0] != dim:
        raise DataFormatError(
            f"embed endpoint returned dim {q.shape}, corpus dim is {dim}")
    return q


def _write_manifest(out_path: str | Path, args, command: str, params: dict,
                    inputs: list, seed: int | None = None) -> None:
    files: list[Path] = []
    for p in inputs:
        if not p:
            continue
        path = Path(p)
        if path.is_dir():
            files.extend(sorted(f for f in path.iterdir() if f.is_file()))
        elif path.is_file():
            files.append(path)
    params = {**params, "threads": getattr(args, "threads", 0)}
    RunManifest.create(command, params, files, seed=seed).write(
        manifest_path_for(out_path))


def cmd_ingest(args) -> int:
    out = Path(args.out)
    segments = []
    with open(args.docs, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                doc_id, text = obj["doc_id"], obj["text"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataFormatError(f"{args.docs}:{lineno}: {exc}") from exc
            if args.split == "sentence":
                segments.extend(split_sentences(text, doc_id=doc_id))
            else:
                segments.extend(split_chunks(text.split(), args.chunk_size,
                                             args.overlap, doc_id=doc_id))
    if not segments:
        print("warning: no segments produced (empty input?)", file=sys.stderr)
    write_segments(out, segments)
    _write_manifest(out, args, "ingest",
                    {"split": args.split, "chunk_size": args.chunk_size,
                     "overlap": args.overlap, "out": str(out)},
                    [args.docs])
    print(f"wrote {len(segments)} segments to {out}")
    return EXIT_OK


def cmd_index(args) -> int:
    corpus = load_corpus(args.segments, args.embeddings, args.tokenizer)
    index = build_index(corpus.embeddings, cap=args.cap,
                        d_reduced=args.dim_reduced, seed=args.seed)
    out = Path(args.out)
    save_index(index, out)
    sizes = sorted((len(m) for m in index.members), reverse=True)
    print(f"k={index.kmeans.k} clusters over {corpus.n_segments} rows")
    print("cluster sizes: " + ", ".join(str(s) for s in sizes))
    _write_manifest(out, args, "index",
                    {"cap": args.cap, "dim_reduced": args.dim_reduced,
                     "out": str(out)},
                    [args.segments, args.embeddings], seed=args.seed)
    return EXIT_OK


def cmd_select(args) -> int:
    corpus = load_corpus(args.segments, args.embeddings, args.tokenizer)
    cfg = _config_from_args(args)
    query = _fetch_query_vector(args, corpus.embeddings.dim)
    if args.index:
        index = load_index(args.index)
        rows = route_query(index, query, args.pool_target)
    else:
        rows = list(range(corpus.n_segments))
    sub = corpus.embeddings.vectors[np.asarray(rows, dtype=np.intp)]
    counts = [corpus.segments[i].n_tokens for i in rows]
    result = select(query, sub, counts, cfg)
    scheme = parse_scheme(args.order)
    local_order = order(result, [corpus.segments[i] for i in rows], scheme)
    ordered_rows = [rows[j] for j in local_order]
    payload = result.to_json()
    payload["order"] = {
        "scheme": scheme.label(),
        "rows": ordered_rows,
        "segments": [{"doc_id": corpus.segments[r].doc_id,
                      "seg_index": corpus.segments[r].seg_index}
                     for r in ordered_rows],
    }
    out = Path(args.out)
    out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    _write_manifest(out, args, "select",
                    {**cfg.to_json(), "order": scheme.label(),
                     "pool_target": args.pool_target, "out": str(out)},
                    [args.segments, args.embeddings, args.query_demb,
                     args.index])
    print(f"selected {len(result.picks)} segments "
          f"({result.total_tokens} tokens) -> {out}")
    return EXIT_OK


def cmd_ask(args) -> int:
    corpus = load_corpus(args.segments, args.embeddings, args.tokenizer)
    examples = read_qa_examples(args.examples)
    queries = read_demb(args.queries)
    cfg = _config_from_args(args)
    llm = _llm_from_args(args)
    if llm is None:
        raise ParameterError("ask requires --llm-model (use --llm-mock offline)")
    scheme = parse_scheme(args.order)
    report = run_qa_eval(corpus, examples, queries, cfg, scheme=scheme, llm=llm)
    out = Path(args.out)
    out.write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    _write_manifest(out, args, "ask",
                    {**cfg.to_json(), "order": scheme.label(),
                     "llm_model": llm.model, "llm_mode": llm.mode.value,
                     "out": str(out)},
                    [args.segments, args.embeddings, args.examples, args.queries])
    post = "n/a" if report.post_llm_recall is None else f"{report.post_llm_recall:.4f}"
    print(f"pre-LLM recall {report.pre_llm_recall:.4f}, post-LLM recall {post}, "
          f"{report.llm_errors} LLM errors -> {out}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    corpus = load_corpus(args.segments, args.embeddings, args.tokenizer)
    cfg = _config_from_args(args)
    query = mean_embedding(corpus.embeddings)
    counts = [s.n_tokens for s in corpus.segments]
    result = select(query, corpus.embeddings.vectors, counts, cfg)
    scheme = parse_scheme(args.order)
    ordered = order(result, corpus.segments, scheme)
    ordered_segments = [corpus.segments[i] for i in ordered]
    llm = _llm_from_args(args)
    if llm is None:
        summary = " ".join(seg.text for seg in ordered_segments)
        source = "extractive"
    else:
        summary = complete(llm, build_summary_prompt(ordered_segments))
        source = f"{llm.mode.value}:{llm.model}"
    payload = {"summary": summary, "source": source,
               "selected_rows": ordered, "config": cfg.to_json()}
    if args.reference:
        reference = Path(args.reference).read_text(encoding="utf-8")
        p1, r1, f1 = rouge_n(summary, reference, 1)
        p2, r2, f2 = rouge_n(summary, reference, 2)
        pl, rl, fl = rouge_l(summary, reference)
        payload["rouge"] = {
            "rouge1": {"p": p1, "r": r1, "f1": f1},
            "rouge2": {"p": p2, "r": r2, "f1": f2},
            "rougeL": {"p": pl, "r": rl, "f1": fl},
        }
    out = Path(args.out)
    out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    _write_manifest(out, args, "summarize",
                    {**cfg.to_json(), "order": scheme.label(), "out": str(out)},
                    [args.segments, args.embeddings, args.reference])
    print(f"summary ({source}) -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    corpus = load_corpus(args.segments, args.embeddings, args.tokenizer)
    examples = read_qa_examples(args.examples)
    queries = read_demb(args.queries)
    cfg = _config_from_args(args)
    llm = _llm_from_args(args)
    scheme = parse_scheme(args.order)
    index = load_index(args.index) if args.index else None
    report = run_qa_eval(corpus, examples, queries, cfg, scheme=scheme,
                         llm=llm, index=index, pool_target=args.pool_target)
    out = Path(args.out)
    out.write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    if args.csv:
        lines = ["example,pre_recall,post_recall"]
        for i, (pre, post) in enumerate(zip(report.pre_flags, report.post_flags)):
            post_s = "" if post is None else str(int(post))
            lines.append(f"{i},{int(pre)},{post_s}")
        Path(args.csv).write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_manifest(out, args, "eval",
                    {**cfg.to_json(), "order": scheme.label(), "out": str(out)},
                    [args.segments, args.embeddings, args.examples,
                     args.queries, args.index])
    post = "n/a" if report.post_llm_recall is None else f"{report.post_llm_recall:.4f}"
    print(f"pre-LLM recall {report.pre_llm_recall:.4f}, post-LLM recall {post} -> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    corpus = load_corpus(args.segments, args.embeddings, args.tokenizer)
    examples = read_qa_examples(args.examples)
    queries = read_demb(args.queries)
    base_cfg = SelectionConfig(alpha=0.5, window=None,
                               metric=Metric(args.metric),
                               budget=_budget_from_args(args))
    coarse = sweep(corpus, examples, queries, base_cfg, PhaseSpec.coarse())
    all_rows = list(coarse.rows)
    best_alpha, best_w = coarse.best
    if args.phase == "both":
        granular = sweep(corpus, examples, queries, base_cfg,
                         PhaseSpec.granular(best_alpha, best_w))
        all_rows.extend(granular.rows)
        from .evaluation import _sweep_rank_key
        best_row = min(all_rows, key=_sweep_rank_key)
        best_alpha, best_w = best_row.alpha, best_row.w
    out = Path(args.out)
    lines = ["alpha,w,recall,latency_ms"]
    lines += [f"{r.alpha},{r.w},{r.recall:.6f},{r.latency_ms:.3f}" for r in all_rows]
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_manifest(out, args, "sweep",
                    {"metric": args.metric, "phase": args.phase,
                     "best_alpha": best_alpha, "best_w": best_w,
                     "out": str(out)},
                    [args.segments, args.embeddings, args.examples, args.queries])
    print(f"best alpha={best_alpha} w={best_w} -> {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s]
    budget = TokenBudget.max_tokens(args.tmax)
    window = _parse_window(args.w)
    cfgs = [SelectionConfig(alpha=args.alpha, window=window,
                            metric=Metric(m), budget=budget)
            for m in args.metrics.split(",") if m]
    rows = bench_latency(sizes, cfgs, repetitions=args.reps, dim=args.dim,
                         seed=args.seed)
    out = Path(args.out)
    out.write_text(bench_to_csv(rows), encoding="utf-8")
    _write_manifest(out, args, "bench",
                    {"sizes": sizes, "metrics": args.metrics,
                     "alpha": args.alpha, "w": args.w, "tmax": args.tmax,
                     "reps": args.reps, "dim": args.dim, "out": str(out)},
                    [], seed=args.seed)
    for r in rows:
        print(f"n={r.n:>8} {r.metric:>9}: median {r.median_ms:.2f} ms "
              f"(IQR {r.iqr_ms:.2f})")
    return EXIT_OK


def cmd_fps_demo(args) -> int:
    if args.k > args.n:
        raise ParameterError(f"k ({args.k}) must be <= n ({args.n})")
    rng = np.random.default_rng(args.seed)
    points = rng.random((args.n, 2))
    picks = fps_pure(points, args.k, seed=args.seed,
                     aggregation=FpsAggregation(args.aggregation))
    orders = {idx: step for step, idx in enumerate(picks)}
    out = Path(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("x,y,order\n")
        for i, (x, y) in enumerate(points):
            fh.write(f"{x:.8f},{y:.8f},{orders.get(i, -1)}\n")
    _write_manifest(out, args, "fps-demo",
                    {"n": args.n, "k": args.k,
                     "aggregation": args.aggregation, "out": str(out)},
                    [], seed=args.seed)
    print(f"{args.k} of {args.n} points selected -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diversel",
        description="Diversity-aware retrieval selection engine")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=0,
                        help="worker cap hint, recorded in manifests")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="split raw documents into segments")
    p.add_argument("--docs", required=True, help="raw docs JSONL: {doc_id, text}")
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=["sentence", "chunk"], default="sentence")
    p.add_argument("--chunk-size", type=int, default=512)
    p.add_argument("--overlap", type=float, default=0.5)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="build the PCA + k-means cluster index")
    _add_corpus_args(p)
    p.add_argument("--out", required=True, help="index output directory")
    p.add_argument("--dim-reduced", type=int, default=128)
    p.add_argument("--cap", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("select", help="run greedy selection for one query")
    _add_corpus_args(p)
    _add_selection_args(p)
    p.add_argument("--query-demb", default=None, help="query DEMB file (rows=1)")
    p.add_argument("--query-text", default=None)
    p.add_argument("--embed-url", default="",
                   help="embedding sidecar base URL for --query-text")
    p.add_argument("--index", default=None, help="cluster index directory")
    p.add_argument("--pool-target", type=int, default=10000)
    p.add_argument("--order", default="index")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("ask", help="QA evaluation through an LLM")
    _add_corpus_args(p)
    _add_selection_args(p)
    _add_llm_args(p)
    p.add_argument("--examples", required=True, help="QA examples JSONL")
    p.add_argument("--queries", required=True, help="query DEMB, row per example")
    p.add_argument("--order", default="index")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("summarize", help="budgeted extract + optional LLM summary")
    _add_corpus_args(p)
    _add_selection_args(p)
    _add_llm_args(p)
    p.add_argument("--order", default="index")
    p.add_argument("--reference", default=None, help="golden summary text file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("eval", help="pre-LLM (and optional post-LLM) QA recall")
    _add_corpus_args(p)
    _add_selection_args(p)
    _add_llm_args(p)
    p.add_argument("--examples", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--order", default="index")
    p.add_argument("--index", default=None)
    p.add_argument("--pool-target", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None, help="per-example flags CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="two-level (alpha, w) hyperparameter search")
    _add_corpus_args(p)
    p.add_argument("--examples", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--metric", default="cosine", choices=[m.value for m in Metric])
    p.add_argument("--cr", type=float, default=None)
    p.add_argument("--tmax", type=int, default=None)
    p.add_argument("--phase", choices=["coarse", "both"], default="both")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="selection latency benchmark")
    p.add_argument("--sizes", default="1000,10000,100000")
    p.add_argument("--metrics", default="cosine,euclidean")
    p.add_argument("--alpha", type=float, default=0.7)
    p.add_argument("--w", default="10")
    p.add_argument("--tmax", type=int, default=2000)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--dim", type=int, default=384)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fps-demo", help="farthest point sampling on a 2D cloud")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--aggregation", default="classical-min",
                   choices=[a.value for a in FpsAggregation])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fps_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ExternalServiceError as exc:
        print(f"external service error: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
