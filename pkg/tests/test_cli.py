"""CLI surface: command wiring, exit codes, manifests."""

import json

import numpy as np
import pytest

from diversel import read_demb, write_demb
from diversel.cli import main
from _fixtures import build_tiny_qa, write_fixture_dir


@pytest.fixture()
def tiny_qa_dir(tmp_path):
    segments, emb, examples, queries = build_tiny_qa()
    return write_fixture_dir(tmp_path / "tiny", segments, emb, examples, queries)


def _docs_file(tmp_path):
    path = tmp_path / "docs.jsonl"
    docs = [
        {"doc_id": "a", "text": "First sentence here. Second one follows! Third ends."},
        {"doc_id": "b", "text": "Only one sentence in this doc."},
    ]
    path.write_text("\n".join(json.dumps(d) for d in docs) + "\n")
    return path


class TestIngest:
    def test_sentence_mode(self, tmp_path):
        out = tmp_path / "segments.jsonl"
        code = main(["ingest", "--docs", str(_docs_file(tmp_path)),
                     "--out", str(out), "--split", "sentence"])
        assert code == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 4
        assert [l["seg_index"] for l in lines if l["doc_id"] == "a"] == [0, 1, 2]
        assert out.with_name(out.name + ".manifest.json").exists()

    def test_chunk_mode_paper_shape(self, tmp_path):
        doc = {"doc_id": "long", "text": " ".join(f"t{i}" for i in range(1000))}
        docs = tmp_path / "docs.jsonl"
        docs.write_text(json.dumps(doc) + "\n")
        out = tmp_path / "chunks.jsonl"
        code = main(["ingest", "--docs", str(docs), "--out", str(out),
                     "--split", "chunk", "--chunk-size", "512",
                     "--overlap", "0.5"])
        assert code == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 4
        assert [l["n_tokens"] for l in lines] == [512, 512, 488, 232]

    def test_malformed_line_exits_3(self, tmp_path):
        docs = tmp_path / "docs.jsonl"
        docs.write_text('{"doc_id": "a"}\n')
        code = main(["ingest", "--docs", str(docs),
                     "--out", str(tmp_path / "o.jsonl")])
        assert code == 3

    def test_empty_input_warns(self, tmp_path, capsys):
        docs = tmp_path / "docs.jsonl"
        docs.write_text("")
        out = tmp_path / "o.jsonl"
        assert main(["ingest", "--docs", str(docs), "--out", str(out)]) == 0
        assert "warning" in capsys.readouterr().err


class TestSelect:
    def test_alpha_one_is_similarity_baseline(self, tiny_qa_dir, tmp_path):
        qfile = tmp_path / "q.demb"
        write_demb(qfile, read_demb(tiny_qa_dir["queries"])[0])
        out = tmp_path / "sel.json"
        code = main(["select", "--segments", str(tiny_qa_dir["segments"]),
                     "--embeddings", str(tiny_qa_dir["embeddings"]),
                     "--query-demb", str(qfile), "--alpha", "1.0",
                     "--metric", "cosine", "--cr", "0.2",
                     "--order", "sort", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["picks"]
        scores = [p["score"] for p in payload["picks"]]
        assert scores == sorted(scores, reverse=True)
        assert set(payload["order"]) == {"scheme", "rows", "segments"}

    def test_both_budget_flags_exit_2(self, tiny_qa_dir, tmp_path):
        qfile = tmp_path / "q.demb"
        write_demb(qfile, read_demb(tiny_qa_dir["queries"])[0])
        code = main(["select", "--segments", str(tiny_qa_dir["segments"]),
                     "--embeddings", str(tiny_qa_dir["embeddings"]),
                     "--query-demb", str(qfile), "--cr", "0.1",
                     "--tmax", "10", "--out", str(tmp_path / "x.json")])
        assert code == 2

    def test_neither_budget_flag_exit_2(self, tiny_qa_dir, tmp_path):
        qfile = tmp_path / "q.demb"
        write_demb(qfile, read_demb(tiny_qa_dir["queries"])[0])
        code = main(["select", "--segments", str(tiny_qa_dir["segments"]),
                     "--embeddings", str(tiny_qa_dir["embeddings"]),
                     "--query-demb", str(qfile),
                     "--out", str(tmp_path / "x.json")])
        assert code == 2

    def test_interleave_order(self, tiny_qa_dir, tmp_path):
        qfile = tmp_path / "q.demb"
        write_demb(qfile, read_demb(tiny_qa_dir["queries"])[0])
        out = tmp_path / "sel.json"
        code = main(["select", "--segments", str(tiny_qa_dir["segments"]),
                     "--embeddings", str(tiny_qa_dir["embeddings"]),
                     "--query-demb", str(qfile), "--alpha", "0.7",
                     "--cr", "0.2", "--order", "2:1", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["order"]["scheme"] == "2:1"
        assert sorted(payload["order"]["rows"]) == sorted(
            p["index"] for p in payload["picks"])

    def test_select_through_index_matches_exact(self, tiny_qa_dir, tmp_path):
        idx = tmp_path / "idx"
        main(["index", "--segments", str(tiny_qa_dir["segments"]),
              "--embeddings", str(tiny_qa_dir["embeddings"]),
              "--out", str(idx), "--cap", "60", "--dim-reduced", "8"])
        qfile = tmp_path / "q.demb"
        write_demb(qfile, read_demb(tiny_qa_dir["queries"])[0])
        base = ["select", "--segments", str(tiny_qa_dir["segments"]),
                "--embeddings", str(tiny_qa_dir["embeddings"]),
                "--query-demb", str(qfile), "--alpha", "0.7", "--cr", "0.1"]
        exact_out = tmp_path / "exact.json"
        routed_out = tmp_path / "routed.json"
        assert main(base + ["--out", str(exact_out)]) == 0
        # a pool target covering the corpus reproduces exact-search picks
        assert main(base + ["--index", str(idx), "--pool-target", "100000",
                            "--out", str(routed_out)]) == 0
        exact = json.loads(exact_out.read_text())
        routed = json.loads(routed_out.read_text())
        assert exact["picks"] == routed["picks"]

    def test_corrupt_embeddings_exit_3(self, tiny_qa_dir, tmp_path):
        bad = tmp_path / "bad.demb"
        bad.write_bytes(b"NOPE" + b"\x00" * 32)
        qfile = tmp_path / "q.demb"
        write_demb(qfile, np.ones(4, dtype=np.float32))
        code = main(["select", "--segments", str(tiny_qa_dir["segments"]),
                     "--embeddings", str(bad), "--query-demb", str(qfile),
                     "--cr", "0.1", "--out", str(tmp_path / "x.json")])
        assert code == 3


class TestIndexCommand:
    def test_builds_and_reports(self, tiny_qa_dir, tmp_path, capsys):
        out = tmp_path / "idx"
        code = main(["index", "--segments", str(tiny_qa_dir["segments"]),
                     "--embeddings", str(tiny_qa_dir["embeddings"]),
                     "--out", str(out), "--cap", "40", "--dim-reduced", "8",
                     "--seed", "1"])
        assert code == 0
        printed = capsys.readouterr().out
        assert "k=4" in printed  # 150 rows / cap 40 -> ceil = 4
        assert (out / "meta.json").exists()
        assert (out / "manifest.json").exists()

    def test_cap_above_rows_single_cluster(self, tiny_qa_dir, tmp_path, capsys):
        out = tmp_path / "idx1"
        code = main(["index", "--segments", str(tiny_qa_dir["segments"]),
                     "--embeddings", str(tiny_qa_dir["embeddings"]),
                     "--out", str(out), "--cap", "100000"])
        assert code == 0
        assert "k=1" in capsys.readouterr().out


class TestAskSummarizeEval:
    def test_ask_echo_post_equals_pre(self, tiny_qa_dir, tmp_path):
        out = tmp_path / "ask.json"
        code = main(["ask", "--segments", str(tiny_qa_dir["segments"]),
                     "--embeddings", str(tiny_qa_dir["embeddings"]),
                     "--examples", str(tiny_qa_dir["examples"]),
                     "--queries", str(tiny_qa_dir["queries"]),
                     "--alpha", "0.7", "--cr", "0.5",
                     "--llm-model", "echo", "--llm-mock", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["post_llm_recall"] == payload["pre_llm_recall"]

    def test_ask_requires_llm(self, tiny_qa_dir, tmp_path):
        code = main(["ask", "--segments", str(tiny_qa_dir["segments"]),
                     "--embeddings", str(tiny_qa_dir["embeddings"]),
                     "--examples", str(tiny_qa_dir["examples"]),
                     "--queries", str(tiny_qa_dir["queries"]),
                     "--cr", "0.5", "--out", str(tmp_path / "x.json")])
        assert code == 2

    def test_summarize_extractive_with_rouge(self, tiny_qa_dir, tmp_path):
        ref = tmp_path / "golden.txt"
        ref.write_text("the capital of france is paris")
        out = tmp_path / "summary.json"
        code = main(["summarize", "--segments", str(tiny_qa_dir["segments"]),
                     "--embeddings", str(tiny_qa_dir["embeddings"]),
                     "--alpha", "0.8", "--tmax", "40",
                     "--reference", str(ref), "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["source"] == "extractive"
        assert "rougeL" in payload["rouge"]
        assert payload["summary"]

    def test_summarize_mock_llm(self, tiny_qa_dir, tmp_path):
        out = tmp_path / "summary.json"
        code = main(["summarize", "--segments", str(tiny_qa_dir["segments"]),
                     "--embeddings", str(tiny_qa_dir["embeddings"]),
                     "--alpha", "0.8", "--tmax", "40",
                     "--llm-model", "echo", "--llm-mock", "--out", str(out)])
        assert code == 0
        assert json.loads(out.read_text())["source"] == "mock:echo"

    def test_eval_no_llm(self, tiny_qa_dir, tmp_path):
        out = tmp_path / "eval.json"
        csv = tmp_path / "eval.csv"
        code = main(["eval", "--segments", str(tiny_qa_dir["segments"]),
                     "--embeddings", str(tiny_qa_dir["embeddings"]),
                     "--examples", str(tiny_qa_dir["examples"]),
                     "--queries", str(tiny_qa_dir["queries"]),
                     "--alpha", "1.0", "--cr", "1.0", "--out", str(out),
                     "--csv", str(csv)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["pre_llm_recall"] == 1.0
        assert payload["post_llm_recall"] is None
        lines = csv.read_text().strip().splitlines()
        assert lines[0] == "example,pre_recall,post_recall"
        assert len(lines) == 51
        assert lines[1] == "0,1,"


class TestSweepCommand:
    def test_coarse_csv(self, tiny_qa_dir, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main(["sweep", "--segments", str(tiny_qa_dir["segments"]),
                     "--embeddings", str(tiny_qa_dir["embeddings"]),
                     "--examples", str(tiny_qa_dir["examples"]),
                     "--queries", str(tiny_qa_dir["queries"]),
                     "--cr", "0.4", "--phase", "coarse", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "alpha,w,recall,latency_ms"
        assert len(lines) == 1 + 40


class TestBenchCommand:
    def test_smoke(self, tmp_path):
        out = tmp_path / "bench.csv"
        code = main(["bench", "--sizes", "200,400", "--reps", "3",
                     "--dim", "16", "--tmax", "64", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 1 + 4  # 2 sizes x 2 metrics


class TestFpsDemo:
    def test_output_shape(self, tmp_path):
        out = tmp_path / "fps.csv"
        code = main(["fps-demo", "--n", "300", "--k", "20", "--seed", "3",
                     "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "x,y,order"
        assert len(lines) == 1 + 300
        orders = [int(l.split(",")[2]) for l in lines[1:]]
        assert sorted(o for o in orders if o >= 0) == list(range(20))

    def test_k_above_n_exit_2(self, tmp_path):
        assert main(["fps-demo", "--n", "10", "--k", "11",
                     "--out", str(tmp_path / "x.csv")]) == 2

    def test_deterministic_given_seed(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["fps-demo", "--n", "100", "--k", "9", "--seed", "5", "--out", str(a)])
        main(["fps-demo", "--n", "100", "--k", "9", "--seed", "5", "--out", str(b)])
        assert a.read_text() == b.read_text()


class TestManifest:
    def test_manifest_fields(self, tiny_qa_dir, tmp_path):
        out = tmp_path / "eval.json"
        main(["eval", "--segments", str(tiny_qa_dir["segments"]),
              "--embeddings", str(tiny_qa_dir["embeddings"]),
              "--examples", str(tiny_qa_dir["examples"]),
              "--queries", str(tiny_qa_dir["queries"]),
              "--alpha", "0.7", "--cr", "0.2", "--out", str(out)])
        manifest = json.loads(
            out.with_name(out.name + ".manifest.json").read_text())
        assert manifest["command"] == "eval"
        assert manifest["params"]["alpha"] == 0.7
        assert len(manifest["inputs"]) == 4
        assert all(len(v) == 64 for v in manifest["inputs"].values())
        assert manifest["version"]
