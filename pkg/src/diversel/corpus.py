"""Corpus ingestion: sentence/chunk splitting, segment metadata, embedding files.

Segments travel as JSON Lines ({"doc_id", "seg_index", "text", "n_tokens"?});
embeddings travel in the DEMB binary format (magic "DEMB", version u32=1,
rows u64, dim u32, float32 row-major, little-endian). Embeddings are always
L2-normalized at load so cosine similarity equals the dot product.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, ParameterError

DEMB_MAGIC = b"DEMB"
DEMB_VERSION = 1
_HEADER = struct.Struct("<4sIQI")  # magic, version, rows, dim

TOKENIZER_SPECS = ("whitespace", "external")

SENTENCE_TERMINATORS = ".!?…"
# Trailing words that end in '.' without ending a sentence.
ABBREVIATIONS = frozenset({
    "Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "e.g.", "i.e.", "etc.", "vs.",
    "Fig.", "Eq.", "No.", "U.S.",
})
_OPEN_QUOTES = "\"“"
_CLOSE_QUOTES = "\"”"


@dataclass(frozen=True)
class Segment:
    """One sentence or chunk of a document."""

    doc_id: str
    seg_index: int
    text: str
    n_tokens: int

    def __post_init__(self):
        if self.seg_index < 0:
            raise ParameterError(f"seg_index must be >= 0, got {self.seg_index}")
        if self.n_tokens < 1:
            raise ParameterError(f"n_tokens must be >= 1, got {self.n_tokens}")
        if not self.text.strip():
            raise ParameterError("segment text is empty after trimming")


@dataclass
class EmbeddingMatrix:
    """Row-major float32 matrix; row i corresponds to segment i."""

    vectors: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float32)
        if v.ndim != 2:
            raise ParameterError(f"embedding matrix must be 2-D, got ndim={v.ndim}")
        self.vectors = v

    @property
    def rows(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.vectors[i]


@dataclass
class Corpus:
    """Immutable after load; safe for concurrent read-only use."""

    segments: list[Segment]
    embeddings: EmbeddingMatrix
    tokenizer_spec: str = "whitespace"
    _rows_by_doc: dict[str, list[int]] | None = field(
        default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.segments) != self.embeddings.rows:
            raise DataFormatError(
                f"segment/embedding row mismatch: "
                f"{self.embeddings.rows} vs {len(self.segments)}"
            )

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def token_counts(self) -> np.ndarray:
        return np.array([s.n_tokens for s in self.segments], dtype=np.int64)

    def total_tokens(self, rows: list[int] | None = None) -> int:
        if rows is None:
            return int(sum(s.n_tokens for s in self.segments))
        return int(sum(self.segments[i].n_tokens for i in rows))

    def doc_rank(self) -> dict[str, int]:
        """Document ids mapped to their first-appearance order."""
        rank: dict[str, int] = {}
        for seg in self.segments:
            if seg.doc_id not in rank:
                rank[seg.doc_id] = len(rank)
        return rank

    def rows_for_docs(self, doc_ids: list[str]) -> list[int]:
        if self._rows_by_doc is None:
            by_doc: dict[str, list[int]] = {}
            for i, seg in enumerate(self.segments):
                by_doc.setdefault(seg.doc_id, []).append(i)
            self._rows_by_doc = by_doc
        rows: list[int] = []
        for doc in doc_ids:
            rows.extend(self._rows_by_doc.get(doc, []))
        return sorted(rows)


def count_tokens(text: str, tokenizer_spec: str = "whitespace") -> int:
    """Token count under the named spec; "whitespace" counts non-space runs."""
    if tokenizer_spec == "whitespace":
        return len(text.split())
    if tokenizer_spec == "external":
        raise ParameterError(
            "tokenizer spec 'external' carries precomputed n_tokens through "
            "the segments file; counts cannot be derived from text"
        )
    raise ParameterError(f"unknown tokenizer spec {tokenizer_spec!r}")


def _trailing_word(text: str, end: int) -> str:
    """Maximal non-whitespace run ending at text[end] inclusive."""
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:end + 1]


def _is_split_point(text: str, i: int) -> bool:
    """Terminator at i followed by whitespace then uppercase/digit/quote."""
    j = i + 1
    if j >= len(text) or not text[j].isspace():
        return False
    while j < len(text) and text[j].isspace():
        j += 1
    if j >= len(text):
        return False
    nxt = text[j]
    if not (nxt.isupper() or nxt.isdigit() or nxt in _OPEN_QUOTES or nxt == "'"):
        return False
    if text[i] == "." and _trailing_word(text, i) in ABBREVIATIONS:
        return False
    return True


def split_sentences(text: str, doc_id: str = "",
                    tokenizer_spec: str = "whitespace") -> list[Segment]:
    """Rule-based sentence splitting.

    Splits after '.', '!', '?', '…' followed by whitespace and an
    uppercase letter, digit, or opening quote; an abbreviation blocklist
    suppresses false breaks and no split happens inside matched quotes
    or parentheses. Whitespace-only input yields an empty list.
    """
    if not text.strip():
        return []
    pieces: list[str] = []
    start = 0
    paren_depth = 0
    quote_depth = 0
    straight_open = False
    for i, ch in enumerate(text):
        if ch == "(":
            paren_depth += 1
        elif ch == ")":
            paren_depth = max(0, paren_depth - 1)
        elif ch == '"':
            straight_open = not straight_open
        elif ch == "“":
            quote_depth += 1
        elif ch == "”":
            quote_depth = max(0, quote_depth - 1)
        if ch not in SENTENCE_TERMINATORS:
            continue
        if paren_depth > 0 or quote_depth > 0 or straight_open:
            continue
        if _is_split_point(text, i):
            pieces.append(text[start:i + 1])
            start = i + 1
    pieces.append(text[start:])
    segments = []
    for piece in pieces:
        trimmed = piece.strip()
        if not trimmed:
            continue
        segments.append(Segment(
            doc_id=doc_id,
            seg_index=len(segments),
            text=trimmed,
            n_tokens=count_tokens(trimmed, tokenizer_spec),
        ))
    return segments


def split_chunks(token_stream: list[str], chunk_size: int,
                 overlap_ratio: float, doc_id: str = "") -> list[Segment]:
    """Fixed-size token chunks with fractional overlap.

    Chunk i covers tokens [i*stride, i*stride + chunk_size) where
    stride = round(chunk_size * (1 - overlap_ratio)), floored at 1 so any
    overlap_ratio < 1 terminates. The final chunk may be shorter.
    """
    if chunk_size < 1:
        raise ParameterError(f"chunk_size must be >= 1, got {chunk_size}")
    if not 0.0 <= overlap_ratio < 1.0:
        raise ParameterError(
            f"overlap_ratio must be in [0, 1), got {overlap_ratio}")
    n = len(token_stream)
    if n == 0:
        return []
    stride = max(1, round(chunk_size * (1.0 - overlap_ratio)))
    segments = []
    for seg_index, start in enumerate(range(0, n, stride)):
        tokens = token_stream[start:start + chunk_size]
        segments.append(Segment(
            doc_id=doc_id,
            seg_index=seg_index,
            text=" ".join(tokens),
            n_tokens=len(tokens),
        ))
    return segments


def write_demb(path: str | Path, matrix: np.ndarray) -> None:
    """Write a 2-D float array in the DEMB binary format."""
    m = np.ascontiguousarray(np.asarray(matrix, dtype=np.float32))
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ParameterError(f"expected 2-D matrix, got ndim={m.ndim}")
    if m.shape[1] == 0:
        raise ParameterError("embedding dim must be >= 1")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DEMB_MAGIC, DEMB_VERSION, m.shape[0], m.shape[1]))
        fh.write(m.tobytes(order="C"))


def read_demb(path: str | Path) -> np.ndarray:
    """Read a DEMB file; validates magic, version, dim and payload size."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataFormatError(f"{path}: truncated header")
    magic, version, rows, dim = _HEADER.unpack_from(raw)
    if magic != DEMB_MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != DEMB_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    if dim == 0:
        raise DataFormatError(f"{path}: dim = 0")
    expected = _HEADER.size + rows * dim * 4
    if len(raw) != expected:
        raise DataFormatError(
            f"{path}: payload size {len(raw)} != expected {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return data.reshape(rows, dim).astype(np.float32)


def normalize_rows(matrix: np.ndarray, name: str = "embeddings") -> np.ndarray:
    """L2-normalize rows in float64, cast back to float32.

    Rejects non-finite values and zero-norm rows, naming the offending row.
    """
    m = np.asarray(matrix, dtype=np.float64)
    bad = ~np.isfinite(m)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise DataFormatError(f"{name}: non-finite value in row {row}")
    norms = np.linalg.norm(m, axis=1)
    zero = norms == 0.0
    if zero.any():
        row = int(np.argmax(zero))
        raise DataFormatError(f"{name}: zero-norm row {row} cannot be normalized")
    return (m / norms[:, None]).astype(np.float32)


def read_segments(path: str | Path, tokenizer_spec: str = "whitespace") -> list[Segment]:
    """Parse a segments JSONL file, validating per-document ordinal order."""
    if tokenizer_spec not in TOKENIZER_SPECS:
        raise ParameterError(f"unknown tokenizer spec {tokenizer_spec!r}")
    segments: list[Segment] = []
    next_index: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                doc_id = obj["doc_id"]
                seg_index = obj["seg_index"]
                text = obj["text"]
            except KeyError as exc:
                raise DataFormatError(f"{path}:{lineno}: missing field {exc}") from exc
            expected = next_index.get(doc_id, 0)
            if seg_index != expected:
                raise DataFormatError(
                    f"{path}:{lineno}: seg_index {seg_index} for doc "
                    f"{doc_id!r}, expected {expected}")
            next_index[doc_id] = expected + 1
            if tokenizer_spec == "external":
                if "n_tokens" not in obj:
                    raise DataFormatError(
                        f"{path}:{lineno}: tokenizer spec 'external' requires n_tokens")
                n_tokens = int(obj["n_tokens"])
            else:
                n_tokens = count_tokens(text, tokenizer_spec)
            try:
                segments.append(Segment(doc_id, seg_index, text, n_tokens))
            except ParameterError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    return segments


def write_segments(path: str | Path, segments: list[Segment]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seg in segments:
            fh.write(json.dumps({
                "doc_id": seg.doc_id,
                "seg_index": seg.seg_index,
                "text": seg.text,
                "n_tokens": seg.n_tokens,
            }, ensure_ascii=False) + "\n")


def load_corpus(segments_path: str | Path, embeddings_path: str | Path,
                tokenizer_spec: str = "whitespace") -> Corpus:
    """Load and validate a (segments, embeddings) pair.

    Embedding rows are L2-normalized in place; the row count must match
    the segment count exactly.
    """
    segments = read_segments(segments_path, tokenizer_spec)
    raw = read_demb(embeddings_path)
    if raw.shape[0] != len(segments):
        raise DataFormatError(
            f"row-count mismatch: {raw.shape[0]} vs {len(segments)} "
            f"({embeddings_path} vs {segments_path})")
    matrix = EmbeddingMatrix(normalize_rows(raw, str(embeddings_path)), normalized=True)
    return Corpus(segments=segments, embeddings=matrix, tokenizer_spec=tokenizer_spec)


def mean_embedding(matrix: EmbeddingMatrix,
                   row_subset: list[int] | None = None) -> np.ndarray:
    """L2-normalized arithmetic mean of the selected rows.

    This is the query vector used for summarization, where no explicit
    query exists.
    """
    if matrix.rows == 0:
        raise ParameterError("cannot take mean of an empty matrix")
    if row_subset is None:
        rows = matrix.vectors
    else:
        if len(row_subset) == 0:
            raise ParameterError("row subset is empty")
        for i in row_subset:
            if not 0 <= i < matrix.rows:
                raise ParameterError(f"row index {i} out of range [0, {matrix.rows})")
        rows = matrix.vectors[np.asarray(row_subset, dtype=np.intp)]
    mean = rows.astype(np.float64).mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        raise ParameterError("zero-norm mean; rows cancel out")
    return (mean / norm).astype(np.float32)
