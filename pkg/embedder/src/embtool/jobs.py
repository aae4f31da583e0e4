"""Batch embedding jobs: segments JSONL in, DEMB out."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .demb import write_demb_atomic
from .encoders import make_encoder


@dataclass(frozen=True)
class EmbedJob:
    segments_path: str
    output_path: str
    model_id: str
    batch_size: int = 64
    device: str | None = None
    normalize: bool = True


def read_segment_texts(path: str | Path) -> list[str]:
    """Text column of a segments JSONL file, in row order."""
    texts: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                texts.append(json.loads(line)["text"])
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad segment line: {exc}") from exc
    return texts


def _maybe_normalize(matrix: np.ndarray, normalize: bool) -> np.ndarray:
    if not normalize:
        return matrix.astype(np.float32)
    m = matrix.astype(np.float64)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if (norms == 0).any():
        row = int(np.argmax(norms.ravel() == 0))
        raise ValueError(f"cannot normalize zero-norm embedding row {row}")
    return (m / norms).astype(np.float32)


def embed_segments(job: EmbedJob) -> int:
    """Encode every segment and write the DEMB file; returns the row count.

    The output appears atomically: a failed run leaves no partial file.
    """
    texts = read_segment_texts(job.segments_path)
    encoder = make_encoder(job.model_id, device=job.device)
    rows: list[np.ndarray] = []
    for start in range(0, len(texts), max(1, job.batch_size)):
        batch = texts[start:start + max(1, job.batch_size)]
        rows.append(encoder.encode(batch, batch_size=job.batch_size))
    matrix = (np.vstack(rows) if rows
              else np.zeros((0, encoder.dim), dtype=np.float32))
    matrix = _maybe_normalize(matrix, job.normalize)
    write_demb_atomic(job.output_path, matrix)
    return matrix.shape[0]


def embed_query(text: str, model_id: str, device: str | None = None,
                normalize: bool = True) -> np.ndarray:
    """Single-text embedding, shared by file mode and the HTTP endpoint."""
    if not text.strip():
        raise ValueError("query text is empty")
    encoder = make_encoder(model_id, device=device)
    vec = encoder.encode([text])
    return _maybe_normalize(vec, normalize)[0]


def write_query_demb(text: str, model_id: str, output_path: str,
                     device: str | None = None, normalize: bool = True) -> None:
    write_demb_atomic(output_path, embed_query(text, model_id, device,
                                               normalize).reshape(1, -1))
