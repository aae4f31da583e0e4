"""Text encoders behind one interface.

"pseudo[:dim]" is a hash-seeded bag-of-words encoder: each token maps to a
fixed random vector keyed by its SHA-256, a text is the sum of its token
vectors. Deterministic, dependency-free, good enough for CI fixtures and
round-trip tests. Any other model id is treated as a sentence-transformers
checkpoint fetched at runtime; weights are never vendored.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache

import numpy as np

DEFAULT_PSEUDO_DIM = 256


class EncoderError(RuntimeError):
    pass


class PseudoEncoder:
    def __init__(self, dim: int = DEFAULT_PSEUDO_DIM):
        if dim < 1:
            raise EncoderError(f"pseudo encoder dim must be >= 1, got {dim}")
        self.dim = dim

    @lru_cache(maxsize=65536)
    def _token_vector(self, token: str) -> np.ndarray:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.standard_normal(self.dim)

    def encode(self, texts: list[str], batch_size: int = 0) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            tokens = text.lower().split() or ["<empty>"]
            for tok in tokens:
                out[i] += self._token_vector(tok)
            if not out[i].any():
                out[i] = self._token_vector("<zero>")
        return out.astype(np.float32)


class SentenceTransformerEncoder:
    def __init__(self, model_id: str, device: str | None = None):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderError(
                f"model {model_id!r} needs the sentence-transformers package "
                f"(pip install 'embtool[models]')") from exc
        try:
            self.model = SentenceTransformer(model_id, device=device)
        except Exception as exc:
            raise EncoderError(f"could not load model {model_id!r}: {exc}") from exc
        self.dim = int(self.model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        return np.asarray(
            self.model.encode(texts, batch_size=batch_size or 32,
                              normalize_embeddings=False,
                              convert_to_numpy=True, show_progress_bar=False),
            dtype=np.float32)


def make_encoder(model_id: str, device: str | None = None):
    if model_id == "pseudo":
        return PseudoEncoder()
    if model_id.startswith("pseudo:"):
        return PseudoEncoder(int(model_id.split(":", 1)[1]))
    return SentenceTransformerEncoder(model_id, device=device)
