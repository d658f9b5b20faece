"""Embedding providers and similarity.

Two providers satisfy the same contract: a deterministic offline embedder
(hashed bag-of-words, used by every test and wherever no model service is
available) and a remote HTTP client for any embedding service speaking the
common ``{model, input} -> {data: [{embedding}]}`` wire shape.  A fine-tuned
command/description encoder plugs in through the same remote contract.

Vectors are float32 and unit-normalized; similarity is cosine, computed as
a float64 dot product per pair so results are reproducible bit-for-bit
across runs and after index round-trips.
"""

from __future__ import annotations

import os
import string
import threading
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import requests

from .errors import DimensionMismatch, ProviderUnavailable

EMBED_API_KEY_ENV = "EMBED_API_KEY"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class Embedding:
    values: np.ndarray  # float32, unit norm
    dim: int
    provider_id: str

    def __post_init__(self):
        if self.values.shape != (self.dim,):
            raise DimensionMismatch(
                f"embedding has {self.values.shape[0]} values, expected {self.dim}")


class EmbeddingProvider(Protocol):
    provider_id: str
    dim: int

    def embed(self, texts: Sequence[str]) -> list[Embedding]: ...


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _normalize(vec: np.ndarray) -> np.ndarray:
    vec = vec.astype(np.float32)
    norm = np.linalg.norm(vec)
    if norm == 0:
        vec = np.full(vec.shape, 1.0, dtype=np.float32)
        norm = np.linalg.norm(vec)
    return (vec / norm).astype(np.float32)


class OfflineEmbedder:
    """Deterministic lexical embedder: lowercase words (surrounding
    punctuation stripped) hashed (FNV-1a 64) into ``dim`` buckets with
    term-frequency weights, L2-normalized.

    Texts sharing more words get higher cosine; disjoint texts score near
    zero.  Stands in for both embedding roles (behavior matching and
    command-documentation retrieval) in offline runs."""

    def __init__(self, dim: int = 1024, seed: int = 0):
        if dim < 8:
            raise ValueError("offline embedder needs dim >= 8")
        self.dim = dim
        self.seed = seed
        self.provider_id = f"offline:d{dim}:s{seed}"

    def _words(self, text: str) -> list[str]:
        words = []
        for raw in text.lower().split():
            word = raw.strip(string.punctuation)
            if word:
                words.append(word)
        return words

    def embed_one(self, text: str) -> Embedding:
        vec = np.zeros(self.dim, dtype=np.float64)
        words = self._words(text)
        if not words:
            return Embedding(_normalize(np.ones(self.dim)), self.dim, self.provider_id)
        for word in words:
            bucket = _fnv1a64(f"{self.seed}\x1f{word}".encode("utf-8")) % self.dim
            vec[bucket] += 1.0
        return Embedding(_normalize(vec), self.dim, self.provider_id)

    def embed(self, texts: Sequence[str]) -> list[Embedding]:
        return [self.embed_one(t) for t in texts]


class RemoteEmbedder:
    """Client for an embedding HTTP service.

    Request: ``POST endpoint`` with ``{"model": ..., "input": [texts]}``;
    response: ``{"data": [{"embedding": [floats]}, ...]}`` in input order.
    Bearer token read from ``EMBED_API_KEY``.  Retries transport failures
    with exponential backoff (3 attempts); concurrent batches are capped by
    a semaphore."""

    def __init__(self, endpoint: str, model: str, dim: int = 1024,
                 batch_size: int = 64, max_concurrency: int = 4,
                 timeout: float = 30.0, auth_env: str = EMBED_API_KEY_ENV):
        self.endpoint = endpoint
        self.model = model
        self.dim = dim
        self.batch_size = batch_size
        self.timeout = timeout
        self.auth_env = auth_env
        self.provider_id = f"remote:{model}:d{dim}"
        self._gate = threading.Semaphore(max_concurrency)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.auth_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, payload: dict) -> dict:
        last_err: Exception | None = None
        for attempt in range(3):
            try:
                with self._gate:
                    resp = requests.post(self.endpoint, json=payload,
                                         headers=self._headers(), timeout=self.timeout)
                resp.raise_for_status()
                return resp.json()
            except requests.RequestException as exc:
                last_err = exc
                time.sleep(0.5 * 2 ** attempt)
        raise ProviderUnavailable(str(last_err))

    def embed(self, texts: Sequence[str]) -> list[Embedding]:
        out: list[Embedding] = []
        for i in range(0, len(texts), self.batch_size):
            batch = list(texts[i:i + self.batch_size])
            body = self._post({"model": self.model, "input": batch})
            data = body.get("data")
            if not isinstance(data, list) or len(data) != len(batch):
                raise ProviderUnavailable(
                    f"malformed response: expected {len(batch)} rows")
            for row in data:
                vec = np.asarray(row["embedding"], dtype=np.float64)
                if vec.shape != (self.dim,):
                    raise DimensionMismatch(
                        f"service returned {vec.shape[0]}-dim vector, expected {self.dim}")
                out.append(Embedding(_normalize(vec), self.dim, self.provider_id))
        return out


def embed(provider: EmbeddingProvider, texts: Sequence[str]) -> list[Embedding]:
    """Batch-embed with contract checks: non-empty batch of non-empty
    strings in, one unit-normalized Embedding per text out, in order."""
    if not texts:
        raise ValueError("embed() needs at least one text")
    for t in texts:
        if not isinstance(t, str) or not t:
            raise ValueError("embed() texts must be non-empty strings")
    vectors = provider.embed(texts)
    if len(vectors) != len(texts):
        raise ProviderUnavailable(
            f"provider returned {len(vectors)} vectors for {len(texts)} texts")
    return vectors


def cosine(a: Embedding, b: Embedding) -> float:
    """Dot product of the unit vectors, clamped to [-1, 1]."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"cannot compare dims {a.dim} and {b.dim}")
    value = float(np.dot(a.values.astype(np.float64), b.values.astype(np.float64)))
    return max(-1.0, min(1.0, value))


def offline_embed(text: str, dim: int = 1024, seed: int = 0) -> Embedding:
    return OfflineEmbedder(dim=dim, seed=seed).embed_one(text)
