"""Vector index over documentation chunks, exact top-k search, and
retrieval evaluation via AUC-ROC.

Search is an exact linear scan (corpora are man-page scale); scores are
per-entry float64 dot products so rankings are reproducible bit-for-bit.
Ties break by chunk_id ascending.  The index serializes to a versioned
binary container with little-endian float32 vectors.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from .doccorpus import DocChunk, RetrievalTriple
from .embedding import EmbeddingProvider, embed
from .errors import DegenerateLabels, DuplicateChunkId, ProviderMismatch
from .shellparse import ShellCommand

_MAGIC = b"CLIX"
_VERSION = 1


@dataclass
class ChunkIndex:
    ids: list[str]
    matrix: np.ndarray  # (n, dim) float32, unit rows
    chunks: list[DocChunk]
    provider_id: str
    dim: int
    built_at: float

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class RetrievalResult:
    chunk: DocChunk
    score: float
    rank: int


@dataclass(frozen=True)
class ScoredPair:
    score: float
    label: int


def build_index(chunks: Sequence[DocChunk], provider: EmbeddingProvider) -> ChunkIndex:
    if not chunks:
        raise ValueError("cannot build an index over zero chunks")
    seen: set[str] = set()
    for c in chunks:
        if c.chunk_id in seen:
            raise DuplicateChunkId(c.chunk_id)
        seen.add(c.chunk_id)
    vectors = embed(provider, [c.text for c in chunks])
    matrix = np.stack([v.values for v in vectors]).astype(np.float32)
    return ChunkIndex(ids=[c.chunk_id for c in chunks], matrix=matrix,
                      chunks=list(chunks), provider_id=provider.provider_id,
                      dim=provider.dim, built_at=time.time())


def _rank(scored: list[tuple[float, str, DocChunk]], k: int) -> list[RetrievalResult]:
    scored.sort(key=lambda row: (-row[0], row[1]))
    return [RetrievalResult(chunk=chunk, score=score, rank=i + 1)
            for i, (score, _, chunk) in enumerate(scored[:k])]


def search(index: ChunkIndex, query_text: str, k: int,
           provider: EmbeddingProvider) -> list[RetrievalResult]:
    """Exact top-k by cosine between the query embedding and every chunk."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if provider.provider_id != index.provider_id:
        raise ProviderMismatch(
            f"index built with {index.provider_id}, queried with {provider.provider_id}")
    query = embed(provider, [query_text])[0].values.astype(np.float64)
    scored = [
        (float(np.dot(index.matrix[i].astype(np.float64), query)), index.ids[i],
         index.chunks[i])
        for i in range(len(index.ids))
    ]
    return _rank(scored, k)


def _unit_query(unit) -> str:
    return " ".join([unit.utility] + unit.options + unit.parameters).strip()


def retrieve_for_command(index: ChunkIndex, cmd: ShellCommand, k_per_unit: int,
                         provider: EmbeddingProvider) -> list[RetrievalResult]:
    """Per-unit search merged over a compound command: de-duplicated by
    chunk_id keeping the max score, re-ranked, truncated to
    k_per_unit * number-of-units."""
    if not cmd.units:
        raise ValueError("command has no units")
    best: dict[str, tuple[float, DocChunk]] = {}
    for unit in cmd.units:
        query = _unit_query(unit)
        if not query:
            continue
        for result in search(index, query, k_per_unit, provider):
            held = best.get(result.chunk.chunk_id)
            if held is None or result.score > held[0]:
                best[result.chunk.chunk_id] = (result.score, result.chunk)
    scored = [(score, chunk_id, chunk) for chunk_id, (score, chunk) in best.items()]
    return _rank(scored, k_per_unit * len(cmd.units))


def auc_roc(pairs: Sequence[ScoredPair]) -> float:
    """Rank (Mann-Whitney) AUC with tie correction: the probability a
    positive outscores a negative, counting ties as half."""
    n_pos = sum(1 for p in pairs if p.label == 1)
    n_neg = sum(1 for p in pairs if p.label == 0)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels(f"need both classes, got {n_pos} positive / {n_neg} negative")
    ordered = sorted(pairs, key=lambda p: p.score)
    rank_sum_pos = 0.0
    i = 0
    while i < len(ordered):
        j = i
        while j < len(ordered) and ordered[j].score == ordered[i].score:
            j += 1
        avg_rank = (i + 1 + j) / 2.0  # ranks are 1-based, tie group shares the mean
        rank_sum_pos += avg_rank * sum(1 for p in ordered[i:j] if p.label == 1)
        i = j
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def evaluate_retrieval(triples: Sequence[RetrievalTriple],
                       provider: EmbeddingProvider) -> dict:
    """Score every triple as cosine(embed(command), embed(doc text)) and
    report the rank AUC over the labels."""
    if not triples:
        raise ValueError("no triples to evaluate")
    texts: list[str] = []
    seen: dict[str, int] = {}
    for t in triples:
        for text in (t.command, t.doc.text):
            if text not in seen:
                seen[text] = len(texts)
                texts.append(text)
    vectors = embed(provider, texts)
    pairs = []
    for t in triples:
        a = vectors[seen[t.command]].values.astype(np.float64)
        b = vectors[seen[t.doc.text]].values.astype(np.float64)
        pairs.append(ScoredPair(score=float(np.dot(a, b)), label=t.label))
    return {
        "auc": auc_roc(pairs),
        "n_pos": sum(1 for p in pairs if p.label == 1),
        "n_neg": sum(1 for p in pairs if p.label == 0),
        "provider_id": provider.provider_id,
    }


# --- index file format -------------------------------------------------------
# header: magic "CLIX", u32 version, u32 dim, u32 count, f64 built_at,
#         str provider_id; then per entry: str chunk_id, str utility,
#         str origin, u32 ordinal, str text, dim * f32 vector.
# all integers and floats little-endian; str = u32 byte length + utf-8 bytes.

def _write_str(fh: BinaryIO, s: str) -> None:
    data = s.encode("utf-8")
    fh.write(struct.pack("<I", len(data)))
    fh.write(data)


def _read_str(fh: BinaryIO) -> str:
    (length,) = struct.unpack("<I", fh.read(4))
    return fh.read(length).decode("utf-8")


def save_index(index: ChunkIndex, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, index.dim, len(index.ids)))
        fh.write(struct.pack("<d", index.built_at))
        _write_str(fh, index.provider_id)
        for i, chunk in enumerate(index.chunks):
            _write_str(fh, chunk.chunk_id)
            _write_str(fh, chunk.utility)
            _write_str(fh, chunk.origin)
            fh.write(struct.pack("<I", chunk.ordinal))
            _write_str(fh, chunk.text)
            fh.write(index.matrix[i].astype("<f4").tobytes())


def load_index(path: str | Path) -> ChunkIndex:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"not an index file: bad magic {magic!r}")
        version, dim, count = struct.unpack("<III", fh.read(12))
        if version != _VERSION:
            raise ValueError(f"unsupported index version {version}")
        (built_at,) = struct.unpack("<d", fh.read(8))
        provider_id = _read_str(fh)
        ids: list[str] = []
        chunks: list[DocChunk] = []
        rows = np.empty((count, dim), dtype=np.float32)
        for i in range(count):
            chunk_id = _read_str(fh)
            utility = _read_str(fh)
            origin = _read_str(fh)
            (ordinal,) = struct.unpack("<I", fh.read(4))
            text = _read_str(fh)
            rows[i] = np.frombuffer(fh.read(4 * dim), dtype="<f4")
            ids.append(chunk_id)
            chunks.append(DocChunk(chunk_id=chunk_id, utility=utility,
                                   text=text, origin=origin, ordinal=ordinal))
        return ChunkIndex(ids=ids, matrix=rows, chunks=chunks,
                          provider_id=provider_id, dim=dim, built_at=built_at)
