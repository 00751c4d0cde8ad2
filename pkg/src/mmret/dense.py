"""Exact inner-product retrieval over passage embeddings.

Embedding models live behind the EmbeddingProvider contract; the shipped
StubProvider hashes tokens into buckets so the whole engine runs with no
model services.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .corpus import PassageStore, tokenize
from .ranking import RankedList

DENSE_INDEX_FORMAT = "mmret-dense-index"
DENSE_INDEX_VERSION = 1


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Contract for the query-side and passage-side encoders.

    Both methods must return finite vectors of exactly `dim` components and
    be deterministic for fixed inputs.
    """

    dim: int

    def embed_query(self, question: str, image_ref: str) -> np.ndarray: ...

    def embed_passage(self, text: str) -> np.ndarray: ...


def hashed_vector(tokens: list[str], dim: int, seed: int) -> np.ndarray:
    """Signed token-hashing into `dim` buckets, L2-normalized.

    Stable across runs and platforms: bucket and sign come from a keyed
    blake2b digest, never from Python's salted hash().
    """
    v = np.zeros(dim, dtype=np.float32)
    for token in tokens:
        digest = hashlib.blake2b(f"{seed}|{token}".encode("utf-8"), digest_size=8).digest()
        value = int.from_bytes(digest, "big")
        bucket = value % dim
        sign = 1.0 if (value >> 63) & 1 else -1.0
        v[bucket] += sign
    norm = float(np.linalg.norm(v))
    if norm > 0:
        v /= norm
    return v


class StubProvider:
    """Deterministic hashing embedder standing in for the neural encoders."""

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim <= 0:
            raise ValueError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.seed = seed

    def embed_query(self, question: str, image_ref: str) -> np.ndarray:
        return hashed_vector(tokenize(question) + tokenize(image_ref), self.dim, self.seed)

    def embed_passage(self, text: str) -> np.ndarray:
        return hashed_vector(tokenize(text), self.dim, self.seed)


def score(q: np.ndarray, p: np.ndarray) -> float:
    """Exact inner product, accumulated in float64."""
    q = np.asarray(q)
    p = np.asarray(p)
    if q.shape != p.shape:
        raise ValueError(f"dimension mismatch: {q.shape} vs {p.shape}")
    return float(np.dot(q.astype(np.float64), p.astype(np.float64)))


class DenseIndex:
    """Row-major matrix of passage embeddings plus ordinal -> id mapping."""

    def __init__(self, vectors: np.ndarray, ids: list[str]):
        vectors = np.asarray(vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D matrix")
        if vectors.shape[0] != len(ids):
            raise ValueError(f"row count {vectors.shape[0]} != id count {len(ids)}")
        self.vectors = vectors
        self.ids = list(ids)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.ids)


def build_dense_index(provider: EmbeddingProvider, store: PassageStore) -> DenseIndex:
    """Embed every passage, one row per passage in store order."""
    if len(store) == 0:
        raise ValueError("cannot build a dense index over an empty store")
    rows = []
    ids = []
    for passage in store:
        vec = np.asarray(provider.embed_passage(passage.text), dtype=np.float32)
        if vec.shape != (provider.dim,):
            raise ValueError(
                f"provider returned shape {vec.shape} for passage {passage.id!r}, expected ({provider.dim},)"
            )
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"provider returned non-finite values for passage {passage.id!r}")
        rows.append(vec)
        ids.append(passage.id)
    return DenseIndex(np.stack(rows), ids)


def _shard_scores(vectors: np.ndarray, q: np.ndarray) -> np.ndarray:
    # Per-row reduction over the feature axis only, so the result does not
    # depend on how rows were sharded.
    return (vectors.astype(np.float64) * q).sum(axis=1)


def dense_search(index: DenseIndex, q: np.ndarray, k: int, workers: int = 1) -> RankedList:
    """Exact top-k by inner product, ties broken by ascending passage id.

    Rows may be sharded across `workers` threads; the result is identical
    to the single-threaded scan.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (index.dim,):
        raise ValueError(f"query dim {q.shape} does not match index dim {index.dim}")
    n = len(index)
    if workers <= 1 or n < 2 * workers:
        scores = _shard_scores(index.vectors, q)
    else:
        bounds = np.linspace(0, n, workers + 1, dtype=int)
        shards = [(int(bounds[i]), int(bounds[i + 1])) for i in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda se: _shard_scores(index.vectors[se[0] : se[1]], q), shards))
        scores = np.concatenate(parts)
    order = sorted(range(n), key=lambda i: (-scores[i], index.ids[i]))
    return RankedList([(index.ids[i], float(scores[i])) for i in order[:k]])


def save_dense_index(index: DenseIndex, path: str | Path) -> None:
    np.savez(
        Path(path),
        format=DENSE_INDEX_FORMAT,
        version=DENSE_INDEX_VERSION,
        vectors=index.vectors,
        ids=np.array(index.ids, dtype=np.str_),
    )


def load_dense_index(path: str | Path) -> DenseIndex:
    with np.load(Path(path), allow_pickle=False) as payload:
        if str(payload["format"]) != DENSE_INDEX_FORMAT:
            raise ValueError(f"{path}: not a dense index file")
        if int(payload["version"]) != DENSE_INDEX_VERSION:
            raise ValueError(f"{path}: unsupported index version")
        return DenseIndex(payload["vectors"], [str(s) for s in payload["ids"]])
