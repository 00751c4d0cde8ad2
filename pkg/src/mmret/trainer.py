"""Contrastive training for the dense retriever, small enough to verify by hand.

The loss is the softmax cross-entropy over one positive and a set of
negatives; batches expand each item's negatives with every other item's
positive and hard negative (2B-1 negatives per query). The trainable model
is a pair of linear maps over hashed bag-of-words features -- tiny, but it
exercises the full loss/gradient/update loop end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import PassageStore, tokenize
from .dense import hashed_vector
from .pipeline import GeneratedExample

EMBEDDER_FORMAT = "mmret-embedder"
EMBEDDER_VERSION = 1


def contrastive_loss(pos_score: float, neg_scores: Sequence[float]) -> float:
    """-log softmax probability of the positive among positive + negatives.

    Computed with a max shift (or log1p when the positive dominates) so
    large scores cannot overflow and the result stays strictly positive.
    """
    if len(neg_scores) == 0:
        raise ValueError("contrastive loss needs at least one negative score")
    pos = float(pos_score)
    negs = [float(v) for v in neg_scores]
    if not all(map(math.isfinite, [pos, *negs])):
        raise ValueError("scores must be finite")
    highest_neg = max(negs)
    if pos >= highest_neg:
        return math.log1p(math.fsum(math.exp(v - pos) for v in negs))
    total = math.exp(pos - highest_neg) + math.fsum(math.exp(v - highest_neg) for v in negs)
    return highest_neg + math.log(total) - pos


def in_batch_expand(
    positives: np.ndarray, negatives: np.ndarray, item_index: int
) -> tuple[np.ndarray, np.ndarray]:
    """Negatives for one batch item: its hard negative plus everyone else's pair.

    Given (B, d) stacks of positive and hard-negative embeddings, returns
    the item's positive and a (2B-1, d) stack ordered: own hard negative,
    then for each other item j in batch order its positive then negative.
    """
    positives = np.asarray(positives)
    negatives = np.asarray(negatives)
    if positives.shape != negatives.shape or positives.ndim != 2:
        raise ValueError("positives and negatives must be matching (B, d) arrays")
    batch_size = positives.shape[0]
    if not 0 <= item_index < batch_size:
        raise IndexError(f"item_index {item_index} out of range for batch of {batch_size}")
    rows = [negatives[item_index]]
    for j in range(batch_size):
        if j == item_index:
            continue
        rows.append(positives[j])
        rows.append(negatives[j])
    return positives[item_index], np.stack(rows)


@dataclass
class TrainingBatch:
    """Hashed features for B (query, positive passage, hard negative) triples."""

    query_features: np.ndarray
    positive_features: np.ndarray
    negative_features: np.ndarray

    def __post_init__(self):
        q, p, n = self.query_features, self.positive_features, self.negative_features
        if q.ndim != 2 or p.ndim != 2 or n.ndim != 2:
            raise ValueError("batch feature arrays must be 2-D")
        if p.shape != n.shape:
            raise ValueError(f"positive/negative shapes differ: {p.shape} vs {n.shape}")
        if q.shape[0] != p.shape[0]:
            raise ValueError(f"query count {q.shape[0]} != passage count {p.shape[0]}")
        if q.shape[0] < 1:
            raise ValueError("batch must contain at least one item")

    def __len__(self) -> int:
        return self.query_features.shape[0]


class ToyEmbedder:
    """Two linear maps (query side, passage side) over hashed features."""

    def __init__(self, wq: np.ndarray, wp: np.ndarray, feature_seed: int = 0):
        wq = np.asarray(wq, dtype=np.float64)
        wp = np.asarray(wp, dtype=np.float64)
        if wq.ndim != 2 or wp.ndim != 2 or wq.shape[0] != wp.shape[0]:
            raise ValueError("weight matrices must be 2-D with a shared embedding dim")
        self.wq = wq
        self.wp = wp
        self.feature_seed = int(feature_seed)

    @property
    def embed_dim(self) -> int:
        return self.wq.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.wq.shape[1]

    @classmethod
    def create(
        cls, feature_dim: int, embed_dim: int, seed: int, feature_seed: int = 0
    ) -> "ToyEmbedder":
        """Random Gaussian init scaled by 1/sqrt(feature_dim)."""
        rng = np.random.default_rng(seed)
        scale = 1.0 / math.sqrt(feature_dim)
        return cls(
            wq=rng.normal(0.0, scale, size=(embed_dim, feature_dim)),
            wp=rng.normal(0.0, scale, size=(embed_dim, feature_dim)),
            feature_seed=feature_seed,
        )

    def embed_query_features(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) @ self.wq.T

    def embed_passage_features(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) @ self.wp.T

    def save(self, path) -> None:
        np.savez(
            path,
            format=EMBEDDER_FORMAT,
            version=EMBEDDER_VERSION,
            wq=self.wq,
            wp=self.wp,
            feature_seed=self.feature_seed,
        )

    @classmethod
    def load(cls, path) -> "ToyEmbedder":
        with np.load(path, allow_pickle=False) as data:
            if str(data["format"]) != EMBEDDER_FORMAT:
                raise ValueError(f"{path} is not a saved embedder")
            return cls(wq=data["wq"], wp=data["wp"], feature_seed=int(data["feature_seed"]))

    def as_provider(self) -> "TrainedProvider":
        return TrainedProvider(self)


def featurize_query(question: str, image_id: str, dim: int, seed: int = 0) -> np.ndarray:
    """Hash question tokens plus modality-prefixed image tokens into one vector."""
    tokens = tokenize(question) + [f"#img:{tok}" for tok in tokenize(image_id)]
    return hashed_vector(tokens, dim, seed)


def featurize_passage(text: str, dim: int, seed: int = 0) -> np.ndarray:
    return hashed_vector(tokenize(text), dim, seed)


class TrainedProvider:
    """Embedding provider view of a ToyEmbedder, usable by the dense index."""

    def __init__(self, embedder: ToyEmbedder):
        self._embedder = embedder

    @property
    def dim(self) -> int:
        return self._embedder.embed_dim

    def embed_query(self, question: str, image_ref: str) -> np.ndarray:
        features = featurize_query(
            question, image_ref, self._embedder.feature_dim, self._embedder.feature_seed
        )
        return self._embedder.embed_query_features(features).astype(np.float32)

    def embed_passage(self, text: str) -> np.ndarray:
        features = featurize_passage(text, self._embedder.feature_dim, self._embedder.feature_seed)
        return self._embedder.embed_passage_features(features).astype(np.float32)


def batch_loss_and_grad(
    embedder: ToyEmbedder, batch: TrainingBatch
) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Mean in-batch contrastive loss and its analytic weight gradients.

    Scores every query against the 2B stacked positives and negatives; the
    diagonal entries are the targets of a row-wise softmax cross-entropy.
    """
    fq = np.asarray(batch.query_features, dtype=np.float64)
    fp = np.asarray(batch.positive_features, dtype=np.float64)
    fn = np.asarray(batch.negative_features, dtype=np.float64)
    q = fq @ embedder.wq.T
    candidates = np.vstack([fp, fn]) @ embedder.wp.T  # positives then negatives
    scores = q @ candidates.T  # (B, 2B)
    if not np.all(np.isfinite(scores)):
        raise ValueError("non-finite scores in batch")

    batch_size = len(batch)
    idx = np.arange(batch_size)
    row_max = scores.max(axis=1, keepdims=True)
    shifted = np.exp(scores - row_max)
    partition = shifted.sum(axis=1, keepdims=True)
    log_partition = np.log(partition[:, 0]) + row_max[:, 0]
    losses = log_partition - scores[idx, idx]
    loss = float(losses.mean())

    grad_scores = shifted / partition
    grad_scores[idx, idx] -= 1.0
    grad_scores /= batch_size
    grad_wq = (grad_scores @ candidates).T @ fq
    grad_candidates = grad_scores.T @ q  # (2B, embed_dim)
    grad_wp = grad_candidates[:batch_size].T @ fp + grad_candidates[batch_size:].T @ fn
    return loss, (grad_wq, grad_wp)


UpdateFn = Callable[[ToyEmbedder, np.ndarray, np.ndarray], None]


def train_toy(
    examples: Sequence[GeneratedExample],
    store: PassageStore,
    *,
    epochs: int = 40,
    batch_size: int = 8,
    lr: float = 1.0,
    seed: int = 0,
    feature_dim: int = 512,
    embed_dim: int = 64,
    feature_seed: int = 0,
    update: UpdateFn | None = None,
) -> tuple[ToyEmbedder, list[float]]:
    """Fit a ToyEmbedder on generated tuples with plain gradient descent.

    Features are hashed once up front; each epoch reshuffles with the
    seeded generator, so identical inputs give identical weights. Returns
    the embedder and the mean loss per epoch. Pass ``update`` to swap in a
    different parameter update rule.
    """
    if not examples:
        raise ValueError("cannot train on an empty dataset")
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")

    fq = np.stack(
        [featurize_query(ex.question, ex.image_id, feature_dim, feature_seed) for ex in examples]
    ).astype(np.float64)
    fp = np.stack(
        [featurize_passage(store.text(ex.positive_passage_id), feature_dim, feature_seed) for ex in examples]
    ).astype(np.float64)
    fn = np.stack(
        [featurize_passage(store.text(ex.negative_passage_id), feature_dim, feature_seed) for ex in examples]
    ).astype(np.float64)

    rng = np.random.default_rng(seed)
    embedder = ToyEmbedder.create(feature_dim, embed_dim, seed=seed, feature_seed=feature_seed)
    epoch_losses: list[float] = []
    for _ in range(epochs):
        order = rng.permutation(len(examples))
        losses = []
        for start in range(0, len(order), batch_size):
            pick = order[start : start + batch_size]
            batch = TrainingBatch(
                query_features=fq[pick], positive_features=fp[pick], negative_features=fn[pick]
            )
            loss, (grad_wq, grad_wp) = batch_loss_and_grad(embedder, batch)
            if update is not None:
                update(embedder, grad_wq, grad_wp)
            else:
                embedder.wq -= lr * grad_wq
                embedder.wp -= lr * grad_wp
            losses.append(loss)
        epoch_losses.append(float(np.mean(losses)))
    return embedder, epoch_losses


def save_embedder(embedder: ToyEmbedder, path) -> Path:
    path = Path(path)
    embedder.save(path)
    return path if path.suffix == ".npz" else path.with_suffix(path.suffix + ".npz")
