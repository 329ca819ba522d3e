"""Chunk/token selection policies and the exact dot-product oracle.

All ranking happens on float32 scores with ties broken toward the lowest
chunk or token id. Functions are pure over immutable stores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kvstore import BudgetConfig, ChunkedKVStore
from .numerics import as_f32


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of a selection policy.

    chunk_ids are in rank order (best first); token_ids is the sorted union
    of the selected chunks' tokens with the always-resident outlier and
    local-window tokens. loaded_fraction == len(token_ids) / n.
    """

    chunk_ids: tuple
    token_ids: np.ndarray
    scores: np.ndarray
    loaded_fraction: float


def normalize_queries(queries: np.ndarray, n_heads: int) -> np.ndarray:
    q = as_f32(queries, "queries")
    if q.ndim == 1:
        q = q[None, None, :]
    elif q.ndim == 2:
        q = q[None, :, :]
    if q.ndim != 3:
        raise ValueError(f"queries must be [D], [G, D] or [heads, G, D], got {q.shape}")
    if q.shape[0] != n_heads:
        raise ValueError(f"queries carry {q.shape[0]} head groups, store has {n_heads}")
    return q


def _aggregate(per_query_scores: np.ndarray, aggregation: str) -> np.ndarray:
    # per_query_scores: [heads, G, items] -> [items]
    if aggregation == "sum":
        return per_query_scores.sum(axis=(0, 1))
    if aggregation == "max":
        return per_query_scores.max(axis=(0, 1))
    raise ValueError(f"unknown aggregation {aggregation!r}")


def _top_ids(scores: np.ndarray, k: int) -> np.ndarray:
    # stable sort on negated scores: ties resolve to the lowest id
    return np.argsort(-scores, kind="stable")[:k]


def _finish(store: ChunkedKVStore, chunk_ids: np.ndarray, scores: np.ndarray) -> SelectionResult:
    parts = [store.chunk_token_ids(int(c)) for c in chunk_ids]
    parts.append(store.resident_token_ids)
    tokens = np.unique(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)
    return SelectionResult(
        chunk_ids=tuple(int(c) for c in chunk_ids),
        token_ids=tokens,
        scores=scores,
        loaded_fraction=len(tokens) / store.n_tokens,
    )


def select_by_landmarks(
    store: ChunkedKVStore,
    queries: np.ndarray,
    budget: BudgetConfig,
    aggregation: str = "sum",
) -> SelectionResult:
    """Rank chunks by query-landmark dot products and take the top
    ceil(sparse_fraction * n / chunk_size); outliers and the local window ride
    along. Scores aggregate over every query head (sum by default)."""
    q = normalize_queries(queries, store.n_heads)
    landmarks = store.landmarks_dequantized()  # [H, C, D]
    per_query = np.einsum("hgd,hcd->hgc", q, landmarks)
    scores = _aggregate(per_query, aggregation).astype(np.float32)
    n_sel = min(store.n_chunks, math.ceil(budget.sparse_fraction * store.n_tokens / store.chunk_size))
    top = _top_ids(scores, n_sel)
    return _finish(store, top, scores)


def oracle_select(keys: np.ndarray, queries: np.ndarray, k: int) -> SelectionResult:
    """Upper-bound policy: top-k tokens by exact summed query-key dot products.

    Operates on raw keys ([n, D] or [heads, n, D]); no store, so the result
    carries no resident tokens and chunk ids equal token ids.
    """
    keys = as_f32(keys, "keys")
    if keys.ndim == 2:
        keys = keys[None, :, :]
    q = normalize_queries(queries, keys.shape[0])
    n = keys.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"k {k} out of range [1, {n}]")
    scores = np.einsum("hgd,hnd->n", q, keys).astype(np.float32)
    top = _top_ids(scores, k)
    tokens = np.sort(top)
    return SelectionResult(
        chunk_ids=tuple(int(t) for t in top),
        token_ids=tokens,
        scores=scores,
        loaded_fraction=k / n,
    )


def residual_scores(store: ChunkedKVStore, queries: np.ndarray) -> np.ndarray:
    """Per-token scores from the landmark+residual decomposition.

    score_i = (q . dequantized landmark of chunk(i)) repeated over the chunk,
    plus q . dequantized residual_i, summed over all query heads. Equals
    q . approx_key(i) up to float reassociation.
    """
    if store.residuals is None:
        raise ValueError("store was built without residuals")
    q = normalize_queries(queries, store.n_heads)
    landmarks = store.landmarks_dequantized()
    residuals = store.residuals_dequantized()
    chunk_scores = np.einsum("hgd,hcd->c", q, landmarks)
    repeated = np.repeat(chunk_scores, store.chunk_size)[: store.n_tokens]
    res = np.einsum("hgd,hnd->n", q, residuals)
    return (repeated + res).astype(np.float32)


def approx_topk_residual(
    store: ChunkedKVStore,
    queries: np.ndarray,
    k: int,
    candidate_multiplier: int = 4,
) -> SelectionResult:
    """Two-stage top-k: shortlist chunks by landmark score, then rank tokens
    inside the shortlist by residual-refined scores."""
    if candidate_multiplier < 1:
        raise ValueError("candidate_multiplier must be >= 1")
    if store.residuals is None:
        raise ValueError("store was built without residuals")
    q = normalize_queries(queries, store.n_heads)
    n = store.n_tokens
    if not 1 <= k <= n:
        raise ValueError(f"k {k} out of range [1, {n}]")

    landmarks = store.landmarks_dequantized()
    chunk_scores = np.einsum("hgd,hcd->c", q, landmarks).astype(np.float32)
    n_cand = min(store.n_chunks, candidate_multiplier * math.ceil(k / store.chunk_size))
    cand_chunks = _top_ids(chunk_scores, n_cand)
    cand_tokens = np.sort(np.concatenate([store.chunk_token_ids(int(c)) for c in cand_chunks]))

    residuals = store.residuals_dequantized()
    res = np.einsum("hgd,hnd->n", q, residuals[:, cand_tokens, :])
    repeated = np.repeat(chunk_scores, store.chunk_size)[:n]
    tok_scores = (repeated[cand_tokens] + res).astype(np.float32)

    top_local = _top_ids(tok_scores, min(k, len(cand_tokens)))
    chosen = cand_tokens[top_local]
    tokens = np.unique(np.concatenate([chosen, store.resident_token_ids]))
    # non-candidates keep their first-stage landmark estimate
    full_scores = repeated.astype(np.float32).copy()
    full_scores[cand_tokens] = tok_scores
    return SelectionResult(
        chunk_ids=tuple(int(c) for c in cand_chunks),
        token_ids=tokens,
        scores=full_scores,
        loaded_fraction=len(tokens) / n,
    )


def recall(selected: SelectionResult, oracle: SelectionResult) -> float:
    """Fraction of the oracle's tokens that the policy also loaded."""
    oracle_ids = set(oracle.token_ids.tolist())
    if not oracle_ids:
        raise ValueError("oracle selection is empty")
    hit = len(oracle_ids & set(selected.token_ids.tolist()))
    return hit / len(oracle_ids)
