"""Exact full attention (ground truth) and sparse attention over a selection.

Single-step decode model: queries attend over a fixed key/value set, no
causal masking. Scaling is 1/sqrt(head_dim); the sparse path renormalizes
softmax over the selected subset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kvstore import ChunkedKVStore
from .numerics import as_f32, softmax_rows
from .selection import SelectionResult, normalize_queries


@dataclass(frozen=True)
class AttentionOutput:
    output: np.ndarray
    tokens_used: int
    rel_error_vs_full: float | None


def full_attention(queries: np.ndarray, keys: np.ndarray, values: np.ndarray) -> AttentionOutput:
    """softmax(q K^T / sqrt(D)) V per query row over one key/value plane."""
    q = as_f32(queries, "queries")
    if q.ndim == 1:
        q = q[None, :]
    k = as_f32(keys, "keys")
    v = as_f32(values, "values")
    if k.ndim != 2 or v.ndim != 2 or q.ndim != 2:
        raise ValueError("full_attention expects 2-D queries, keys, values")
    if k.shape[0] == 0:
        raise ValueError("attention over zero keys is undefined")
    if q.shape[1] != k.shape[1] or k.shape[0] != v.shape[0]:
        raise ValueError(f"inconsistent dims: q {q.shape}, k {k.shape}, v {v.shape}")
    scale = np.float32(1.0 / np.sqrt(q.shape[1]))
    weights = softmax_rows(q @ k.T * scale)
    return AttentionOutput(
        output=(weights @ v).astype(np.float32),
        tokens_used=k.shape[0],
        rel_error_vs_full=None,
    )


def full_attention_heads(queries: np.ndarray, keys: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Full attention for every head plane; returns [heads, G, D]."""
    keys = as_f32(keys, "keys")
    if keys.ndim == 2:
        keys = keys[None, :, :]
    values = as_f32(values, "values")
    if values.ndim == 2:
        values = values[None, :, :]
    q = normalize_queries(queries, keys.shape[0])
    return np.stack(
        [full_attention(q[h], keys[h], values[h]).output for h in range(keys.shape[0])]
    )


def sparse_attention(
    queries: np.ndarray,
    store: ChunkedKVStore,
    sel: SelectionResult,
    full_baseline: np.ndarray | None = None,
) -> AttentionOutput:
    """Attention restricted to sel.token_ids.

    Resident tokens come from the fast tier uncompressed; the rest are
    dequantized through the slow-tier scheme. When `full_baseline` (the
    full_attention_heads output for the same queries) is supplied,
    rel_error_vs_full = ||sparse - full||_2 / ||full||_2.
    """
    q = normalize_queries(queries, store.n_heads)
    if len(sel.token_ids) == 0:
        raise ValueError("selection is empty")
    k, v = store.gather_kv(sel.token_ids)
    out = np.stack(
        [full_attention(q[h], k[h], v[h]).output for h in range(store.n_heads)]
    )
    rel = None
    if full_baseline is not None:
        denom = float(np.linalg.norm(full_baseline))
        rel = float(np.linalg.norm(out - full_baseline) / max(denom, 1e-30))
    return AttentionOutput(
        output=out,
        tokens_used=len(sel.token_ids),
        rel_error_vs_full=rel,
    )
