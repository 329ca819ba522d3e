"""Tiered chunked KV cache with quantized landmarks and traffic accounting.

The bulk of keys/values lives in a compressed slow tier; a fast tier holds
per-chunk landmarks (optionally plus per-key residuals), outlier chunks, and
a local window of recent tokens. Stores are immutable after build except for
`append`, which is single-writer; derived state is rebuilt deterministically,
so a store rebuilt from the same inputs and seeds is bit-identical.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .numerics import as_f32, read_kvt, write_kvt
from .quantization import (
    SVD,
    QuantizedBlock,
    SchemeDescriptor,
    bits_per_key,
    dequantize,
    quantize,
    scheme_from_string,
    scheme_none,
    scheme_to_string,
)


@dataclass(frozen=True)
class BudgetConfig:
    """Token budget partition: sparse fraction, outlier tokens, local window."""

    sparse_fraction: float = 0.0156
    outlier_tokens: int = 384
    local_window: int = 32

    def __post_init__(self):
        if not 0 < self.sparse_fraction <= 1:
            raise ValueError(f"sparse_fraction {self.sparse_fraction} not in (0, 1]")
        if self.outlier_tokens < 0 or self.local_window < 0:
            raise ValueError("outlier_tokens and local_window must be >= 0")


@dataclass
class TierTraffic:
    tokens_loaded_from_slow_tier: int
    fast_tier_resident_bits: Fraction


def _normalize_heads(arr: np.ndarray, name: str) -> np.ndarray:
    arr = as_f32(arr, name)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3:
        raise ValueError(f"{name} must be [n, D] or [heads, n, D], got shape {arr.shape}")
    return arr


def _chunk_means(keys: np.ndarray, chunk_size: int) -> np.ndarray:
    """Per-chunk channel-wise mean of keys [n, D]; the tail chunk may be short."""
    n, d = keys.shape
    n_chunks = -(-n // chunk_size)
    pad = n_chunks * chunk_size - n
    padded = np.concatenate([keys, np.zeros((pad, d), dtype=np.float32)]) if pad else keys
    sums = padded.reshape(n_chunks, chunk_size, d).sum(axis=1, dtype=np.float64)
    counts = np.full(n_chunks, chunk_size, dtype=np.float64)
    if pad:
        counts[-1] = chunk_size - pad
    return (sums / counts[:, None]).astype(np.float32)


class ChunkedKVStore:
    """Per-head keys/values segmented into fixed-size chunks with landmarks."""

    def __init__(
        self,
        keys: np.ndarray,
        values: np.ndarray,
        chunk_size: int,
        landmark_scheme: SchemeDescriptor,
        residual_scheme: SchemeDescriptor | None,
        budget: BudgetConfig,
        slow_tier_scheme: SchemeDescriptor,
    ):
        self.keys = keys
        self.values = values
        self.chunk_size = chunk_size
        self.landmark_scheme = landmark_scheme
        self.residual_scheme = residual_scheme
        self.budget = budget
        self.slow_tier_scheme = slow_tier_scheme
        self._derived = None
        self._build_derived()

    # -- basic geometry ----------------------------------------------------

    @property
    def n_heads(self) -> int:
        return self.keys.shape[0]

    @property
    def n_tokens(self) -> int:
        return self.keys.shape[1]

    @property
    def head_dim(self) -> int:
        return self.keys.shape[2]

    @property
    def n_chunks(self) -> int:
        return -(-self.n_tokens // self.chunk_size)

    def chunk_of(self, token_id: int) -> int:
        return token_id // self.chunk_size

    def chunk_token_ids(self, chunk_id: int) -> np.ndarray:
        if not 0 <= chunk_id < self.n_chunks:
            raise ValueError(f"chunk id {chunk_id} out of range [0, {self.n_chunks})")
        start = chunk_id * self.chunk_size
        return np.arange(start, min(start + self.chunk_size, self.n_tokens))

    # -- derived compressed state -------------------------------------------

    def _build_derived(self) -> None:
        h = self.n_heads
        means = np.stack([_chunk_means(self.keys[i], self.chunk_size) for i in range(h)])
        landmark_blocks = [quantize(means[i], self.landmark_scheme) for i in range(h)]
        landmarks_dq = np.stack([dequantize(b) for b in landmark_blocks])

        residual_blocks = None
        residuals_dq = None
        if self.residual_scheme is not None:
            reps = np.repeat(landmarks_dq, self.chunk_size, axis=1)[:, : self.n_tokens]
            residual_blocks = [
                quantize(self.keys[i] - reps[i], self.residual_scheme) for i in range(h)
            ]
            residuals_dq = np.stack([dequantize(b) for b in residual_blocks])

        value_scheme = (
            scheme_none() if self.slow_tier_scheme.kind == SVD else self.slow_tier_scheme
        )
        slow_key_blocks = [quantize(self.keys[i], self.slow_tier_scheme) for i in range(h)]
        slow_value_blocks = [quantize(self.values[i], value_scheme) for i in range(h)]
        slow_keys_dq = np.stack([dequantize(b) for b in slow_key_blocks])
        slow_values_dq = np.stack([dequantize(b) for b in slow_value_blocks])

        self._derived = {
            "landmark_blocks": landmark_blocks,
            "landmarks_dq": landmarks_dq,
            "residual_blocks": residual_blocks,
            "residuals_dq": residuals_dq,
            "slow_keys_dq": slow_keys_dq,
            "slow_values_dq": slow_values_dq,
            "outlier_chunks": self._select_outliers(landmarks_dq),
        }

    def _select_outliers(self, landmarks_dq: np.ndarray) -> tuple[int, ...]:
        """Chunks kept permanently resident: position 0 plus the chunks whose
        keys agree least with their landmark (lowest mean cosine), capped at
        the outlier token budget."""
        budget = self.budget.outlier_tokens
        if budget <= 0:
            return ()
        reps = np.repeat(landmarks_dq, self.chunk_size, axis=1)[:, : self.n_tokens]
        knorm = np.linalg.norm(self.keys, axis=2)
        lnorm = np.linalg.norm(reps, axis=2)
        denom = np.maximum(knorm * lnorm, np.float32(1e-12))
        cos = (self.keys * reps).sum(axis=2) / denom
        pad = self.n_chunks * self.chunk_size - self.n_tokens
        cos_full = np.concatenate(
            [cos.mean(axis=0), np.zeros(pad, dtype=np.float32)]
        ).reshape(self.n_chunks, self.chunk_size)
        counts = np.full(self.n_chunks, self.chunk_size, dtype=np.float64)
        if pad:
            counts[-1] = self.chunk_size - pad
        per_chunk = cos_full.sum(axis=1) / counts

        order = [0] + [c for c in np.argsort(per_chunk, kind="stable").tolist() if c != 0]
        chosen: list[int] = []
        used = 0
        for c in order:
            size = len(self.chunk_token_ids(c))
            if used + size > budget:
                continue
            chosen.append(c)
            used += size
        return tuple(sorted(chosen))

    @property
    def outlier_chunks(self) -> tuple[int, ...]:
        return self._derived["outlier_chunks"]

    @property
    def landmarks(self) -> list[QuantizedBlock]:
        return self._derived["landmark_blocks"]

    @property
    def residuals(self) -> list[QuantizedBlock] | None:
        return self._derived["residual_blocks"]

    def landmarks_dequantized(self) -> np.ndarray:
        """Dequantized landmarks, shape [heads, n_chunks, D]."""
        return self._derived["landmarks_dq"]

    def residuals_dequantized(self) -> np.ndarray:
        if self._derived["residuals_dq"] is None:
            raise ValueError("store was built without residuals")
        return self._derived["residuals_dq"]

    def landmark_of(self, chunk_id: int, head: int = 0) -> np.ndarray:
        if not 0 <= chunk_id < self.n_chunks:
            raise ValueError(f"chunk id {chunk_id} out of range [0, {self.n_chunks})")
        return self._derived["landmarks_dq"][head, chunk_id]

    def approx_key(self, token_id: int, head: int = 0) -> np.ndarray:
        """Reconstructed key: dequantized landmark of the token's chunk plus
        the token's dequantized residual."""
        if self.residuals is None:
            raise ValueError("store was built without residuals")
        if not 0 <= token_id < self.n_tokens:
            raise ValueError(f"token id {token_id} out of range [0, {self.n_tokens})")
        lm = self._derived["landmarks_dq"][head, self.chunk_of(token_id)]
        return lm + self._derived["residuals_dq"][head, token_id]

    # -- residency and traffic ----------------------------------------------

    @property
    def local_token_ids(self) -> np.ndarray:
        w = min(self.budget.local_window, self.n_tokens)
        return np.arange(self.n_tokens - w, self.n_tokens)

    @property
    def resident_token_ids(self) -> np.ndarray:
        """Tokens always in the fast tier: outlier chunks plus the local window."""
        parts = [self.chunk_token_ids(c) for c in self.outlier_chunks]
        parts.append(self.local_token_ids)
        return np.unique(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)

    def fast_tier_resident_bits(self) -> Fraction:
        """Modeled fast-tier footprint: landmark (+residual) structures for all
        keys, plus 16-bit K and V for the resident tokens."""
        d = self.head_dim
        lm_bits = self.landmark_scheme.code_bits * self.n_chunks * d * self.n_heads
        res_bits = Fraction(0)
        if self.residual_scheme is not None:
            res_bits = self.residual_scheme.code_bits * self.n_tokens * d * self.n_heads
        resident = len(self.resident_token_ids)
        kv_bits = Fraction(2 * 16 * d * resident * self.n_heads)
        return lm_bits + res_bits + kv_bits

    def bits_per_key(self) -> Fraction:
        return bits_per_key(self.landmark_scheme, self.chunk_size, self.residual_scheme)

    def load_chunks(self, chunk_ids) -> tuple[np.ndarray, np.ndarray, TierTraffic]:
        """Dequantized slow-tier K/V for the requested chunks.

        Traffic counts only tokens actually pulled from the slow tier;
        outlier and local-window tokens are already resident.
        """
        ids = sorted(set(int(c) for c in chunk_ids))
        for c in ids:
            if not 0 <= c < self.n_chunks:
                raise ValueError(f"chunk id {c} out of range [0, {self.n_chunks})")
        if ids:
            tokens = np.concatenate([self.chunk_token_ids(c) for c in ids])
        else:
            tokens = np.empty(0, dtype=np.int64)
        resident = set(self.resident_token_ids.tolist())
        loaded = int(sum(1 for t in tokens.tolist() if t not in resident))
        traffic = TierTraffic(
            tokens_loaded_from_slow_tier=loaded,
            fast_tier_resident_bits=self.fast_tier_resident_bits(),
        )
        k = self._derived["slow_keys_dq"][:, tokens, :]
        v = self._derived["slow_values_dq"][:, tokens, :]
        return k, v, traffic

    def gather_kv(self, token_ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """K/V for a token set as attention would see it: resident tokens come
        from the fast tier uncompressed, the rest through the slow tier."""
        token_ids = np.asarray(token_ids, dtype=np.int64)
        resident = np.isin(token_ids, self.resident_token_ids)
        k = self._derived["slow_keys_dq"][:, token_ids, :].copy()
        v = self._derived["slow_values_dq"][:, token_ids, :].copy()
        if resident.any():
            k[:, resident, :] = self.keys[:, token_ids[resident], :]
            v[:, resident, :] = self.values[:, token_ids[resident], :]
        return k, v

    # -- decode-time append --------------------------------------------------

    def append(self, new_keys: np.ndarray, new_values: np.ndarray) -> None:
        """Append one token per head. Single-writer; readers must not overlap.

        The token joins the growing tail chunk; summaries, residuals, and the
        outlier set are rebuilt (desk-scale, not incremental).
        """
        nk = as_f32(new_keys, "new_keys").reshape(self.n_heads, 1, self.head_dim)
        nv = as_f32(new_values, "new_values").reshape(self.n_heads, 1, self.head_dim)
        self.keys = np.concatenate([self.keys, nk], axis=1)
        self.values = np.concatenate([self.values, nv], axis=1)
        self._build_derived()

    # -- persistence ----------------------------------------------------------

    def save(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        write_kvt(os.path.join(directory, "keys.kvt"), self.keys)
        write_kvt(os.path.join(directory, "values.kvt"), self.values)
        manifest = {
            "chunk_size": self.chunk_size,
            "landmark_scheme": scheme_to_string(self.landmark_scheme),
            "residual_scheme": (
                scheme_to_string(self.residual_scheme) if self.residual_scheme else ""
            ),
            "slow_tier_scheme": scheme_to_string(self.slow_tier_scheme),
            "sparse_fraction": repr(self.budget.sparse_fraction),
            "outlier_tokens": self.budget.outlier_tokens,
            "local_window": self.budget.local_window,
        }
        with open(os.path.join(directory, "manifest.txt"), "w", encoding="utf-8") as f:
            for k, v in manifest.items():
                f.write(f"{k} = {v}\n")


def load_store(directory) -> ChunkedKVStore:
    with open(os.path.join(directory, "manifest.txt"), encoding="utf-8") as f:
        fields = {}
        for line in f:
            if "=" in line:
                k, _, v = line.partition("=")
                fields[k.strip()] = v.strip()
    keys = read_kvt(os.path.join(directory, "keys.kvt"))
    values = read_kvt(os.path.join(directory, "values.kvt"))
    residual = fields["residual_scheme"]
    return build_store(
        keys,
        values,
        chunk_size=int(fields["chunk_size"]),
        landmark_scheme=scheme_from_string(fields["landmark_scheme"]),
        residual_scheme=scheme_from_string(residual) if residual else None,
        budget=BudgetConfig(
            sparse_fraction=float(fields["sparse_fraction"]),
            outlier_tokens=int(fields["outlier_tokens"]),
            local_window=int(fields["local_window"]),
        ),
        slow_tier_scheme=scheme_from_string(fields["slow_tier_scheme"]),
    )


def build_store(
    keys: np.ndarray,
    values: np.ndarray,
    chunk_size: int,
    landmark_scheme: SchemeDescriptor,
    residual_scheme: SchemeDescriptor | None = None,
    budget: BudgetConfig = BudgetConfig(),
    slow_tier_scheme: SchemeDescriptor | None = None,
) -> ChunkedKVStore:
    """Build a tiered store from raw per-head keys/values ([n, D] or [H, n, D]).

    Landmarks are per-chunk channel-wise key means, quantized by
    `landmark_scheme`; residuals (if requested) quantize key minus the
    dequantized landmark of its chunk.
    """
    keys = _normalize_heads(keys, "keys")
    values = _normalize_heads(values, "values")
    if keys.shape != values.shape:
        raise ValueError(f"keys {keys.shape} and values {values.shape} differ")
    if keys.shape[1] < 1:
        raise ValueError("store requires at least one token")
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    return ChunkedKVStore(
        keys=keys,
        values=values,
        chunk_size=chunk_size,
        landmark_scheme=landmark_scheme,
        residual_scheme=residual_scheme,
        budget=budget,
        slow_tier_scheme=slow_tier_scheme if slow_tier_scheme is not None else scheme_none(),
    )
