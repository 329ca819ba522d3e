"""Synthetic planted-needle workloads and KVT1 tensor import.

Each decode step gets its own disjoint set of needle positions whose keys
are rewritten to align with that step's queries at a configurable cosine,
so the exact-dot-product top-k is known by construction. Generation is a
pure function of its WorkloadSpec (byte-for-byte reproducible).
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .numerics import read_kvt, write_kvt


@dataclass(frozen=True)
class WorkloadSpec:
    n_tokens: int
    kv_heads: int = 1
    query_heads_per_group: int = 1
    head_dim: int = 64
    n_needles: int = 16
    needle_alignment: float = 0.9
    noise_scale: float = 1.0
    decode_steps: int = 1
    seed: int = 0
    # Needles never land in the final `tail_exclude` positions, so local-window
    # residency cannot trivially solve the retrieval task.
    tail_exclude: int = 64

    def __post_init__(self):
        if not 0 < self.needle_alignment <= 1:
            raise ValueError(f"needle_alignment {self.needle_alignment} not in (0, 1]")
        if self.noise_scale <= 0:
            raise ValueError("noise_scale must be positive")
        if self.n_needles > self.n_tokens:
            raise ValueError("more needles than tokens")
        placeable = self.n_tokens - self.tail_exclude
        if self.decode_steps * self.n_needles > placeable:
            raise ValueError(
                f"{self.decode_steps} steps x {self.n_needles} needles exceed "
                f"{placeable} placeable positions"
            )


@dataclass
class GeneratedWorkload:
    spec: WorkloadSpec
    keys: np.ndarray  # [heads, n, D]
    values: np.ndarray  # [heads, n, D]
    queries: np.ndarray  # [steps, heads, group, D]
    needle_ids: list  # per step, np.ndarray of token ids


def generate(spec: WorkloadSpec) -> GeneratedWorkload:
    """Background keys are iid N(0, noise_scale^2 * I/D); each step's needle
    keys become alpha * (unit summed query direction) + sqrt(1-alpha^2) * noise."""
    rng = np.random.default_rng(spec.seed)
    h, n, d, g = spec.kv_heads, spec.n_tokens, spec.head_dim, spec.query_heads_per_group
    coord = spec.noise_scale / np.sqrt(d)

    keys = (rng.standard_normal((h, n, d)) * coord).astype(np.float32)
    values = (rng.standard_normal((h, n, d)) / np.sqrt(d)).astype(np.float32)

    placeable = rng.permutation(n - spec.tail_exclude)
    needle_ids = [
        np.sort(placeable[t * spec.n_needles : (t + 1) * spec.n_needles]).astype(np.int64)
        for t in range(spec.decode_steps)
    ]

    alpha = spec.needle_alignment
    mix = np.sqrt(1.0 - alpha * alpha)
    queries = np.empty((spec.decode_steps, h, g, d), dtype=np.float32)
    for t in range(spec.decode_steps):
        q = rng.standard_normal((h, g, d)).astype(np.float32)
        queries[t] = q
        for head in range(h):
            u = q[head].sum(axis=0)
            u = u / np.linalg.norm(u)
            eps = (rng.standard_normal((spec.n_needles, d)) * coord).astype(np.float32)
            keys[head, needle_ids[t]] = (alpha * u + mix * eps).astype(np.float32)

    return GeneratedWorkload(
        spec=spec, keys=keys, values=values, queries=queries, needle_ids=needle_ids
    )


def import_kvt(path) -> np.ndarray:
    """Load one tensor from a KVT1 file (lossless)."""
    return read_kvt(path)


def save_workload(wl: GeneratedWorkload, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    write_kvt(os.path.join(directory, "keys.kvt"), wl.keys)
    write_kvt(os.path.join(directory, "values.kvt"), wl.values)
    write_kvt(os.path.join(directory, "queries.kvt"), wl.queries)
    meta = {
        "spec": asdict(wl.spec),
        "needle_ids": [ids.tolist() for ids in wl.needle_ids],
    }
    with open(os.path.join(directory, "workload.json"), "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=1, sort_keys=True)


def load_workload(directory) -> GeneratedWorkload:
    with open(os.path.join(directory, "workload.json"), encoding="utf-8") as f:
        meta = json.load(f)
    return GeneratedWorkload(
        spec=WorkloadSpec(**meta["spec"]),
        keys=read_kvt(os.path.join(directory, "keys.kvt")),
        values=read_kvt(os.path.join(directory, "values.kvt")),
        queries=read_kvt(os.path.join(directory, "queries.kvt")),
        needle_ids=[np.asarray(ids, dtype=np.int64) for ids in meta["needle_ids"]],
    )
