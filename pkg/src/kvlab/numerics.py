"""Dense float32 linear algebra primitives and the KVT1 tensor file format.

All public operations consume and produce row-major float32 numpy arrays
("tensors") and guarantee finite outputs. Operations are pure; arrays are
never mutated in place, so concurrent use is safe.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

KVT_MAGIC = b"KVT1"

# Guard against absurd extents before allocating (16 GiB of float32).
_MAX_KVT_ELEMENTS = 1 << 32


class KvtFormatError(ValueError):
    """Raised when a KVT1 file is malformed (bad magic, truncation, overflow)."""


def as_f32(x, name: str = "tensor") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float32)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def assert_finite(x: np.ndarray, name: str = "result") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of two 2-D float32 tensors.

    Summation order is whatever the linked BLAS uses, which is fixed for a
    given build, so results are bit-reproducible run to run.
    """
    a = as_f32(a, "a")
    b = as_f32(b, "b")
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return assert_finite(a @ b, "matmul result")


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction. Each row sums to 1."""
    x = as_f32(x, "x")
    if x.ndim != 2:
        raise ValueError(f"softmax_rows expects a 2-D tensor, got shape {x.shape}")
    if x.shape[1] == 0:
        raise ValueError("softmax of an empty row is undefined")
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return (e / e.sum(axis=1, keepdims=True)).astype(np.float32)


@dataclass(frozen=True)
class SvdFactors:
    """Rank-r factorization: reconstruct() == left @ right, left [n, r], right [r, D].

    Rows of `right` are orthonormal; `left` carries the singular values.
    """

    left: np.ndarray
    right: np.ndarray
    rank: int

    def reconstruct(self) -> np.ndarray:
        return matmul(self.left, self.right)


def truncated_svd(k: np.ndarray, rank: int) -> SvdFactors:
    """Best rank-`rank` factorization of a 2-D tensor in the Frobenius norm.

    Backed by LAPACK (deterministic, internal iteration caps); a convergence
    failure is reported as a ValueError rather than looping.
    """
    k = as_f32(k, "k")
    if k.ndim != 2:
        raise ValueError(f"truncated_svd expects a 2-D tensor, got shape {k.shape}")
    n, d = k.shape
    if not 1 <= rank <= min(n, d):
        raise ValueError(f"rank {rank} out of range [1, {min(n, d)}]")
    try:
        u, s, vt = np.linalg.svd(k.astype(np.float64), full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise ValueError(f"SVD did not converge within the iteration cap: {e}") from e
    left = (u[:, :rank] * s[:rank]).astype(np.float32)
    right = vt[:rank].astype(np.float32)
    return SvdFactors(left=left, right=right, rank=rank)


def _is_power_of_two(g: int) -> bool:
    return g >= 1 and (g & (g - 1)) == 0


def hadamard_signs(g: int, seed: int) -> np.ndarray:
    """Seeded Rademacher sign vector of length g (values +-1, float32)."""
    rng = np.random.default_rng(seed)
    return (rng.integers(0, 2, size=g) * 2 - 1).astype(np.float32)


def fwht_rows(x: np.ndarray) -> np.ndarray:
    """Orthonormal Walsh-Hadamard transform of each row of x [m, g]."""
    g = x.shape[-1]
    if not _is_power_of_two(g):
        raise ValueError(f"row length {g} is not a power of two")
    y = x.astype(np.float32, copy=True)
    shape = y.shape
    h = 1
    while h < g:
        y = y.reshape(-1, g // (2 * h), 2, h)
        a = y[:, :, 0, :] + y[:, :, 1, :]
        b = y[:, :, 0, :] - y[:, :, 1, :]
        y = np.stack([a, b], axis=2).reshape(shape)
        h *= 2
    return y / np.float32(np.sqrt(g))


def randomized_hadamard(x: np.ndarray, seed: int) -> np.ndarray:
    """Seeded sign flips followed by the orthonormal Walsh-Hadamard transform.

    Norm-preserving; the inverse is the transform followed by the same signs.
    """
    x = as_f32(x, "x")
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {x.shape}")
    if not _is_power_of_two(x.shape[0]):
        raise ValueError(f"length {x.shape[0]} is not a power of two")
    signs = hadamard_signs(x.shape[0], seed)
    return fwht_rows((x * signs)[None, :])[0]


def randomized_hadamard_inverse(y: np.ndarray, seed: int) -> np.ndarray:
    """Inverse of randomized_hadamard for the same seed."""
    y = as_f32(y, "y")
    if y.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {y.shape}")
    signs = hadamard_signs(y.shape[0], seed)
    return fwht_rows(y[None, :])[0] * signs


def write_kvt(path, arr: np.ndarray) -> None:
    """Write a tensor in KVT1 format: magic, u32 ndim, u64 extents, f32 payload.

    All integers and floats are little-endian.
    """
    arr = np.asarray(arr, dtype="<f4", order="C")
    with open(path, "wb") as f:
        f.write(KVT_MAGIC)
        f.write(struct.pack("<I", arr.ndim))
        for extent in arr.shape:
            f.write(struct.pack("<Q", extent))
        f.write(arr.tobytes(order="C"))


def read_kvt(path) -> np.ndarray:
    """Read a KVT1 tensor. Raises KvtFormatError on any malformation."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != KVT_MAGIC:
        raise KvtFormatError(f"bad magic {blob[:4]!r}, expected {KVT_MAGIC!r}")
    if len(blob) < 8:
        raise KvtFormatError("truncated header")
    (ndim,) = struct.unpack_from("<I", blob, 4)
    offset = 8
    if len(blob) < offset + 8 * ndim:
        raise KvtFormatError("truncated extent list")
    extents = struct.unpack_from(f"<{ndim}Q", blob, offset) if ndim else ()
    offset += 8 * ndim
    count = 1
    for e in extents:
        count *= e
    if count > _MAX_KVT_ELEMENTS:
        raise KvtFormatError(f"extent product {count} exceeds supported size")
    payload = blob[offset:]
    if len(payload) != 4 * count:
        raise KvtFormatError(
            f"payload holds {len(payload)} bytes, extents require {4 * count}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(extents)
    return arr.astype(np.float32).reshape(extents)
