"""Software implementations of the key-compression schemes under study.

FP8 E4M3 (per-slice float32 scales), NVFP4 (E2M1 values, per-16-block E4M3
micro-scales), HIGGS (randomized Hadamard transform + small-dimensional
codebook quantization at 1/2/4 bits), a 16-bit low-rank factorization for
slow-tier keys, and exact rational bit accounting.

All rounding is round-to-nearest-even on the target grid; all ties in
codeword search break toward the lowest index, so every scheme is
deterministic. Quantize/dequantize are pure; codebooks are immutable after
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .numerics import (
    SvdFactors,
    as_f32,
    fwht_rows,
    hadamard_signs,
    truncated_svd,
)

NONE = "none"
FP8_E4M3 = "fp8_e4m3"
NVFP4 = "nvfp4"
HIGGS = "higgs"
SVD = "svd"

# E4M3: 1 sign, 4 exponent bits (bias 7), 3 mantissa bits, max finite 448,
# no infinities. Linear index i -> (exponent i//8, mantissa i%8); index
# parity equals mantissa parity, which is what nearest-even tie-breaks need.
def _e4m3_values() -> np.ndarray:
    vals = np.empty(127, dtype=np.float64)
    for i in range(127):
        e, m = i // 8, i % 8
        vals[i] = m * 2.0**-9 if e == 0 else (1.0 + m / 8.0) * 2.0 ** (e - 7)
    return vals


_E4M3 = _e4m3_values()
_E4M3_MID = (_E4M3[:-1] + _E4M3[1:]) / 2.0
_E4M3_MAX = 448.0

# E2M1 magnitudes (1 sign, 2 exponent, 1 mantissa); index parity == mantissa parity.
_E2M1 = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0], dtype=np.float64)
_E2M1_MID = (_E2M1[:-1] + _E2M1[1:]) / 2.0
_E2M1_MAX = 6.0

NVFP4_BLOCK = 16


def _round_to_grid(mags: np.ndarray, mids: np.ndarray, top: int) -> np.ndarray:
    """Index of the nearest grid value for non-negative magnitudes.

    Exact midpoints round to the even (lower-parity) index, matching IEEE
    round-to-nearest-even on these mantissa layouts.
    """
    idx = np.searchsorted(mids, mags, side="right")
    idx = np.minimum(idx, top)
    low = np.maximum(idx - 1, 0)
    tie = (idx > 0) & (mags == mids[low])
    return np.where(tie & (low % 2 == 0), low, idx)


def _e4m3_encode(mags: np.ndarray) -> np.ndarray:
    mags = np.minimum(np.abs(mags).astype(np.float64), _E4M3_MAX)
    return _round_to_grid(mags, _E4M3_MID, 126)


def _e4m3_nearest(mags: np.ndarray) -> np.ndarray:
    """Nearest E4M3 value (saturating) for non-negative inputs."""
    return _E4M3[_e4m3_encode(mags)]


@dataclass(frozen=True)
class SchemeDescriptor:
    """Identifies a compression scheme plus the parameters that fix its cost.

    `bits_per_value` is the exact amortized storage cost (codes plus any
    scale stream the scheme defines), as a rational. `code_bits` is the
    nominal per-value payload width used for fast-tier per-key accounting;
    it excludes group-scale overhead, matching how landmark memory budgets
    are quoted (16-bit @ chunk 8 == 2 bits per key, and so on).
    """

    kind: str
    d: int = 0
    n: int = 0
    group_size: int = 0
    seed: int = 0
    block_size: int = 0
    rank: int = 0
    dim: int = 0

    @property
    def bits_per_value(self) -> Fraction:
        if self.kind == NONE:
            return Fraction(16)
        if self.kind == FP8_E4M3:
            return Fraction(8)
        if self.kind == NVFP4:
            return Fraction(4) + Fraction(8, self.block_size)
        if self.kind == HIGGS:
            return Fraction(self.n.bit_length() - 1, self.d) + Fraction(16, self.group_size)
        if self.kind == SVD:
            # Per-token low-rank payload at 16 bits; the shared [rank x dim]
            # projection amortizes away over long sequences.
            return Fraction(16 * self.rank, self.dim)
        raise ValueError(f"unknown scheme kind {self.kind!r}")

    @property
    def code_bits(self) -> Fraction:
        if self.kind == NONE:
            return Fraction(16)
        if self.kind == FP8_E4M3:
            return Fraction(8)
        if self.kind == NVFP4:
            return Fraction(4) + Fraction(8, self.block_size)
        if self.kind == HIGGS:
            return Fraction(self.n.bit_length() - 1, self.d)
        if self.kind == SVD:
            return Fraction(16 * self.rank, self.dim)
        raise ValueError(f"unknown scheme kind {self.kind!r}")

    def __post_init__(self):
        if self.kind == HIGGS:
            if self.n < 2 or (self.n & (self.n - 1)) != 0:
                raise ValueError(f"HIGGS codeword count {self.n} must be a power of two")
            if self.group_size < 1 or (self.group_size & (self.group_size - 1)) != 0:
                raise ValueError(f"HIGGS group size {self.group_size} must be a power of two")
        if self.bits_per_value <= 0:
            raise ValueError("bits_per_value must be positive")

    def label(self) -> str:
        if self.kind == HIGGS:
            bits = Fraction(self.n.bit_length() - 1, self.d)
            return f"higgs{bits}" if bits.denominator == 1 else f"higgs{float(bits):g}"
        if self.kind == SVD:
            return f"svd{self.rank}"
        if self.kind == FP8_E4M3:
            return "fp8"
        return self.kind


def scheme_none() -> SchemeDescriptor:
    return SchemeDescriptor(kind=NONE)


def scheme_fp8() -> SchemeDescriptor:
    return SchemeDescriptor(kind=FP8_E4M3)


def scheme_nvfp4() -> SchemeDescriptor:
    return SchemeDescriptor(kind=NVFP4, block_size=NVFP4_BLOCK)


def scheme_higgs(bits: int = 4, d: int = 2, group_size: int = 1024, seed: int = 0) -> SchemeDescriptor:
    """HIGGS at a whole number of bits per value: n = 2**(bits*d) codewords."""
    return SchemeDescriptor(kind=HIGGS, d=d, n=2 ** (bits * d), group_size=group_size, seed=seed)


def scheme_svd(rank: int, dim: int) -> SchemeDescriptor:
    return SchemeDescriptor(kind=SVD, rank=rank, dim=dim)


@dataclass(frozen=True)
class HiggsCodebook:
    """k-means codebook over d-dimensional standard-Gaussian samples.

    Codewords are sorted lexicographically so indices are reproducible.
    """

    d: int
    n: int
    seed: int
    codewords: np.ndarray

    def __post_init__(self):
        if self.codewords.shape != (self.n, self.d):
            raise ValueError("codeword matrix shape does not match (n, d)")


_CODEBOOK_CACHE: dict[tuple[int, int, int], HiggsCodebook] = {}

_KMEANS_SAMPLES = 200_000
_KMEANS_ITERS = 20


def _nearest_codeword(points: np.ndarray, codewords: np.ndarray, chunk: int = 1 << 16) -> np.ndarray:
    """Index of the closest codeword per point; ties go to the lowest index."""
    out = np.empty(len(points), dtype=np.int64)
    csq = (codewords.astype(np.float32) ** 2).sum(axis=1)
    pts = points.astype(np.float32)
    for s in range(0, len(points), chunk):
        blk = pts[s : s + chunk]
        d2 = csq[None, :] - 2.0 * (blk @ codewords.T)
        out[s : s + chunk] = np.argmin(d2, axis=1)
    return out


def build_higgs_codebook(d: int, n: int, seed: int, _cache: bool = True) -> HiggsCodebook:
    """Fit an n-codeword, d-dimensional codebook by seeded Lloyd iterations.

    k-means++ initialization, a fixed iteration count, and deterministic
    handling of empty clusters (the centroid moves to the sample currently
    farthest from its assignment) make the result a pure function of
    (d, n, seed).
    """
    if d not in (1, 2, 4):
        raise ValueError(f"sub-vector dimension {d} not in (1, 2, 4)")
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"codeword count {n} must be a power of two")
    key = (d, n, seed)
    if _cache and key in _CODEBOOK_CACHE:
        return _CODEBOOK_CACHE[key]

    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((_KMEANS_SAMPLES, d)).astype(np.float32)

    # k-means++ seeding
    first = int(rng.integers(_KMEANS_SAMPLES))
    centers = [samples[first].copy()]
    d2 = ((samples - centers[0]) ** 2).sum(axis=1).astype(np.float64)
    for _ in range(n - 1):
        probs = d2 / d2.sum()
        nxt = int(rng.choice(_KMEANS_SAMPLES, p=probs))
        centers.append(samples[nxt].copy())
        d2 = np.minimum(d2, ((samples - samples[nxt]) ** 2).sum(axis=1))
    c = np.stack(centers)

    for _ in range(_KMEANS_ITERS):
        assign = _nearest_codeword(samples, c)
        counts = np.bincount(assign, minlength=n)
        sums = np.zeros((n, d), dtype=np.float64)
        for k in range(d):
            sums[:, k] = np.bincount(assign, weights=samples[:, k], minlength=n)
        updated = np.where(
            counts[:, None] > 0,
            sums / np.maximum(counts, 1)[:, None],
            c.astype(np.float64),
        ).astype(np.float32)
        empties = np.nonzero(counts == 0)[0]
        if len(empties):
            dist_own = ((samples - c[assign]) ** 2).sum(axis=1)
            for j in empties:
                far = int(np.argmax(dist_own))
                updated[j] = samples[far]
                dist_own[far] = -1.0
        c = updated

    order = np.lexsort(c.T[::-1])
    c = np.ascontiguousarray(c[order])
    if len(np.unique(c, axis=0)) != n:
        # Duplicate centroids cannot survive Lloyd on continuous samples;
        # nudge deterministically if it ever happens.
        c = c + np.arange(n, dtype=np.float32)[:, None] * np.float32(1e-7)
    book = HiggsCodebook(d=d, n=n, seed=seed, codewords=c)
    if _cache:
        _CODEBOOK_CACHE[key] = book
    return book


def codebook_for(scheme: SchemeDescriptor) -> HiggsCodebook:
    if scheme.kind != HIGGS:
        raise ValueError("scheme is not HIGGS")
    return build_higgs_codebook(scheme.d, scheme.n, scheme.seed)


def export_codebook(book: HiggsCodebook, tensor_path, header_path) -> None:
    """Write codewords as a KVT1 tensor plus a one-line sidecar header."""
    from .numerics import write_kvt

    write_kvt(tensor_path, book.codewords)
    with open(header_path, "w", encoding="utf-8") as f:
        f.write(f"d={book.d} n={book.n} seed={book.seed}\n")


def import_codebook(tensor_path, header_path) -> HiggsCodebook:
    from .numerics import read_kvt

    with open(header_path, encoding="utf-8") as f:
        parts = dict(kv.split("=") for kv in f.read().split())
    codewords = read_kvt(tensor_path)
    return HiggsCodebook(
        d=int(parts["d"]), n=int(parts["n"]), seed=int(parts["seed"]), codewords=codewords
    )


def _pack_codes(codes: np.ndarray, bits: int) -> np.ndarray:
    """Pack unsigned codes of width `bits` (1/2/4/8) into a byte stream."""
    if 8 % bits != 0:
        raise ValueError(f"unsupported code width {bits}")
    per = 8 // bits
    codes = codes.astype(np.uint8).ravel()
    pad = (-len(codes)) % per
    if pad:
        codes = np.concatenate([codes, np.zeros(pad, dtype=np.uint8)])
    out = np.zeros(len(codes) // per, dtype=np.uint8)
    for j in range(per):
        out |= codes[j::per] << (bits * j)
    return out


def _unpack_codes(buf: np.ndarray, bits: int, count: int) -> np.ndarray:
    per = 8 // bits
    mask = (1 << bits) - 1
    out = np.empty(len(buf) * per, dtype=np.uint8)
    for j in range(per):
        out[j::per] = (buf >> (bits * j)) & mask
    return out[:count]


@dataclass
class QuantizedBlock:
    """Self-describing compressed tensor: packed codes + scales + scheme."""

    scheme: SchemeDescriptor
    codes: np.ndarray
    scales: np.ndarray
    original_dims: tuple
    meta: dict = field(default_factory=dict)

    @property
    def value_count(self) -> int:
        count = 1
        for e in self.original_dims:
            count *= e
        return count

    def stored_bits(self) -> Fraction:
        """Modeled storage footprint in bits, exact as a rational."""
        return self.scheme.bits_per_value * self.value_count


def fp8_e4m3_quantize(x: np.ndarray, scale_axis: int = -1) -> QuantizedBlock:
    """E4M3 encode with one float32 scale per slice along `scale_axis`.

    Scale = max_abs / 448 (1.0 for all-zero slices); values round to the
    nearest representable with even ties and saturate at the format maximum.
    """
    x = as_f32(x, "x")
    axis = scale_axis if scale_axis >= 0 else x.ndim + scale_axis
    max_abs = np.abs(x).max(axis=axis, keepdims=True).astype(np.float32)
    scales = (max_abs / np.float32(_E4M3_MAX)).astype(np.float32)
    scales = np.where(max_abs == 0, np.float32(1.0), scales)
    scaled = (x / scales).astype(np.float32)
    idx = _e4m3_encode(scaled).astype(np.uint8)
    sign = (np.signbit(scaled)).astype(np.uint8)
    codes = (sign << 7) | idx
    return QuantizedBlock(
        scheme=scheme_fp8(),
        codes=codes.ravel(),
        scales=np.squeeze(scales, axis=axis).astype(np.float32),
        original_dims=tuple(x.shape),
        meta={"scale_axis": axis},
    )


def _fp8_dequantize(block: QuantizedBlock) -> np.ndarray:
    axis = block.meta["scale_axis"]
    idx = (block.codes & 0x7F).astype(np.int64)
    sign = np.where((block.codes >> 7) & 1, -1.0, 1.0)
    vals = (_E4M3[idx] * sign).astype(np.float32).reshape(block.original_dims)
    scales = np.expand_dims(block.scales, axis=axis).astype(np.float32)
    return (vals * scales).astype(np.float32)


def nvfp4_quantize(x: np.ndarray) -> QuantizedBlock:
    """E2M1 values in blocks of 16 with an E4M3 scale per block.

    Block scale = nearest E4M3 to max_abs/6 (1.0 for all-zero blocks, the
    smallest E4M3 subnormal if that rounds to zero). Amortized cost is
    exactly 4 + 8/16 = 4.5 bits per value.
    """
    x = as_f32(x, "x")
    flat = x.ravel().astype(np.float64)
    pad = (-len(flat)) % NVFP4_BLOCK
    if pad:
        flat = np.concatenate([flat, np.zeros(pad)])
    blocks = flat.reshape(-1, NVFP4_BLOCK)
    max_abs = np.abs(blocks).max(axis=1)
    qs = _e4m3_nearest(max_abs / _E2M1_MAX)
    qs = np.where(qs == 0.0, _E4M3[1], qs)  # underflow -> smallest subnormal
    qs = np.where(max_abs == 0.0, 1.0, qs)
    scaled = (blocks.astype(np.float32) / qs[:, None].astype(np.float32)).astype(np.float32)
    mags = np.minimum(np.abs(scaled).astype(np.float64), _E2M1_MAX)
    idx = _round_to_grid(mags, _E2M1_MID, 7).astype(np.uint8)
    sign = np.signbit(scaled).astype(np.uint8)
    codes = _pack_codes(((sign << 3) | idx).ravel(), 4)
    return QuantizedBlock(
        scheme=scheme_nvfp4(),
        codes=codes,
        scales=qs.astype(np.float32),
        original_dims=tuple(x.shape),
        meta={"padded": pad},
    )


def _nvfp4_dequantize(block: QuantizedBlock) -> np.ndarray:
    count = block.value_count + block.meta["padded"]
    raw = _unpack_codes(block.codes, 4, count)
    idx = (raw & 0x7).astype(np.int64)
    sign = np.where((raw >> 3) & 1, -1.0, 1.0)
    vals = (_E2M1[idx] * sign).astype(np.float32).reshape(-1, NVFP4_BLOCK)
    out = (vals * block.scales[:, None]).astype(np.float32).ravel()
    return out[: block.value_count].reshape(block.original_dims)


def higgs_quantize(
    x: np.ndarray,
    codebook: HiggsCodebook,
    group_size: int = 1024,
    hadamard_seed: int = 0,
) -> QuantizedBlock:
    """Randomized-Hadamard vector quantization.

    Per group of `group_size` values: apply the seeded transform, record the
    group RMS as a 16-bit scale, normalize, and map each d-sized sub-vector
    to its nearest codeword (ties to the lowest index). Amortized cost is
    log2(n)/d + 16/group_size bits per value.
    """
    x = as_f32(x, "x")
    if group_size < 1 or (group_size & (group_size - 1)) != 0:
        raise ValueError(f"group size {group_size} must be a power of two")
    if group_size % codebook.d != 0:
        raise ValueError("group size must be divisible by the codebook dimension")
    flat = x.ravel()
    pad = (-len(flat)) % group_size
    if pad:
        flat = np.concatenate([flat, np.zeros(pad, dtype=np.float32)])
    groups = flat.reshape(-1, group_size)
    signs = hadamard_signs(group_size, hadamard_seed)
    rotated = fwht_rows(groups * signs)
    rms = np.sqrt((rotated.astype(np.float64) ** 2).mean(axis=1))
    scales16 = rms.astype(np.float16)
    scales16 = np.where(scales16 == 0, np.float16(np.finfo(np.float16).tiny), scales16)
    scales = scales16.astype(np.float32)
    normalized = (rotated / scales[:, None]).reshape(-1, codebook.d)
    idx = _nearest_codeword(normalized, codebook.codewords)
    bits = codebook.n.bit_length() - 1
    scheme = SchemeDescriptor(
        kind=HIGGS, d=codebook.d, n=codebook.n, group_size=group_size, seed=codebook.seed
    )
    return QuantizedBlock(
        scheme=scheme,
        codes=_pack_codes(idx, bits) if bits <= 8 else idx.astype(np.uint16),
        scales=scales,
        original_dims=tuple(x.shape),
        meta={"padded": pad, "hadamard_seed": hadamard_seed},
    )


def _higgs_dequantize(block: QuantizedBlock) -> np.ndarray:
    s = block.scheme
    book = build_higgs_codebook(s.d, s.n, s.seed)
    count = block.value_count + block.meta["padded"]
    bits = s.n.bit_length() - 1
    if bits <= 8:
        idx = _unpack_codes(block.codes, bits, count // s.d).astype(np.int64)
    else:
        idx = block.codes.astype(np.int64)
    vq = book.codewords[idx].reshape(-1, s.group_size)
    # Renormalize the codeword sequence to unit RMS so the stored scale is
    # the RMS of the reconstruction; re-quantizing a decoded block then
    # reproduces codes and scales exactly.
    rms = np.sqrt((vq.astype(np.float64) ** 2).mean(axis=1))
    factor = np.where(rms > 0, 1.0 / rms, 1.0)
    rotated = vq * (factor * block.scales.astype(np.float64))[:, None].astype(np.float32)
    signs = hadamard_signs(s.group_size, block.meta["hadamard_seed"])
    out = (fwht_rows(rotated) * signs).ravel()
    return out[: block.value_count].reshape(block.original_dims).astype(np.float32)


def _none_quantize(x: np.ndarray) -> QuantizedBlock:
    x = as_f32(x, "x")
    return QuantizedBlock(
        scheme=scheme_none(),
        codes=x.ravel().view(np.uint8).copy(),
        scales=np.empty(0, dtype=np.float32),
        original_dims=tuple(x.shape),
    )


def _svd_quantize(x: np.ndarray, scheme: SchemeDescriptor) -> QuantizedBlock:
    x = as_f32(x, "x")
    if x.ndim != 2:
        raise ValueError("SVD scheme expects a 2-D tensor")
    factors = truncated_svd(x, scheme.rank)
    left16 = factors.left.astype(np.float16)
    right16 = factors.right.astype(np.float16)
    payload = np.concatenate([left16.ravel(), right16.ravel()]).view(np.uint8).copy()
    return QuantizedBlock(
        scheme=SchemeDescriptor(kind=SVD, rank=scheme.rank, dim=x.shape[1]),
        codes=payload,
        scales=np.empty(0, dtype=np.float32),
        original_dims=tuple(x.shape),
        meta={"rows": x.shape[0]},
    )


def _svd_dequantize(block: QuantizedBlock) -> np.ndarray:
    n, d = block.original_dims
    r = block.scheme.rank
    halves = block.codes.view(np.float16)
    left = halves[: n * r].astype(np.float32).reshape(n, r)
    right = halves[n * r :].astype(np.float32).reshape(r, d)
    return (left @ right).astype(np.float32)


def quantize(x: np.ndarray, scheme: SchemeDescriptor) -> QuantizedBlock:
    """Dispatch to the scheme's encoder."""
    if scheme.kind == NONE:
        return _none_quantize(x)
    if scheme.kind == FP8_E4M3:
        return fp8_e4m3_quantize(x)
    if scheme.kind == NVFP4:
        return nvfp4_quantize(x)
    if scheme.kind == HIGGS:
        book = build_higgs_codebook(scheme.d, scheme.n, scheme.seed)
        return higgs_quantize(x, book, scheme.group_size, hadamard_seed=scheme.seed)
    if scheme.kind == SVD:
        return _svd_quantize(x, scheme)
    raise ValueError(f"unknown scheme kind {scheme.kind!r}")


def dequantize(block: QuantizedBlock) -> np.ndarray:
    """Invert the scheme's encoder. NONE blocks return the input verbatim."""
    kind = block.scheme.kind
    if kind == NONE:
        expected = 4 * block.value_count
        if block.codes.nbytes != expected:
            raise ValueError(f"corrupted stream: {block.codes.nbytes} bytes, expected {expected}")
        return block.codes.view(np.float32).reshape(block.original_dims).copy()
    if kind == FP8_E4M3:
        if len(block.codes) != block.value_count:
            raise ValueError("corrupted stream: code count does not match dims")
        return _fp8_dequantize(block)
    if kind == NVFP4:
        need = (block.value_count + block.meta["padded"]) // 2
        if len(block.codes) != need:
            raise ValueError("corrupted stream: code count does not match dims")
        return _nvfp4_dequantize(block)
    if kind == HIGGS:
        return _higgs_dequantize(block)
    if kind == SVD:
        return _svd_dequantize(block)
    raise ValueError(f"unknown scheme kind {kind!r}")


def scheme_to_string(scheme: SchemeDescriptor) -> str:
    """Compact textual form, inverse of scheme_from_string."""
    if scheme.kind == NONE:
        return "none"
    if scheme.kind == FP8_E4M3:
        return "fp8"
    if scheme.kind == NVFP4:
        return "nvfp4"
    if scheme.kind == HIGGS:
        return f"higgs:d={scheme.d},n={scheme.n},group={scheme.group_size},seed={scheme.seed}"
    if scheme.kind == SVD:
        return f"svd:rank={scheme.rank},dim={scheme.dim}"
    raise ValueError(f"unknown scheme kind {scheme.kind!r}")


def scheme_from_string(text: str) -> SchemeDescriptor:
    """Parse scheme specs like `none`, `fp8`, `nvfp4`, `higgs4`, `higgs2`,
    `higgs1`, `higgs:d=2,n=256,group=1024,seed=0`, or `svd:rank=160,dim=1024`.

    `higgsB` is shorthand for the d=2 codebook at B bits per value with the
    default group size and seed 0.
    """
    text = text.strip().lower()
    if text in ("none", "16bit", "fp16"):
        return scheme_none()
    if text in ("fp8", "fp8_e4m3", "e4m3"):
        return scheme_fp8()
    if text == "nvfp4":
        return scheme_nvfp4()
    if text.startswith("higgs"):
        rest = text[len("higgs") :]
        if rest and ":" not in rest:
            return scheme_higgs(bits=int(rest))
        params = dict(kv.split("=") for kv in rest.lstrip(":").split(",")) if rest.lstrip(":") else {}
        return SchemeDescriptor(
            kind=HIGGS,
            d=int(params.get("d", 2)),
            n=int(params.get("n", 256)),
            group_size=int(params.get("group", 1024)),
            seed=int(params.get("seed", 0)),
        )
    if text.startswith("svd"):
        rest = text[len("svd") :]
        if rest and ":" not in rest:
            raise ValueError("svd scheme needs rank and dim, e.g. svd:rank=160,dim=1024")
        params = dict(kv.split("=") for kv in rest.lstrip(":").split(","))
        return scheme_svd(rank=int(params["rank"]), dim=int(params["dim"]))
    raise ValueError(f"unrecognized scheme spec {text!r}")


def bits_per_key(
    landmark_scheme: SchemeDescriptor,
    chunk_size: int,
    residual_scheme: SchemeDescriptor | None = None,
) -> Fraction:
    """Fast-tier bits per key coordinate for a landmark configuration.

    One landmark amortizes over `chunk_size` keys; a residual adds its full
    per-value width. Uses nominal code widths, so the equal-memory
    identities (16b@8 == 4b@2 == 2b@1 == 2 bits, 4b@8 + 1b == 1.5 bits)
    come out exact.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    total = landmark_scheme.code_bits / chunk_size
    if residual_scheme is not None:
        total += residual_scheme.code_bits
    return total
