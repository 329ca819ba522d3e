#!/usr/bin/env python3
"""Key-compression fidelity table: low-rank factorization vs quantizers.

Measures, on a Gaussian key matrix, the RMS error that each compression
scheme induces in query-key dot products (the quantity chunk selection
ranks by), together with its storage cost in bits per value.

Usage:
    python scripts/key_compression_error.py --n-keys 4096 --dim 1024
"""

import argparse

import numpy as np

from kvlab.numerics import truncated_svd
from kvlab.quantization import (
    dequantize,
    quantize,
    scheme_fp8,
    scheme_higgs,
    scheme_nvfp4,
    scheme_svd,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-keys", type=int, default=4096)
    ap.add_argument("--dim", type=int, default=1024)
    ap.add_argument("--n-queries", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--svd-ranks", default="160,256,512")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    keys = rng.standard_normal((args.n_keys, args.dim)).astype(np.float32)
    queries = rng.standard_normal((args.n_queries, args.dim)).astype(np.float32)

    def score_rms(reconstructed):
        err = (reconstructed - keys).astype(np.float32)
        return float(np.sqrt(np.mean((err @ queries.T) ** 2)))

    rows = []
    for rank in (int(r) for r in args.svd_ranks.split(",")):
        rec = truncated_svd(keys, rank).reconstruct()
        bits = float(scheme_svd(rank, args.dim).bits_per_value)
        rows.append((f"svd rank {rank}", bits, score_rms(rec)))
    for scheme in (scheme_fp8(), scheme_nvfp4(), scheme_higgs(4)):
        rec = dequantize(quantize(keys, scheme))
        rows.append((scheme.label(), float(scheme.bits_per_value), score_rms(rec)))

    print(f"{'scheme':16s} {'bits/value':>10s} {'score-error RMS':>16s}")
    for name, bits, err in rows:
        print(f"{name:16s} {bits:10.3f} {err:16.4f}")


if __name__ == "__main__":
    main()
