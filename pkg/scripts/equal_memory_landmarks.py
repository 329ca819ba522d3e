#!/usr/bin/env python3
"""Equal-memory landmark comparison on the planted-needle workload.

Sweeps the sparse budget for four landmark configurations that all spend
2 bits per key on the fast tier (16-bit @ chunk 8, 4-bit @ chunk 2,
2-bit @ chunk 1) plus the 1.5-bit residual configuration, against the
lossless chunk-1 upper bound. Writes one CSV and per-scheme plot series.

Usage:
    python scripts/equal_memory_landmarks.py --out equal_memory.csv --seeds 0:50
"""

import argparse

from kvlab.harness import (
    ExperimentConfig,
    SchemeSpec,
    _parse_seeds,
    emit_csv,
    emit_plot_data,
    run_sweep,
)
from kvlab.kvstore import BudgetConfig
from kvlab.quantization import scheme_higgs, scheme_none
from kvlab.workload import WorkloadSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="equal_memory.csv")
    ap.add_argument("--plot-dir", default=None)
    ap.add_argument("--seeds", default="0:50")
    ap.add_argument("--n-tokens", type=int, default=8192)
    ap.add_argument("--head-dim", type=int, default=64)
    ap.add_argument("--n-needles", type=int, default=16)
    ap.add_argument("--alignment", type=float, default=0.9)
    args = ap.parse_args()

    workload = WorkloadSpec(
        n_tokens=args.n_tokens,
        head_dim=args.head_dim,
        n_needles=args.n_needles,
        needle_alignment=args.alignment,
    )
    budgets = tuple(
        BudgetConfig(sparse_fraction=f, outlier_tokens=0, local_window=0)
        for f in (0.0039, 0.0078, 0.0156, 0.0312, 0.0625, 0.125)
    )
    schemes = (
        SchemeSpec("oracle_chunk1_16bit", scheme_none(), 1, None, scheme_none()),
        SchemeSpec("bits16_chunk8", scheme_none(), 8, None, scheme_none()),
        SchemeSpec("higgs4_chunk2", scheme_higgs(4), 2, None, scheme_none()),
        SchemeSpec("higgs2_chunk1", scheme_higgs(2), 1, None, scheme_none()),
    )
    cfg = ExperimentConfig(
        workload=workload,
        schemes=schemes,
        budgets=budgets,
        policy="landmark",
        seeds=_parse_seeds(args.seeds),
        output=args.out,
    )
    rows = run_sweep(cfg)

    residual_cfg = ExperimentConfig(
        workload=workload,
        schemes=(
            SchemeSpec(
                "higgs4_chunk8_res1", scheme_higgs(4), 8, scheme_higgs(1), scheme_none()
            ),
        ),
        budgets=budgets,
        policy="residual-topk",
        seeds=_parse_seeds(args.seeds),
        output=args.out,
        candidate_multiplier=8,
    )
    rows += run_sweep(residual_cfg)

    emit_csv(rows, args.out)
    if args.plot_dir:
        emit_plot_data(rows, args.plot_dir)

    print(f"{'scheme':24s} {'bits/key':>8s} {'loaded%':>8s} {'recall':>8s} {'rel_err':>9s}")
    for r in rows:
        print(
            f"{r.scheme_id:24s} {r.bits_per_key:8.2f} {100 * r.loaded_fraction:8.3f} "
            f"{r.recall:8.4f} {r.rel_error:9.2e}"
        )
    print(f"\nwrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
