"""Command-line entry points: gen-workload, run-sweep, gen-text2json,
score-text2json, import-kvt."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import harness, text2json, workload
from .numerics import read_kvt


def _cmd_gen_workload(args) -> int:
    spec = workload.WorkloadSpec(
        n_tokens=args.n_tokens,
        kv_heads=args.kv_heads,
        query_heads_per_group=args.query_heads_per_group,
        head_dim=args.head_dim,
        n_needles=args.n_needles,
        needle_alignment=args.needle_alignment,
        noise_scale=args.noise_scale,
        decode_steps=args.decode_steps,
        seed=args.seed,
        tail_exclude=args.tail_exclude,
    )
    wl = workload.generate(spec)
    workload.save_workload(wl, args.out)
    print(f"wrote workload to {args.out} (keys {wl.keys.shape}, steps {spec.decode_steps})")
    return 0


def _cmd_run_sweep(args) -> int:
    cfg = harness.load_config(args.config)
    if args.output:
        cfg = replace(cfg, output=args.output)
    if args.seeds:
        cfg = replace(cfg, seeds=harness._parse_seeds(args.seeds))
    if args.plot_dir:
        cfg = replace(cfg, plot_dir=args.plot_dir)
    rows = harness.run_sweep(cfg)
    harness.emit_csv(rows, cfg.output)
    if cfg.plot_dir:
        harness.emit_plot_data(rows, cfg.plot_dir)
    print(f"wrote {len(rows)} rows to {cfg.output}")
    return 0


def _cmd_gen_text2json(args) -> int:
    inst = text2json.generate_instance(args.subset, args.seed, args.filler_corpus)
    text2json.save_instance(inst, args.out_prompt, args.out_gold)
    print(
        f"wrote {args.subset} instance: {len(inst.gold)} entries, "
        f"prompt {len(inst.prompt_text)} chars"
    )
    if args.print_extraction_prompt:
        print(text2json.extraction_prompt(args.subset))
    return 0


def _cmd_score_text2json(args) -> int:
    with open(args.prediction, encoding="utf-8") as f:
        prediction = f.read()
    gold = text2json.load_gold(args.gold)
    report = text2json.score(prediction, gold)
    payload = json.dumps(report.to_dict(), indent=1)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(payload + "\n")
    print(payload)
    return 0


def _cmd_import_kvt(args) -> int:
    arr = read_kvt(args.path)
    stats = (
        f"dims={list(arr.shape)} values={arr.size} "
        f"min={arr.min() if arr.size else float('nan'):.6g} "
        f"max={arr.max() if arr.size else float('nan'):.6g} "
        f"mean={arr.mean() if arr.size else float('nan'):.6g}"
    )
    print(stats)
    if args.out:
        np.save(args.out, arr)
        print(f"saved numpy copy to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kvlab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-workload", help="generate a planted-needle workload")
    g.add_argument("--out", required=True)
    g.add_argument("--n-tokens", type=int, required=True)
    g.add_argument("--kv-heads", type=int, default=1)
    g.add_argument("--query-heads-per-group", type=int, default=1)
    g.add_argument("--head-dim", type=int, default=64)
    g.add_argument("--n-needles", type=int, default=16)
    g.add_argument("--needle-alignment", type=float, default=0.9)
    g.add_argument("--noise-scale", type=float, default=1.0)
    g.add_argument("--decode-steps", type=int, default=1)
    g.add_argument("--tail-exclude", type=int, default=64)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=_cmd_gen_workload)

    r = sub.add_parser("run-sweep", help="run a scheme/budget sweep from an INI config")
    r.add_argument("--config", required=True)
    r.add_argument("--output", default=None)
    r.add_argument("--seeds", default=None, help="override, e.g. 0:50 or 1,2,3")
    r.add_argument("--plot-dir", default=None)
    r.set_defaults(func=_cmd_run_sweep)

    t = sub.add_parser("gen-text2json", help="generate a structured-extraction instance")
    t.add_argument("--subset", choices=text2json.SUBSETS, required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out-prompt", required=True)
    t.add_argument("--out-gold", required=True)
    t.add_argument("--filler-corpus", default=None)
    t.add_argument("--print-extraction-prompt", action="store_true")
    t.set_defaults(func=_cmd_gen_text2json)

    s = sub.add_parser("score-text2json", help="score a prediction file against gold")
    s.add_argument("--prediction", required=True)
    s.add_argument("--gold", required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_score_text2json)

    i = sub.add_parser("import-kvt", help="validate and summarize a KVT1 tensor file")
    i.add_argument("path")
    i.add_argument("--out", default=None, help="optional .npy copy")
    i.set_defaults(func=_cmd_import_kvt)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:  # nonzero exit on any failure, with the cause chain
        print(f"error: {e}", file=sys.stderr)
        cause = e.__cause__
        while cause is not None:
            print(f"  caused by: {cause}", file=sys.stderr)
            cause = cause.__cause__
        return 1


if __name__ == "__main__":
    sys.exit(main())
