"""End-to-end acceptance criteria.

Every criterion below runs at its stated scale and tolerance and prints one
PASS line (run with `pytest -v -s tests/test_acceptance.py` to see them).
The planted-needle comparisons (criteria 3-5) share one 200-seed workload
pass computed once per session.
"""

import json
import math
from fractions import Fraction

import numpy as np
import pytest

from kvlab.cli import main as cli_main
from kvlab.kvstore import BudgetConfig, build_store
from kvlab.numerics import truncated_svd
from kvlab.quantization import (
    bits_per_key,
    dequantize,
    fp8_e4m3_quantize,
    quantize,
    scheme_fp8,
    scheme_higgs,
    scheme_none,
    scheme_nvfp4,
)
from kvlab.selection import (
    approx_topk_residual,
    oracle_select,
    recall,
    residual_scores,
    select_by_landmarks,
)
from kvlab.text2json import (
    MAX_ENTRIES,
    MAX_PASSAGES,
    MIN_ENTRIES,
    MIN_PASSAGES,
    SUBSETS,
    generate_instance,
    score,
)
from kvlab.workload import WorkloadSpec, generate

N_SEEDS = 200

NEEDLE_WORKLOAD = dict(
    n_tokens=8192, head_dim=64, n_needles=16, needle_alignment=0.9, decode_steps=1
)
NEEDLE_BUDGET = BudgetConfig(sparse_fraction=0.0156, outlier_tokens=0, local_window=0)

# (landmark scheme, chunk size, residual scheme)
NEEDLE_CONFIGS = {
    "chunk1_16bit": (scheme_none(), 1, None),
    "chunk8_16bit": (scheme_none(), 8, None),
    "higgs2_c1": (scheme_higgs(2), 1, None),
    "higgs4_c2": (scheme_higgs(4), 2, None),
    "higgs1_c1": (scheme_higgs(1), 1, None),
    "higgs4_c8_res1": (scheme_higgs(4), 8, scheme_higgs(1)),
}


@pytest.fixture(scope="module")
def needle_recalls():
    """Mean retrieval recall per configuration over the shared 200-seed
    planted-needle workload at a fixed 1.56% loaded fraction."""
    sums = {name: 0.0 for name in NEEDLE_CONFIGS}
    fractions = set()
    for seed in range(N_SEEDS):
        wl = generate(WorkloadSpec(seed=seed, **NEEDLE_WORKLOAD))
        q = wl.queries[0]
        oracle = oracle_select(wl.keys, q, k=wl.spec.n_needles)
        for name, (landmark, chunk, residual) in NEEDLE_CONFIGS.items():
            store = build_store(
                wl.keys, wl.values, chunk, landmark,
                residual_scheme=residual, budget=NEEDLE_BUDGET,
            )
            if residual is not None:
                k = math.ceil(NEEDLE_BUDGET.sparse_fraction * wl.spec.n_tokens)
                sel = approx_topk_residual(store, q, k, candidate_multiplier=store.n_chunks)
            else:
                sel = select_by_landmarks(store, q, NEEDLE_BUDGET)
            fractions.add(sel.loaded_fraction)
            sums[name] += recall(sel, oracle)
    assert fractions == {128 / 8192}  # every config loads exactly 1.5625%
    return {name: total / N_SEEDS for name, total in sums.items()}


def test_criterion_01_residual_score_decomposition_identity():
    """Scores computed from quantized landmarks plus residuals equal scores
    against reconstructed keys, for every scheme combination."""
    landmarks = [
        scheme_none(), scheme_fp8(), scheme_nvfp4(),
        scheme_higgs(4, group_size=256), scheme_higgs(2, group_size=256),
        scheme_higgs(1, group_size=256),
    ]
    residuals = [
        scheme_none(), scheme_fp8(), scheme_nvfp4(),
        scheme_higgs(2, group_size=256), scheme_higgs(1, group_size=256),
    ]
    rng = np.random.default_rng(0)
    stores = 0
    for lm in landmarks:
        for res in residuals:
            for _ in range(4):
                heads = int(rng.integers(1, 3))
                n = int(rng.integers(40, 80))
                d = 16
                keys = (rng.standard_normal((heads, n, d)) * 0.3).astype(np.float32)
                values = (rng.standard_normal((heads, n, d)) * 0.3).astype(np.float32)
                store = build_store(
                    keys, values, chunk_size=8, landmark_scheme=lm,
                    residual_scheme=res,
                    budget=BudgetConfig(0.2, 0, 0),
                )
                q = rng.standard_normal((heads, 2, d)).astype(np.float32)
                s = residual_scores(store, q)
                direct = np.zeros(n, dtype=np.float64)
                for h in range(heads):
                    for g in range(2):
                        for i in range(n):
                            direct[i] += float(q[h, g] @ store.approx_key(i, head=h))
                tol = 1e-5 * max(1.0, np.abs(direct).max())
                assert np.abs(s - direct).max() <= tol, (lm.kind, res.kind)
                stores += 1
    assert stores == 120
    print(f"\nACCEPTANCE 1: PASS - decomposition identity exact on {stores} stores")


def test_criterion_02_chunk1_lossless_reproduces_oracle():
    for seed in range(100):
        rng = np.random.default_rng(10_000 + seed)
        keys = (rng.standard_normal((1, 512, 32)) * 0.3).astype(np.float32)
        values = (rng.standard_normal((1, 512, 32)) * 0.3).astype(np.float32)
        q = rng.standard_normal((1, 2, 32)).astype(np.float32)
        budget = BudgetConfig(sparse_fraction=0.05, outlier_tokens=0, local_window=0)
        store = build_store(keys, values, 1, scheme_none(), budget=budget)
        sel = select_by_landmarks(store, q, budget)
        oracle = oracle_select(keys, q, k=len(sel.token_ids))
        assert np.array_equal(sel.token_ids, oracle.token_ids), seed
    print("\nACCEPTANCE 2: PASS - chunk-1 lossless selection == oracle on 100 instances")


def test_criterion_03_chunking_hurts_selection(needle_recalls):
    margin = needle_recalls["chunk1_16bit"] - needle_recalls["chunk8_16bit"]
    assert margin > 0.05
    print(
        f"\nACCEPTANCE 3: PASS - chunk-1 recall {needle_recalls['chunk1_16bit']:.4f} "
        f"vs chunk-8 {needle_recalls['chunk8_16bit']:.4f} (margin {margin:.4f} > 0.05)"
    )


def test_criterion_04_equal_memory_ordering(needle_recalls):
    r2, r4, r16 = (
        needle_recalls["higgs2_c1"],
        needle_recalls["higgs4_c2"],
        needle_recalls["chunk8_16bit"],
    )
    assert r2 >= r4 >= r16
    assert needle_recalls["chunk1_16bit"] - r2 <= 0.05
    print(
        f"\nACCEPTANCE 4: PASS - 2bit@1 {r2:.4f} >= 4bit@2 {r4:.4f} >= 16bit@8 "
        f"{r16:.4f}; 2bit@1 within 0.05 of lossless chunk-1 "
        f"({needle_recalls['chunk1_16bit']:.4f})"
    )


def test_criterion_05_residual_config(needle_recalls):
    res = needle_recalls["higgs4_c8_res1"]
    assert res >= needle_recalls["higgs1_c1"]
    assert abs(res - needle_recalls["higgs2_c1"]) <= 0.08
    assert bits_per_key(scheme_higgs(4), 8, scheme_higgs(1)) == Fraction(3, 2)
    print(
        f"\nACCEPTANCE 5: PASS - 4bit@8+1bit residual recall {res:.4f} >= 1bit@1 "
        f"{needle_recalls['higgs1_c1']:.4f}, within 0.08 of 2bit@1 "
        f"{needle_recalls['higgs2_c1']:.4f}; bits_per_key == 1.5"
    )


def test_criterion_06_compression_fidelity_ordering():
    rng = np.random.default_rng(2024)
    keys = rng.standard_normal((4096, 1024)).astype(np.float32)
    queries = rng.standard_normal((1000, 1024)).astype(np.float32)

    def score_rms(reconstructed):
        err = (reconstructed - keys).astype(np.float32)
        return float(np.sqrt(np.mean((err @ queries.T) ** 2)))

    svd_err = {}
    for rank in (160, 256, 512):
        svd_err[rank] = score_rms(truncated_svd(keys, rank).reconstruct())
    fp8_err = score_rms(dequantize(fp8_e4m3_quantize(keys)))
    assert svd_err[160] > fp8_err
    assert svd_err[160] > svd_err[256] > svd_err[512]
    print(
        f"\nACCEPTANCE 6: PASS - score-error RMS: svd160 {svd_err[160]:.3f} > "
        f"fp8 {fp8_err:.3f}; svd 160/256/512 strictly decreasing "
        f"({svd_err[160]:.3f} > {svd_err[256]:.3f} > {svd_err[512]:.3f})"
    )


def test_criterion_07_bit_accounting_constants():
    assert scheme_nvfp4().bits_per_value == Fraction(9, 2)
    higgs_cost = float(scheme_higgs(4, d=2, group_size=1024).bits_per_value)
    assert abs(higgs_cost - 4.02) < 0.02
    assert bits_per_key(scheme_none(), 8) == 2
    assert bits_per_key(scheme_higgs(4), 2) == 2
    assert bits_per_key(scheme_higgs(2), 1) == 2
    assert bits_per_key(scheme_higgs(4), 8, scheme_higgs(1)) == Fraction(3, 2)
    print(
        f"\nACCEPTANCE 7: PASS - nvfp4 4.5, higgs-4bit {higgs_cost:.6f} (~4.02), "
        f"equal-memory triple exactly 2.0, residual config exactly 1.5"
    )


def test_criterion_08_text2json_metric():
    # gold scores 1.0 and bounds hold across subsets/seeds
    for subset in SUBSETS:
        for seed in range(50):
            inst = generate_instance(subset, seed=seed)
            assert MIN_ENTRIES <= len(inst.gold) <= MAX_ENTRIES
            segments = inst.prompt_text.split("\n\n")
            assert MIN_PASSAGES <= len(segments) - len(inst.gold) <= MAX_PASSAGES
            if seed < 5:
                report = score(json.dumps([e.flat() for e in inst.gold]), inst.gold)
                assert report.score == 1.0

    empty = score("[]", generate_instance("doctors", seed=0).gold)
    assert empty.score == 0.0

    # spurious-entry monotonicity over 1000 random perturbations
    pool = [generate_instance(s, seed=i) for i, s in enumerate(SUBSETS * 2)]
    rng = np.random.default_rng(99)
    for trial in range(1000):
        inst = pool[trial % len(pool)]
        records = [e.flat() for e in inst.gold]
        keep = max(1, int(rng.integers(1, len(records) + 1)))
        picked = [dict(records[i]) for i in rng.permutation(len(records))[:keep]]
        if rng.random() < 0.5:  # corrupt one field of one kept entry
            victim = picked[int(rng.integers(len(picked)))]
            field = [k for k in victim if k != "name"][int(rng.integers(2))]
            victim[field] = "corrupted"
        base = score(json.dumps(picked), inst.gold).score
        spoiled = picked + [{"name": f"spurious {trial}", "x": "y"}]
        assert score(json.dumps(spoiled), inst.gold).score < base, trial
    print(
        "\nACCEPTANCE 8: PASS - gold==1.0, empty==0.0, spurious monotonicity x1000, "
        "entry/passage counts within bounds"
    )


SWEEP_CONFIG = """
[workload]
n_tokens = 512
head_dim = 32
n_needles = 4
needle_alignment = 0.9
tail_exclude = 32

[budgets]
sparse_fractions = 0.05, 0.1, 0.2
outlier_tokens = 0
local_window = 0

[run]
policy = landmark
seeds = 0:3
output = {out}

[scheme chunk1]
landmark = none
chunk_size = 1

[scheme higgs4_c2]
landmark = higgs4
chunk_size = 2
"""


def test_criterion_09_end_to_end_determinism(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        cfg = tmp_path / f"{name}.ini"
        cfg.write_text(SWEEP_CONFIG.format(out=out))
        assert cli_main(["run-sweep", "--config", str(cfg)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    print("\nACCEPTANCE 9: PASS - run-sweep emits byte-identical CSV across runs")


def test_criterion_10_recall_budget_monotonicity():
    from kvlab.harness import ExperimentConfig, SchemeSpec, run_sweep

    wl = WorkloadSpec(
        n_tokens=2048, head_dim=64, n_needles=8, needle_alignment=0.9, decode_steps=1
    )
    budgets = tuple(
        BudgetConfig(sparse_fraction=f, outlier_tokens=0, local_window=0)
        for f in (0.0039, 0.0078, 0.0156, 0.0312, 0.0625, 0.125)
    )
    seeds = tuple(range(10))
    landmark_schemes = (
        SchemeSpec("chunk1_16bit", scheme_none(), 1, None, scheme_none()),
        SchemeSpec("chunk8_16bit", scheme_none(), 8, None, scheme_none()),
        SchemeSpec("higgs2_c1", scheme_higgs(2), 1, None, scheme_none()),
        SchemeSpec("higgs4_c2", scheme_higgs(4), 2, None, scheme_none()),
    )
    residual_scheme = (
        SchemeSpec("higgs4_c8_res1", scheme_higgs(4), 8, scheme_higgs(1), scheme_none()),
    )
    runs = [
        ("landmark", landmark_schemes),
        ("residual-topk", residual_scheme),
        ("oracle", (SchemeSpec("oracle", scheme_none(), 1, None, scheme_none()),)),
    ]
    checked = 0
    for policy, schemes in runs:
        rows = run_sweep(
            ExperimentConfig(
                workload=wl, schemes=schemes, budgets=budgets,
                policy=policy, seeds=seeds,
            )
        )
        by_scheme = {}
        for r in rows:
            by_scheme.setdefault(r.scheme_id, []).append(r.recall)
        for scheme_id, series in by_scheme.items():
            assert all(
                a <= b + 1e-12 for a, b in zip(series, series[1:])
            ), (policy, scheme_id, series)
            checked += 1
    print(
        f"\nACCEPTANCE 10: PASS - mean recall non-decreasing across the 6-budget "
        f"grid for {checked} policy/scheme series"
    )
