"""Desk-scale laboratory for KV-cache offloading policies."""

from .attention import AttentionOutput, full_attention, full_attention_heads, sparse_attention
from .kvstore import BudgetConfig, ChunkedKVStore, TierTraffic, build_store, load_store
from .numerics import (
    KvtFormatError,
    SvdFactors,
    matmul,
    randomized_hadamard,
    randomized_hadamard_inverse,
    read_kvt,
    softmax_rows,
    truncated_svd,
    write_kvt,
)
from .quantization import (
    HiggsCodebook,
    QuantizedBlock,
    SchemeDescriptor,
    bits_per_key,
    build_higgs_codebook,
    dequantize,
    fp8_e4m3_quantize,
    higgs_quantize,
    nvfp4_quantize,
    quantize,
    scheme_fp8,
    scheme_from_string,
    scheme_higgs,
    scheme_none,
    scheme_nvfp4,
    scheme_svd,
    scheme_to_string,
)
from .selection import (
    SelectionResult,
    approx_topk_residual,
    oracle_select,
    recall,
    residual_scores,
    select_by_landmarks,
)
from .text2json import (
    EntryRecord,
    ScoreReport,
    Text2JsonInstance,
    extraction_prompt,
    generate_instance,
    score,
)
from .workload import GeneratedWorkload, WorkloadSpec, generate, import_kvt

__all__ = [
    "AttentionOutput",
    "BudgetConfig",
    "ChunkedKVStore",
    "EntryRecord",
    "GeneratedWorkload",
    "HiggsCodebook",
    "KvtFormatError",
    "QuantizedBlock",
    "SchemeDescriptor",
    "ScoreReport",
    "SelectionResult",
    "SvdFactors",
    "Text2JsonInstance",
    "TierTraffic",
    "WorkloadSpec",
    "approx_topk_residual",
    "bits_per_key",
    "build_higgs_codebook",
    "build_store",
    "dequantize",
    "extraction_prompt",
    "fp8_e4m3_quantize",
    "full_attention",
    "full_attention_heads",
    "generate",
    "generate_instance",
    "higgs_quantize",
    "import_kvt",
    "load_store",
    "matmul",
    "nvfp4_quantize",
    "oracle_select",
    "quantize",
    "randomized_hadamard",
    "randomized_hadamard_inverse",
    "read_kvt",
    "recall",
    "residual_scores",
    "scheme_fp8",
    "scheme_from_string",
    "scheme_higgs",
    "scheme_none",
    "scheme_nvfp4",
    "scheme_svd",
    "scheme_to_string",
    "score",
    "select_by_landmarks",
    "softmax_rows",
    "sparse_attention",
    "truncated_svd",
    "write_kvt",
]

__version__ = "0.1.0"
