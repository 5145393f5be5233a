"""Analytical PPA model and RL-driven design-space search for tiled transformer accelerators."""

from ._core import (
    ParseError,
    ValidationError,
    compaction_factor,
    evaluate_initial,
    gen_workload,
    kv_bytes_per_token,
    page_count,
    powerlaw_fit,
    presets,
    process_nodes,
    run_node,
)

__all__ = [
    "ParseError",
    "ValidationError",
    "compaction_factor",
    "evaluate_initial",
    "gen_workload",
    "kv_bytes_per_token",
    "page_count",
    "powerlaw_fit",
    "presets",
    "process_nodes",
    "run_node",
]
