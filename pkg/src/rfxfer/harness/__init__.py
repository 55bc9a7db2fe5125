"""Experiment orchestration: sweep planning, execution, records, reports, CLI."""

from .records import (
    RECORD_FIELDS,
    append_record,
    canonicalize_records,
    job_key,
    load_records,
    to_transfer_records,
)
from .reports import emit_heatmap, emit_scatter_fit
from .sweep import SweepConfig, SweepPlan, plan_sweep, run_sweep

__all__ = [
    "RECORD_FIELDS",
    "SweepConfig",
    "SweepPlan",
    "append_record",
    "canonicalize_records",
    "emit_heatmap",
    "emit_scatter_fit",
    "job_key",
    "load_records",
    "plan_sweep",
    "run_sweep",
    "to_transfer_records",
]
