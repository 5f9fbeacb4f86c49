"""Trace-driven lifetime simulator for SLC storage-class memory with
multi-round page writes between erases.

The package compares a conventional one-write-per-erase SLC device
against a retention-relaxed device that re-programs each page through a
ladder of intermediate voltage-state counts (8, 6, 5, 4, then 2 states),
trading shorter retention on early rounds for several extra page writes
per erase cycle.
"""

from .retention import (
    DriftParams,
    ModeAssignmentTable,
    RetentionCategory,
    StateMode,
    age_bucket,
    assign_mode,
    baseline_table,
    categorize_longevity,
    drift_distance,
    preset_table,
    retention_capacity_hours,
    PRESET_NAMES,
)
from .trace import (
    IORequest,
    LongevityProfile,
    OpKind,
    SyntheticSpec,
    analyze_longevity,
    generate_synthetic,
    read_msr_trace,
    write_msr_trace,
)
from .flash import DeviceConfig, FlashDevice
from .ftl import DeviceDead, Ftl, FtlCounters, RetentionViolation, build_oracle_index
from .engine import PweSnapshot, SimReport, run_trace, run_until_death

__version__ = "0.1.0"

__all__ = [
    "DriftParams",
    "ModeAssignmentTable",
    "RetentionCategory",
    "StateMode",
    "age_bucket",
    "assign_mode",
    "baseline_table",
    "categorize_longevity",
    "drift_distance",
    "preset_table",
    "retention_capacity_hours",
    "PRESET_NAMES",
    "IORequest",
    "LongevityProfile",
    "OpKind",
    "SyntheticSpec",
    "analyze_longevity",
    "generate_synthetic",
    "read_msr_trace",
    "write_msr_trace",
    "DeviceConfig",
    "FlashDevice",
    "DeviceDead",
    "Ftl",
    "FtlCounters",
    "RetentionViolation",
    "build_oracle_index",
    "PweSnapshot",
    "SimReport",
    "run_trace",
    "run_until_death",
    "__version__",
]
