"""Experiment runner, configuration, provenance ledger and plot tables."""

from scatterlab.harness.config import ExperimentConfig, load_config
from scatterlab.harness.plots import emit_plot_data
from scatterlab.harness.runner import run_experiment
from scatterlab.harness.trace import TraceLedger, TraceRecord, append_trace, read_ledger, replay

__all__ = [
    "ExperimentConfig",
    "TraceLedger",
    "TraceRecord",
    "append_trace",
    "emit_plot_data",
    "load_config",
    "read_ledger",
    "replay",
    "run_experiment",
]
