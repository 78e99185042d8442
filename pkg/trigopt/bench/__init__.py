"""Bench harness: run configurations, results records, plot data and comparisons."""

from trigopt.bench.compare import ComparisonRow, ComparisonTable, compare
from trigopt.bench.config import RunConfig, split_overrides
from trigopt.bench.plot_data import emit_plot_data, read_series
from trigopt.bench.records import ResultsRecord, load_record, stable_view, write_record
from trigopt.bench.runner import ScenarioProblem, build_scenario, load_solution, run

__all__ = [
    "ComparisonRow",
    "ComparisonTable",
    "ResultsRecord",
    "RunConfig",
    "ScenarioProblem",
    "build_scenario",
    "compare",
    "emit_plot_data",
    "load_record",
    "load_solution",
    "read_series",
    "run",
    "split_overrides",
    "stable_view",
    "write_record",
]
