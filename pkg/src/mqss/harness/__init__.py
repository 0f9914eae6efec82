"""Config loading, seeded trial batches, statistics and the command line."""

from mqss.harness.config import RunSpec, SpecError, load_config, parse_spec
from mqss.harness.trials import StatsReport, oracle_values, run_trial, run_trials, write_outputs

__all__ = [
    "RunSpec",
    "SpecError",
    "StatsReport",
    "load_config",
    "oracle_values",
    "parse_spec",
    "run_trial",
    "run_trials",
    "write_outputs",
]
