"""Seeded trial batches, their statistics, and the files they produce.

Trial ``k`` of a spec with master seed ``s`` draws every random stream from
``mqss.rng.derive_rng(s, k, label)``, so a trial replays the same way alone
or inside a batch, serially or in a worker pool.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mqss import adversary, oracle, qsscm, ssqi
from mqss.harness.config import RunSpec
from mqss.parties import Phase
from mqss.rng import Streams, derive_rng
from mqss.transcript import Transcript, header_line

STATS_SCHEMA = "mqss.stats"
STATS_VERSION = 1
Z_95 = 1.959963984540054


@dataclass
class TrialResult:
    trial: int
    aborted: bool
    metrics: dict[str, float]
    transcript: Transcript


@dataclass
class MetricSummary:
    mean: float
    std: float
    ci95: tuple[float, float]
    count: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "ci95": list(self.ci95), "count": self.count}


def summarize(values) -> MetricSummary | None:
    """Mean, sample std (0 for a single value) and a normal-approximation 95% CI."""
    v = np.asarray(list(values), dtype=float)
    if len(v) == 0:
        return None
    mean = float(np.mean(v))
    std = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
    half = Z_95 * std / math.sqrt(len(v))
    return MetricSummary(mean, std, (mean - half, mean + half), len(v))


def z_score(summary: MetricSummary, predicted: float) -> float | None:
    """(mean - predicted) / (std / sqrt(count)); None when undefined."""
    if summary.std == 0.0:
        return 0.0 if summary.mean == predicted else None
    return (summary.mean - predicted) / (summary.std / math.sqrt(summary.count))


@dataclass
class StatsReport:
    effective_config: dict
    trials_run: int
    complete: bool = True
    error: str | None = None
    metrics: dict[str, MetricSummary] = field(default_factory=dict)
    oracle: dict[str, float] = field(default_factory=dict)
    z_scores: dict[str, float | None] = field(default_factory=dict)
    per_trial: list[dict] = field(default_factory=list)

    @property
    def any_aborted(self) -> bool:
        return any(t["aborted"] for t in self.per_trial)

    def to_dict(self) -> dict:
        return {
            "schema": STATS_SCHEMA,
            "version": STATS_VERSION,
            "complete": self.complete,
            "error": self.error,
            "effective_config": self.effective_config,
            "trials_run": self.trials_run,
            "metrics": {k: v.to_dict() for k, v in sorted(self.metrics.items())},
            "oracle": dict(sorted(self.oracle.items())),
            "z_scores": dict(sorted(self.z_scores.items())),
            "per_trial": self.per_trial,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def trial_message(spec: RunSpec, trial: int) -> np.ndarray:
    if isinstance(spec.message, tuple):
        return np.array(spec.message, dtype=np.int8)
    length = spec.cfg.message_capacity if spec.message is None else spec.message
    return derive_rng(spec.cfg.master_seed, trial, "message").integers(0, 2, size=length).astype(np.int8)


def trial_input(spec: RunSpec, trial: int) -> ssqi.UnknownQubit:
    if spec.input is not None:
        return spec.input
    return ssqi.UnknownQubit.random(derive_rng(spec.cfg.master_seed, trial, "input"))


def _qsscm_metrics(out: qsscm.ProtocolOutcome, message: np.ndarray, attack) -> dict[str, float]:
    m = {"check_error_rate": out.check_error_rate, "abort": float(out.aborted)}
    if out.completed:
        m["auth_mismatch_rate"] = out.auth_mismatch_rate
        m["auth_pass"] = float(out.auth_pass)
        if len(message):
            m["message_error_rate"] = float(np.mean(out.decoded_bits != message))
        if attack.segment is not None and attack.segment.phase is Phase.RETURN and out.eve_records:
            m["eve_accuracy"] = adversary.eve_accuracy(out.eve_records, out.batch)
    return m


def run_trial(spec: RunSpec, trial: int) -> TrialResult:
    streams = Streams(spec.cfg.master_seed, trial)
    if spec.protocol == "qsscm":
        message = trial_message(spec, trial)
        out = qsscm.run_protocol(spec.cfg, message, spec.attack, streams=streams)
        return TrialResult(trial, out.aborted, _qsscm_metrics(out, message, spec.attack), out.transcript)
    out = ssqi.run_ssqi(
        spec.cfg,
        trial_input(spec, trial),
        coalition=spec.coalition,
        attack=spec.attack,
        num_pairs=spec.num_pairs,
        streams=streams,
    )
    m = {"pair_check_rate": out.pair_check_rate, "abort": float(out.aborted)}
    if out.qsscm is not None:
        m["check_error_rate"] = out.qsscm.check_error_rate
        if out.qsscm.completed:
            m["auth_mismatch_rate"] = out.qsscm.auth_mismatch_rate
            m["outcome_bits_correct"] = float(out.decoded_bits == out.outcome_bits)
    if out.fidelity is not None:
        m["fidelity"] = out.fidelity
    return TrialResult(trial, out.aborted, m, out.transcript)


def oracle_values(spec: RunSpec) -> dict[str, float]:
    """Exact predictions for the metrics an oracle covers, keyed by metric name."""
    attack = spec.attack
    cfg = spec.cfg
    out: dict[str, float] = {}
    if spec.protocol == "qsscm":
        seg = attack.segment
        if seg is None:
            out["check_error_rate"] = 0.0
            out["auth_mismatch_rate"] = 0.0
        elif seg.phase is Phase.DISTRIBUTION:
            out["check_error_rate"] = oracle.detection_rate(attack, cfg.num_receivers, cfg.holder)
        else:
            out["check_error_rate"] = 0.0
            out["auth_mismatch_rate"] = oracle.detection_rate(attack, cfg.num_receivers, cfg.holder)
            out["eve_accuracy"] = oracle.eve_accuracy(attack, cfg.num_receivers, cfg.holder)
        return out
    inner_cfg = ssqi.qsscm_config(cfg)
    inner = ssqi.to_qsscm_attack(attack)
    pair_attack = attack if attack.segment == ssqi.PAIR_SEGMENT else adversary.NO_ATTACK
    out["pair_check_rate"] = oracle.pair_check_rate(pair_attack)
    if inner.segment is None or inner.segment.phase is Phase.DISTRIBUTION:
        out["check_error_rate"] = oracle.detection_rate(inner, inner_cfg.num_receivers, inner_cfg.holder)
    if isinstance(attack, adversary.NoAttack) and spec.input is None:
        coalition = range(cfg.num_receivers) if spec.coalition is None else spec.coalition
        f = ssqi.predicted_fidelity(cfg.num_receivers, coalition)
        if f is not None:
            out["fidelity"] = f
    return out


def _trial_or_error(args):
    spec, trial = args
    try:
        return run_trial(spec, trial)
    except Exception as e:  # reported as an incomplete batch
        return e


def run_trials(spec: RunSpec, workers: int = 1) -> tuple[StatsReport, list[TrialResult]]:
    """Run every trial, stopping at the first failure (report marked incomplete)."""
    jobs = [(spec, k) for k in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_trial_or_error, jobs))
    else:
        outcomes = []
        for job in jobs:
            outcomes.append(_trial_or_error(job))
            if isinstance(outcomes[-1], Exception):
                break

    results: list[TrialResult] = []
    error = None
    for o in outcomes:
        if isinstance(o, Exception):
            error = f"trial {len(results)}: {type(o).__name__}: {o}"
            break
        results.append(o)

    report = StatsReport(spec.effective_config(), len(results), complete=error is None, error=error)
    names = sorted({k for r in results for k in r.metrics})
    for name in names:
        s = summarize(r.metrics[name] for r in results if name in r.metrics)
        report.metrics["abort_fraction" if name == "abort" else name] = s
    report.per_trial = [{"trial": r.trial, "aborted": r.aborted, **r.metrics} for r in results]
    report.oracle = oracle_values(spec)
    for name, predicted in report.oracle.items():
        if name in report.metrics:
            report.z_scores[name] = z_score(report.metrics[name], predicted)
    return report, results


def write_outputs(report: StatsReport, results: list[TrialResult], stats_path, trace_path=None) -> None:
    """Write the stats JSON and, if asked, the transcript (one record per line)."""
    stats_path = Path(stats_path)
    stats_path.write_text(report.to_json())
    if trace_path is not None:
        write_trace(results, trace_path)


def write_trace(results: list[TrialResult], path) -> None:
    with open(path, "w") as fh:
        fh.write(header_line() + "\n")
        for r in results:
            for line in r.transcript.lines(trial=r.trial):
                fh.write(line + "\n")
