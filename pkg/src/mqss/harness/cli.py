"""Command line: ``mqss run | oracle | replay``.

Exit codes: 0 when every trial completed, 2 when any trial aborted on the
error threshold (stats are still written), 1 on usage, config or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from mqss import oracle, ssqi
from mqss.adversary import NoAttack
from mqss.harness.config import SpecError, load_config
from mqss.harness.trials import oracle_values, run_trial, run_trials, write_outputs, write_trace
from mqss.parties import Phase

log = logging.getLogger("mqss")

EXIT_OK, EXIT_ERROR, EXIT_ABORTED = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="run-spec YAML file")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--quiet", action="store_true", help="only print errors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mqss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute all trials of a run spec")
    _common(run)
    run.add_argument("--trials", type=int, help="override the trial count")
    run.add_argument("--out", help="stats file (overrides output.stats)")
    run.add_argument("--trace", help="transcript file (overrides output.trace)")
    run.add_argument("--workers", type=int, default=1, help="worker processes (same output as serial)")

    orc = sub.add_parser("oracle", help="print exact predictions without simulating")
    _common(orc)

    rep = sub.add_parser("replay", help="re-run one trial and dump its transcript")
    _common(rep)
    rep.add_argument("--trial", type=int, required=True, help="trial index")
    rep.add_argument("--trace", help="write the transcript here instead of stdout")
    return parser


def _oracle_report(spec) -> dict:
    out = {"metrics": oracle_values(spec)}
    cfg = spec.cfg
    if spec.protocol == "qsscm":
        out["partial_decode_success"] = {
            f"r{k}": oracle.partial_decode_success(cfg.num_receivers, {k}) for k in range(cfg.num_receivers)
        }
        attack = spec.attack
        if not isinstance(attack, NoAttack) and attack.segment.phase is Phase.RETURN:
            out["eve_accuracy_with_pooled_knowledge"] = oracle.eve_accuracy(
                attack, cfg.num_receivers, cfg.holder, pooled_knowledge=True
            )
    else:
        out["fidelity_by_coalition"] = {
            "all": ssqi.predicted_fidelity(cfg.num_receivers, range(cfg.num_receivers)),
            "bob_only": ssqi.predicted_fidelity(cfg.num_receivers, {0}),
            "without_bob": ssqi.predicted_fidelity(cfg.num_receivers, range(1, cfg.num_receivers)),
        }
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(message)s")
    try:
        spec = load_config(args.config).with_overrides(seed=args.seed)
        if args.command == "oracle":
            print(json.dumps(_oracle_report(spec), sort_keys=True, indent=2))
            return EXIT_OK

        if args.command == "replay":
            if not 0 <= args.trial:
                raise SpecError("must be >= 0", "trial")
            result = run_trial(spec, args.trial)
            if args.trace:
                write_trace([result], args.trace)
            else:
                for line in result.transcript.lines(trial=result.trial):
                    print(line)
            log.info("trial %d: %s", args.trial, "aborted" if result.aborted else "completed")
            return EXIT_ABORTED if result.aborted else EXIT_OK

        spec = spec.with_overrides(trials=args.trials, stats_path=args.out, trace_path=args.trace)
        if spec.stats_path is None:
            raise SpecError("no stats file: set output.stats or pass --out", "output.stats")
        report, results = run_trials(spec, workers=args.workers)
        write_outputs(report, results, spec.stats_path, spec.trace_path)
        if not report.complete:
            log.error("batch incomplete: %s", report.error)
            return EXIT_ERROR
        for name, summary in sorted(report.metrics.items()):
            z = report.z_scores.get(name)
            extra = "" if name not in report.oracle else f"  oracle={report.oracle[name]:.6f} z={z}"
            log.info("%-22s mean=%.6f std=%.6f n=%d%s", name, summary.mean, summary.std, summary.count, extra)
        return EXIT_ABORTED if report.any_aborted else EXIT_OK
    except SpecError as e:
        log.error("config error: %s", e)
        return EXIT_ERROR
    except OSError as e:
        log.error("I/O error: %s", e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
