import json
import math
import os
import textwrap

import pytest

from mqss.adversary import BasisStrategy, DishonestReceiver, InterceptResend
from mqss.harness import cli
from mqss.harness.config import SpecError, load_config, parse_spec
from mqss.harness.trials import run_trial, run_trials, summarize, write_outputs, z_score
from mqss.parties import ALICE, Phase, Segment, receiver
from mqss.transcript import SCHEMA


def write(tmp_path, text, name="spec.yaml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


MINIMAL = """\
protocol: qsscm
num_receivers: 3
batch_size: 1000
seed: 42
"""

ATTACKED = """\
protocol: qsscm
num_receivers: 2
batch_size: 4000
seed: 7
trials: {trials}
attack:
  kind: intercept_resend
  segment: {{from: charlie, to: alice}}
output:
  stats: {stats}
  trace: {trace}
"""


def test_minimal_config_defaults(tmp_path):
    spec = load_config(write(tmp_path, MINIMAL))
    eff = spec.effective_config()
    assert eff["check_fraction"] == 0.2 and eff["error_threshold"] == 0.05 and eff["auth_fraction"] == 0.1
    assert eff["trials"] == 1 and eff["seed"] == 42 and eff["final_holder"] == "r2"
    assert eff["attack"] == {"kind": "none"}
    assert spec.cfg.num_receivers == 3 and spec.cfg.batch_size == 1000


def test_check_fraction_out_of_range(tmp_path):
    with pytest.raises(SpecError) as e:
        load_config(write(tmp_path, MINIMAL + "check_fraction: 1.5\n"))
    assert e.value.field == "check_fraction"


def test_unknown_key_rejected_with_line(tmp_path):
    with pytest.raises(SpecError) as e:
        load_config(write(tmp_path, MINIMAL + "foo: 1\n"))
    assert e.value.field == "foo" and e.value.line == 5


def test_unknown_nested_key(tmp_path):
    text = MINIMAL + "attack:\n  kind: intercept_resend\n  segmnt: {from: r1, to: r2}\n"
    with pytest.raises(SpecError) as e:
        load_config(write(tmp_path, text))
    assert "segmnt" in str(e.value)


def test_malformed_yaml(tmp_path):
    with pytest.raises(SpecError):
        load_config(write(tmp_path, "protocol: [qsscm\n"))


def test_missing_file(tmp_path):
    with pytest.raises((SpecError, OSError)):
        load_config(tmp_path / "nope.yaml")


def test_attack_parsing():
    spec = parse_spec(
        {
            "protocol": "qsscm",
            "num_receivers": 2,
            "batch_size": 100,
            "attack": {"kind": "dishonest_receiver", "party": "bob", "segment": {"from": "charlie", "to": "alice"}},
        }
    )
    assert spec.attack == DishonestReceiver(receiver(0), Segment(receiver(1), ALICE))
    ret = parse_spec(
        {
            "protocol": "qsscm",
            "num_receivers": 2,
            "batch_size": 100,
            "attack": {"kind": "intercept_resend", "basis_strategy": "always_diagonal",
                       "segment": {"from": "alice", "to": "last", "phase": "return"}},
        }
    )
    assert ret.attack == InterceptResend(Segment(ALICE, receiver(1), Phase.RETURN), BasisStrategy.ALWAYS_DIAGONAL)


def test_untraversed_segment_rejected():
    with pytest.raises(SpecError):
        parse_spec({"protocol": "qsscm", "num_receivers": 3, "batch_size": 100,
                    "attack": {"kind": "intercept_resend", "segment": {"from": "bob", "to": "alice"}}})


def test_message_forms():
    base = {"protocol": "qsscm", "num_receivers": 2, "batch_size": 100}
    assert parse_spec({**base, "message": "1011"}).message == (1, 0, 1, 1)
    assert parse_spec({**base, "message": {"random_length": 5}}).message == 5
    with pytest.raises(SpecError):
        parse_spec({**base, "message": 1011})
    with pytest.raises(SpecError):
        parse_spec({**base, "message": "1" * 100})


def test_ssqi_spec_validation():
    base = {"protocol": "ssqi", "num_receivers": 3, "batch_size": 60}
    assert parse_spec({**base, "coalition": ["bob"]}).coalition == frozenset({0})
    with pytest.raises(SpecError):
        parse_spec({**base, "final_holder": "bob"})
    with pytest.raises(SpecError):
        parse_spec({**base, "num_receivers": 2})


def test_honest_trials_zero_error(tmp_path):
    spec = load_config(write(tmp_path, MINIMAL)).with_overrides(trials=100)
    report, _ = run_trials(spec)
    m = report.metrics["check_error_rate"]
    assert m.mean == 0.0 and m.std == 0.0 and m.count == 100
    assert report.metrics["abort_fraction"].mean == 0.0
    assert report.z_scores["check_error_rate"] == 0.0


def test_intercept_trials_always_abort(tmp_path):
    spec = load_config(write(tmp_path, ATTACKED.format(trials=50, stats="null", trace="null")))
    report, _ = run_trials(spec)
    assert report.metrics["abort_fraction"].mean == 1.0
    assert report.oracle["check_error_rate"] == pytest.approx(0.25)


def test_single_trial_degenerate_std(tmp_path):
    report, _ = run_trials(load_config(write(tmp_path, MINIMAL)))
    assert all(m.std == 0.0 and m.count == 1 for m in report.metrics.values())


def test_summary_and_z_score():
    s = summarize([0.2, 0.3, 0.25, 0.28])
    assert s.std == pytest.approx(0.043493294502332955)
    half = 1.959963984540054 * s.std / 2
    assert s.ci95 == pytest.approx((s.mean - half, s.mean + half))
    assert z_score(s, 0.25) == pytest.approx((s.mean - 0.25) / (s.std / 2))
    assert z_score(summarize([0.1]), 0.2) is None


def test_reported_z_scores_recompute(tmp_path):
    spec = load_config(write(tmp_path, ATTACKED.format(trials=20, stats="null", trace="null")))
    report, _ = run_trials(spec)
    d = json.loads(report.to_json())
    for name, z in d["z_scores"].items():
        m = d["metrics"][name]
        assert abs(z - (m["mean"] - d["oracle"][name]) / (m["std"] / math.sqrt(m["count"]))) < 1e-9


def test_effective_config_lists_every_default(tmp_path):
    report, _ = run_trials(load_config(write(tmp_path, MINIMAL)))
    eff = json.loads(report.to_json())["effective_config"]
    from mqss.harness.config import DEFAULTS

    assert set(DEFAULTS) <= set(eff)


def test_outputs_byte_identical(tmp_path):
    stats, trace = tmp_path / "s.json", tmp_path / "t.jsonl"
    spec = load_config(write(tmp_path, ATTACKED.format(trials=3, stats=stats, trace=trace)))
    blobs = []
    for _ in range(2):
        report, results = run_trials(spec)
        write_outputs(report, results, stats, trace)
        blobs.append((stats.read_bytes(), trace.read_bytes()))
    assert blobs[0] == blobs[1]
    header = json.loads(trace.read_text().splitlines()[0])
    assert header["schema"] == SCHEMA


def test_stats_only_when_trace_disabled(tmp_path):
    stats = tmp_path / "s.json"
    report, results = run_trials(load_config(write(tmp_path, MINIMAL)))
    write_outputs(report, results, stats)
    assert [p.name for p in tmp_path.iterdir() if p.suffix != ".yaml"] == ["s.json"]


def test_serial_and_parallel_reports_equal(tmp_path):
    spec = load_config(write(tmp_path, ATTACKED.format(trials=6, stats="null", trace="null")))
    a, _ = run_trials(spec)
    b, _ = run_trials(spec, workers=2)
    assert a.to_json() == b.to_json()


def test_trial_replays_in_isolation(tmp_path):
    spec = load_config(write(tmp_path, ATTACKED.format(trials=4, stats="null", trace="null")))
    _, results = run_trials(spec)
    assert run_trial(spec, 2).transcript == results[2].transcript


def test_cli_exit_codes(tmp_path, capsys):
    honest = write(tmp_path, MINIMAL + f"output: {{stats: {tmp_path / 'h.json'}}}\n", "h.yaml")
    assert cli.main(["run", "--config", str(honest), "--quiet"]) == 0
    attacked = write(tmp_path, ATTACKED.format(trials=2, stats=tmp_path / "a.json", trace="null"), "a.yaml")
    assert cli.main(["run", "--config", str(attacked), "--quiet"]) == 2
    assert json.loads((tmp_path / "a.json").read_text())["trials_run"] == 2
    bad = write(tmp_path, MINIMAL + "foo: 1\n", "bad.yaml")
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path / "x.json"), "--quiet"]) == 1


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_cli_unwritable_path_permissions(tmp_path):
    locked = tmp_path / "locked"
    locked.mkdir(mode=0o500)
    cfg = write(tmp_path, MINIMAL)
    assert cli.main(["run", "--config", str(cfg), "--out", str(locked / "s.json"), "--quiet"]) == 1


def test_cli_unwritable_path(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "missing" / "s.json"), "--quiet"]) == 1


def test_cli_overrides_and_replay(tmp_path, capsys):
    cfg = write(tmp_path, ATTACKED.format(trials=5, stats="null", trace="null"))
    out = tmp_path / "s.json"
    cli.main(["run", "--config", str(cfg), "--seed", "9", "--trials", "3", "--out", str(out), "--trace", str(tmp_path / "t.jsonl"), "--quiet"])
    d = json.loads(out.read_text())
    assert d["trials_run"] == 3 and d["effective_config"]["seed"] == 9
    trace_lines = (tmp_path / "t.jsonl").read_text().splitlines()[1:]
    capsys.readouterr()
    assert cli.main(["replay", "--config", str(cfg), "--seed", "9", "--trial", "1", "--quiet"]) == 2
    replayed = capsys.readouterr().out.splitlines()
    assert replayed == [line for line in trace_lines if json.loads(line)["trial"] == 1]


def test_cli_oracle(tmp_path, capsys):
    cfg = write(tmp_path, ATTACKED.format(trials=1, stats="null", trace="null"))
    assert cli.main(["oracle", "--config", str(cfg), "--quiet"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["metrics"]["check_error_rate"] == pytest.approx(0.25)
    assert d["partial_decode_success"]["r0"] == pytest.approx(0.5)


def test_ssqi_run(tmp_path):
    text = "protocol: ssqi\nnum_receivers: 3\nbatch_size: 60\ntrials: 20\ncoalition: [bob]\n"
    report, _ = run_trials(load_config(write(tmp_path, text)))
    assert report.oracle["fidelity"] == pytest.approx(0.5)
    assert report.metrics["outcome_bits_correct"].mean == 1.0
