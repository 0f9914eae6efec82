"""Run-spec files: a flat YAML mapping with two nested blocks.

Grammar (every key optional unless marked)::

    protocol: qsscm | ssqi            # required
    num_receivers: 3                  # required, >= 2 (>= 3 for ssqi)
    batch_size: 1000                  # required, photons per run
    seed: 42                          # master seed, default 0
    trials: 1
    check_fraction: 0.2
    error_threshold: 0.05
    auth_fraction: 0.1
    auth_threshold: null              # null reuses error_threshold
    final_holder: null                # receiver name/index; null = last receiver
    message: random                   # qsscm: "random", a bit string "1011", or {random_length: k}
    input: random                     # ssqi: "random" or {alpha: [re, im], beta: [re, im]}
    coalition: all                    # ssqi: "all" or a list of receivers
    num_pairs: 16                     # ssqi: entangled pairs distributed before teleporting
    attack:
      kind: none | intercept_resend | dishonest_receiver
      segment: {from: r1, to: alice, phase: distribution}
      basis_strategy: uniform_random
      party: bob                      # dishonest_receiver only
    output:
      stats: stats.json
      trace: null                     # transcript file, one JSON record per line

Receivers are written ``bob``, ``charlie``, ``dick``, ... or ``r<k>``;
``last`` names the final receiver. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import yaml

from mqss import adversary, qsscm, ssqi
from mqss.adversary import AttackModel, BasisStrategy
from mqss.parties import PartyId, Phase, Segment, distribution_segments, return_segment


class SpecError(ValueError):
    """Parse or validation failure, naming the field and line when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


TOP_KEYS = {
    "protocol", "num_receivers", "batch_size", "seed", "trials", "check_fraction",
    "error_threshold", "auth_fraction", "auth_threshold", "final_holder", "message",
    "input", "coalition", "num_pairs", "attack", "output",
}
ATTACK_KEYS = {"kind", "segment", "basis_strategy", "party"}
SEGMENT_KEYS = {"from", "to", "phase"}
OUTPUT_KEYS = {"stats", "trace"}

DEFAULTS = {
    "seed": 0,
    "trials": 1,
    "check_fraction": 0.2,
    "error_threshold": 0.05,
    "auth_fraction": 0.1,
    "auth_threshold": None,
    "final_holder": None,
    "message": "random",
    "input": "random",
    "coalition": "all",
    "num_pairs": 16,
}


@dataclass(frozen=True)
class RunSpec:
    protocol: str
    cfg: qsscm.ProtocolConfig
    trials: int = 1
    message: tuple[int, ...] | int | None = None  # bits, or a random length; None fills capacity
    input: ssqi.UnknownQubit | None = None  # None draws a Haar-random qubit per trial
    coalition: frozenset[int] | None = None
    num_pairs: int = 16
    attack: AttackModel = adversary.NO_ATTACK
    stats_path: Path | None = None
    trace_path: Path | None = None

    def with_overrides(self, seed=None, trials=None, stats_path=None, trace_path=None) -> RunSpec:
        spec = self
        if seed is not None:
            spec = dataclasses.replace(spec, cfg=dataclasses.replace(spec.cfg, master_seed=seed))
        if trials is not None:
            if trials < 1:
                raise SpecError("must be >= 1", "trials")
            spec = dataclasses.replace(spec, trials=trials)
        if stats_path is not None:
            spec = dataclasses.replace(spec, stats_path=Path(stats_path))
        if trace_path is not None:
            spec = dataclasses.replace(spec, trace_path=Path(trace_path))
        return spec

    def effective_config(self) -> dict:
        """Every field with its resolved value, defaults included."""
        c = self.cfg
        return {
            "protocol": self.protocol,
            "num_receivers": c.num_receivers,
            "batch_size": c.batch_size,
            "seed": c.master_seed,
            "trials": self.trials,
            "check_fraction": c.check_fraction,
            "error_threshold": c.error_threshold,
            "auth_fraction": c.auth_fraction,
            "auth_threshold": c.auth_threshold,
            "final_holder": str(c.holder),
            "message": _message_repr(self.message, c) if self.protocol == "qsscm" else None,
            "input": "random" if self.input is None else {
                "alpha": [self.input.alpha.real, self.input.alpha.imag],
                "beta": [self.input.beta.real, self.input.beta.imag],
            },
            "coalition": "all" if self.coalition is None else [f"r{k}" for k in sorted(self.coalition)],
            "num_pairs": self.num_pairs,
            "attack": attack_to_dict(self.attack),
            "output": {
                "stats": None if self.stats_path is None else str(self.stats_path),
                "trace": None if self.trace_path is None else str(self.trace_path),
            },
        }


def _message_repr(message, cfg):
    if message is None:
        return {"random_length": cfg.message_capacity}
    if isinstance(message, int):
        return {"random_length": message}
    return "".join(str(b) for b in message)


def attack_to_dict(attack: AttackModel) -> dict:
    if isinstance(attack, adversary.NoAttack):
        return {"kind": "none"}
    seg = attack.segment
    out = {
        "kind": "intercept_resend" if isinstance(attack, adversary.InterceptResend) else "dishonest_receiver",
        "segment": {"from": str(seg.src), "to": str(seg.dst), "phase": seg.phase.value},
        "basis_strategy": attack.basis_strategy.value,
    }
    if isinstance(attack, adversary.DishonestReceiver):
        out["party"] = str(attack.party)
    return out


def _key_lines(node, prefix="") -> dict[str, int]:
    lines = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}{k.value}"
            lines[path] = k.start_mark.line + 1
            lines.update(_key_lines(v, path + "."))
    return lines


class _Ctx:
    def __init__(self, lines: dict[str, int]):
        self.lines = lines

    def fail(self, field: str, message: str):
        raise SpecError(message, field, self.lines.get(field))

    def strict(self, mapping, allowed: set[str], prefix: str = ""):
        if not isinstance(mapping, dict):
            self.fail(prefix.rstrip(".") or "<root>", "expected a mapping")
        for key in mapping:
            if key not in allowed:
                self.fail(f"{prefix}{key}", f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _party(ctx: _Ctx, field: str, text, num_receivers: int) -> PartyId:
    if isinstance(text, int) and not isinstance(text, bool):
        p = PartyId(text)
    elif str(text).strip().lower() == "last":
        p = PartyId(num_receivers - 1)
    else:
        try:
            p = PartyId.parse(text)
        except ValueError as e:
            ctx.fail(field, str(e))
    if not p.is_alice and p.index >= num_receivers:
        ctx.fail(field, f"{p} is not one of the {num_receivers} receivers")
    return p


def _enum(ctx: _Ctx, field: str, enum_cls, value):
    try:
        return enum_cls(str(value).lower())
    except ValueError:
        ctx.fail(field, f"{value!r} is not one of {[e.value for e in enum_cls]}")


def _attack(ctx: _Ctx, raw, num_receivers: int) -> AttackModel:
    if raw is None:
        return adversary.NO_ATTACK
    ctx.strict(raw, ATTACK_KEYS, "attack.")
    kind = str(raw.get("kind", "none")).lower()
    if kind == "none":
        extra = set(raw) - {"kind"}
        if extra:
            ctx.fail(f"attack.{sorted(extra)[0]}", "not used when kind is none")
        return adversary.NO_ATTACK
    if "segment" not in raw:
        ctx.fail("attack.segment", "required for this attack kind")
    seg_raw = raw["segment"]
    ctx.strict(seg_raw, SEGMENT_KEYS, "attack.segment.")
    for key in ("from", "to"):
        if key not in seg_raw:
            ctx.fail(f"attack.segment.{key}", "required")
    segment = Segment(
        _party(ctx, "attack.segment.from", seg_raw["from"], num_receivers),
        _party(ctx, "attack.segment.to", seg_raw["to"], num_receivers),
        _enum(ctx, "attack.segment.phase", Phase, seg_raw.get("phase", "distribution")),
    )
    strategy = _enum(ctx, "attack.basis_strategy", BasisStrategy, raw.get("basis_strategy", "uniform_random"))
    if kind == "intercept_resend":
        if "party" in raw:
            ctx.fail("attack.party", "only used by dishonest_receiver")
        return adversary.InterceptResend(segment, strategy)
    if kind == "dishonest_receiver":
        if "party" not in raw:
            ctx.fail("attack.party", "required for dishonest_receiver")
        party = _party(ctx, "attack.party", raw["party"], num_receivers)
        try:
            return adversary.DishonestReceiver(party, segment, strategy)
        except ValueError as e:
            ctx.fail("attack.party", str(e))
    ctx.fail("attack.kind", f"unknown attack kind {kind!r}")


def _number(ctx: _Ctx, raw: dict, key: str, kind=float):
    value = raw.get(key, DEFAULTS.get(key))
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or (kind is int and not isinstance(value, int)):
        ctx.fail(key, f"expected {'an integer' if kind is int else 'a number'}, got {value!r}")
    return kind(value)


def parse_spec(raw, lines: dict[str, int] | None = None) -> RunSpec:
    ctx = _Ctx(lines or {})
    ctx.strict(raw, TOP_KEYS)
    for key in ("protocol", "num_receivers", "batch_size"):
        if key not in raw:
            ctx.fail(key, "required")
    protocol = str(raw["protocol"]).lower()
    if protocol not in ("qsscm", "ssqi"):
        ctx.fail("protocol", f"expected qsscm or ssqi, got {raw['protocol']!r}")
    n = _number(ctx, raw, "num_receivers", int)
    min_n = 3 if protocol == "ssqi" else 2
    if n < min_n:
        ctx.fail("num_receivers", f"must be >= {min_n} for {protocol}")

    check_fraction = _number(ctx, raw, "check_fraction")
    if not 0.0 < check_fraction < 1.0:
        ctx.fail("check_fraction", f"must lie in (0, 1), got {check_fraction}")
    auth_fraction = _number(ctx, raw, "auth_fraction")
    if not 0.0 < auth_fraction < 1.0:
        ctx.fail("auth_fraction", f"must lie in (0, 1), got {auth_fraction}")
    for key in ("error_threshold", "auth_threshold"):
        v = _number(ctx, raw, key)
        if v is not None and not 0.0 <= v <= 1.0:
            ctx.fail(key, f"must lie in [0, 1], got {v}")
    seed = _number(ctx, raw, "seed", int)
    if not 0 <= seed < 2**64:
        ctx.fail("seed", "must be a non-negative 64-bit integer")
    trials = _number(ctx, raw, "trials", int)
    if trials < 1:
        ctx.fail("trials", "must be >= 1")
    holder = raw.get("final_holder")
    holder = None if holder is None else _party(ctx, "final_holder", holder, n)
    if holder is not None and holder.is_alice:
        ctx.fail("final_holder", "must be a receiver")

    try:
        cfg = qsscm.ProtocolConfig(
            num_receivers=n,
            batch_size=_number(ctx, raw, "batch_size", int),
            check_fraction=check_fraction,
            error_threshold=_number(ctx, raw, "error_threshold"),
            auth_fraction=auth_fraction,
            master_seed=seed,
            final_holder=None if holder is None else holder.index,
            auth_threshold=_number(ctx, raw, "auth_threshold"),
        )
    except qsscm.ConfigError as e:
        ctx.fail("batch_size", str(e))

    message = None
    raw_msg = raw.get("message", "random")
    if protocol == "qsscm":
        if isinstance(raw_msg, dict):
            ctx.strict(raw_msg, {"random_length"}, "message.")
            length = raw_msg.get("random_length")
            if not isinstance(length, int) or isinstance(length, bool) or length < 0:
                ctx.fail("message.random_length", "expected a non-negative integer")
            message = length
        elif isinstance(raw_msg, int):
            ctx.fail("message", 'quote bit strings so YAML keeps them as text, e.g. "1011"')
        elif str(raw_msg).lower() != "random":
            text = str(raw_msg)
            if not set(text) <= {"0", "1"}:
                ctx.fail("message", "expected 'random' or a string of 0/1 characters")
            message = tuple(int(c) for c in text)
        length = cfg.message_capacity if message is None else (message if isinstance(message, int) else len(message))
        if length > cfg.message_capacity:
            ctx.fail("message", f"{length} bits exceed the capacity of {cfg.message_capacity}")
    elif "message" in raw:
        ctx.fail("message", "only used by qsscm")

    inp = None
    coalition = None
    num_pairs = _number(ctx, raw, "num_pairs", int)
    if protocol == "ssqi":
        if holder is not None and holder.index == 0:
            ctx.fail("final_holder", "Bob keeps the teleported qubit and takes no part in sharing its outcome")
        raw_in = raw.get("input", "random")
        if isinstance(raw_in, dict):
            ctx.strict(raw_in, {"alpha", "beta"}, "input.")
            try:
                alpha, beta = (complex(*raw_in[k]) for k in ("alpha", "beta"))
                inp = ssqi.UnknownQubit(alpha, beta)
            except (KeyError, TypeError, ValueError) as e:
                ctx.fail("input", f"expected alpha and beta as [re, im] pairs with unit norm ({e})")
        elif str(raw_in).lower() != "random":
            ctx.fail("input", "expected 'random' or {alpha: [re, im], beta: [re, im]}")
        raw_co = raw.get("coalition", "all")
        if not (isinstance(raw_co, str) and raw_co.lower() == "all"):
            if not isinstance(raw_co, list) or not raw_co:
                ctx.fail("coalition", "expected 'all' or a non-empty list of receivers")
            coalition = frozenset(_party(ctx, "coalition", p, n).index for p in raw_co)
            if None in coalition:
                ctx.fail("coalition", "Alice is not a receiver")
        if num_pairs < 2:
            ctx.fail("num_pairs", "must be >= 2")
        k = int(check_fraction * num_pairs)
        if k < 1 or k >= num_pairs:
            ctx.fail("num_pairs", "check_fraction * num_pairs must leave a sampled and an unsampled pair")
        if cfg.message_capacity < 2:
            ctx.fail("batch_size", "too small to carry the 2-bit Bell outcome")
    else:
        for key in ("input", "coalition", "num_pairs"):
            if key in raw:
                ctx.fail(key, "only used by ssqi")

    attack = _attack(ctx, raw.get("attack"), n)
    if attack.segment is not None:
        if protocol == "qsscm":
            valid = _qsscm_segments(cfg)
        else:
            valid = [ssqi.PAIR_SEGMENT] + [_lift(s) for s in _qsscm_segments(ssqi.qsscm_config(cfg))]
        if attack.segment not in valid:
            ctx.fail("attack.segment", f"{attack.segment} is not traversed (valid: {', '.join(map(str, valid))})")
        if protocol == "ssqi":
            try:
                ssqi.to_qsscm_attack(attack)
            except ValueError as e:
                ctx.fail("attack.party", str(e))

    out = raw.get("output") or {}
    ctx.strict(out, OUTPUT_KEYS, "output.")
    stats = out.get("stats")
    trace = out.get("trace")
    return RunSpec(
        protocol=protocol,
        cfg=cfg,
        trials=trials,
        message=message,
        input=inp,
        coalition=coalition,
        num_pairs=num_pairs,
        attack=attack,
        stats_path=None if stats is None else Path(stats),
        trace_path=None if trace is None else Path(trace),
    )


def _qsscm_segments(cfg: qsscm.ProtocolConfig) -> list[Segment]:
    return distribution_segments(cfg.num_receivers) + [return_segment(cfg.holder)]


def _lift(seg: Segment) -> Segment:
    """Renumber a segment of the inner classical run into ssqi receiver indices."""
    def up(p: PartyId) -> PartyId:
        return p if p.is_alice else PartyId(p.index + 1)

    return Segment(up(seg.src), up(seg.dst), seg.phase)


def load_config(path) -> RunSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise SpecError(f"cannot read {path}: {e.strerror}") from e
    try:
        raw = yaml.safe_load(text)
        node = yaml.compose(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise SpecError(f"parse error: {getattr(e, 'problem', e)}", line=None if mark is None else mark.line + 1) from e
    if raw is None:
        raise SpecError("empty config file")
    return parse_spec(raw, _key_lines(node))
