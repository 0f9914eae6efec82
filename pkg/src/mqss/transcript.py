"""Ordered event log of one protocol run, serialised one JSON record per line."""

from __future__ import annotations

import json
from collections.abc import Iterable, Iterator

SCHEMA = "mqss.transcript"
SCHEMA_VERSION = 1

STEP_TAGS = frozenset(
    {
        "prepare", "encrypt", "transfer", "intercept", "disclose", "check",
        "encode", "decode", "auth", "pair_check", "teleport", "ssqi",
    }
)


def header_line() -> str:
    return json.dumps({"schema": SCHEMA, "version": SCHEMA_VERSION}, sort_keys=True)


class Transcript:
    def __init__(self):
        self._events: list[tuple[str, str, int | None, object]] = []

    def __len__(self) -> int:
        return len(self._events)

    def add(self, step: str, party, position: int | None = None, payload=None) -> None:
        if step not in STEP_TAGS:
            raise ValueError(f"unknown step tag {step!r}")
        self._events.append((step, str(party), position, payload))

    def add_many(self, step: str, party, positions: Iterable[int], payloads: Iterable) -> None:
        if step not in STEP_TAGS:
            raise ValueError(f"unknown step tag {step!r}")
        party = str(party)
        self._events.extend((step, party, int(p), pl) for p, pl in zip(positions, payloads))

    def extend(self, other: Transcript) -> None:
        self._events.extend(other._events)

    def records(self, **extra) -> Iterator[dict]:
        for seq, (step, party, pos, payload) in enumerate(self._events):
            yield {"seq": seq, "step_tag": step, "party": party, "photon_position": pos, "payload": payload, **extra}

    def lines(self, **extra) -> Iterator[str]:
        for rec in self.records(**extra):
            yield json.dumps(rec, sort_keys=True, separators=(",", ":"))

    def steps(self) -> list[str]:
        return [e[0] for e in self._events]

    def __eq__(self, other) -> bool:
        return isinstance(other, Transcript) and list(self.lines()) == list(other.lines())
