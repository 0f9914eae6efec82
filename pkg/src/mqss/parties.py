"""Party identifiers, channel segments and per-photon knowledge pools."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

import numpy as np

RECEIVER_NAMES = ("bob", "charlie", "dick", "emma", "fred", "gina", "hank", "iris")


@dataclass(frozen=True, order=True)
class PartyId:
    """Alice when ``index`` is None, otherwise receiver ``index``.

    Receiver 0 (Bob) prepares the photons; receivers 1..n-1 encrypt them in
    index order, and the last of them (Zach) returns the batch to Alice.
    """

    index: int | None = None

    def __post_init__(self):
        if self.index is not None and self.index < 0:
            raise ValueError("receiver index must be >= 0")

    @property
    def is_alice(self) -> bool:
        return self.index is None

    def __str__(self) -> str:
        return "alice" if self.index is None else f"r{self.index}"

    @classmethod
    def parse(cls, text: str) -> PartyId:
        t = str(text).strip().lower()
        if t == "alice":
            return ALICE
        if t in RECEIVER_NAMES:
            return cls(RECEIVER_NAMES.index(t))
        m = re.fullmatch(r"r(\d+)", t)
        if m:
            return cls(int(m.group(1)))
        raise ValueError(f"unknown party {text!r} (use 'alice', 'r<k>' or a receiver name)")


ALICE = PartyId()


def receiver(k: int) -> PartyId:
    return PartyId(k)


class Phase(str, enum.Enum):
    DISTRIBUTION = "distribution"  # receiver chain and the hop to Alice
    RETURN = "return"  # Alice to the final holder, after encoding
    PAIR = "pair"  # entangled-pair half sent from Bob to Alice (teleportation)


@dataclass(frozen=True)
class Segment:
    src: PartyId
    dst: PartyId
    phase: Phase = Phase.DISTRIBUTION

    def __str__(self) -> str:
        return f"{self.src}->{self.dst}:{self.phase.value}"


def distribution_segments(num_receivers: int) -> list[Segment]:
    """Chain hops in travel order: r0->r1, ..., r(n-1)->alice."""
    hops = [receiver(k) for k in range(num_receivers)] + [ALICE]
    return [Segment(a, b, Phase.DISTRIBUTION) for a, b in zip(hops, hops[1:])]


def return_segment(holder: PartyId) -> Segment:
    return Segment(ALICE, holder, Phase.RETURN)


@dataclass
class Knowledge:
    """What some coalition knows about each photon's history.

    ``labels`` are the initial labels (Bob's secret), ``ops`` maps an
    encryptor's receiver index to its per-photon unitary kinds. ``encryptors``
    lists every encryptor of the run in application order, known or not.
    """

    labels: np.ndarray | None
    ops: dict[int, np.ndarray] = field(default_factory=dict)
    encryptors: tuple[int, ...] = ()

    @property
    def complete(self) -> bool:
        return self.labels is not None and all(k in self.ops for k in self.encryptors)

    def missing(self) -> list[str]:
        out = [] if self.labels is not None else ["r0 (initial labels)"]
        return out + [f"r{k}" for k in self.encryptors if k not in self.ops]

    def take(self, positions) -> Knowledge:
        """Restrict to a subset of photons."""
        return Knowledge(
            None if self.labels is None else self.labels[positions],
            {k: v[positions] for k, v in self.ops.items()},
            self.encryptors,
        )
