"""Message transcripts, per-link symbol accounting and protocol outcomes."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field


def leader_name(entity: int) -> str:
    return f"E{entity}"


def db_name(entity: int, db: int) -> str:
    return f"E{entity}.db{db}"


def entity_of(party: str) -> int:
    return int(party[1:].split(".")[0])


@dataclass(frozen=True)
class Message:
    round: int
    phase: str
    sender: str
    receiver: str
    payload: tuple
    label: str = ""

    @property
    def symbols(self) -> int:
        return len(self.payload)

    def as_dict(self) -> dict:
        return {
            "round": self.round,
            "phase": self.phase,
            "from": self.sender,
            "to": self.receiver,
            "label": self.label,
            "payload": list(self.payload),
        }


class CostLedger:
    """Field symbols carried on every directed link."""

    def __init__(self, leader: str):
        self.leader = leader
        self.links: Counter = Counter()

    def record(self, sender: str, receiver: str, symbols: int) -> None:
        self.links[(sender, receiver)] += symbols

    @property
    def upload(self) -> int:
        return sum(n for (s, _), n in self.links.items() if s == self.leader)

    @property
    def download(self) -> int:
        return sum(n for (_, r), n in self.links.items() if r == self.leader)

    @property
    def relay(self) -> int:
        return self.total - self.upload - self.download

    @property
    def total(self) -> int:
        return sum(self.links.values())

    # short aliases
    U = upload
    D = download
    C = total

    def as_dict(self) -> dict:
        return {
            "upload": self.upload,
            "download": self.download,
            "relay": self.relay,
            "total": self.total,
            "links": {f"{s}->{r}": n for (s, r), n in sorted(self.links.items())},
        }


class Transcript:
    def __init__(self, leader: str):
        self.leader = leader
        self.messages: list[Message] = []
        self.ledger = CostLedger(leader)

    def send(self, round: int, phase: str, sender: str, receiver: str, payload, label: str = "") -> Message:
        if isinstance(payload, int):
            payload = (payload,)
        msg = Message(round, phase, sender, receiver, tuple(int(x) for x in payload), label)
        self.messages.append(msg)
        self.ledger.record(sender, receiver, msg.symbols)
        return msg

    def view(self, party: str) -> tuple:
        """Everything ``party`` sends or receives, in order, without labels."""
        out = []
        for m in self.messages:
            if m.receiver == party:
                out.append(("in", m.sender, m.payload))
            elif m.sender == party:
                out.append(("out", m.receiver, m.payload))
        return tuple(out)

    def shape(self, party: str) -> tuple:
        """Traffic pattern of ``party``: direction, peer and length per message."""
        return tuple((d, peer, len(p)) for d, peer, p in self.view(party))

    def parties(self) -> set:
        return {m.sender for m in self.messages} | {m.receiver for m in self.messages}

    def as_dict(self) -> dict:
        return {"messages": [m.as_dict() for m in self.messages], "ledger": self.ledger.as_dict()}

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class Outcome:
    protocol: str
    solution: frozenset  # 1-based alphabet indices
    labels: list
    stopping_round: int
    knowledge: frozenset  # indices at which the leader learned the intersection
    transcript: Transcript
    q: int
    closed_form_cost: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def ledger(self) -> CostLedger:
        return self.transcript.ledger

    @property
    def U(self) -> int:
        return self.ledger.upload

    @property
    def D(self) -> int:
        return self.ledger.download

    @property
    def C(self) -> int:
        return self.ledger.total

    def summary(self) -> dict:
        return {
            "protocol": self.protocol,
            "solution": self.labels,
            "solution_indices": sorted(self.solution),
            "stopping_round": self.stopping_round,
            "q": self.q,
            "cost": {"U": self.U, "D": self.D, "C": self.C, "relay": self.ledger.relay},
            "closed_form": self.closed_form_cost,
            "leader_knowledge": sorted(self.knowledge),
            **({"info": self.info} if self.info else {}),
        }
