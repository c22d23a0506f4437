import hashlib
import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

PartyId = str


class Position(BaseModel):
    """A point on the line, in light-seconds."""
    model_config = ConfigDict(frozen=True)

    x: float

    @field_validator("x")
    @classmethod
    def _finite(cls, v: float) -> float:
        if v != v or v in (float("inf"), float("-inf")):
            raise ValueError("positions must be finite")
        return v


class SpacetimeMessage(BaseModel):
    """A payload in flight; t_arrive is fixed by geometry when scheduled."""
    model_config = ConfigDict(frozen=True)

    sender: PartyId
    receiver: PartyId
    payload: bytes = b""
    kind: str = "msg"
    t_send: float
    t_arrive: float

    @property
    def payload_hash(self) -> str:
        return hashlib.sha256(self.payload).hexdigest()


class Event(BaseModel):
    """Delivery of one message.

    ``parents`` are the deliveries the payload was computed from; ``known`` is everything
    the sender had received when it sent, a superset of ``parents``.
    """
    model_config = ConfigDict(frozen=True)

    id: int
    t: float
    t_send: float
    sender: PartyId
    receiver: PartyId
    kind: str
    payload_hash: str
    x_sender: float
    x_receiver: float
    parents: Tuple[int, ...] = ()
    known: Tuple[int, ...] = ()

    def to_json_line(self) -> str:
        return json.dumps({
            "t": self.t,
            "sender": self.sender,
            "receiver": self.receiver,
            "kind": self.kind,
            "payload_hash": self.payload_hash,
        }, sort_keys=True)


@dataclass(frozen=True)
class EventLog:
    events: Tuple[Event, ...] = ()

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, index: int) -> Event:
        return self.events[index]

    def to_jsonl(self) -> str:
        return "".join(e.to_json_line() + "\n" for e in self.events)

    def by_id(self) -> Dict[int, Event]:
        return {e.id: e for e in self.events}

    def filter(self, sender: Optional[PartyId] = None, receiver: Optional[PartyId] = None,
               kind: Optional[str] = None) -> List[Event]:
        return [
            e for e in self.events
            if (sender is None or e.sender == sender)
            and (receiver is None or e.receiver == receiver)
            and (kind is None or e.kind == kind)
        ]


def encode_payload(data: dict) -> bytes:
    return json.dumps(data, sort_keys=True, separators=(",", ":")).encode("utf-8")


def decode_payload(payload: bytes) -> dict:
    return json.loads(payload.decode("utf-8")) if payload else {}
