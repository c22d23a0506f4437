"""Deterministic discrete-event fabric for parties on a line, c = 1.

Delivery order is (t_arrive, receiver, sender, sequence). All messages that reach
one receiver at the same instant are handed to its handler in a single call.
"""
import heapq
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

from src.models.errors import CausalityViolation, UnknownEvent, UnknownParty
from src.models.spacetime import (
    Event, EventLog, PartyId, SpacetimeMessage, decode_payload, encode_payload,
)

logger = logging.getLogger(__name__)

TIMER = "timer"
LIGHT_CONE_SLACK = 1e-12


@dataclass(frozen=True)
class Delivery:
    kind: str
    sender: PartyId
    payload: bytes
    t: float
    event: Optional[Event] = None

    @property
    def data(self) -> dict:
        return decode_payload(self.payload)


Parents = Iterable[Union[Delivery, int]]


def _event_ids(parents: Optional[Parents]) -> Optional[Tuple[int, ...]]:
    if parents is None:
        return None
    ids = set()
    for p in parents:
        if isinstance(p, Delivery):
            if p.event is not None:
                ids.add(p.event.id)
        else:
            ids.add(int(p))
    return tuple(sorted(ids))


Handler = Callable[["PartyContext", List[Delivery]], None]
SetupHook = Callable[["PartyContext"], None]
Guard = Callable[[SpacetimeMessage], None]


@dataclass
class Party:
    id: PartyId
    position: float
    handler: Handler
    compute_delay: float = 0.0
    setup: Optional[SetupHook] = None
    local_time: float = float("-inf")
    seen: List[int] = field(default_factory=list)
    state: Dict[str, Any] = field(default_factory=dict)


class PartyContext:
    """What a handler may touch: its clock, its state, and the outgoing channel."""

    def __init__(self, sim: "Simulator", party: Party):
        self._sim = sim
        self._party = party

    @property
    def party_id(self) -> PartyId:
        return self._party.id

    @property
    def position(self) -> float:
        return self._party.position

    @property
    def now(self) -> float:
        return self._party.local_time

    @property
    def state(self) -> Dict[str, Any]:
        return self._party.state

    def send(self, receiver: PartyId, data: Union[dict, bytes], kind: str = "msg",
             t_send: Optional[float] = None, parents: Optional[Parents] = None) -> SpacetimeMessage:
        """Send ``data``. ``parents`` names the deliveries the payload was computed from;
        when omitted, everything this party has received counts."""
        payload = data if isinstance(data, bytes) else encode_payload(data)
        if t_send is None:
            t_send = self.now + self._party.compute_delay
        return self._sim.send(self._party.id, receiver, payload, kind=kind, t_send=t_send,
                              parents=_event_ids(parents))

    def broadcast(self, receivers: Iterable[PartyId], data: Union[dict, bytes], kind: str = "msg",
                  t_send: Optional[float] = None, parents: Optional[Parents] = None) -> List[SpacetimeMessage]:
        parents = _event_ids(parents)
        return [self.send(r, data, kind=kind, t_send=t_send, parents=parents) for r in receivers]

    def wake_at(self, t: float, data: Optional[dict] = None) -> None:
        self._sim.wake(self._party.id, t, data)


class Simulator:
    def __init__(self, guard: Optional[Guard] = None):
        self._parties: Dict[PartyId, Party] = {}
        self._queue: List[Tuple] = []
        self._seq = 0
        self._events: List[Event] = []
        self._guard = guard
        self._started = False

    # ---- setup -------------------------------------------------------
    def add_party(self, party_id: PartyId, position: float, handler: Handler,
                  compute_delay: float = 0.0, setup: Optional[SetupHook] = None) -> Party:
        if party_id in self._parties:
            raise ValueError(f"party {party_id!r} already registered")
        party = Party(id=party_id, position=position, handler=handler,
                      compute_delay=compute_delay, setup=setup)
        self._parties[party_id] = party
        return party

    def party(self, party_id: PartyId) -> Party:
        try:
            return self._parties[party_id]
        except KeyError as e:
            raise UnknownParty(f"unknown party {party_id!r}") from e

    def position(self, party_id: PartyId) -> float:
        return self.party(party_id).position

    @property
    def parties(self) -> Dict[PartyId, Party]:
        return dict(self._parties)

    # ---- scheduling --------------------------------------------------
    def schedule(self, msg: SpacetimeMessage, parents: Tuple[int, ...] = (),
                 known: Optional[Tuple[int, ...]] = None) -> None:
        sender = self.party(msg.sender)
        receiver = self.party(msg.receiver)
        if msg.t_send < sender.local_time:
            raise CausalityViolation(
                f"{msg.sender} tried to send at t={msg.t_send} but its clock reads {sender.local_time}"
            )
        expected = msg.t_send + abs(sender.position - receiver.position)
        if msg.t_arrive != expected:
            raise CausalityViolation(
                f"message {msg.sender}->{msg.receiver} claims arrival {msg.t_arrive}, geometry gives {expected}"
            )
        if self._guard is not None and msg.kind != TIMER:
            self._guard(msg)
        self._seq += 1
        known = parents if known is None else known
        heapq.heappush(self._queue, (msg.t_arrive, msg.receiver, msg.sender, self._seq, msg, parents, known))

    def send(self, sender: PartyId, receiver: PartyId, payload: bytes, kind: str = "msg",
             t_send: float = 0.0, parents: Optional[Tuple[int, ...]] = None) -> SpacetimeMessage:
        src, dst = self.party(sender), self.party(receiver)
        known = tuple(src.seen)
        if parents is None:
            parents = known
        elif not set(parents) <= set(known):
            raise CausalityViolation(
                f"{sender} cites events {sorted(set(parents) - set(known))} it has not received"
            )
        msg = SpacetimeMessage(
            sender=sender, receiver=receiver, payload=payload, kind=kind,
            t_send=t_send, t_arrive=t_send + abs(src.position - dst.position),
        )
        self.schedule(msg, parents=parents, known=known)
        return msg

    def wake(self, party_id: PartyId, t: float, data: Optional[dict] = None) -> None:
        payload = encode_payload(data) if data else b""
        msg = SpacetimeMessage(sender=party_id, receiver=party_id, payload=payload,
                               kind=TIMER, t_send=t, t_arrive=t)
        party = self.party(party_id)
        if t < party.local_time:
            raise CausalityViolation(f"{party_id} cannot wake in its past (t={t})")
        self._seq += 1
        heapq.heappush(self._queue, (t, party_id, party_id, self._seq, msg, (), ()))

    # ---- execution ---------------------------------------------------
    def start(self) -> None:
        """Run setup hooks once, at t = -inf, before any challenge exists."""
        if self._started:
            return
        self._started = True
        for party_id in sorted(self._parties):
            party = self._parties[party_id]
            if party.setup is not None:
                party.setup(PartyContext(self, party))

    def _deliver(self, msg: SpacetimeMessage, parents: Tuple[int, ...], known: Tuple[int, ...]) -> Delivery:
        if msg.kind == TIMER:
            return Delivery(kind=TIMER, sender=msg.sender, payload=msg.payload, t=msg.t_arrive)
        event = Event(
            id=len(self._events), t=msg.t_arrive, t_send=msg.t_send,
            sender=msg.sender, receiver=msg.receiver, kind=msg.kind,
            payload_hash=msg.payload_hash,
            x_sender=self._parties[msg.sender].position,
            x_receiver=self._parties[msg.receiver].position,
            parents=parents,
            known=known,
        )
        self._events.append(event)
        self._parties[msg.receiver].seen.append(event.id)
        return Delivery(kind=msg.kind, sender=msg.sender, payload=msg.payload, t=msg.t_arrive, event=event)

    def run_until(self, t_end: float) -> EventLog:
        self.start()
        while self._queue and self._queue[0][0] <= t_end:
            t, receiver_id = self._queue[0][0], self._queue[0][1]
            batch = []
            while self._queue and self._queue[0][0] == t and self._queue[0][1] == receiver_id:
                _, _, _, _, msg, parents, known = heapq.heappop(self._queue)
                batch.append(self._deliver(msg, parents, known))
            receiver = self._parties[receiver_id]
            receiver.local_time = t
            receiver.handler(PartyContext(self, receiver), batch)
        return self.log

    @property
    def log(self) -> EventLog:
        return EventLog(events=tuple(self._events))

    @property
    def pending(self) -> int:
        return len(self._queue)

    # ---- diagnostics -------------------------------------------------
    def causal_ancestry(self, event: Union[Event, int]) -> FrozenSet[Event]:
        return causal_ancestry(self.log, event)


def _closure(log: EventLog, event: Union[Event, int], edges: str) -> FrozenSet[Event]:
    index = log.by_id()
    event_id = event if isinstance(event, int) else event.id
    if event_id not in index:
        raise UnknownEvent(f"event {event_id} is not in the log")
    ancestors = set()
    stack = list(getattr(index[event_id], edges))
    while stack:
        current = stack.pop()
        if current in ancestors:
            continue
        ancestors.add(current)
        stack.extend(getattr(index[current], edges))
    return frozenset(index[i] for i in ancestors)


def causal_ancestry(log: EventLog, event: Union[Event, int]) -> FrozenSet[Event]:
    """All deliveries whose payloads transitively shaped ``event``'s payload."""
    return _closure(log, event, "parents")


def knowledge(log: EventLog, event: Union[Event, int]) -> FrozenSet[Event]:
    """All deliveries inside the sender's past when ``event`` was sent."""
    return _closure(log, event, "known")


def check_light_cones(log: EventLog) -> List[str]:
    """Every parent must lie in the past light cone of the child; returns violations."""
    index = log.by_id()
    violations = []
    for event in log:
        if abs((event.t - event.t_send) - abs(event.x_receiver - event.x_sender)) > LIGHT_CONE_SLACK:
            violations.append(f"event {event.id}: latency {event.t - event.t_send} != distance")
        if not set(event.parents) <= set(event.known):
            violations.append(f"event {event.id} cites parents its sender never received")
        for parent_id in sorted(set(event.parents) | set(event.known)):
            parent = index[parent_id]
            gap = event.t - parent.t
            reach = abs(event.x_receiver - parent.x_receiver)
            if gap + LIGHT_CONE_SLACK < reach:
                violations.append(f"event {event.id} depends on {parent_id} outside its light cone")
    return violations
