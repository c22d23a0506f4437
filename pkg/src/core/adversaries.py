"""Prover strategies for compiled runs: the honest prover and classical colluders.

A strategy is an immutable factory. ``place(geometry)`` resolves its colluders
against a concrete geometry; each colluder then builds a fresh handler per trial.
Verifiers broadcast their shares to every prover party, so a colluder at position
p hears verifier j at ``send_j + |x_j - p|``.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.core.crcore import CRProtocolSpec
from src.core.spacetime import Delivery, Handler, PartyContext, SetupHook, causal_ancestry, knowledge
from src.models.bits import xor_bits
from src.models.cvpv import VERIFIERS, Geometry, RoundPlan, Transcript
from src.models.errors import ConfigInvalid, UnknownKind
from src.models.protocol import Answer
from src.models.spacetime import EventLog
from src.service.oracle_service import RandomOracle, derive_bytes, derive_seed

logger = logging.getLogger(__name__)

SHARE = "share"
FORWARD = "forward"
ANSWER = "answer"
_SHARE_FIELDS = frozenset({"x", "y", "s"})

STRATEGY_KINDS = (
    "honest", "displaced-honest", "forwarding-pair", "independent-sample-pair",
    "precommit-answer", "uniform-answer", "replay-previous",
)

_PARAMS = {
    "honest": {"position"},
    "displaced-honest": {"offset"},
    "forwarding-pair": {"positions", "shared_seed"},
    "independent-sample-pair": {"positions"},
    "precommit-answer": {"positions"},
    "uniform-answer": {"position"},
    "replay-previous": {"position"},
}


@dataclass(frozen=True)
class ProverView:
    """Everything a prover party may use: public protocol data and the shared oracle."""
    spec: CRProtocolSpec
    oracle: RandomOracle
    geometry: Geometry
    plan: Tuple[RoundPlan, ...]
    prover_ids: Tuple[str, ...]
    trial_seed: bytes

    def recover_challenge(self, party: str, now: float, x: str, y: str, s: str) -> str:
        return self.oracle.otp_decode(xor_bits(x, y), s, party=party, time=now)

    def rng_for(self, party: str) -> np.random.Generator:
        return np.random.default_rng(derive_seed(self.trial_seed, "prover", party))

    def nearest_verifier(self, position: float) -> str:
        return min(VERIFIERS, key=lambda v: (abs(self.geometry.position(v) - position), v))


ColluderFactory = Callable[[ProverView, str, float], Tuple[Handler, Optional[SetupHook]]]


@dataclass(frozen=True)
class Colluder:
    id: str
    position: float
    build: ColluderFactory

    def instantiate(self, view: ProverView) -> Tuple[Handler, Optional[SetupHook]]:
        return self.build(view, self.id, self.position)


@dataclass(frozen=True)
class Strategy:
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    shared_state: Mapping[str, Any] = field(default_factory=dict)
    placer: Callable[[Geometry], Tuple[Colluder, ...]] = None

    def place(self, geometry: Geometry) -> Tuple[Colluder, ...]:
        return self.placer(geometry)

    def positions(self, geometry: Geometry) -> Tuple[float, ...]:
        return tuple(c.position for c in self.place(geometry))


# ---------------------------------------------------------------------------
# Handler building blocks
# ---------------------------------------------------------------------------

AnswerFn = Callable[[PartyContext, Tuple[int, int], Optional[str]], Answer]


def _answer_payload(key: Tuple[int, int], ans: Answer) -> dict:
    return {"block": key[0], "round": key[1], "ans": list(ans)}


def _responder(view: ProverView, party_id: str, answer_fn: AnswerFn, targets: Sequence[str],
               forward_to: Sequence[str] = (), query: bool = True) -> Handler:
    """Collect shares per round and answer each round once, as soon as (x, y, s) are known."""

    def handle(ctx: PartyContext, batch: Sequence[Delivery]) -> None:
        shares: Dict[Tuple[int, int], Dict[str, str]] = ctx.state.setdefault("shares", {})
        answered = ctx.state.setdefault("answered", set())
        sources: Dict[Tuple[int, int], List[int]] = ctx.state.setdefault("sources", {})
        for delivery in batch:
            if delivery.kind not in (SHARE, FORWARD):
                continue
            data = delivery.data
            if delivery.kind == SHARE and forward_to:
                ctx.broadcast(forward_to, data, kind=FORWARD, parents=[delivery])
            key = (data["block"], data["round"])
            shares.setdefault(key, {}).update({k: v for k, v in data.items() if k in _SHARE_FIELDS})
            sources.setdefault(key, []).append(delivery.event.id)
        for key in sorted(shares):
            if key in answered or not _SHARE_FIELDS <= shares[key].keys():
                continue
            answered.add(key)
            got = shares[key]
            ch = view.recover_challenge(party_id, ctx.now, got["x"], got["y"], got["s"]) if query else None
            ans = answer_fn(ctx, key, ch)
            # the prover's history covers every earlier round of the block
            parents = [e for (b, i), ids in sources.items() if b == key[0] and i <= key[1] for e in ids]
            for verifier in targets:
                ctx.send(verifier, _answer_payload(key, ans), kind=ANSWER, parents=parents)

    return handle


def honest_answer(view: ProverView, rng: np.random.Generator) -> AnswerFn:
    def answer(ctx: PartyContext, key: Tuple[int, int], ch: Optional[str]) -> Answer:
        history = ctx.state.setdefault("history", {}).setdefault(key[0], [])
        ans = view.spec.prove(ch, list(history), rng)
        history.append((ch, ans))
        return ans
    return answer


def _honest_colluder(view: ProverView, party_id: str, position: float):
    return _responder(view, party_id, honest_answer(view, view.rng_for(party_id)), VERIFIERS), None


def _uniform_colluder(view: ProverView, party_id: str, position: float):
    rng = view.rng_for(party_id)
    return _responder(view, party_id, lambda ctx, key, ch: view.spec.uniform_answer(rng),
                      VERIFIERS, query=False), None


def _replay_colluder(view: ProverView, party_id: str, position: float):
    """Answers round i with honest samples for round i-1's challenge; round 1 is uniform."""
    rng = view.rng_for(party_id)
    sample = honest_answer(view, rng)

    def answer(ctx, key, ch):
        stale = ctx.state.setdefault("stale", {})
        previous = stale.get(key[0])
        stale[key[0]] = sample(ctx, key, ch)
        return previous if previous is not None else view.spec.uniform_answer(rng)

    return _responder(view, party_id, answer, VERIFIERS), None


def _pair_rng(shared: bytes, key: Tuple[int, int]) -> np.random.Generator:
    return np.random.default_rng(derive_seed(shared, "pair-round", key[0], key[1]))


def _forwarding_colluder(shared_seed: bool, forward: bool):
    def build(view: ProverView, party_id: str, position: float):
        partner = tuple(p for p in view.prover_ids if p != party_id)
        target = (view.nearest_verifier(position),)
        private = view.rng_for(party_id)
        shared = derive_bytes(view.trial_seed, "pair-seed", nbytes=16)

        def answer(ctx, key, ch):
            history = ctx.state.setdefault("history", {}).setdefault(key[0], [])
            rng = _pair_rng(shared, key) if shared_seed else private
            ans = view.spec.prove(ch, list(history), rng)
            history.append((ch, ans))
            return ans

        return _responder(view, party_id, answer, target, forward_to=partner if forward else ()), None
    return build


def _precommit_colluder(view: ProverView, party_id: str, position: float):
    """Schedules every answer at t = -inf so that it lands exactly on time."""
    shared = derive_bytes(view.trial_seed, "pair-seed", nbytes=16)
    verifier = view.nearest_verifier(position)
    distance = abs(view.geometry.position(verifier) - position)

    def setup(ctx: PartyContext) -> None:
        for plan in view.plan:
            ans = view.spec.uniform_answer(_pair_rng(shared, plan.key))
            ctx.send(verifier, _answer_payload(plan.key, ans), kind=ANSWER,
                     t_send=plan.expected[verifier] - distance)
        logger.debug(f"{party_id} precommitted {len(view.plan)} answers to {verifier}")

    return (lambda ctx, batch: None), setup


# ---------------------------------------------------------------------------
# Public factory
# ---------------------------------------------------------------------------

def _midpoints(geometry: Geometry) -> Tuple[float, float]:
    return (geometry.v0 + geometry.claimed) / 2.0, (geometry.claimed + geometry.v1) / 2.0


def _pair(params: Mapping[str, Any], build: ColluderFactory):
    def placer(geometry: Geometry) -> Tuple[Colluder, ...]:
        a, b = params.get("positions") or _midpoints(geometry)
        return Colluder("A", float(a), build), Colluder("B", float(b), build)
    return placer


def _single(params: Mapping[str, Any], build: ColluderFactory, offset: float = 0.0):
    def placer(geometry: Geometry) -> Tuple[Colluder, ...]:
        position = params.get("position", geometry.claimed + offset)
        return (Colluder("P", float(position), build),)
    return placer


def strategy(kind: str, params: Optional[Mapping[str, Any]] = None) -> Strategy:
    """Build a named strategy.

    honest                  one prover at the claimed position (or ``position``)
    displaced-honest        honest prover moved by ``offset`` (default 0.2)
    forwarding-pair         colluders at ``positions`` (default: midpoints) forward every
                            share to each other and answer their nearest verifier;
                            ``shared_seed=True`` makes them sample from a pre-agreed seed
    independent-sample-pair same placement, no forwarding, private randomness
    precommit-answer        colluder pair that fixes identical answers before any challenge
    uniform-answer          on-time, consistent, uniformly random answers
    replay-previous         answers round i with samples for round i-1
    """
    if kind not in STRATEGY_KINDS:
        raise UnknownKind(f"unknown strategy {kind!r}; expected one of {STRATEGY_KINDS}")
    params = dict(params or {})
    unknown = set(params) - _PARAMS[kind]
    if unknown:
        raise ConfigInvalid(f"strategy {kind!r} does not take {sorted(unknown)}")
    if "positions" in params and len(params["positions"]) != 2:
        raise ConfigInvalid("pair strategies need exactly two positions")

    shared_state: Dict[str, Any] = {}
    if kind == "honest":
        placer = _single(params, _honest_colluder)
    elif kind == "displaced-honest":
        placer = _single(params, _honest_colluder, offset=float(params.get("offset", 0.2)))
    elif kind == "uniform-answer":
        placer = _single(params, _uniform_colluder)
    elif kind == "replay-previous":
        placer = _single(params, _replay_colluder)
    elif kind == "forwarding-pair":
        shared_seed = bool(params.get("shared_seed", False))
        shared_state = {"sampling_seed": shared_seed}
        placer = _pair(params, _forwarding_colluder(shared_seed=shared_seed, forward=True))
    elif kind == "independent-sample-pair":
        placer = _pair(params, _forwarding_colluder(shared_seed=False, forward=False))
    else:
        shared_state = {"precommitted": True}
        placer = _pair(params, _precommit_colluder)
    return Strategy(kind=kind, params=params, shared_state=shared_state, placer=placer)


def informed_cross_talk(log: EventLog, transcript: Transcript, colluders: Sequence[str],
                        tau: float = 0.0) -> List[int]:
    """On-time answers that depend on a colluder-to-colluder message whose sender
    had already heard from both verifiers. Returns the offending answer event ids.

    In rapid fire with Delta*(l-1) below the colluders' separation this is always empty.
    """
    crew = set(colluders)
    on_time = set()
    for rnd in transcript.rounds:
        for verifier, expected, actual in (("V0", rnd.expected_v0, rnd.actual_v0),
                                           ("V1", rnd.expected_v1, rnd.actual_v1)):
            if actual is not None and abs(actual - expected) <= tau:
                on_time.add((verifier, actual))
    flagged = []
    for event in log:
        if event.kind != ANSWER or event.sender not in crew or (event.receiver, event.t) not in on_time:
            continue
        for ancestor in causal_ancestry(log, event):
            if ancestor.sender in crew and ancestor.receiver in crew and ancestor.sender != ancestor.receiver:
                heard = {a.sender for a in knowledge(log, ancestor)}
                if set(VERIFIERS) <= heard:
                    flagged.append(event.id)
                    break
    return flagged
