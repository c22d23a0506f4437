"""Compile a certified-randomness protocol into certified position verification.

Four schedules share one engine. Every schedule is a list of rounds, each with a
prover time T: the verifier farther from the claimed position fires at the round
start, the nearer one at ``T - d``, and both expect the answer at
``max_j(send_j + d_j) + compute_delay + d_j``, computed along the same float path
the fabric uses for message arrival.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from src.core.adversaries import ANSWER, SHARE, ProverView, Strategy, strategy
from src.core.crcore import CRProtocolSpec, MockProtocol, RCSProtocol, gen_challenge
from src.core.spacetime import TIMER, Delivery, PartyContext, Simulator
from src.core.verdict import verdict_checks
from src.models.bits import bits_to_hex, check_bits, xor_bits
from src.models.cvpv import (
    VERIFIERS, CompilerConfig, RoundPlan, RoundRecord, RoundShares, Transcript, Verdict, exact_ratio,
)
from src.models.errors import ConfigInvalid
from src.models.oracle import OracleParams
from src.models.protocol import Answer, CRResult
from src.models.spacetime import EventLog
from src.service.oracle_service import RandomOracle, derive_bits, derive_bytes, derive_seed

logger = logging.getLogger(__name__)

_COIN_BYTES = 32


class RunOutcome(NamedTuple):
    verdict: Verdict
    transcript: Transcript
    log: EventLog


@dataclass(frozen=True)
class BlockSetup:
    r: bytes
    x: Tuple[str, ...]
    y: Tuple[str, ...]


@dataclass(frozen=True)
class TrialSetup:
    """Verifier secrets fixed at t = -inf. Only ``key`` is published."""
    seed: int
    trial_seed: bytes
    key: bytes
    oracle_params: OracleParams
    blocks: Tuple[BlockSetup, ...]


def trial_seed_bytes(seed: int) -> bytes:
    return int(seed).to_bytes(8, "big")


def build_spec(cfg: CompilerConfig) -> CRProtocolSpec:
    backend = cfg.backend
    if backend.kind == "rcs":
        return RCSProtocol(backend.rcs, rounds=cfg.rounds)
    return MockProtocol(backend.kind, rounds=cfg.rounds, answer_bits=backend.answer_bits,
                        adaptive=backend.adaptive)


def oracle_params_for(cfg: CompilerConfig, spec: CRProtocolSpec) -> OracleParams:
    # the pad must cover the challenge
    return cfg.oracle.model_copy(update={"n": spec.n_ch})


def derive_setup(cfg: CompilerConfig, spec: CRProtocolSpec, seed: Optional[int] = None) -> TrialSetup:
    seed = cfg.seed if seed is None else seed
    trial_seed = trial_seed_bytes(seed)
    params = oracle_params_for(cfg, spec)
    blocks = tuple(
        BlockSetup(
            r=derive_bytes(trial_seed, "verifier-coins", b, nbytes=_COIN_BYTES),
            x=tuple(derive_bits(trial_seed, "x", b, i, nbits=params.m) for i in range(1, spec.rounds + 1)),
            y=tuple(derive_bits(trial_seed, "y", b, i, nbits=params.m) for i in range(1, spec.rounds + 1)),
        )
        for b in range(cfg.block_count)
    )
    key = derive_bytes(trial_seed, "oracle-key", nbytes=params.key_bytes)
    return TrialSetup(seed=seed, trial_seed=trial_seed, key=key, oracle_params=params, blocks=blocks)


def validate_config(cfg: CompilerConfig, spec: CRProtocolSpec) -> None:
    """Mode-specific constraints that a field validator cannot see."""
    geometry = cfg.resolved_geometry
    if cfg.mode == "single" and cfg.rounds != 1:
        raise ConfigInvalid(f"single-round mode runs exactly one round, got {cfg.rounds}")
    if cfg.mode in ("rapid-fire", "seq-rapid-fire"):
        if spec.adaptive:
            raise ConfigInvalid("rapid-fire fires every challenge before any answer; adaptive specs are not allowed")
        if cfg.delta_t is None or not math.isfinite(cfg.delta_t) or cfg.delta_t <= 0:
            raise ConfigInvalid(f"rapid-fire needs a spacing delta_t > 0, got {cfg.delta_t}")
        window = geometry.fire_window
        if exact_ratio(cfg.delta_t) * (cfg.rounds - 1) >= exact_ratio(window):
            raise ConfigInvalid(
                f"delta_t*(l-1) = {cfg.delta_t * (cfg.rounds - 1)} must stay below the firing window {window}"
            )
    if cfg.mode == "seq-rapid-fire" and not 0.0 < cfg.alpha <= 1.0:
        raise ConfigInvalid(f"alpha must lie in (0, 1], got {cfg.alpha}")
    if cfg.mode != "seq-rapid-fire" and cfg.blocks != 1:
        raise ConfigInvalid(f"only seq-rapid-fire repeats blocks, got blocks={cfg.blocks} in {cfg.mode}")
    if geometry.distance("V0") == 0.0 and geometry.distance("V1") == 0.0:
        raise ConfigInvalid("degenerate geometry")


def plan_rounds(cfg: CompilerConfig) -> Tuple[RoundPlan, ...]:
    """Send times and expected answer arrivals for every (block, round)."""
    geometry = cfg.resolved_geometry
    distance = {v: geometry.distance(v) for v in VERIFIERS}
    reach = geometry.max_distance
    if cfg.mode == "sequential":
        step = 2.0 * reach
    elif cfg.mode in ("rapid-fire", "seq-rapid-fire"):
        step = cfg.delta_t
    else:
        step = 0.0
    block_span = step * (cfg.rounds - 1) + 2.0 * reach
    plans = []
    for b in range(cfg.block_count):
        offset = b * (block_span + cfg.block_gap)
        for i in range(1, cfg.rounds + 1):
            start = offset + (i - 1) * step
            prover_time = start + reach
            send = {v: start if distance[v] == reach else prover_time - distance[v] for v in VERIFIERS}
            heard = max(send[v] + abs(geometry.position(v) - geometry.claimed) for v in VERIFIERS)
            reply = heard + cfg.compute_delay
            expected = {v: reply + abs(geometry.claimed - geometry.position(v)) for v in VERIFIERS}
            plans.append(RoundPlan(block=b, index=i, send=send, expected=expected))
    return tuple(plans)


# ---------------------------------------------------------------------------
# Verifier parties
# ---------------------------------------------------------------------------

def _record_answers(ctx: PartyContext, batch: Sequence[Delivery]) -> None:
    answers = ctx.state.setdefault("answers", {})
    for delivery in batch:
        if delivery.kind != ANSWER:
            continue
        try:
            data = delivery.data
            key = (int(data["block"]), int(data["round"]))
            ans = tuple(str(a) for a in data["ans"])
        except (KeyError, TypeError, ValueError) as e:
            logger.warning(f"{ctx.party_id} dropped a malformed answer from {delivery.sender}: {e}")
            continue
        if key in answers:
            ctx.state["duplicates"] = ctx.state.get("duplicates", 0) + 1
            logger.warning(f"{ctx.party_id} ignored a duplicate answer for {key} from {delivery.sender}")
            continue
        answers[key] = (ans, delivery.t)
        ctx.state.setdefault("answer_events", {})[key] = delivery.event.id


def _make_verifier(name: str, cfg: CompilerConfig, spec: CRProtocolSpec, setup: TrialSetup,
                   oracle: RandomOracle, plans: Sequence[RoundPlan], provers: Sequence[str]):
    def on_setup(ctx: PartyContext) -> None:
        for plan in plans:
            ctx.wake_at(plan.send[name], {"block": plan.block, "round": plan.index})

    def handle(ctx: PartyContext, batch: Sequence[Delivery]) -> None:
        # answers first, so a challenge fired at the same instant sees them
        _record_answers(ctx, batch)
        for delivery in batch:
            if delivery.kind != TIMER:
                continue
            data = delivery.data
            b, i = data["block"], data["round"]
            block = setup.blocks[b]
            if name == "V0":
                answers = ctx.state.get("answers", {})
                prior = [answers[(b, j)][0] if (b, j) in answers else None for j in range(1, i)]
                ch = gen_challenge(spec, i, prior, block.r)
                s = oracle.otp_encode(xor_bits(block.x[i - 1], block.y[i - 1]), ch, party=name, time=ctx.now)
                ctx.state.setdefault("challenges", {})[(b, i)] = (ch, s)
                share = {"block": b, "round": i, "x": block.x[i - 1], "s": s}
                events = ctx.state.get("answer_events", {})
                # only an adaptive challenge is computed from earlier answers
                parents = [events[(b, j)] for j in range(1, i) if (b, j) in events] if spec.adaptive else []
            else:
                share = {"block": b, "round": i, "y": block.y[i - 1]}
                parents = []
            ctx.broadcast(provers, share, kind=SHARE, t_send=ctx.now, parents=parents)

    return handle, on_setup


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

def _run(cfg: CompilerConfig, prover_strategy: Optional[Strategy], seed: Optional[int],
         spec: Optional[CRProtocolSpec]) -> RunOutcome:
    spec = build_spec(cfg) if spec is None else spec
    if spec.rounds != cfg.rounds:
        spec = spec.with_rounds(cfg.rounds)
    validate_config(cfg, spec)
    prover_strategy = prover_strategy or strategy("honest")
    geometry = cfg.resolved_geometry
    setup = derive_setup(cfg, spec, seed)
    plans = plan_rounds(cfg)
    oracle = RandomOracle(setup.oracle_params, setup.key)

    sim = Simulator()
    colluders = prover_strategy.place(geometry)
    provers = tuple(c.id for c in colluders)
    view = ProverView(spec=spec, oracle=oracle, geometry=geometry, plan=plans,
                      prover_ids=provers, trial_seed=setup.trial_seed)
    for name in VERIFIERS:
        handler, on_setup = _make_verifier(name, cfg, spec, setup, oracle, plans, provers)
        sim.add_party(name, geometry.position(name), handler, setup=on_setup)
    for colluder in colluders:
        handler, on_setup = colluder.instantiate(view)
        sim.add_party(colluder.id, colluder.position, handler,
                      compute_delay=cfg.compute_delay, setup=on_setup)
        oracle.register(colluder.id)

    last_expected = max(max(p.expected.values()) for p in plans)
    horizon = last_expected + cfg.tau + 2.0 * (geometry.v1 - geometry.v0) + 1.0
    log = sim.run_until(horizon)
    logger.debug(f"{cfg.mode} run seed={setup.seed} strategy={prover_strategy.kind}: {len(log)} events")

    transcript = _transcript(cfg, spec, setup, plans, sim, oracle, provers)
    verdict = verdict_checks(transcript, cfg, spec)
    return RunOutcome(verdict, _with_scores(transcript, verdict), log)


def _transcript(cfg, spec, setup, plans, sim, oracle, provers) -> Transcript:
    v0, v1 = sim.party("V0").state, sim.party("V1").state
    challenges = v0.get("challenges", {})
    flags = {b: spec.round_tests(block.r) for b, block in enumerate(setup.blocks)}
    records = []
    for plan in plans:
        ch, s = challenges[plan.key]
        block = setup.blocks[plan.block]
        ans0, t0 = v0.get("answers", {}).get(plan.key, (None, None))
        ans1, t1 = v1.get("answers", {}).get(plan.key, (None, None))
        records.append(RoundRecord(
            block=plan.block, index=plan.index, ch=ch,
            shares=RoundShares(x=block.x[plan.index - 1], y=block.y[plan.index - 1], s=s,
                               key=setup.key.hex()),
            ans_v0=ans0, ans_v1=ans1,
            expected_v0=plan.expected["V0"], expected_v1=plan.expected["V1"],
            actual_v0=t0, actual_v1=t1,
            test=flags[plan.block][plan.index - 1],
        ))
    sends = [t for p in plans for t in p.send.values()]
    expected = [t for p in plans for t in p.expected.values()]
    return Transcript(
        mode=cfg.mode, rounds=tuple(records),
        verifier_coins=tuple(block.r.hex() for block in setup.blocks),
        start=min(sends), end=max(expected),
        query_logs={p: oracle.query_log(p) for p in provers},
        duplicate_answers=v0.get("duplicates", 0) + v1.get("duplicates", 0),
    )


def _with_scores(transcript: Transcript, verdict: Verdict) -> Transcript:
    results = verdict.diagnostics.get("cr_results")
    if not results:
        return transcript
    rounds = []
    for rnd in transcript.rounds:
        scores = results[rnd.block].get("round_scores", {})
        rounds.append(rnd.model_copy(update={"score": scores.get(rnd.index)}))
    return transcript.model_copy(update={"rounds": tuple(rounds)})


def _require_mode(cfg: CompilerConfig, mode: str) -> None:
    if cfg.mode != mode:
        raise ConfigInvalid(f"expected a {mode} config, got mode={cfg.mode}")


def run_single_round(cfg: CompilerConfig, prover_strategy: Optional[Strategy] = None,
                     seed: Optional[int] = None, spec: Optional[CRProtocolSpec] = None) -> RunOutcome:
    """Both verifiers fire at t = 0; the answer is due at t = 2 on the default line."""
    _require_mode(cfg, "single")
    return _run(cfg, prover_strategy, seed, spec)


def run_sequential(cfg: CompilerConfig, prover_strategy: Optional[Strategy] = None,
                   seed: Optional[int] = None, spec: Optional[CRProtocolSpec] = None) -> RunOutcome:
    """Round i fires at t = i-1 and is due at t = i; later rounds fire regardless of earlier answers."""
    _require_mode(cfg, "sequential")
    return _run(cfg, prover_strategy, seed, spec)


def run_rapid_fire(cfg: CompilerConfig, prover_strategy: Optional[Strategy] = None,
                   seed: Optional[int] = None, spec: Optional[CRProtocolSpec] = None) -> RunOutcome:
    _require_mode(cfg, "rapid-fire")
    return _run(cfg, prover_strategy, seed, spec)


def run_seq_rapid_fire(cfg: CompilerConfig, prover_strategy: Optional[Strategy] = None,
                       seed: Optional[int] = None, spec: Optional[CRProtocolSpec] = None) -> RunOutcome:
    """m rapid-fire blocks back to back; accept iff all are on time and consistent and
    at least alpha*m blocks pass the CR test."""
    _require_mode(cfg, "seq-rapid-fire")
    return _run(cfg, prover_strategy, seed, spec)


_RUNNERS = {
    "single": run_single_round,
    "sequential": run_sequential,
    "rapid-fire": run_rapid_fire,
    "seq-rapid-fire": run_seq_rapid_fire,
}


def run_protocol(cfg: CompilerConfig, prover_strategy: Optional[Strategy] = None,
                 seed: Optional[int] = None, spec: Optional[CRProtocolSpec] = None) -> RunOutcome:
    return _RUNNERS[cfg.mode](cfg, prover_strategy, seed=seed, spec=spec)


# ---------------------------------------------------------------------------
# CVPV -> CR adapter
# ---------------------------------------------------------------------------

class AdapterProtocol(CRProtocolSpec):
    """A single party playing both verifiers of a compiled run.

    Round i's challenge is x_i || s_i || y_i. Timing collapses for a co-located
    party; the verifier keeps the consistency and CR checks of the compiled run.
    The coins ``r`` are a trial seed, so the adapter and the compiled run draw
    identical verifier secrets from the same seed.
    """

    kind = "cvpv-adapter"

    def __init__(self, cfg: CompilerConfig, inner: Optional[CRProtocolSpec] = None):
        inner = build_spec(cfg) if inner is None else inner
        if inner.rounds != cfg.rounds:
            inner = inner.with_rounds(cfg.rounds)
        validate_config(cfg, inner)
        if cfg.block_count != 1:
            raise ConfigInvalid("the adapter bundles a single block")
        self.cfg = cfg
        self.inner = inner
        self.m = cfg.oracle.m
        self.key: Optional[bytes] = None
        super().__init__(rounds=inner.rounds, adaptive=inner.adaptive, n_ch=2 * self.m + inner.n_ch)

    def setup(self, r: bytes) -> TrialSetup:
        return derive_setup(self.cfg, self.inner, int.from_bytes(r[:8], "big"))

    def _oracle(self, setup: TrialSetup) -> RandomOracle:
        return RandomOracle(setup.oracle_params, setup.key)

    def split(self, ch: str) -> Tuple[str, str, str]:
        check_bits(ch, self.n_ch, "adapter challenge")
        return ch[:self.m], ch[self.m:self.m + self.inner.n_ch], ch[self.m + self.inner.n_ch:]

    def _gen(self, i, prior_answers, r):
        setup = self.setup(r)
        block = setup.blocks[0]
        inner_ch = gen_challenge(self.inner, i, prior_answers, block.r)
        x, y = block.x[i - 1], block.y[i - 1]
        s = self._oracle(setup).otp_encode(xor_bits(x, y), inner_ch)
        return x + s + y

    def inner_challenge(self, ch: str, r: bytes) -> str:
        return self._decode(ch, self._oracle(self.setup(r)))

    def published_key(self, r: bytes) -> bytes:
        return self.setup(r).key

    def publish(self, r: bytes) -> bytes:
        """Publish the oracle key of the setup for coins r. Happens once, before round 1."""
        self.key = self.published_key(r)
        return self.key

    def _decode(self, ch: str, oracle: RandomOracle, party: Optional[str] = None) -> str:
        x, s, y = self.split(ch)
        return oracle.otp_decode(xor_bits(x, y), s, party=party)

    def prove(self, ch, history, rng):
        """Honest prover: decode through the published oracle, then run the inner prover."""
        if self.key is None:
            raise ConfigInvalid("no oracle key has been published yet")
        oracle = RandomOracle(oracle_params_for(self.cfg, self.inner), self.key)
        inner_history = [(self._decode(h, oracle), a) for h, a in history]
        return self.inner.prove(self._decode(ch, oracle), inner_history, rng)

    def answer_shape(self):
        return self.inner.answer_shape()

    def with_rounds(self, rounds):
        return AdapterProtocol(self.cfg.model_copy(update={"rounds": rounds}), self.inner.with_rounds(rounds))

    def round_tests(self, r):
        return self.inner.round_tests(self.setup(r).blocks[0].r)

    def verify(self, challenges, answers, r) -> CRResult:
        setup = self.setup(r)
        oracle = self._oracle(setup)
        inner = []
        for i, ch in enumerate(challenges, start=1):
            x, s, y = self.split(ch)
            if (x, y) != (setup.blocks[0].x[i - 1], setup.blocks[0].y[i - 1]):
                return CRResult(accept=False, notes=[f"round {i} shares do not match the verifier's"])
            inner.append(oracle.otp_decode(xor_bits(x, y), s))
        return self.inner.verify(inner, answers, setup.blocks[0].r)


def cvpv_to_cr(cvpv_cfg: CompilerConfig, inner: Optional[CRProtocolSpec] = None) -> AdapterProtocol:
    return AdapterProtocol(cvpv_cfg, inner)


def run_adapter_trial(adapter: AdapterProtocol, seed: int) -> CRResult:
    """One Gen/Ver game of the adapter with its honest prover, using the compiled run's seed."""
    r = trial_seed_bytes(seed)
    setup = adapter.setup(r)
    adapter.publish(r)
    rng = np.random.default_rng(derive_seed(setup.trial_seed, "prover", "P"))
    challenges: List[str] = []
    answers: List[Answer] = []
    for i in range(1, adapter.rounds + 1):
        ch = gen_challenge(adapter, i, answers, r)
        answers.append(adapter.prove(ch, list(zip(challenges, answers)), rng))
        challenges.append(ch)
    return adapter.verify(challenges, answers, r)
