"""Referee for the multi-round certified-randomness guessing games.

V sits at 0, the prover P at -1 and the guesser Q at +1. Round i's challenge leaves
V at ``(i-1)*period``, reaches P and Q one unit later, and the answer and the guess
are both committed at that instant. P and Q may talk to each other only as the
communication mode allows; the fabric guard raises CommModeViolation otherwise.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from src.core.crcore import CRProtocolSpec, gen_challenge
from src.core.spacetime import TIMER, PartyContext, Simulator
from src.models.errors import CommModeViolation
from src.models.protocol import Answer
from src.models.spacetime import EventLog, SpacetimeMessage
from src.service.oracle_service import derive_bytes, derive_seed

logger = logging.getLogger(__name__)

CommMode = Literal["free", "simultaneous-one-round", "none"]
POSITIONS = {"V": 0.0, "P": -1.0, "Q": 1.0}
_PAIR = frozenset({"P", "Q"})


class GuessingGameConfig(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    comm_mode: CommMode = "none"
    spec: CRProtocolSpec
    prover: Literal["honest", "honest-echo"] = "honest"
    guesser: Literal["copy-prover", "uniform", "echo"] = "copy-prover"
    period: float = Field(5.0, ge=4.0, description="Time between challenges; leaves room for a P-Q round trip")
    seed: int = Field(0, ge=0)


@dataclass(frozen=True)
class GameOutcome:
    accept: bool
    matches: Tuple[bool, ...]
    log: EventLog

    @property
    def win(self) -> bool:
        return self.accept and all(self.matches)


class CommGuard:
    """Gates P<->Q traffic; every other message is the referee's business."""

    def __init__(self, mode: CommMode, period: float):
        self.mode = mode
        self.period = period
        self._windows: Dict[int, Dict[str, float]] = {}

    def window(self, t_send: float) -> int:
        # window i opens when round i's challenge reaches P and Q
        return int(np.floor((t_send - 1.0) / self.period))

    def __call__(self, msg: SpacetimeMessage) -> None:
        if frozenset({msg.sender, msg.receiver}) != _PAIR:
            return
        if self.mode == "free":
            return
        if self.mode == "none":
            raise CommModeViolation(f"{msg.sender} tried to reach {msg.receiver} at t={msg.t_send}")
        sent = self._windows.setdefault(self.window(msg.t_send), {})
        if msg.sender in sent:
            raise CommModeViolation(f"{msg.sender} already used its message in this round")
        other = next(iter(_PAIR - {msg.sender}))
        if other in sent and sent[other] != msg.t_send:
            raise CommModeViolation("simultaneous communication requires both messages at the same time")
        sent[msg.sender] = msg.t_send


def _prover(cfg: GuessingGameConfig, rng: np.random.Generator):
    def handle(ctx: PartyContext, batch) -> None:
        history = ctx.state.setdefault("history", [])
        for delivery in batch:
            if delivery.kind != "challenge":
                continue
            data = delivery.data
            ans = cfg.spec.prove(data["ch"], list(history), rng)
            history.append((data["ch"], ans))
            ctx.send("V", {"round": data["round"], "ans": list(ans)}, kind="answer")
            if cfg.prover == "honest-echo":
                ctx.send("Q", {"round": data["round"], "ans": list(ans)}, kind="echo")
    return handle


def _guesser(cfg: GuessingGameConfig, seed: bytes):
    private = np.random.default_rng(derive_seed(seed, "guesser"))

    def guess(ctx: PartyContext, ch: str) -> Answer:
        history = ctx.state.setdefault("history", [])
        if cfg.guesser == "uniform":
            return cfg.spec.uniform_answer(private)
        if cfg.guesser == "echo":
            echoed = "|".join(",".join(a) for a in ctx.state.get("echoes", []))
            rng = np.random.default_rng(derive_seed(seed, "echo", echoed))
        else:
            rng = private
        ans = cfg.spec.prove(ch, list(history), rng)
        history.append((ch, ans))
        return ans

    def handle(ctx: PartyContext, batch) -> None:
        for delivery in batch:
            if delivery.kind == "echo":
                ctx.state.setdefault("echoes", []).append(tuple(delivery.data["ans"]))
        for delivery in batch:
            if delivery.kind == "challenge":
                data = delivery.data
                ctx.send("V", {"round": data["round"], "ans": list(guess(ctx, data["ch"]))}, kind="guess")
    return handle


def _verifier(cfg: GuessingGameConfig, r: bytes):
    spec = cfg.spec

    def deadline(i: int) -> float:
        return (i - 1) * cfg.period + 2.0

    def setup(ctx: PartyContext) -> None:
        for i in range(1, spec.rounds + 1):
            ctx.wake_at((i - 1) * cfg.period, {"round": i})

    def handle(ctx: PartyContext, batch) -> None:
        for delivery in batch:
            if delivery.kind in ("answer", "guess"):
                data = delivery.data
                i = int(data["round"])
                if delivery.t <= deadline(i):
                    ctx.state.setdefault(delivery.kind, {}).setdefault(i, tuple(data["ans"]))
        for delivery in batch:
            if delivery.kind != TIMER:
                continue
            i = delivery.data["round"]
            answers = ctx.state.get("answer", {})
            ch = gen_challenge(spec, i, [answers.get(j) for j in range(1, i)], r)
            ctx.state.setdefault("challenges", []).append(ch)
            ctx.broadcast(("P", "Q"), {"round": i, "ch": ch}, kind="challenge")

    return handle, setup


def play_guessing_game(cfg: GuessingGameConfig, seed: Optional[int] = None) -> GameOutcome:
    """One game; raises CommModeViolation if a strategy breaks the communication rule."""
    seed_bytes = int(cfg.seed if seed is None else seed).to_bytes(8, "big")
    r = derive_bytes(seed_bytes, "verifier-coins", nbytes=32)
    sim = Simulator(guard=CommGuard(cfg.comm_mode, cfg.period))
    v_handler, v_setup = _verifier(cfg, r)
    sim.add_party("V", POSITIONS["V"], v_handler, setup=v_setup)
    sim.add_party("P", POSITIONS["P"], _prover(cfg, np.random.default_rng(derive_seed(seed_bytes, "prover"))))
    sim.add_party("Q", POSITIONS["Q"], _guesser(cfg, seed_bytes))
    log = sim.run_until(cfg.spec.rounds * cfg.period + 2.0)

    state = sim.party("V").state
    rounds = range(1, cfg.spec.rounds + 1)
    answers: List[Optional[Answer]] = [state.get("answer", {}).get(i) for i in rounds]
    guesses = [state.get("guess", {}).get(i) for i in rounds]
    accept = all(a is not None for a in answers) and cfg.spec.verify(state["challenges"], answers, r).accept
    matches = tuple(a is not None and a == g for a, g in zip(answers, guesses))
    return GameOutcome(accept=accept, matches=matches, log=log)


def run_guessing_game(cfg: GuessingGameConfig, trials: int, progress: bool = False) -> float:
    """Fraction of trials where V accepts and every guess equals the prover's answer."""
    if trials < 1:
        raise ValueError("trials must be positive")
    master = int(cfg.seed).to_bytes(8, "big")
    wins = 0
    for t in tqdm(range(trials), desc=f"guessing game ({cfg.comm_mode})", disable=not progress):
        wins += play_guessing_game(cfg, seed=derive_seed(master, "game-trial", t)).win
    rate = wins / trials
    logger.info(f"guessing game {cfg.comm_mode}/{cfg.guesser}: win rate {rate:.4f} over {trials} trials")
    return rate
