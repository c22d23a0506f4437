"""Certified-randomness protocols in Gen/Ver form: the RCS backend and mocks."""
import logging
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.models.bits import random_bits
from src.models.circuit import SampleSet
from src.models.errors import DimensionMismatch, IndexOutOfRange, NoTestRounds, UnknownKind
from src.models.protocol import Answer, CRResult, CRRound, CRTranscript, RCSBackendConfig
from src.service import qsim_service as qsim
from src.service.oracle_service import derive_bits

logger = logging.getLogger(__name__)

_UNIT_BITS = 53


class CRProtocolSpec(ABC):
    """An l-round PoQ verifier V = (Gen_1..Gen_l, Ver) plus its honest prover.

    Non-adaptive specs must never read ``prior_answers`` inside ``_gen``.
    """

    kind: str = "abstract"

    def __init__(self, rounds: int, adaptive: bool, n_ch: int):
        if rounds < 1:
            raise IndexOutOfRange("a protocol needs at least one round")
        self.rounds = rounds
        self.adaptive = adaptive
        self.n_ch = n_ch

    @abstractmethod
    def _gen(self, i: int, prior_answers: Sequence[Optional[Answer]], r: bytes) -> str:
        ...

    @abstractmethod
    def verify(self, challenges: Sequence[str], answers: Sequence[Optional[Answer]], r: bytes) -> CRResult:
        ...

    @abstractmethod
    def prove(self, ch: str, history: Sequence[Tuple[str, Answer]], rng: np.random.Generator) -> Answer:
        ...

    @abstractmethod
    def answer_shape(self) -> Tuple[int, int]:
        """(strings per answer, bits per string)."""

    @abstractmethod
    def with_rounds(self, rounds: int) -> "CRProtocolSpec":
        ...

    def uniform_answer(self, rng: np.random.Generator) -> Answer:
        count, bits = self.answer_shape()
        return tuple(random_bits(rng, bits) for _ in range(count))

    def round_tests(self, r: bytes) -> List[bool]:
        """Which rounds the verifier will score. Mocks score none individually."""
        return [False] * self.rounds


def gen_challenge(spec: CRProtocolSpec, i: int, prior_answers: Sequence[Optional[Answer]], r: bytes) -> str:
    """ch_i = Gen_i(ans_1..ans_{i-1}; r), 1-based."""
    if not 1 <= i <= spec.rounds:
        raise IndexOutOfRange(f"round {i} outside [1, {spec.rounds}]")
    if len(prior_answers) != i - 1:
        raise IndexOutOfRange(f"round {i} needs {i - 1} prior answers, got {len(prior_answers)}")
    return spec._gen(i, list(prior_answers), r)


def _unit_interval(r: bytes, label: str, i: int) -> float:
    return int(derive_bits(r, label, i, nbits=_UNIT_BITS), 2) / float(2 ** _UNIT_BITS)


# ---------------------------------------------------------------------------
# RCS backend
# ---------------------------------------------------------------------------

def honest_prove_rcs(ch: str, cfg: RCSBackendConfig, rng: np.random.Generator) -> Answer:
    """k samples from the exact output distribution of C(ch)."""
    circuit = qsim.build_circuit(ch, cfg.ansatz)
    return qsim.sample(qsim.simulate(circuit), cfg.k, rng).bitstrings


def draw_test_flags(cfg: RCSBackendConfig, rounds: int, r: bytes) -> List[bool]:
    """T_i ~ Bernoulli(gamma), from a PRF domain disjoint from the challenges.

    A one-round protocol always tests its round.
    """
    if rounds == 1:
        return [True]
    return [_unit_interval(r, "test", i) < cfg.gamma for i in range(1, rounds + 1)]


def score_transcript(transcript: CRTranscript, cfg: RCSBackendConfig) -> CRTranscript:
    """Recompute p_C exactly for every test round and fill in the scores."""
    scored = []
    for rnd in transcript.rounds:
        if not rnd.test:
            scored.append(rnd.model_copy(update={"score": None}))
            continue
        score = 0.0
        if rnd.ans:
            try:
                probs = qsim.output_probabilities(qsim.build_circuit(rnd.ch, cfg.ansatz))
                score = qsim.score_from_probabilities(
                    probs, SampleSet(n_qubits=cfg.n_qubits, bitstrings=tuple(rnd.ans)))
            except (DimensionMismatch, ValueError) as e:
                logger.debug(f"malformed answer scores zero: {e}")
                score = 0.0
        scored.append(rnd.model_copy(update={"score": score}))
    tests = [r.score for r in scored if r.test]
    total = float(np.mean(tests)) if tests else None
    accept = None if total is None else total >= cfg.threshold
    return CRTranscript(rounds=tuple(scored), total_score=total, accept=accept)


def verify_rcs(transcript: CRTranscript, cfg: RCSBackendConfig) -> bool:
    """Accept iff (1/t) sum_{T_i=1} p_{C_i}(A_i) >= (1+delta)/N."""
    if transcript.test_rounds == 0:
        raise NoTestRounds("no round was selected for testing")
    return bool(score_transcript(transcript, cfg).accept)


class RCSProtocol(CRProtocolSpec):
    kind = "rcs"

    def __init__(self, cfg: RCSBackendConfig, rounds: int = 1):
        super().__init__(rounds=rounds, adaptive=False, n_ch=cfg.challenge_bits)
        self.cfg = cfg

    def _gen(self, i, prior_answers, r):
        # fresh challenge every round
        return derive_bits(r, "ch", i, nbits=self.n_ch)

    def prove(self, ch, history, rng):
        return honest_prove_rcs(ch, self.cfg, rng)

    def answer_shape(self):
        return self.cfg.k, self.cfg.n_qubits

    def with_rounds(self, rounds):
        return RCSProtocol(self.cfg, rounds)

    def round_tests(self, r):
        return draw_test_flags(self.cfg, self.rounds, r)

    def transcript(self, challenges: Sequence[str], answers: Sequence[Optional[Answer]], r: bytes) -> CRTranscript:
        flags = draw_test_flags(self.cfg, len(challenges), r)
        return CRTranscript(rounds=tuple(
            CRRound(ch=ch, ans=tuple(ans) if ans is not None else None, test=t)
            for ch, ans, t in zip(challenges, answers, flags)
        ))

    def verify(self, challenges, answers, r):
        scored = score_transcript(self.transcript(challenges, answers, r), self.cfg)
        round_scores = {i + 1: rnd.score for i, rnd in enumerate(scored.rounds) if rnd.score is not None}
        if scored.total_score is None:
            logger.warning("no test rounds drawn, accepting vacuously")
            return CRResult(accept=True, vacuous=True, threshold=self.cfg.threshold,
                            notes=["no test rounds"])
        return CRResult(
            accept=bool(scored.accept), score=scored.total_score, threshold=self.cfg.threshold,
            test_rounds=scored.test_rounds, round_scores=round_scores,
        )


# ---------------------------------------------------------------------------
# Mock backends
# ---------------------------------------------------------------------------

MOCK_KINDS = ("always-accept", "deterministic-answer", "coin-flip")


class MockProtocol(CRProtocolSpec):
    """Trivial Gen/Ver used to exercise the compilers without a simulator."""

    def __init__(self, kind: str, rounds: int = 1, answer_bits: int = 8, n_ch: int = 64,
                 adaptive: bool = False):
        if kind not in MOCK_KINDS:
            raise UnknownKind(f"unknown mock backend {kind!r}; expected one of {MOCK_KINDS}")
        super().__init__(rounds=rounds, adaptive=adaptive, n_ch=n_ch)
        self.kind = kind
        self.answer_bits = answer_bits

    def _gen(self, i, prior_answers, r):
        if self.adaptive:
            history = "|".join(",".join(a) if a else "-" for a in prior_answers)
            return derive_bits(r, "mock-ch", i, history, nbits=self.n_ch)
        return derive_bits(r, "mock-ch", i, nbits=self.n_ch)

    def deterministic_answer(self, ch: str) -> Answer:
        return (derive_bits(ch.encode("ascii"), "mock-answer", nbits=self.answer_bits),)

    def prove(self, ch, history, rng):
        if self.kind == "deterministic-answer":
            return self.deterministic_answer(ch)
        return (random_bits(rng, self.answer_bits),)

    def answer_shape(self):
        return 1, self.answer_bits

    def with_rounds(self, rounds):
        return MockProtocol(self.kind, rounds, self.answer_bits, self.n_ch, self.adaptive)

    def _well_formed(self, ans: Optional[Answer]) -> bool:
        return ans is not None and len(ans) == 1 and len(ans[0]) == self.answer_bits

    def verify(self, challenges, answers, r):
        if self.kind == "always-accept":
            return CRResult(accept=True)
        if self.kind == "deterministic-answer":
            ok = all(ans is not None and tuple(ans) == self.deterministic_answer(ch)
                     for ch, ans in zip(challenges, answers))
            return CRResult(accept=ok)
        return CRResult(accept=all(self._well_formed(a) for a in answers))


def mock_backend(kind: str, rounds: int = 1, **kwargs) -> CRProtocolSpec:
    return MockProtocol(kind, rounds=rounds, **kwargs)
