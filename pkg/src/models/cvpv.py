from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.bits import bits_to_hex
from src.models.oracle import OracleParams
from src.models.protocol import Answer, RCSBackendConfig

_MAX_DENOMINATOR = 10 ** 9


def exact_ratio(value: float) -> Fraction:
    """The rational a config number stands for, so that 1/49 * 49 is exactly 1."""
    return Fraction(repr(value)).limit_denominator(_MAX_DENOMINATOR)


Mode = Literal["single", "sequential", "rapid-fire", "seq-rapid-fire"]
VERIFIERS = ("V0", "V1")


class Geometry(BaseModel):
    """Two verifiers on the line and the position the prover claims."""
    model_config = ConfigDict(frozen=True)

    v0: float = 0.0
    v1: float = 2.0
    claimed: float = 1.0

    @model_validator(mode="after")
    def _ordered(self):
        if not self.v0 < self.v1:
            raise ValueError("V0 must sit left of V1")
        if not self.v0 <= self.claimed <= self.v1:
            raise ValueError("the claimed position must lie between the verifiers")
        return self

    def position(self, verifier: str) -> float:
        return self.v0 if verifier == "V0" else self.v1

    def distance(self, verifier: str) -> float:
        return abs(self.position(verifier) - self.claimed)

    @property
    def max_distance(self) -> float:
        return max(self.distance("V0"), self.distance("V1"))

    @property
    def fire_window(self) -> float:
        """Upper bound on Delta*(l-1) for rapid fire."""
        return min(self.distance("V0"), self.distance("V1"))


SINGLE_ROUND_GEOMETRY = Geometry(v0=0.0, v1=2.0, claimed=1.0)
UNIT_ROUND_TRIP_GEOMETRY = Geometry(v0=0.0, v1=1.0, claimed=0.5)

_DEFAULT_GEOMETRY = {
    "single": SINGLE_ROUND_GEOMETRY,
    "sequential": UNIT_ROUND_TRIP_GEOMETRY,
    "rapid-fire": SINGLE_ROUND_GEOMETRY,
    "seq-rapid-fire": SINGLE_ROUND_GEOMETRY,
}


class BackendConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["rcs", "always-accept", "deterministic-answer", "coin-flip"] = "rcs"
    rcs: RCSBackendConfig = Field(default_factory=RCSBackendConfig)
    answer_bits: int = Field(8, ge=1, description="Answer length for mock backends")
    adaptive: bool = False


class CompilerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: Mode = "single"
    geometry: Optional[Geometry] = None
    unit_round_trip: bool = False
    rounds: int = Field(1, ge=1, description="l, rounds per block")
    delta_t: Optional[float] = Field(None, description="Delta, rapid-fire spacing")
    blocks: int = Field(1, ge=1, description="m, rapid-fire blocks in seq-rapid-fire")
    alpha: float = Field(1.0, description="Fraction of blocks that must pass the CR test")
    block_gap: float = Field(0.0, ge=0.0)
    tau: float = Field(0.0, ge=0.0, description="Timing tolerance")
    compute_delay: float = Field(0.0, ge=0.0)
    backend: BackendConfig = Field(default_factory=BackendConfig)
    oracle: OracleParams = Field(default_factory=OracleParams)
    seed: int = Field(0, ge=0)

    @property
    def resolved_geometry(self) -> Geometry:
        if self.geometry is not None:
            return self.geometry
        if self.unit_round_trip:
            return UNIT_ROUND_TRIP_GEOMETRY
        return _DEFAULT_GEOMETRY[self.mode]

    @property
    def block_count(self) -> int:
        return self.blocks if self.mode == "seq-rapid-fire" else 1


class RoundShares(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: str
    y: str
    s: str
    key: str = Field(..., description="Hex oracle key")


class RoundPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    block: int
    index: int
    send: Dict[str, float]
    expected: Dict[str, float]

    @property
    def key(self) -> Tuple[int, int]:
        return self.block, self.index


class RoundRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    block: int = 0
    index: int
    ch: str
    shares: RoundShares
    ans_v0: Optional[Answer] = None
    ans_v1: Optional[Answer] = None
    expected_v0: float
    expected_v1: float
    actual_v0: Optional[float] = None
    actual_v1: Optional[float] = None
    test: bool = False
    score: Optional[float] = None

    def to_json_dict(self) -> dict:
        return {
            "block": self.block,
            "round": self.index,
            "ch_hex": bits_to_hex(self.ch),
            "ans_v0": list(self.ans_v0) if self.ans_v0 is not None else None,
            "ans_v1": list(self.ans_v1) if self.ans_v1 is not None else None,
            "T": int(self.test),
            "score": self.score,
        }


class Transcript(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: Mode
    rounds: Tuple[RoundRecord, ...]
    verifier_coins: Tuple[str, ...] = Field(..., description="Hex coins r, one per block")
    start: float = 0.0
    end: float = 0.0
    query_logs: Dict[str, List[Tuple[str, float]]] = Field(default_factory=dict)
    duplicate_answers: int = 0

    @property
    def span(self) -> float:
        return self.end - self.start

    def block_rounds(self, block: int) -> List[RoundRecord]:
        return [r for r in self.rounds if r.block == block]

    def timings(self) -> List[dict]:
        return [
            {"block": r.block, "round": r.index,
             "expected": [r.expected_v0, r.expected_v1],
             "actual": [r.actual_v0, r.actual_v1]}
            for r in self.rounds
        ]


class Reason(str, Enum):
    TIMING = "Timing"
    CONSISTENCY = "Consistency"
    CRTEST = "CRTest"
    NONE = "None"


class Verdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    accept: bool
    reason: Reason = Reason.NONE
    diagnostics: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _accept_iff_no_reason(self):
        if self.accept != (self.reason == Reason.NONE):
            raise ValueError("accept must hold exactly when there is no rejection reason")
        return self
