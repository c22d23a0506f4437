from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.config.settings import settings
from src.models.bits import bits_to_hex
from src.models.circuit import AnsatzConfig

Answer = Tuple[str, ...]


class RCSBackendConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_qubits: int = Field(8, ge=1)
    depth: int = Field(default_factory=lambda: settings.default_depth, ge=0)
    k: int = Field(100, ge=1, description="Samples returned per round")
    gamma: float = Field(0.5, ge=0.0, le=1.0, description="Probability that a round is a test round")
    delta: float = Field(0.5, gt=0.0, description="Score margin; threshold is (1+delta)/N")
    challenge_bits: int = Field(128, ge=64)

    @property
    def dimension(self) -> int:
        return 2 ** self.n_qubits

    @property
    def threshold(self) -> float:
        return (1.0 + self.delta) / self.dimension

    @property
    def ansatz(self) -> AnsatzConfig:
        return AnsatzConfig(n_qubits=self.n_qubits, depth=self.depth,
                            seed_bits=64)


class CRRound(BaseModel):
    model_config = ConfigDict(frozen=True)

    ch: str
    ans: Optional[Answer] = None
    test: bool = False
    score: Optional[float] = None


class CRTranscript(BaseModel):
    model_config = ConfigDict(frozen=True)

    rounds: Tuple[CRRound, ...] = ()
    total_score: Optional[float] = None
    accept: Optional[bool] = None

    @property
    def test_rounds(self) -> int:
        return sum(1 for r in self.rounds if r.test)

    def to_json_dict(self) -> dict:
        rounds = []
        for r in self.rounds:
            entry = {
                "ch_hex": bits_to_hex(r.ch),
                "ans_hex": [bits_to_hex(a) for a in (r.ans or ())],
                "T": int(r.test),
            }
            if r.score is not None:
                entry["score"] = r.score
            rounds.append(entry)
        return {"rounds": rounds, "total_score": self.total_score, "accept": self.accept}


class CRResult(BaseModel):
    """Outcome of a backend verifier over one block of rounds."""
    model_config = ConfigDict(frozen=True)

    accept: bool
    score: Optional[float] = None
    threshold: Optional[float] = None
    test_rounds: int = 0
    vacuous: bool = False
    round_scores: Dict[int, float] = Field(default_factory=dict)
    notes: List[str] = Field(default_factory=list)

    @field_validator("round_scores")
    @classmethod
    def _scores_in_range(cls, v):
        for i, s in v.items():
            if not 0.0 <= s <= 1.0 + 1e-12:
                raise ValueError(f"round {i} score {s} outside [0, 1]")
        return v
