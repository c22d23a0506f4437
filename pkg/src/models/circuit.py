from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.config.settings import settings


class AnsatzConfig(BaseModel):
    """Seeded brickwork ansatz: rotation layer then alternating CZ pairs, ``depth`` times."""
    model_config = ConfigDict(frozen=True)

    n_qubits: int = Field(8, ge=1)
    depth: int = Field(default_factory=lambda: settings.default_depth, ge=0)
    seed_bits: int = Field(64, ge=1, description="Minimum challenge length accepted as a circuit seed")


class Gate(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: str
    qubits: Tuple[int, ...]
    params: Tuple[float, ...] = ()

    def to_text(self) -> str:
        fields = [self.kind, *(str(q) for q in self.qubits), *(repr(p) for p in self.params)]
        return " ".join(fields)


class Circuit(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_qubits: int = Field(..., ge=1)
    depth: int = Field(..., ge=0)
    gates: Tuple[Gate, ...] = ()
    seed: str = Field("", description="Challenge bitstring the circuit was expanded from")

    @model_validator(mode="after")
    def _qubits_in_range(self):
        for gate in self.gates:
            if any(q < 0 or q >= self.n_qubits for q in gate.qubits):
                raise ValueError(f"gate {gate.kind} acts outside {self.n_qubits} qubits: {gate.qubits}")
        return self

    @property
    def dimension(self) -> int:
        return 2 ** self.n_qubits

    def to_text(self) -> str:
        """One gate per line: ``kind q0 [q1] [angle...]``."""
        return "\n".join(g.to_text() for g in self.gates)

    @classmethod
    def from_text(cls, text: str, n_qubits: int, depth: int = 0, seed: str = "") -> "Circuit":
        gates = []
        for line in text.splitlines():
            if not line.strip():
                continue
            kind, *rest = line.split()
            arity = 2 if kind == "cz" else 1
            gates.append(Gate(kind=kind, qubits=tuple(int(q) for q in rest[:arity]),
                              params=tuple(float(p) for p in rest[arity:])))
        return cls(n_qubits=n_qubits, depth=depth, gates=tuple(gates), seed=seed)


class StateVector(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_qubits: int
    amplitudes: np.ndarray

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


class SampleSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_qubits: int
    bitstrings: Tuple[str, ...]

    @field_validator("bitstrings")
    @classmethod
    def _binary(cls, v):
        for z in v:
            if any(c not in "01" for c in z):
                raise ValueError(f"not a bitstring: {z!r}")
        return v

    @property
    def k(self) -> int:
        return len(self.bitstrings)
