from fractions import Fraction
from typing import Dict, Hashable, Mapping, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Number = Union[float, Fraction]


class MinTradeoff(BaseModel):
    """Affine f(q) = constant + sum_x coeffs[x] * q(x) over an alphabet."""
    model_config = ConfigDict(frozen=True)

    alphabet: Tuple[Hashable, ...] = (0, 1)
    constant: float = 0.0
    coeffs: Dict[Hashable, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _coeffs_in_alphabet(self):
        if not self.alphabet:
            raise ValueError("the alphabet must not be empty")
        stray = set(self.coeffs) - set(self.alphabet)
        if stray:
            raise ValueError(f"coefficients for symbols outside the alphabet: {sorted(map(str, stray))}")
        return self

    def evaluate(self, q: Mapping[Hashable, Number]) -> float:
        return float(self.constant + sum(c * float(q.get(x, 0)) for x, c in self.coeffs.items()))


class FrequencyRegion(BaseModel):
    """A convex set of frequency vectors given by its vertices."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    vertices: Tuple[Dict[Hashable, Fraction], ...]

    @field_validator("vertices")
    @classmethod
    def _distributions(cls, v):
        for vertex in v:
            if sum(vertex.values()) != 1 or any(p < 0 for p in vertex.values()):
                raise ValueError(f"vertex {vertex} is not a probability vector")
        return v


class EATParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1, description="Rounds")
    h: float = Field(..., description="Per-round entropy rate")
    c1: float = Field(0.0, ge=0.0)
    c0: float = Field(0.0, ge=0.0)
    eps: float = Field(0.5, gt=0.0, lt=1.0, description="Smoothing parameter")


class SuccessBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    single: Optional[float] = None
    repeated: Optional[float] = None
    repeated_raw: Optional[float] = None
    exponent: Optional[int] = Field(None, description="floor(alpha*m)")

    @property
    def vacuous(self) -> bool:
        return self.repeated_raw is not None and self.repeated_raw >= 1.0
