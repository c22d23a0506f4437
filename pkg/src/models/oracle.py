from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator


class OracleParams(BaseModel):
    """Parameters of the keyed hash family G_k: {0,1}^m -> {0,1}^n."""
    model_config = ConfigDict(frozen=True)

    m: int = Field(128, ge=1, description="Input length in bits")
    n: int = Field(128, ge=1, description="Output length in bits")
    security_bits: int = Field(64, ge=8, description="lambda; the key has lambda/8 bytes")
    seed: str = Field("00", description="Hex seed mixed into every evaluation")
    mode: Literal["prf", "lazy"] = "prf"

    @field_validator("seed")
    @classmethod
    def _hex_seed(cls, v: str) -> str:
        try:
            bytes.fromhex(v)
        except ValueError as e:
            raise ValueError(f"oracle seed must be hex, got {v!r}") from e
        return v.lower()

    @property
    def key_bytes(self) -> int:
        return self.security_bits // 8


class QueryRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    z: str
    time: float
