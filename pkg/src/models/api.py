from typing import Optional

from pydantic import BaseModel, Field

from src.models.campaign import StrategySpec
from src.models.cvpv import CompilerConfig
from src.models.entropy import EATParams


class SmoothRequest(BaseModel):
    h_smooth: float
    eps: float


class SuccessRequest(BaseModel):
    p_test: Optional[float] = None
    hmin: Optional[float] = None
    p_block: Optional[float] = None
    alpha: Optional[float] = None
    m: Optional[int] = None


class XhogRequest(BaseModel):
    n: int
    delta: float
    eta: float
    c_log: float = 0.0


class BoundsRequest(BaseModel):
    eat: Optional[EATParams] = None
    g_eps: Optional[float] = None
    smooth: Optional[SmoothRequest] = None
    success: Optional[SuccessRequest] = None
    xhog: Optional[XhogRequest] = None


class TrialRequest(BaseModel):
    compiler: CompilerConfig = Field(default_factory=CompilerConfig)
    strategy: StrategySpec = Field(default_factory=StrategySpec)
    seed: int = Field(0, ge=0)
