from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.config.settings import settings
from src.models.cvpv import CompilerConfig, Mode


class StrategySpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: str = "honest"
    params: Dict[str, Any] = Field(default_factory=dict)


class SweepSpec(BaseModel):
    """Cartesian grid: strategies x modes x every combination of ``grid`` values.

    Grid keys are dotted paths into CompilerConfig, e.g. ``backend.rcs.delta``.
    """
    model_config = ConfigDict(frozen=True)

    strategies: List[StrategySpec] = Field(default_factory=lambda: [StrategySpec()])
    modes: List[Mode] = Field(default_factory=lambda: ["single"])
    grid: Dict[str, List[Any]] = Field(default_factory=dict)


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    compiler: CompilerConfig = Field(default_factory=CompilerConfig)
    strategy: StrategySpec = Field(default_factory=StrategySpec)
    trials: int = Field(10, ge=0)
    seed: str = Field("00", description="Hex master seed; it fixes every trial of the campaign")
    workers: int = Field(default_factory=lambda: settings.default_workers, ge=1)
    out_dir: str = Field(default_factory=lambda: settings.output_dir)
    sweep: Optional[SweepSpec] = None

    @field_validator("seed")
    @classmethod
    def _hex(cls, v: str) -> str:
        v = v.lower().removeprefix("0x")
        try:
            bytes.fromhex(v if len(v) % 2 == 0 else "0" + v)
        except ValueError as e:
            raise ValueError(f"master seed must be hex, got {v!r}") from e
        return v

    @property
    def master_seed(self) -> bytes:
        return bytes.fromhex(self.seed if len(self.seed) % 2 == 0 else "0" + self.seed)


class TrialRecord(BaseModel):
    """One line of trials.jsonl."""
    model_config = ConfigDict(frozen=True)

    trial: int
    seed: str
    strategy: str
    strategy_params: Dict[str, Any] = Field(default_factory=dict)
    mode: Mode
    params: Dict[str, Any] = Field(default_factory=dict, description="Sweep-grid overrides of the cell")
    verdict: str
    reason: str
    score: Optional[float] = None
    span: float
    light_cone_violations: int = 0
    informed_cross_talk: int = 0
    rounds: List[Dict[str, Any]] = Field(default_factory=list)
    timings: List[Dict[str, Any]] = Field(default_factory=list)

    @property
    def accept(self) -> bool:
        return self.verdict == "Accept"


class CellReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    strategy: str
    mode: Mode
    params: Dict[str, Any] = Field(default_factory=dict)
    trials: int
    accept_rate: float = Field(..., ge=0.0, le=1.0)
    reason_histogram: Dict[str, int]
    mean_score: Optional[float] = None
    light_cone_violations: int = 0
    informed_cross_talk: int = 0
    seeds: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _histogram_covers_trials(self):
        if sum(self.reason_histogram.values()) != self.trials:
            raise ValueError("the reason histogram must sum to the trial count")
        return self


class CampaignReport(BaseModel):
    schema_version: int = settings.report_schema_version
    master_seed: str
    config: Dict[str, Any]
    cells: List[CellReport] = Field(default_factory=list)
    wall_clock: float = Field(0.0, exclude=True, description="Seconds; kept out of report.json")

    @property
    def trials(self) -> int:
        return sum(c.trials for c in self.cells)
