"""Experiment configuration and result models."""

import math
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from app.config import Config
from app.models.calibration import GridMode
from app.models.dependence import StructureSpec

ESTIMATOR_NAMES = ("half", "one", "adap", "gw", "jc", "half_star", "one_star")
FAMILY_ESTIMATORS = ("half", "one", "adap")


class SignalSpec(BaseModel):
    """Signal proportion (directly or via pi = p^-gamma) and intensity."""

    pi: Optional[float] = Field(None, gt=0.0, lt=1.0)
    gamma: Optional[float] = Field(None, gt=0.0)
    mu: float = Field(..., ge=0.0, description="Signal mean A")
    placement: Literal["uniform-random"] = "uniform-random"

    @model_validator(mode="after")
    def validate_proportion(self):
        """Exactly one of pi / gamma must be given."""
        if (self.pi is None) == (self.gamma is None):
            raise ValueError("Exactly one of pi or gamma must be set")
        return self

    def proportion(self, p: int) -> float:
        return self.pi if self.pi is not None else p ** (-self.gamma)

    def count(self, p: int) -> int:
        return int(math.floor(self.proportion(p) * p + 0.5))


class CalibrationSettings(BaseModel):
    """Null calibration settings shared by every cell of one structure."""

    R: int = Field(Config.DEFAULT_REPS, ge=1)
    alpha: float = Field(Config.DEFAULT_ALPHA, gt=0.0, lt=1.0)
    grid: GridMode = "observed"


class ExperimentConfig(BaseModel):
    """Config-driven experiment: structures x pi grid x mu grid x estimators."""

    structures: List[str] = Field(..., min_length=1, description="Structure specs, e.g. ar:p=2000,r=0.9")
    pis: List[float] = Field(default_factory=list)
    gammas: List[float] = Field(default_factory=list)
    mus: List[float] = Field(..., min_length=1)
    replications: int = Field(Config.DESK_REPLICATIONS, ge=1)
    calibration: CalibrationSettings = Field(default_factory=CalibrationSettings)
    estimators: List[str] = Field(default_factory=lambda: ["half", "one", "adap"])
    gw_alpha: float = Field(Config.GW_ALPHA, gt=0.0, lt=1.0)
    jc_gamma: float = Field(Config.JC_GAMMA, gt=0.0, le=0.5)
    seed: int = 0
    calibration_seed: Optional[int] = Field(None, description="Seed of the null calibration; defaults to seed")

    @field_validator("structures")
    def validate_structures(cls, v):
        """Every structure must parse."""
        for text in v:
            StructureSpec.parse(text)
        return v

    @field_validator("pis")
    def validate_pis(cls, v):
        """Proportions must lie strictly inside (0, 1)."""
        for pi in v:
            if not 0.0 < pi < 1.0:
                raise ValueError(f"Signal proportion must lie in (0, 1), got {pi}")
        return v

    @field_validator("mus")
    def validate_mus(cls, v):
        """Signal means must be non-negative."""
        if any(mu < 0 for mu in v):
            raise ValueError("Signal means must be non-negative")
        return v

    @field_validator("estimators")
    def validate_estimators(cls, v):
        """Every estimator name must be recognized."""
        unknown = [name for name in v if name not in ESTIMATOR_NAMES]
        if unknown:
            raise ValueError(f"Unknown estimator(s) {unknown}; valid: {', '.join(ESTIMATOR_NAMES)}")
        if not v:
            raise ValueError("At least one estimator must be selected")
        return v

    @model_validator(mode="after")
    def validate_signal_grid(self):
        """Exactly one of the pi grid / gamma grid must be non-empty."""
        if bool(self.pis) == bool(self.gammas):
            raise ValueError("Provide exactly one of 'pis' or 'gammas'")
        return self

    def signal_specs(self) -> List[SignalSpec]:
        """Signal cells in (proportion, mu) order."""
        if self.pis:
            return [SignalSpec(pi=pi, mu=mu) for pi in self.pis for mu in self.mus]
        return [SignalSpec(gamma=gamma, mu=mu) for gamma in self.gammas for mu in self.mus]


class CellSummary(BaseModel):
    """Mean / sd of one estimator in one (structure, pi, mu) cell."""

    structure: str
    label: str
    mac: float
    pi: float
    mu: float
    estimator: str
    n: int
    mean: float
    sd: float
    values: List[float]


class ExperimentResult(BaseModel):
    """Aggregated results plus per-replicate values and calibration."""

    config: ExperimentConfig
    cells: List[CellSummary] = []
    mac: Dict[str, float] = {}
    calibration: Dict[str, Dict[str, float]] = {}


class CoverageRow(BaseModel):
    """Exceedance rate P(pi_hat >= pi) of one estimator in one cell."""

    structure: str
    pi: float
    mu: float
    estimator: str
    n: int
    exceedances: int
    rate: float
    alpha: float
    band: float


class VarianceRow(BaseModel):
    """Monte-Carlo variance of the null exceedance proportion at threshold t."""

    structure: str
    t: float
    mac: float
    variance: float
    reference: float
    ratio: float


class MacCRow(BaseModel):
    """MAC level and calibrated bounding sequences of one structure."""

    structure: str
    label: str
    mac: float
    c_half: float
    c_one: float
