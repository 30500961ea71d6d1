"""HTTP request and response schemas."""

from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from app.config import Config
from app.models.calibration import BoundingSequence, GridMode
from app.models.dependence import StructureSpec


def _check_structure(v: Optional[str]) -> Optional[str]:
    if v is not None and StructureSpec.parse(v).kind == "file":
        raise ValueError("File structures are not accepted over HTTP")
    return v


class MacRequest(BaseModel):
    """Schema for a MAC request."""

    structure: str = Field(..., description="Structure spec, e.g. equal:p=2000,rho=0.5")

    validate_structure = field_validator("structure")(_check_structure)


class MacResponse(BaseModel):
    structure: str
    label: str
    p: int
    mac: float


class CalibrateRequest(BaseModel):
    """Schema for calibrating bounding sequences on a generated structure."""

    structure: str = Field(..., description="Structure spec of the null correlation")
    thetas: List[float] = Field(default_factory=lambda: [0.5, 1.0], min_length=1)
    alpha: float = Field(Config.DEFAULT_ALPHA, gt=0.0, lt=1.0)
    grid: GridMode = "observed"
    reps: int = Field(Config.DEFAULT_REPS, ge=1, description="Number of null replicates R")
    seed: int = 0

    validate_structure = field_validator("structure")(_check_structure)

    @field_validator("thetas")
    def validate_thetas(cls, v):
        """Exponents must lie in [0, 1]."""
        for theta in v:
            if not 0.0 <= theta <= 1.0:
                raise ValueError(f"theta must lie in [0, 1], got {theta}")
        return v


class CalibrateResponse(BaseModel):
    success: bool
    sequences: List[BoundingSequence]


class EstimateRequest(BaseModel):
    """
    Schema for an estimation request.

    Either `structure` (calibrated on the fly) or both `c_half` and `c_one`
    (observed-grid bounding sequences calibrated elsewhere) must be given.
    """

    z: List[float] = Field(..., min_length=1, description="Statistics after the inverse normal transform")
    structure: Optional[str] = Field(None, description="Structure spec of the null correlation")
    c_half: Optional[float] = Field(None, ge=0.0)
    c_one: Optional[float] = Field(None, ge=0.0)
    alpha: float = Field(Config.DEFAULT_ALPHA, gt=0.0, lt=1.0)
    reps: int = Field(Config.DEFAULT_REPS, ge=1)
    seed: int = 0
    discrete: bool = False
    baselines: bool = True
    gw_alpha: float = Field(Config.GW_ALPHA, gt=0.0, lt=1.0)
    jc_gamma: float = Field(Config.JC_GAMMA, gt=0.0, le=0.5)

    validate_structure = field_validator("structure")(_check_structure)

    @model_validator(mode="after")
    def validate_calibration_source(self):
        """Exactly one calibration source."""
        explicit = self.c_half is not None or self.c_one is not None
        if explicit and (self.c_half is None or self.c_one is None):
            raise ValueError("c_half and c_one must be given together")
        if explicit == (self.structure is not None):
            raise ValueError("Provide either 'structure' or both 'c_half' and 'c_one'")
        return self
