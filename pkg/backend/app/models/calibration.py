"""Calibration models: bounding specs, null replicates and bounding sequences."""

import math
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

GridMode = Literal["observed", "integer"]


def integer_grid(p: int) -> List[int]:
    """Integer thresholds {1, ..., floor(sqrt(5 log p))}."""
    if p < 2:
        return []
    upper = math.floor(math.sqrt(5.0 * math.log(p)))
    return list(range(1, upper + 1))


class BoundingSpec(BaseModel):
    """Bounding function delta(t) = sf(t)^theta, control level and grid."""

    model_config = ConfigDict(frozen=True)

    theta: float = Field(..., ge=0.0, le=1.0, description="Exponent of the bounding function")
    alpha: float = Field(0.1, gt=0.0, lt=1.0, description="Control level")
    grid: GridMode = Field("observed", description="observed points or integer grid")


class NullReplicates(BaseModel):
    """R x p matrix of joint-null draws, one replicate per row."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray
    provenance: str = Field(..., description="parametric(label, seed) / permutation(seed) / external(path)")
    seed: Optional[int] = None

    @field_validator("values")
    def validate_values(cls, v):
        """Require a non-empty finite 2-D array."""
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"Null replicates must be a non-empty R x p matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("Null replicates must be finite")
        return v

    @property
    def R(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


class BoundingSequence(BaseModel):
    """Calibrated c_{p,delta} with the provenance needed to reproduce it."""

    c: float = Field(..., ge=0.0, allow_inf_nan=False)
    theta: float = Field(..., ge=0.0, le=1.0)
    alpha: float = Field(..., gt=0.0, lt=1.0)
    grid: GridMode
    R: int = Field(..., ge=1)
    p: int = Field(..., ge=1)
    seed: Optional[int] = None
    provenance: str = ""

    @property
    def spec(self) -> BoundingSpec:
        return BoundingSpec(theta=self.theta, alpha=self.alpha, grid=self.grid)

    @model_validator(mode="after")
    def validate_c(self):
        """Allow +inf only as an overflowed statistic, never NaN."""
        if math.isnan(self.c):
            raise ValueError("Bounding sequence must not be NaN")
        return self
