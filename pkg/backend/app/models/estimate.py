"""Estimate models and schemas."""

from typing import Dict, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.utils.errors import SpecSyntaxError


class NullDistribution(BaseModel):
    """Null CDF F_0 applied before the inverse normal transform."""

    kind: Literal["identity", "normal", "student_t"] = "identity"
    mu0: float = 0.0
    sigma0: float = Field(1.0, gt=0.0)
    df: int = Field(1, ge=1)

    @classmethod
    def parse(cls, text: str) -> "NullDistribution":
        """Parse `identity`, `normal:mu=0,sigma=1` or `student_t:df=10`."""
        name, _, rest = text.strip().partition(":")
        name = name.strip().lower()
        fields: Dict[str, str] = {}
        for token in filter(None, (tok.strip() for tok in rest.split(","))):
            key, eq, value = token.partition("=")
            if not eq:
                raise SpecSyntaxError("Invalid null distribution parameter", token)
            fields[key.strip()] = value.strip()
        try:
            if name == "identity":
                return cls(kind="identity")
            if name == "normal":
                return cls(kind="normal", mu0=float(fields.get("mu", 0.0)), sigma0=float(fields.get("sigma", 1.0)))
            if name in ("student_t", "t"):
                return cls(kind="student_t", df=int(fields["df"]))
        except (KeyError, ValueError):
            raise SpecSyntaxError("Invalid null distribution", text)
        raise SpecSyntaxError("Unknown null distribution (valid: identity, normal, student_t)", name)

    def describe(self) -> str:
        if self.kind == "normal":
            return f"normal(mu0={self.mu0}, sigma0={self.sigma0})"
        if self.kind == "student_t":
            return f"student_t(df={self.df})"
        return "identity"


class ZScores(BaseModel):
    """Observed statistics after the inverse normal transform."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    z: np.ndarray
    transform: str = "identity"
    clamped: int = Field(0, ge=0, description="Entries clamped to the finite z window")

    @field_validator("z")
    def validate_z(cls, v):
        """Require a non-empty finite vector."""
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("z must be a non-empty vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("z must be finite")
        return v

    @property
    def p(self) -> int:
        return self.z.shape[0]


class EstimateResult(BaseModel):
    """One proportion estimate with the calibration it used."""

    method: str
    pi_hat: float = Field(..., ge=0.0, le=1.0)
    theta: Union[float, Literal["adaptive"], None] = None
    c_used: Dict[str, float] = {}
    argmax_t: Optional[float] = None
    clamped: bool = False
    raw: Optional[float] = None
    winner: Optional[str] = None

    @model_validator(mode="after")
    def validate_clamped(self):
        """The clamped flag must agree with the raw supremum when one is known."""
        if self.raw is not None and self.clamped != (self.raw < 0.0 or self.raw > 1.0):
            raise ValueError("clamped must be set iff the raw value lies outside [0, 1]")
        return self


class EstimateReport(BaseModel):
    """End-to-end report: calibration, family estimates, baselines and counts."""

    p: int
    alpha: float
    c_half: float
    c_one: float
    pi_half: float
    pi_one: float
    pi_adap: float
    pi_gw: Optional[float] = None
    pi_jc: Optional[float] = None
    c_half_star: Optional[float] = None
    c_one_star: Optional[float] = None
    pi_half_star: Optional[float] = None
    pi_one_star: Optional[float] = None
    counts: Dict[str, int] = {}
    argmax: Dict[str, Optional[float]] = {}
    R: Optional[int] = None
    seed: Optional[int] = None
    transform: str = "identity"
    provenance: str = ""

    @model_validator(mode="after")
    def validate_adaptive(self):
        """The adaptive estimate is exactly the larger family member."""
        if self.pi_adap != max(self.pi_half, self.pi_one):
            raise ValueError("pi_adap must equal max(pi_half, pi_one)")
        return self


def signal_count(pi_hat: float, p: int) -> int:
    """Implied number of signals, rounding half up."""
    return int(np.floor(pi_hat * p + 0.5))
