"""Correlation structure models and schemas."""

from typing import Dict, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from app.utils.errors import SpecSyntaxError
from app.utils.numerics import CholeskyFactor, cholesky

STRUCTURE_TOL = 1e-8


class CorrelationMatrix(BaseModel):
    """Dense p x p correlation matrix with a lazily computed Cholesky factor."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    p: int = Field(..., gt=0, description="Dimension")
    entries: np.ndarray = Field(..., description="Dense p x p entries")
    label: str = Field("custom", description="Human readable structure tag")

    _factor: Optional[CholeskyFactor] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def validate_entries(self):
        """Check shape, symmetry, unit diagonal and entry bounds."""
        m = self.entries
        if m.shape != (self.p, self.p):
            raise ValueError(f"Entries must have shape ({self.p}, {self.p}), got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("Entries must be finite")
        if np.max(np.abs(m - m.T)) > STRUCTURE_TOL:
            raise ValueError("Correlation matrix must be symmetric")
        if np.max(np.abs(np.diag(m) - 1.0)) > STRUCTURE_TOL:
            raise ValueError("Correlation matrix must have a unit diagonal")
        if np.max(np.abs(m)) > 1.0 + STRUCTURE_TOL:
            raise ValueError("Correlation entries must lie in [-1, 1]")
        return self

    def factor(self) -> CholeskyFactor:
        """Cholesky factor, computed on first use."""
        if self._factor is None:
            self._factor = cholesky(self.entries)
        return self._factor


class MacLevel(BaseModel):
    """Mean absolute correlation of a p x p matrix."""

    value: float = Field(..., gt=0.0, le=1.0 + STRUCTURE_TOL)
    p: int = Field(..., gt=0)

    @model_validator(mode="after")
    def validate_floor(self):
        """The diagonal alone contributes 1/p."""
        if self.value < 1.0 / self.p - STRUCTURE_TOL:
            raise ValueError(f"MAC {self.value} is below the diagonal floor 1/{self.p}")
        return self


_STRUCTURE_KEYS = {
    "ar": {"p": int, "r": float},
    "equal": {"p": int, "rho": float},
    "block": {"p": int, "size": int, "rho": float},
    "sparse": {"p": int, "prob": float, "value": float, "seed": int},
    "identity": {"p": int},
    "file": {"path": str},
}
_OPTIONAL_KEYS = {"block": {"rho": 0.5}, "sparse": {"prob": 0.1, "value": 0.9, "seed": 0}}

StructureName = Literal["ar", "equal", "block", "sparse", "identity", "file"]


class StructureSpec(BaseModel):
    """Parsed form of `name:key=value,...` structure descriptions."""

    kind: StructureName
    params: Dict[str, Union[int, float, str]] = {}

    @classmethod
    def valid_names(cls) -> str:
        return ", ".join(_STRUCTURE_KEYS)

    @classmethod
    def parse(cls, text: str) -> "StructureSpec":
        """Parse e.g. `block:p=2000,size=400,rho=0.5`."""
        name, sep, rest = text.strip().partition(":")
        name = name.strip().lower()
        if name not in _STRUCTURE_KEYS:
            raise SpecSyntaxError(f"Unknown structure (valid names: {cls.valid_names()})", name)
        if not sep:
            raise SpecSyntaxError("Structure spec needs parameters after ':'", text)

        allowed = _STRUCTURE_KEYS[name]
        params: Dict[str, Union[int, float, str]] = dict(_OPTIONAL_KEYS.get(name, {}))
        for token in filter(None, (tok.strip() for tok in rest.split(","))):
            key, eq, value = token.partition("=")
            key = key.strip()
            if not eq or key not in allowed:
                raise SpecSyntaxError(f"Invalid parameter for '{name}'", token)
            try:
                params[key] = allowed[key](value.strip())
            except ValueError:
                raise SpecSyntaxError(f"Invalid value for '{key}'", token)

        missing = [key for key in allowed if key not in params]
        if missing:
            raise SpecSyntaxError(f"Missing parameter(s) for '{name}'", ",".join(missing))
        return cls(kind=name, params=params)

    def canonical(self) -> str:
        body = ",".join(f"{key}={self.params[key]}" for key in _STRUCTURE_KEYS[self.kind])
        return f"{self.kind}:{body}"
