"""Special functions, Cholesky factorization and seeded random streams."""

from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import special
from scipy.linalg import lapack

from app.utils.errors import DimensionMismatchError, DomainError, NotPositiveDefiniteError

ArrayOrFloat = Union[float, np.ndarray]

# Stream namespaces keep independent uses of one user seed apart
NS_DEFAULT = 0
NS_CALIBRATION = 1
NS_REPLICATES = 2
NS_STRUCTURE = 3
NS_PERMUTATION = 4
NS_SIGNALS = 5

_MASK64 = (1 << 64) - 1
_SQRT2 = np.sqrt(2.0)


class RngStream(BaseModel):
    """Counter-based random stream addressed by (seed, stream_id).

    The generator is Philox keyed through a SeedSequence whose spawn key holds
    the namespace and stream id, so a stream never depends on which worker
    draws it or in which order streams are consumed.
    """

    model_config = ConfigDict(frozen=True)

    seed: int
    stream_id: int = 0
    namespace: int = NS_DEFAULT

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(
            entropy=self.seed & _MASK64,
            spawn_key=(self.namespace & _MASK64, self.stream_id & _MASK64),
        )
        return np.random.Generator(np.random.Philox(sequence))


class CholeskyFactor(BaseModel):
    """Lower-triangular factor L with L @ L.T equal to the factored matrix."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dim: int = Field(..., gt=0)
    lower: np.ndarray

    @field_validator("lower")
    def validate_lower(cls, v):
        """Require a square matrix with a strictly positive diagonal."""
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("Cholesky factor must be a square matrix")
        if not np.all(np.diag(v) > 0):
            raise ValueError("Cholesky factor must have a strictly positive diagonal")
        return v

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.T


def _require_finite(t: ArrayOrFloat, name: str) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _as_output(arr: np.ndarray, original: ArrayOrFloat) -> ArrayOrFloat:
    if np.ndim(original) == 0:
        return float(arr)
    return arr


def std_normal_sf(t: ArrayOrFloat) -> ArrayOrFloat:
    """Upper tail probability of the standard normal, computed through erfc."""
    arr = _require_finite(t, "t")
    return _as_output(0.5 * special.erfc(arr / _SQRT2), t)


def log_std_normal_sf(t: ArrayOrFloat) -> ArrayOrFloat:
    """Natural log of the upper tail probability; finite far beyond underflow."""
    arr = _require_finite(t, "t")
    return _as_output(special.log_ndtr(-arr), t)


def std_normal_cdf(t: ArrayOrFloat) -> ArrayOrFloat:
    arr = _require_finite(t, "t")
    return _as_output(0.5 * special.erfc(-arr / _SQRT2), t)


def std_normal_quantile(u: ArrayOrFloat) -> ArrayOrFloat:
    """Inverse of the standard normal CDF on the open unit interval."""
    arr = np.asarray(u, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError("Probability must lie strictly between 0 and 1")
    return _as_output(special.ndtri(arr), u)


def std_normal_isf(q: ArrayOrFloat) -> ArrayOrFloat:
    """Inverse of the upper tail probability; accurate for tiny q."""
    arr = np.asarray(q, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError("Tail probability must lie strictly between 0 and 1")
    return _as_output(-special.ndtri(arr), q)


def student_t_cdf(x: ArrayOrFloat, df: int) -> ArrayOrFloat:
    """CDF of Student's t with df degrees of freedom."""
    if df < 1:
        raise DomainError(f"Degrees of freedom must be at least 1, got {df}")
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError("x must not be NaN")
    return _as_output(special.stdtr(df, arr), x)


def student_t_to_z(t_stat: np.ndarray, df: int, clamp: float) -> np.ndarray:
    """Map t statistics to normal scores through the smaller tail.

    z = sign(t) * isf(T_df(-|t|)); infinite or extreme inputs land on +/- clamp.
    """
    t_stat = np.asarray(t_stat, dtype=float)
    lower_tail = special.stdtr(df, -np.abs(t_stat))
    with np.errstate(divide="ignore"):
        magnitude = -special.ndtri(lower_tail)
    magnitude = np.minimum(np.where(np.isnan(magnitude), clamp, magnitude), clamp)
    return np.sign(t_stat) * magnitude


def cholesky(m: np.ndarray) -> CholeskyFactor:
    """Dense Cholesky factorization reporting the first failing pivot."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"Matrix must be square, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-10 * scale):
        raise DomainError("Matrix must be symmetric")

    factor, info = lapack.dpotrf(m, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(index=int(info) - 1)
    if info < 0:
        raise DomainError(f"Invalid argument {-info} passed to the factorization")
    return CholeskyFactor(dim=m.shape[0], lower=np.ascontiguousarray(factor))


def sample_mvn(factor: CholeskyFactor, mean: np.ndarray, rng: RngStream) -> np.ndarray:
    """Draw one N(mean, L L^T) vector from the given stream."""
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (factor.dim,):
        raise DimensionMismatchError("mean vector", factor.dim, mean.shape[0] if mean.ndim else 0)
    g = rng.generator().standard_normal(factor.dim)
    return mean + factor.lower @ g


def standard_normal_rows(seed: int, namespace: int, stream_ids: np.ndarray, dim: int) -> np.ndarray:
    """Stack one standard normal vector per stream id, row by row."""
    rows = np.empty((len(stream_ids), dim))
    for k, stream_id in enumerate(stream_ids):
        stream = RngStream(seed=seed, stream_id=int(stream_id), namespace=namespace)
        rows[k] = stream.generator().standard_normal(dim)
    return rows
