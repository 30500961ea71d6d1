"""Calibration service: joint-null replicates and bounding sequences."""

import json
import math
import time
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy import special

from app.config import Config
from app.models.calibration import BoundingSequence, BoundingSpec, GridMode, NullReplicates, integer_grid
from app.models.dependence import CorrelationMatrix
from app.utils.errors import DomainError
from app.utils.logger import logger
from app.utils.matrix_io import read_matrix_csv, write_matrix_csv
from app.utils.numerics import NS_CALIBRATION, NS_PERMUTATION, RngStream, standard_normal_rows, student_t_to_z
from app.utils.parallel import map_row_chunks

# Below this tail probability ratios are evaluated in log space
LOG_SPACE_SF = 1e-300


def normalized_deviation(frac: np.ndarray, t: np.ndarray, theta: float) -> np.ndarray:
    """|frac - 2 sf(t)| / sf(t)^theta, safe where sf(t) underflows."""
    frac = np.asarray(frac, dtype=float)
    log_sf = special.log_ndtr(-np.asarray(t, dtype=float))
    sf = np.exp(log_sf)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        direct = np.abs(frac - 2.0 * sf) / np.exp(theta * log_sf)
        tail = np.where(
            frac > 0.0,
            np.exp(np.log(np.where(frac > 0.0, frac, 1.0)) - theta * log_sf),
            2.0 * np.exp((1.0 - theta) * log_sf),
        )
    return np.where(sf < LOG_SPACE_SF, tail, direct)


def exceedance_profile(abs_sorted: np.ndarray, t: np.ndarray):
    """Right value #{|w| > t}/p and left limit #{|w| >= t}/p at each t."""
    p = abs_sorted.shape[0]
    right = (p - np.searchsorted(abs_sorted, t, side="right")) / p
    left = (p - np.searchsorted(abs_sorted, t, side="left")) / p
    return right, left


def observed_grid(abs_sorted: np.ndarray) -> np.ndarray:
    """Observed thresholds inside (T_MIN, T_MAX]."""
    return abs_sorted[(abs_sorted > Config.T_MIN) & (abs_sorted <= Config.T_MAX)]


def _validate_vector(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DomainError("Statistic vector must be non-empty")
    if not np.all(np.isfinite(w)):
        raise DomainError("Statistic vector must be finite")
    return w


class CalibrationService:
    """Service for simulating the joint null and calibrating bounding sequences."""

    def v_statistic(self, w: np.ndarray, spec: BoundingSpec) -> float:
        """
        Supremum of the normalized deviation of the null exceedance process.

        Args:
            w: one draw (W_1, ..., W_p) from the joint null
            spec: bounding function exponent and threshold grid

        Returns:
            max over grid points t of |W(t) - 2 sf(t)| / sf(t)^theta, with both
            one-sided limits evaluated on the observed grid.
        """
        w = _validate_vector(w)
        abs_sorted = np.sort(np.abs(w))

        if spec.grid == "integer":
            grid = np.asarray(integer_grid(w.size), dtype=float)
            if grid.size == 0:
                raise DomainError(f"Integer threshold grid is empty for p={w.size}")
            right, _ = exceedance_profile(abs_sorted, grid)
            return float(np.max(normalized_deviation(right, grid, spec.theta)))

        grid = observed_grid(abs_sorted)
        if grid.size == 0:
            return 0.0
        right, left = exceedance_profile(abs_sorted, grid)
        values = np.maximum(
            normalized_deviation(right, grid, spec.theta),
            normalized_deviation(left, grid, spec.theta),
        )
        return float(np.max(values))

    def v_statistics(
        self,
        reps: NullReplicates,
        spec: BoundingSpec,
        threads: Optional[int] = None,
    ) -> np.ndarray:
        """v_statistic of every replicate row, in row order."""
        values = reps.values

        def chunk(start: int, stop: int) -> np.ndarray:
            return np.array([self.v_statistic(values[r], spec) for r in range(start, stop)])

        return map_row_chunks(chunk, reps.R, threads)

    def simulate_null_replicates_parametric(
        self,
        sigma: CorrelationMatrix,
        R: int,
        seed: int,
        threads: Optional[int] = None,
    ) -> NullReplicates:
        """R rows of N_p(0, Sigma): one factorization, one stream per row."""
        if R < 1:
            raise DomainError(f"Replicate count must be positive, got {R}")
        start_time = time.time()
        lower_t = sigma.factor().lower.T

        def chunk(start: int, stop: int) -> np.ndarray:
            g = standard_normal_rows(seed, NS_CALIBRATION, np.arange(start, stop), sigma.p)
            return g @ lower_t

        values = map_row_chunks(chunk, R, threads)
        logger.info(
            f"Simulated {R} parametric null replicates for {sigma.label} "
            f"(p={sigma.p}, seed={seed}) in {time.time() - start_time:.2f}s"
        )
        return NullReplicates(values=values, provenance=f"parametric({sigma.label}, seed={seed})", seed=seed)

    def marginal_z_scores(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Slope t statistics of y on each column of X, mapped to normal scores."""
        Xs, ys, df = self._standardize(X, y)
        return self._z_from_standardized(Xs, ys[np.newaxis, :], df)[0]

    def permutation_null_replicates(
        self,
        X: np.ndarray,
        y: np.ndarray,
        R: int,
        seed: int,
        threads: Optional[int] = None,
        include_observed: bool = False,
    ) -> NullReplicates:
        """
        Null replicates from shuffling the response only.

        Row r uses the permutation drawn from stream r; with include_observed
        row 0 keeps the original order.
        """
        if R < 1:
            raise DomainError(f"Replicate count must be positive, got {R}")
        Xs, ys, df = self._standardize(X, y)
        n = ys.shape[0]

        def chunk(start: int, stop: int) -> np.ndarray:
            shuffled = np.empty((stop - start, n))
            for k, r in enumerate(range(start, stop)):
                if include_observed and r == 0:
                    shuffled[k] = ys
                    continue
                perm = RngStream(seed=seed, stream_id=r, namespace=NS_PERMUTATION).generator().permutation(n)
                shuffled[k] = ys[perm]
            return self._z_from_standardized(Xs, shuffled, df)

        start_time = time.time()
        values = map_row_chunks(chunk, R, threads)
        logger.info(
            f"Computed {R} permutation null replicates (n={n}, p={Xs.shape[1]}, seed={seed}) "
            f"in {time.time() - start_time:.2f}s"
        )
        return NullReplicates(values=values, provenance=f"permutation(seed={seed})", seed=seed)

    def bounding_sequence(
        self,
        reps: NullReplicates,
        spec: BoundingSpec,
        threads: Optional[int] = None,
    ) -> BoundingSequence:
        """Empirical (1 - alpha) quantile of V: the order statistic of rank ceil((1 - alpha) R)."""
        values = np.sort(self.v_statistics(reps, spec, threads))
        rank = min(max(math.ceil((1.0 - spec.alpha) * reps.R - 1e-9), 1), reps.R)
        c = float(values[rank - 1])
        if not math.isfinite(c):
            raise DomainError(
                f"Bounding sequence overflowed for theta={spec.theta}: a replicate has |w| near or above "
                f"{Config.T_MAX} where the normalized deviation exceeds the float range"
            )
        logger.info(
            f"Calibrated c={c:.6g} (theta={spec.theta}, alpha={spec.alpha}, grid={spec.grid}, "
            f"R={reps.R}, p={reps.p}, rank={rank})"
        )
        return BoundingSequence(
            c=c,
            theta=spec.theta,
            alpha=spec.alpha,
            grid=spec.grid,
            R=reps.R,
            p=reps.p,
            seed=reps.seed,
            provenance=reps.provenance,
        )

    def calibrate(
        self,
        reps: NullReplicates,
        thetas: Sequence[float] = (0.5, 1.0),
        alpha: float = Config.DEFAULT_ALPHA,
        grid: GridMode = "observed",
        threads: Optional[int] = None,
    ) -> List[BoundingSequence]:
        """One bounding sequence per theta, all from the same replicates."""
        return [
            self.bounding_sequence(reps, BoundingSpec(theta=theta, alpha=alpha, grid=grid), threads)
            for theta in thetas
        ]

    def load_null_replicates(self, path: Union[str, Path]) -> NullReplicates:
        """Load replicate rows from CSV (rows = replicates)."""
        values = read_matrix_csv(path)
        logger.info(f"Loaded {values.shape[0]} null replicates of dimension {values.shape[1]} from {path}")
        return NullReplicates(values=values, provenance=f"external({path})")

    def save_null_replicates(self, reps: NullReplicates, path: Union[str, Path]) -> Path:
        return write_matrix_csv(path, reps.values)

    def save_bounding_sequence(self, seq: BoundingSequence, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(seq.model_dump(), indent=2) + "\n")
        return path

    def load_bounding_sequence(self, path: Union[str, Path]) -> BoundingSequence:
        return BoundingSequence.model_validate_json(Path(path).read_text())

    @staticmethod
    def _standardize(X: np.ndarray, y: np.ndarray):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim != 2:
            raise DomainError(f"Data matrix must be 2-D, got shape {X.shape}")
        n = X.shape[0]
        if n < 3:
            raise DomainError(f"Marginal regression needs at least 3 observations, got {n}")
        if y.shape[0] != n:
            raise DomainError(f"Response has {y.shape[0]} observations but the data matrix has {n}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DomainError("Data and response must be finite")
        constant = np.flatnonzero(np.all(X == X[0], axis=0))
        if constant.size:
            raise DomainError(f"Column {int(constant[0])} is constant")
        if np.all(y == y[0]):
            raise DomainError("Response is constant")

        Xc = X - X.mean(axis=0)
        yc = y - y.mean()
        return Xc / np.sqrt((Xc * Xc).sum(axis=0)), yc / np.sqrt(yc @ yc), n - 2

    @staticmethod
    def _z_from_standardized(Xs: np.ndarray, Ys: np.ndarray, df: int) -> np.ndarray:
        # Rows of Ys are standardized responses; r is the per-column correlation
        r = np.clip(Ys @ Xs, -1.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_stat = r * np.sqrt(df / (1.0 - r * r))
        t_stat = np.where(np.abs(r) >= 1.0, np.sign(r) * np.inf, t_stat)
        return student_t_to_z(t_stat, df, Config.Z_CLAMP)


calibration_service = CalibrationService()
