"""Estimator service: the bounding-function family, its discretized form and the adaptive estimator."""

import time
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import special

from app.config import Config
from app.models.calibration import BoundingSequence, NullReplicates, integer_grid
from app.models.estimate import EstimateReport, EstimateResult, NullDistribution, ZScores, signal_count
from app.services.baselines import baselines_service
from app.services.calibration import calibration_service, exceedance_profile, observed_grid
from app.utils.errors import DimensionMismatchError, DomainError
from app.utils.logger import logger
from app.utils.matrix_io import read_vector, write_vector
from app.utils.numerics import student_t_to_z


def family_objective(frac: np.ndarray, t: np.ndarray, theta: float, c: float) -> np.ndarray:
    """(F(t) - 2 sf(t) - c sf(t)^theta) / (1 - 2 sf(t))."""
    log_sf = special.log_ndtr(-np.asarray(t, dtype=float))
    sf = np.exp(log_sf)
    delta = np.exp(theta * log_sf)
    return (frac - 2.0 * sf - c * delta) / (1.0 - 2.0 * sf)


def _finish(method: str, raw: Optional[float], argmax_t: Optional[float], seq: BoundingSequence) -> EstimateResult:
    if raw is None:
        return EstimateResult(
            method=method, pi_hat=0.0, theta=seq.theta, c_used={method: seq.c}, argmax_t=None, clamped=True
        )
    return EstimateResult(
        method=method,
        pi_hat=float(min(max(raw, 0.0), 1.0)),
        theta=seq.theta,
        c_used={method: seq.c},
        argmax_t=argmax_t,
        clamped=bool(raw < 0.0 or raw > 1.0),
        raw=raw,
    )


class EstimatorService:
    """Service for computing proportion estimates from observed statistics."""

    def inverse_normal_transform(self, x: np.ndarray, f0: NullDistribution) -> ZScores:
        """Map raw statistics through F_0 and the standard normal quantile."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.size == 0:
            raise DomainError("Statistic vector must be non-empty")
        if not np.all(np.isfinite(x)):
            raise DomainError("Statistic vector must be finite")

        if f0.kind == "identity":
            return ZScores(z=x.copy(), transform=f0.describe())

        if f0.kind == "normal":
            z = (x - f0.mu0) / f0.sigma0
        else:
            z = student_t_to_z(x, f0.df, np.inf)

        clamped = int(np.count_nonzero(np.abs(z) >= Config.Z_CLAMP))
        if clamped:
            logger.warning(f"{clamped} transformed statistic(s) clamped to +/-{Config.Z_CLAMP}")
        z = np.clip(z, -Config.Z_CLAMP, Config.Z_CLAMP)
        return ZScores(z=z, transform=f0.describe(), clamped=clamped)

    def load_z(self, path: Union[str, Path], f0: Optional[NullDistribution] = None) -> ZScores:
        """Read newline-delimited statistics and transform them with F_0 (identity by default)."""
        x = read_vector(path)
        logger.info(f"Loaded {x.size} statistics from {path}")
        return self.inverse_normal_transform(x, f0 or NullDistribution())

    def save_z(self, z: ZScores, path: Union[str, Path]) -> Path:
        return write_vector(path, z.z)

    def pi_hat_delta(self, z: ZScores, c: BoundingSequence, method: Optional[str] = None) -> EstimateResult:
        """
        Lower-bound estimate maximized over the observed thresholds |z_j|.

        Both one-sided limits of the exceedance proportion are evaluated at
        every threshold; thresholds outside (T_MIN, T_MAX] are excluded.
        """
        if c.grid != "observed":
            raise DomainError(f"pi_hat_delta needs an observed-grid bounding sequence, got grid={c.grid}")
        method = method or f"theta={c.theta}"

        abs_sorted = np.sort(np.abs(z.z))
        grid = observed_grid(abs_sorted)
        if grid.size == 0:
            return _finish(method, None, None, c)

        right, left = exceedance_profile(abs_sorted, grid)
        values = np.maximum(
            family_objective(right, grid, c.theta, c.c),
            family_objective(left, grid, c.theta, c.c),
        )
        best = int(np.argmax(values))
        return _finish(method, float(values[best]), float(grid[best]), c)

    def pi_hat_delta_discrete(
        self, z: ZScores, c_star: BoundingSequence, method: Optional[str] = None
    ) -> EstimateResult:
        """Discretized estimate maximized over the integer grid {1, ..., floor(sqrt(5 log p))}."""
        if c_star.grid != "integer":
            raise DomainError(f"pi_hat_delta_discrete needs an integer-grid bounding sequence, got grid={c_star.grid}")
        grid = np.asarray(integer_grid(z.p), dtype=float)
        if grid.size == 0:
            raise DomainError(f"Integer threshold grid is empty for p={z.p}")

        abs_sorted = np.sort(np.abs(z.z))
        right, _ = exceedance_profile(abs_sorted, grid)
        values = family_objective(right, grid, c_star.theta, c_star.c)
        best = int(np.argmax(values))
        return _finish(method or f"theta*={c_star.theta}", float(values[best]), float(grid[best]), c_star)

    def pi_hat_adaptive(self, z: ZScores, c_half: BoundingSequence, c_one: BoundingSequence) -> EstimateResult:
        """Maximum of the theta = 0.5 and theta = 1 estimates."""
        if c_half.theta != 0.5 or c_one.theta != 1.0:
            raise DomainError(f"Adaptive estimate needs theta 0.5 and 1, got {c_half.theta} and {c_one.theta}")
        if c_half.grid != c_one.grid:
            raise DomainError(f"Grid modes differ: {c_half.grid} vs {c_one.grid}")
        if c_half.alpha != c_one.alpha:
            raise DomainError(f"Control levels differ: {c_half.alpha} vs {c_one.alpha}")

        estimate = self.pi_hat_delta if c_half.grid == "observed" else self.pi_hat_delta_discrete
        half = estimate(z, c_half, method="half")
        one = estimate(z, c_one, method="one")
        winner = half if half.pi_hat >= one.pi_hat else one
        return EstimateResult(
            method="adap",
            pi_hat=max(half.pi_hat, one.pi_hat),
            theta="adaptive",
            c_used={"half": c_half.c, "one": c_one.c},
            argmax_t=winner.argmax_t,
            clamped=winner.clamped,
            raw=winner.raw,
            winner=winner.method,
        )

    def build_report(
        self,
        z: ZScores,
        c_half: BoundingSequence,
        c_one: BoundingSequence,
        c_half_star: Optional[BoundingSequence] = None,
        c_one_star: Optional[BoundingSequence] = None,
        gw_alpha: float = Config.GW_ALPHA,
        jc_gamma: float = Config.JC_GAMMA,
        baselines: bool = True,
    ) -> EstimateReport:
        """Estimate with already calibrated bounding sequences."""
        for seq in (c_half, c_one, c_half_star, c_one_star):
            if seq is not None and seq.p != z.p:
                raise DimensionMismatchError("bounding sequence vs z", z.p, seq.p)

        half = self.pi_hat_delta(z, c_half, method="half")
        one = self.pi_hat_delta(z, c_one, method="one")
        adap = self.pi_hat_adaptive(z, c_half, c_one)
        estimates = {"half": half, "one": one, "adap": adap}

        if c_half_star is not None and c_one_star is not None:
            estimates["half_star"] = self.pi_hat_delta_discrete(z, c_half_star, method="half_star")
            estimates["one_star"] = self.pi_hat_delta_discrete(z, c_one_star, method="one_star")
        if baselines:
            estimates["gw"] = baselines_service.pi_hat_gw(z, gw_alpha)
            estimates["jc"] = baselines_service.pi_hat_jc(z, jc_gamma)

        report = EstimateReport(
            p=z.p,
            alpha=c_half.alpha,
            c_half=c_half.c,
            c_one=c_one.c,
            pi_half=half.pi_hat,
            pi_one=one.pi_hat,
            pi_adap=adap.pi_hat,
            pi_gw=estimates["gw"].pi_hat if "gw" in estimates else None,
            pi_jc=estimates["jc"].pi_hat if "jc" in estimates else None,
            c_half_star=c_half_star.c if c_half_star is not None else None,
            c_one_star=c_one_star.c if c_one_star is not None else None,
            pi_half_star=estimates["half_star"].pi_hat if "half_star" in estimates else None,
            pi_one_star=estimates["one_star"].pi_hat if "one_star" in estimates else None,
            counts={name: signal_count(est.pi_hat, z.p) for name, est in estimates.items()},
            argmax={name: est.argmax_t for name, est in estimates.items()},
            R=c_half.R,
            seed=c_half.seed,
            transform=z.transform,
            provenance=c_half.provenance,
        )
        logger.info(
            f"Estimates (p={z.p}): half={report.pi_half:.4f}, one={report.pi_one:.4f}, adap={report.pi_adap:.4f}"
        )
        return report

    def estimate_pipeline(
        self,
        z: ZScores,
        reps: NullReplicates,
        alpha: float = Config.DEFAULT_ALPHA,
        gw_alpha: float = Config.GW_ALPHA,
        jc_gamma: float = Config.JC_GAMMA,
        discrete: bool = False,
        baselines: bool = True,
        threads: Optional[int] = None,
    ) -> EstimateReport:
        """
        Calibrate on the null replicates, then estimate.

        Args:
            z: observed statistics after the inverse normal transform
            reps: joint-null replicates of the same dimension
            alpha: control level of the bounding sequences
            gw_alpha: DKW level of the GW baseline
            jc_gamma: JC frequency exponent
            discrete: also calibrate and report the integer-grid estimates
            baselines: include the GW and JC baselines
            threads: worker count for calibration

        Returns:
            EstimateReport with pi_adap = max(pi_half, pi_one)
        """
        if reps.p != z.p:
            raise DimensionMismatchError("null replicates vs z", z.p, reps.p)
        start_time = time.time()

        c_half, c_one = calibration_service.calibrate(reps, (0.5, 1.0), alpha, "observed", threads)
        c_half_star = c_one_star = None
        if discrete:
            c_half_star, c_one_star = calibration_service.calibrate(reps, (0.5, 1.0), alpha, "integer", threads)

        report = self.build_report(z, c_half, c_one, c_half_star, c_one_star, gw_alpha, jc_gamma, baselines)
        logger.info(f"Estimation pipeline finished in {time.time() - start_time:.2f}s")
        return report


estimator_service = EstimatorService()
