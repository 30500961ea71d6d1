"""Baseline proportion estimators used for comparison."""

import math

import numpy as np
from scipy import integrate, special

from app.config import Config
from app.models.estimate import EstimateResult, ZScores
from app.utils.errors import DomainError, QuadratureError
from app.utils.logger import logger

GW_U_MAX = 1.0 - 1e-8
JC_EPSABS = 1e-8


class BaselineService:
    """Service for the DKW lower-bound (GW) and Fourier (JC) estimators."""

    def pi_hat_gw(self, z: ZScores, alpha: float = Config.GW_ALPHA) -> EstimateResult:
        """
        DKW lower bound on the non-null fraction of two-sided p-values.

        sup over observed p-values u < 1 - 1e-8 of (F(u) - u - eps) / (1 - u),
        with eps = sqrt(log(2 / alpha) / (2 p)).
        """
        if not 0.0 < alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
        p = z.p
        u = np.sort(special.erfc(np.abs(z.z) / math.sqrt(2.0)))
        epsilon = math.sqrt(math.log(2.0 / alpha) / (2.0 * p))

        grid = u[u < GW_U_MAX]
        if grid.size == 0:
            return EstimateResult(method="gw", pi_hat=0.0, c_used={"epsilon": epsilon}, clamped=True)

        ecdf = np.searchsorted(u, grid, side="right") / p
        values = (ecdf - grid - epsilon) / (1.0 - grid)
        best = int(np.argmax(values))
        raw = float(values[best])
        return EstimateResult(
            method="gw",
            pi_hat=min(max(raw, 0.0), 1.0),
            c_used={"epsilon": epsilon},
            argmax_t=float(grid[best]),
            clamped=bool(raw < 0.0 or raw > 1.0),
            raw=raw,
        )

    def pi_hat_jc(self, z: ZScores, gamma: float = Config.JC_GAMMA) -> EstimateResult:
        """
        Fourier estimator with a triangular kernel.

        With t = sqrt(2 gamma log p) and
        phi(t; z) = integral over [-1, 1] of (1 - |xi|) cos(t xi z) exp(t^2 xi^2 / 2),
        the estimate is 1 - mean_j phi(t; z_j).
        """
        if not 0.0 < gamma <= 0.5:
            raise DomainError(f"gamma must lie in (0, 0.5], got {gamma}")
        p = z.p
        if p < 2:
            raise DomainError(f"JC estimator needs p >= 2, got {p}")

        t = math.sqrt(2.0 * gamma * math.log(p))
        abs_z = np.abs(z.z)

        # Integrand is even in xi, so integrate over [0, 1] and double
        def integrand(xi: float) -> np.ndarray:
            return 2.0 * (1.0 - xi) * np.cos(t * xi * abs_z) * math.exp(0.5 * t * t * xi * xi)

        phi, error, info = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=JC_EPSABS, norm="max", full_output=True)
        if not info.success:
            logger.error(f"JC quadrature failed: {info.message}")
            raise QuadratureError(
                "JC quadrature did not converge",
                {"status": info.status, "message": info.message, "error": float(error), "neval": info.neval, "t": t},
            )

        raw = float(1.0 - np.mean(phi))
        return EstimateResult(
            method="jc",
            pi_hat=min(max(raw, 0.0), 1.0),
            c_used={"t": t},
            clamped=bool(raw < 0.0 or raw > 1.0),
            raw=raw,
        )


baselines_service = BaselineService()
