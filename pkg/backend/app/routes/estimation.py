"""Estimation routes: calibration of bounding sequences and proportion estimates."""

import numpy as np
from fastapi import APIRouter, HTTPException, status
from fastapi.concurrency import run_in_threadpool

from app.config import Config
from app.models.calibration import BoundingSequence
from app.models.estimate import EstimateReport, ZScores
from app.models.requests import CalibrateRequest, CalibrateResponse, EstimateRequest
from app.services.calibration import calibration_service
from app.services.dependence import dependence_service
from app.services.estimators import estimator_service
from app.utils.errors import QuadratureError
from app.utils.logger import logger

router = APIRouter(prefix="/api", tags=["estimation"])


def _calibrate(request: CalibrateRequest):
    sigma = dependence_service.build_from_text(request.structure)
    reps = calibration_service.simulate_null_replicates_parametric(sigma, request.reps, request.seed, Config.THREADS)
    return calibration_service.calibrate(reps, request.thetas, request.alpha, request.grid, Config.THREADS)


def _estimate(request: EstimateRequest) -> EstimateReport:
    z = ZScores(z=np.asarray(request.z, dtype=float))
    if request.structure is None:
        c_half, c_one = (
            BoundingSequence(c=c, theta=theta, alpha=request.alpha, grid="observed", R=1, p=z.p, provenance="request")
            for c, theta in ((request.c_half, 0.5), (request.c_one, 1.0))
        )
        return estimator_service.build_report(
            z, c_half, c_one, gw_alpha=request.gw_alpha, jc_gamma=request.jc_gamma, baselines=request.baselines
        )

    sigma = dependence_service.build_from_text(request.structure)
    reps = calibration_service.simulate_null_replicates_parametric(sigma, request.reps, request.seed, Config.THREADS)
    return estimator_service.estimate_pipeline(
        z,
        reps,
        alpha=request.alpha,
        gw_alpha=request.gw_alpha,
        jc_gamma=request.jc_gamma,
        discrete=request.discrete,
        baselines=request.baselines,
        threads=Config.THREADS,
    )


@router.post(
    "/calibrate",
    response_model=CalibrateResponse,
    status_code=status.HTTP_200_OK,
    description="Calibrate bounding sequences on parametric null replicates of a structure",
    summary="Calibrate Bounding Sequences"
)
async def calibrate(request: CalibrateRequest):
    """Simulate the joint null of the structure and return one bounding sequence per theta."""
    try:
        logger.info(f"Received calibration request for {request.structure} (R={request.reps})")
        sequences = await run_in_threadpool(_calibrate, request)
        return CalibrateResponse(success=True, sequences=sequences)
    except (ValueError, FileNotFoundError) as e:
        logger.error(f"Calibration failed due to validation error: {str(e)}")
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    except Exception as e:
        logger.error(f"Unexpected error during calibration: {e}", exc_info=True)
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail=f"Calibration failed due to unexpected server error: {str(e)}"
        )


@router.post(
    "/estimate",
    response_model=EstimateReport,
    status_code=status.HTTP_200_OK,
    description="Estimate the signal proportion of a z vector",
    summary="Estimate Signal Proportion"
)
async def estimate(request: EstimateRequest):
    """Return the full estimate report for the submitted statistics."""
    try:
        logger.info(f"Received estimation request (p={len(request.z)})")
        return await run_in_threadpool(_estimate, request)
    except QuadratureError:
        raise
    except (ValueError, FileNotFoundError) as e:
        logger.error(f"Estimation failed due to validation error: {str(e)}")
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    except Exception as e:
        logger.error(f"Unexpected error during estimation: {e}", exc_info=True)
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail=f"Estimation failed due to unexpected server error: {str(e)}"
        )
