"""Structure routes: dependence level of generated correlation structures."""

from fastapi import APIRouter, HTTPException, status

from app.models.requests import MacRequest, MacResponse
from app.services.dependence import dependence_service
from app.utils.logger import logger

router = APIRouter(prefix="/api", tags=["structures"])


@router.post(
    "/mac",
    response_model=MacResponse,
    status_code=status.HTTP_200_OK,
    description="Mean absolute correlation of a generated structure",
    summary="Compute MAC"
)
async def compute_mac(request: MacRequest):
    """Build the structure and return its MAC level."""
    try:
        sigma = dependence_service.build_from_text(request.structure)
        level = dependence_service.mac(sigma)
        return MacResponse(structure=request.structure, label=sigma.label, p=sigma.p, mac=level.value)
    except (ValueError, FileNotFoundError) as e:
        logger.error(f"MAC request failed: {str(e)}")
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    except Exception as e:
        logger.error(f"Unexpected error computing MAC: {e}", exc_info=True)
        raise HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=str(e))
