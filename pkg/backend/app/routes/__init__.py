"""API routes."""

from app.routes.estimation import router as estimation_router
from app.routes.structures import router as structures_router

__all__ = ["estimation_router", "structures_router"]
