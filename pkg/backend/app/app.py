import itertools
import time
from contextlib import asynccontextmanager

import uvicorn
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app import __version__
from app.config import Config
from app.routes.estimation import router as estimation_router
from app.routes.structures import router as structures_router
from app.utils.errors import QuadratureError
from app.utils.logger import logger

_request_ids = itertools.count(1)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Log service start and stop."""
    logger.info(
        f"{Config.APP_NAME} {__version__} started in {Config.ENVIRONMENT} environment "
        f"(threads={Config.THREADS}, R={Config.DEFAULT_REPS}, alpha={Config.DEFAULT_ALPHA})"
    )
    yield
    logger.info(f"{Config.APP_NAME} shutting down")


app = FastAPI(
    title=Config.APP_NAME,
    description="API for estimating the proportion of signals among arbitrarily correlated test statistics",
    version=__version__,
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=Config.CORS_ORIGINS,
    allow_methods=["GET", "POST"],
    allow_headers=["*"],
)


@app.middleware("http")
async def log_requests(request: Request, call_next):
    """Log every request with a sequential id and its processing time."""
    request_id = next(_request_ids)
    start_time = time.time()
    logger.info(f"Request {request_id}: {request.method} {request.url.path}")

    try:
        response = await call_next(request)
    except Exception as e:
        logger.error(f"Request {request_id} failed after {time.time() - start_time:.3f}s: {str(e)}")
        return JSONResponse(status_code=500, content={"detail": "Internal Server Error"})

    logger.info(f"Request {request_id} -> {response.status_code} ({time.time() - start_time:.3f}s)")
    return response


@app.exception_handler(ValueError)
async def value_error_handler(request: Request, exc: ValueError):
    """Domain errors escaping a route are client errors."""
    logger.error(f"Invalid request to {request.url.path}: {str(exc)}")
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.exception_handler(QuadratureError)
async def quadrature_error_handler(request: Request, exc: QuadratureError):
    logger.error(f"Quadrature failure on {request.url.path}: {exc.diagnostics}")
    return JSONResponse(status_code=500, content={"detail": str(exc), "diagnostics": exc.diagnostics})


@app.get("/")
async def root():
    """Service identity and status."""
    return {
        "name": Config.APP_NAME,
        "status": "running",
        "environment": Config.ENVIRONMENT,
        "version": __version__,
    }


@app.get("/health")
async def health_check():
    return {"status": "healthy"}


app.include_router(structures_router)
app.include_router(estimation_router)


if __name__ == "__main__":
    # python -m app.app from the backend directory
    uvicorn.run("app.app:app", host=Config.HOST, port=Config.PORT, reload=Config.DEBUG, log_level="info")
