"""Main FastAPI application."""
import logging
import os
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from contextlib import asynccontextmanager
from annealing import __version__
from backend.config import configure_logging, settings

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan events."""
    # Startup
    configure_logging(settings.log_level)
    logger.info("Starting CRAB factorization API...")

    # Create directories if they don't exist
    os.makedirs(settings.results_dir, exist_ok=True)
    os.makedirs(settings.instances_dir, exist_ok=True)

    yield

    # Shutdown
    logger.info("Shutting down CRAB factorization API...")


# Initialize FastAPI app
app = FastAPI(
    title="CRAB Factorization API",
    description="Adiabatic factorization with CRAB-optimized annealing schedules",
    version=__version__,
    lifespan=lifespan
)

# Configure CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.cors_origins_list,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.get("/")
async def root():
    """Root endpoint."""
    return {
        "message": "Welcome to the CRAB Factorization API",
        "version": __version__,
        "status": "running"
    }


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {
        "status": "healthy",
        "environment": settings.environment
    }


# Import and include routers
from backend.api.routes import experiments, instances

app.include_router(instances.router, prefix="/api/instances", tags=["instances"])
app.include_router(experiments.router, prefix="/api/experiments", tags=["experiments"])
