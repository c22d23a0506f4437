import logging

from fastapi import FastAPI, HTTPException

from src.config.settings import settings
from src.core.campaign import run_trial
from src.models.api import BoundsRequest, TrialRequest
from src.models.campaign import TrialRecord
from src.models.errors import CVPVError
from src.service.entropy_service import bound_report

app = FastAPI(
    title="CVPV Simulator API",
    description="Bound calculators and single compiled trials",
    version="0.1.0"
)
logger = logging.getLogger(__name__)


@app.get("/")
async def root():
    """Health check endpoint"""
    return {"message": "CVPV simulator is running", "status": "healthy"}


@app.get("/health")
async def health_check():
    return {
        "status": "healthy",
        "service": "cvpv-sim",
        "version": app.version,
        "max_qubits": settings.max_qubits,
        "report_schema_version": settings.report_schema_version,
    }


@app.post("/bounds")
def bounds(request: BoundsRequest):
    """Evaluate every requested bound group."""
    try:
        return bound_report(
            eat=request.eat,
            g_eps=request.g_eps,
            smooth=(request.smooth.h_smooth, request.smooth.eps) if request.smooth else None,
            success=request.success.model_dump(exclude_none=True) if request.success else None,
            xhog=request.xhog.model_dump() if request.xhog else None,
        )
    except CVPVError as e:
        logger.info(f"Rejected bounds request: {e}")
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error(f"Error evaluating bounds: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/trial", response_model=TrialRecord)
def trial(request: TrialRequest):
    """Run one compiled trial; the seed fixes every random choice."""
    try:
        logger.info(f"Running {request.strategy.kind} trial in {request.compiler.mode} mode, seed {request.seed}")
        return run_trial(request.compiler, request.strategy, request.seed)
    except CVPVError as e:
        logger.info(f"Rejected trial request: {e}")
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error(f"Error running trial: {e}")
        raise HTTPException(status_code=500, detail=str(e))
