from fastapi import FastAPI, Depends, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from typing import Dict
import logging
import time

from . import __version__
from .routers import policies, simulations, switches
from .utils.errors import ConfigInvalid, FlowAggError, SessionNotFound

logger = logging.getLogger(__name__)

# Create FastAPI app
app = FastAPI(
    title="Flow Aggregation Simulator API",
    description="Drive SDN data-plane simulations, inspect switch health and change flow aggregation policies",
    version=__version__
)

# Add CORS middleware - allows the API to be accessed from any origin
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Add request processing time header middleware
@app.middleware("http")
async def add_process_time_header(request: Request, call_next):
    start_time = time.time()
    response = await call_next(request)
    process_time = time.time() - start_time
    response.headers["X-Process-Time"] = str(process_time)
    return response

app.include_router(simulations.router)
app.include_router(switches.router)
app.include_router(policies.router)


def get_api_info() -> Dict[str, str]:
    return {
        "app_name": "Flow Aggregation Simulator",
        "version": __version__,
        "description": "Discrete-event OpenFlow data plane with adaptive MMOS/FMS flow matching"
    }


@app.get("/", tags=["root"])
def read_root(api_info: Dict[str, str] = Depends(get_api_info)):
    """
    Root endpoint that returns basic API information
    """
    return {
        "message": "Welcome to the Flow Aggregation Simulator API!",
        "api_info": api_info,
        "endpoints": {
            "simulations": "Create, advance and inspect simulation sessions",
            "switches": "Switch health and flow table occupancy",
            "policies": "Per-destination matching schemes"
        }
    }

@app.get("/healthz", tags=["default"])
def health_check():
    """
    Health check endpoint
    """
    return {"status": "healthy"}

# Error handlers
@app.exception_handler(SessionNotFound)
async def session_not_found_handler(request: Request, exc: SessionNotFound):
    return JSONResponse(status_code=404, content={"detail": str(exc)})

@app.exception_handler(ConfigInvalid)
async def config_invalid_handler(request: Request, exc: ConfigInvalid):
    return JSONResponse(
        status_code=422,
        content={"detail": [{"loc": path, "msg": msg} for path, msg in exc.diagnostics]}
    )

@app.exception_handler(FlowAggError)
async def flowagg_error_handler(request: Request, exc: FlowAggError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})

@app.exception_handler(Exception)
async def generic_exception_handler(request: Request, exc: Exception):
    logger.exception("unhandled error on %s %s", request.method, request.url.path)
    return JSONResponse(
        status_code=500,
        content={"detail": f"An unexpected error occurred: {str(exc)}"}
    )

# Run the app with: uvicorn flowagg.main:app --reload
if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
