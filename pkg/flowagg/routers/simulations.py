from fastapi import APIRouter, HTTPException, Path, Query, status
from typing import List, Optional

from ..models.schemas import (
    ControllerStats, MetricsReport, SimulationCreate, SimulationSession
)
from ..db import crud
from ..utils.errors import ConfigInvalid, SessionNotFound

router = APIRouter(
    prefix="/simulations",
    tags=["simulations"],
    responses={404: {"description": "Simulation not found"}}
)

@router.get("/", response_model=List[SimulationSession])
def get_simulations():
    """
    List all simulation sessions
    """
    return crud.get_sessions()

@router.post("/", response_model=SimulationSession, status_code=status.HTTP_201_CREATED)
def create_simulation(request: SimulationCreate):
    """
    Build a simulation session from an experiment config; time starts at 0
    """
    try:
        return crud.create_session(request.config)
    except ConfigInvalid as exc:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=[{"loc": path, "msg": msg} for path, msg in exc.diagnostics],
        )

@router.get("/{session_id}", response_model=SimulationSession)
def get_simulation(session_id: int = Path(..., gt=0, description="The ID of the simulation session")):
    """
    Get the state of one simulation session
    """
    try:
        return crud.get_session(session_id)
    except SessionNotFound:
        raise HTTPException(status_code=404, detail="Simulation not found")

@router.post("/{session_id}/advance", response_model=SimulationSession)
def advance_simulation(
    session_id: int = Path(..., gt=0, description="The ID of the simulation session"),
    until: Optional[float] = Query(None, ge=0, description="Simulated time to run to (default: end of run)"),
):
    """
    Run the event loop up to the given simulated time
    """
    try:
        return crud.advance_session(session_id, until)
    except SessionNotFound:
        raise HTTPException(status_code=404, detail="Simulation not found")

@router.get("/{session_id}/metrics", response_model=MetricsReport)
def get_simulation_metrics(session_id: int = Path(..., gt=0)):
    """
    Metrics collected so far
    """
    try:
        return crud.get_metrics(session_id)
    except SessionNotFound:
        raise HTTPException(status_code=404, detail="Simulation not found")

@router.get("/{session_id}/controller/stats", response_model=List[ControllerStats])
def get_controller_stats(session_id: int = Path(..., gt=0)):
    """
    Per-window packet_in and flow_mod counters of the forwarding application
    """
    try:
        return crud.get_controller_stats(session_id)
    except SessionNotFound:
        raise HTTPException(status_code=404, detail="Simulation not found")

@router.delete("/{session_id}", status_code=status.HTTP_204_NO_CONTENT)
def delete_simulation(session_id: int = Path(..., gt=0)):
    """
    Drop a simulation session
    """
    if not crud.delete_session(session_id):
        raise HTTPException(status_code=404, detail="Simulation not found")
    return None
