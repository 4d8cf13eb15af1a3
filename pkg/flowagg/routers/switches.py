from fastapi import APIRouter, HTTPException, Path
from typing import List

from ..models.schemas import DestFlowStats, SwitchView
from ..db import crud
from ..utils.errors import SessionNotFound

router = APIRouter(
    prefix="/simulations/{session_id}/switches",
    tags=["switches"],
    responses={404: {"description": "Simulation or switch not found"}}
)

@router.get("/", response_model=List[SwitchView])
def get_switches(session_id: int = Path(..., gt=0)):
    """
    Health and table occupancy of every switch
    """
    try:
        return crud.get_switches(session_id)
    except SessionNotFound:
        raise HTTPException(status_code=404, detail="Simulation not found")

@router.get("/{switch_id}", response_model=SwitchView)
def get_switch(session_id: int = Path(..., gt=0), switch_id: int = Path(..., ge=0)):
    try:
        switch = crud.get_switch(session_id, switch_id)
    except SessionNotFound:
        raise HTTPException(status_code=404, detail="Simulation not found")
    if switch is None:
        raise HTTPException(status_code=404, detail="Switch not found")
    return switch

@router.get("/{switch_id}/flows", response_model=DestFlowStats)
def get_switch_flows(session_id: int = Path(..., gt=0), switch_id: int = Path(..., ge=0)):
    """
    Flow entries per destination host
    """
    try:
        stats = crud.get_dest_flows(session_id, switch_id)
    except SessionNotFound:
        raise HTTPException(status_code=404, detail="Simulation not found")
    if stats is None:
        raise HTTPException(status_code=404, detail="Switch not found")
    return stats
