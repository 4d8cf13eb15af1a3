from fastapi import APIRouter, HTTPException, Path
from typing import List

from ..models.schemas import FlowMod, PolicySnapshot, SchemeUpdate
from ..db import crud
from ..utils.errors import SessionNotFound, SwitchUnreachable

router = APIRouter(
    prefix="/simulations/{session_id}/policies",
    tags=["policies"],
    responses={404: {"description": "Simulation not found"}}
)

@router.get("/", response_model=PolicySnapshot)
def get_policies(session_id: int = Path(..., gt=0)):
    """
    Current aggregation policy: default scheme plus per-(switch, host) overrides
    """
    try:
        return crud.get_policy(session_id)
    except SessionNotFound:
        raise HTTPException(status_code=404, detail="Simulation not found")

@router.put("/{switch_id}/{host}", response_model=List[FlowMod])
def set_policy(
    update: SchemeUpdate,
    session_id: int = Path(..., gt=0),
    switch_id: int = Path(..., ge=0),
    host: int = Path(..., ge=0, description="Destination host MAC as an integer"),
):
    """
    Change the matching scheme of one destination at one switch; returns the flow_mods sent
    """
    try:
        return crud.set_policy(session_id, switch_id, host, update.scheme)
    except SessionNotFound:
        raise HTTPException(status_code=404, detail="Simulation not found")
    except SwitchUnreachable as exc:
        raise HTTPException(status_code=409, detail=str(exc))
