from typing import List, Optional

from . import database
from .database import sessions_db
from ..harness import ExperimentRun
from ..models.schemas import (
    ControllerStats,
    DestFlowStats,
    ExperimentConfig,
    FlowMod,
    MatchScheme,
    MetricsReport,
    PolicySnapshot,
    SimulationSession,
    SwitchView,
)
from ..utils.errors import SessionNotFound, SwitchUnreachable


# Session CRUD operations
def _session_view(session_id: int, run: ExperimentRun) -> SimulationSession:
    return SimulationSession(
        id=session_id,
        name=run.cfg.name,
        mode=run.cfg.analyzer.mode,
        now=run.now,
        duration=run.cfg.duration,
        finished=run.finished,
        suspended=run.controller.suspended,
    )


def get_run(session_id: int) -> ExperimentRun:
    run = sessions_db.get(session_id)
    if run is None:
        raise SessionNotFound(session_id)
    return run


def get_sessions() -> List[SimulationSession]:
    return [_session_view(sid, run) for sid, run in sessions_db.items()]


def get_session(session_id: int) -> SimulationSession:
    return _session_view(session_id, get_run(session_id))


def create_session(config: ExperimentConfig) -> SimulationSession:
    run = ExperimentRun(config)
    session_id = database.session_id_counter
    sessions_db[session_id] = run
    database.session_id_counter += 1
    return _session_view(session_id, run)


def delete_session(session_id: int) -> bool:
    if session_id not in sessions_db:
        return False
    del sessions_db[session_id]
    return True


def advance_session(session_id: int, until: Optional[float] = None) -> SimulationSession:
    run = get_run(session_id)
    run.advance(run.cfg.duration if until is None else until)
    return _session_view(session_id, run)


def get_metrics(session_id: int) -> MetricsReport:
    return get_run(session_id).report()


# Switch views
def get_switches(session_id: int) -> List[SwitchView]:
    run = get_run(session_id)
    return [get_switch(session_id, sw_id) for sw_id in run.simulator.switches]


def get_switch(session_id: int, switch_id: int) -> Optional[SwitchView]:
    sw = get_run(session_id).simulator.switches.get(switch_id)
    if sw is None:
        return None
    return SwitchView(
        switch_id=sw.switch_id,
        health=sw.health,
        f=sw.f,
        f_cap=sw.table.f_cap,
        degraded_since=sw.degraded_since,
        disconnect_delay=sw.disconnect_delay,
        errors=list(sw.error_log),
    )


def get_dest_flows(session_id: int, switch_id: int) -> Optional[DestFlowStats]:
    sw = get_run(session_id).simulator.switches.get(switch_id)
    if sw is None:
        return None
    return sw.table.dest_flow_counts()


# Policies and controller
def get_policy(session_id: int) -> PolicySnapshot:
    return get_run(session_id).controller.policy.snapshot()


def set_policy(session_id: int, switch_id: int, host: int, scheme: MatchScheme) -> List[FlowMod]:
    run = get_run(session_id)
    if switch_id not in run.simulator.switches:
        raise SwitchUnreachable(switch_id, "unknown switch")
    mods = run.controller.set_scheme(switch_id, host, scheme, run.now)
    run.data_app.db.sync_policy(run.controller.policy.snapshot())
    return mods


def get_controller_stats(session_id: int) -> List[ControllerStats]:
    return get_run(session_id).controller.windows()
