from __future__ import annotations

from typing import Any, Dict, List, Optional

from sqlalchemy import select
from sqlalchemy.orm import Session as DBSession

from .models import Event, Run, TrialMetric


def log_event(
    db: DBSession,
    invocation_id: str,
    run_id: str,
    event_type: str,
    payload: Optional[Dict[str, Any]] = None,
) -> None:
    db.add(Event(
        invocation_id=invocation_id,
        run_id=run_id,
        event_type=event_type,
        payload_json=payload or {},
    ))


def create_run(
    db: DBSession,
    run_id: str,
    command: str,
    payload: Dict[str, Any],
    status: str = "started",
) -> str:
    run = Run(
        run_id=run_id,
        command=command,
        status=status,
        payload_json=payload,
        result_json={},
        error_json={},
        latency_ms=0,
    )
    db.add(run)
    db.flush()  # assigns invocation_id
    return run.invocation_id


def finalize_run(
    db: DBSession,
    invocation_id: str,
    status: str,
    result_json: Dict[str, Any],
    error_json: Dict[str, Any],
    latency_ms: int,
) -> None:
    run: Run = db.get(Run, invocation_id)
    run.status = status
    run.result_json = result_json or {}
    run.error_json = error_json or {}
    run.latency_ms = latency_ms


def get_run(db: DBSession, invocation_id: str) -> Run | None:
    return db.get(Run, invocation_id)


def record_trial_metric(db: DBSession, run_id: str, role: str, trial: int, name: str, value: float) -> None:
    db.add(TrialMetric(run_id=run_id, role=role, trial=trial, name=name, value=float(value)))


def list_trial_metrics(db: DBSession, run_id: str, name: Optional[str] = None) -> List[TrialMetric]:
    stmt = select(TrialMetric).where(TrialMetric.run_id == run_id)
    if name is not None:
        stmt = stmt.where(TrialMetric.name == name)
    stmt = stmt.order_by(TrialMetric.role, TrialMetric.trial)
    return list(db.execute(stmt).scalars().all())


def list_events(db: DBSession, invocation_id: str) -> List[Event]:
    stmt = select(Event).where(Event.invocation_id == invocation_id).order_by(Event.ts)
    return list(db.execute(stmt).scalars().all())


def set_run_id(db: DBSession, invocation_id: str, run_id: str) -> None:
    run: Run = db.get(Run, invocation_id)
    run.run_id = run_id
