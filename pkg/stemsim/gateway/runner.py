from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional

from stemsim.errors import ErrorCode, StemSimError
from stemsim.observability import get_logger

from storage.db import repo as dbrepo

log = get_logger("gateway")


@dataclass
class CommandResult:
    status: str  # ok|error
    command: str
    run_id: str
    data: Dict[str, Any]
    error: Optional[Dict[str, Any]]
    meta: Dict[str, Any]


@dataclass
class CommandContext:
    """Handed to every command body; carries the audit session (may be None)."""
    command: str
    run_id: str
    db: Any = None
    invocation_id: Optional[str] = None

    def bind_run(self, run_id: str) -> None:
        """Attach the config-derived run id once the command has resolved its config."""
        self.run_id = run_id
        if self.db is not None and self.invocation_id is not None:
            dbrepo.set_run_id(self.db, self.invocation_id, run_id)

    def record_metric(self, role: str, trial: int, name: str, value: float) -> None:
        if self.db is not None:
            dbrepo.record_trial_metric(self.db, self.run_id, role, trial, name, value)

    def event(self, event_type: str, payload: Optional[Dict[str, Any]] = None) -> None:
        if self.db is not None and self.invocation_id is not None:
            dbrepo.log_event(self.db, self.invocation_id, self.run_id, event_type, payload)


CommandFn = Callable[[Dict[str, Any], CommandContext], Dict[str, Any]]


def _jsonable(obj: Any) -> Any:
    return json.loads(json.dumps(obj, default=str))


class CommandGateway:
    """
    Single choke point for running CLI commands.

    Responsibilities:
    - Create the audit run row before anything else
    - Execute the command body
    - Convert StemSimError and unexpected exceptions into an error envelope
    - Finalize the run row and log called/succeeded/failed events
    """

    def run(
        self,
        db,
        command: str,
        fn: CommandFn,
        payload: Dict[str, Any],
        run_id: str = "",
    ) -> CommandResult:
        t0 = time.time()
        ctx = CommandContext(command=command, run_id=run_id, db=db)
        if db is not None:
            ctx.invocation_id = dbrepo.create_run(db, run_id, command, _jsonable(payload))
        ctx.event("command_called", {"command": command})
        log.info("command called", extra={"command": command, "run_id": run_id})

        try:
            out = fn(payload, ctx)
        except StemSimError as e:
            return self._fail(ctx, t0, e.code, e.message, e.details or {})
        except Exception as e:
            log.exception("command crashed", extra={"command": command, "run_id": run_id})
            return self._fail(ctx, t0, ErrorCode.INTERNAL_ERROR, "Command execution failed", {"error": str(e)})

        res = CommandResult(
            status="ok",
            command=command,
            run_id=ctx.run_id,
            data=_jsonable(out or {}),
            error=None,
            meta={"latency_ms": self._ms_since(t0), "source": "gateway"},
        )
        if db is not None:
            dbrepo.finalize_run(db, ctx.invocation_id, res.status, res.data, {}, res.meta["latency_ms"])
        ctx.event("command_succeeded", {"command": command})
        log.info(
            "command succeeded",
            extra={"command": command, "run_id": ctx.run_id, "fields": {"latency_ms": res.meta["latency_ms"]}},
        )
        return res

    def _fail(
        self,
        ctx: CommandContext,
        t0: float,
        code: str,
        message: str,
        details: Dict[str, Any],
    ) -> CommandResult:
        res = CommandResult(
            status="error",
            command=ctx.command,
            run_id=ctx.run_id,
            data={},
            error=_jsonable({"code": code, "message": message, "details": details}),
            meta={"latency_ms": self._ms_since(t0), "source": "gateway"},
        )
        if ctx.db is not None:
            dbrepo.finalize_run(ctx.db, ctx.invocation_id, res.status, {}, res.error, res.meta["latency_ms"])
        ctx.event("command_failed", {"command": ctx.command, "error": res.error})
        log.error(
            "command failed",
            extra={"command": ctx.command, "run_id": ctx.run_id, "fields": {"error": res.error}},
        )
        return res

    @staticmethod
    def _ms_since(t0: float) -> int:
        return int((time.time() - t0) * 1000)
