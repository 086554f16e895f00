"""HTTP facade over one quota plan and one recruitment ledger.

A limit rejection is a domain outcome, returned as a 200 with
verdict=rejected; only malformed requests and state conflicts map to error
statuses. Mutations are serialized through a single write lock and are
fsynced to the event log before the response goes out, so a restart replays
to exactly the acknowledged state.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..errors import (
    ClassificationError,
    DocumentError,
    DuplicateSiteError,
    SiteQuotaError,
    UnknownSiteError,
)
from ..eventlog import LedgerFile, open_ledger
from ..ledger import CandidateSite, event_to_dict
from ..plan import QuotaPlan, load_plan, plan_to_document
from .schemas import DecisionOut, SiteIn, StatusOut, WithdrawalOut


@dataclass
class ServiceConfig:
    plan_path: str
    log_path: str
    host: str = "127.0.0.1"
    port: int = 8000
    read_only: bool = False

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        path = Path(path)
        if not path.is_file():
            raise DocumentError(f"service config not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DocumentError(f"service config is not valid JSON: {exc}") from None
        for field in ("plan", "log"):
            if field not in doc:
                raise DocumentError(f"service config missing field {field!r}")
        return cls(
            plan_path=doc["plan"],
            log_path=doc["log"],
            host=doc.get("host", "127.0.0.1"),
            port=int(doc.get("port", 8000)),
            read_only=bool(doc.get("read_only", False)),
        )


def _error_response(status: int, code: str, exc: Exception) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": str(exc), "detail": type(exc).__name__},
    )


def create_app(
    plan: QuotaPlan, ledger_file: LedgerFile, read_only: bool = False
) -> FastAPI:
    app = FastAPI(title="sitequota recruitment service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    write_lock = threading.Lock()
    plan_document = plan_to_document(plan)

    app.state.ledger_file = ledger_file

    @app.exception_handler(ClassificationError)
    async def _classification(request: Request, exc: ClassificationError):
        return _error_response(422, "classification_error", exc)

    @app.exception_handler(DuplicateSiteError)
    async def _duplicate(request: Request, exc: DuplicateSiteError):
        return _error_response(409, "duplicate_site", exc)

    @app.exception_handler(UnknownSiteError)
    async def _unknown(request: Request, exc: UnknownSiteError):
        return _error_response(404, "unknown_site", exc)

    @app.exception_handler(SiteQuotaError)
    async def _domain(request: Request, exc: SiteQuotaError):
        return _error_response(500, "internal_error", exc)

    def _read_only_response() -> JSONResponse:
        return JSONResponse(
            status_code=403,
            content={
                "code": "read_only",
                "message": "service is running in read-only mode",
                "detail": None,
            },
        )

    @app.get("/plan")
    def get_plan() -> dict:
        return plan_document

    @app.get("/status", response_model=StatusOut)
    def get_status():
        with write_lock:
            return StatusOut.from_report(ledger_file.ledger.status())

    @app.post("/whatif", response_model=DecisionOut)
    def post_whatif(site: SiteIn):
        with write_lock:
            decision = ledger_file.what_if(_to_site(site))
        return DecisionOut.from_decision(decision)

    @app.post("/sites", response_model=DecisionOut)
    def post_site(site: SiteIn):
        if read_only:
            return _read_only_response()
        with write_lock:
            decision = ledger_file.admit(_to_site(site))
        return DecisionOut.from_decision(decision)

    @app.delete("/sites/{site_id}", response_model=WithdrawalOut)
    def delete_site(site_id: str):
        if read_only:
            return _read_only_response()
        with write_lock:
            event = ledger_file.withdraw(site_id)
        return WithdrawalOut(site_id=site_id, seq=event.seq)

    @app.get("/events")
    def get_events(since: int = Query(default=0, ge=0)) -> list[dict]:
        with write_lock:
            events = list(ledger_file.ledger.events)
        return [event_to_dict(e) for e in events if e.seq > since]

    return app


def _to_site(site: SiteIn) -> CandidateSite:
    return CandidateSite(
        site_id=site.site_id, responses=site.responses, metadata=site.metadata
    )


def build_service(config: ServiceConfig) -> FastAPI:
    """Load the plan, replay the log, and refuse mismatched pairs."""
    plan = load_plan(config.plan_path)
    ledger_file = open_ledger(plan, config.log_path)
    return create_app(plan, ledger_file, read_only=config.read_only)


def serve(config: ServiceConfig) -> None:
    import uvicorn

    app = build_service(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
