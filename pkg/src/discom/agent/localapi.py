"""Loopback HTTP API the browser grid talks to.

The agent stays the single writer of the workbook: the grid edits cells,
registers exports/imports, and reads the rendered view model exclusively
through this API. Edits inside an import overlay are refused here (the
imported range is read-only in the UI; the platform remains the source
of truth for those cells).
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from discom import composition as comp
from discom.agent.core import Agent
from discom.errors import (AuthorizationError, DiscomError, IntegrityError,
                           NotFoundError, ParseError, TransportError)
from discom.model.address import parse_address


class EditBody(BaseModel):
    addr: str  # "Sheet!B2"
    text: str


class ExportBody(BaseModel):
    space: str
    name: str
    description: str = ""
    range: str
    space_wide: bool = False
    allowed: list[str] = Field(default_factory=list)


class ImportBody(BaseModel):
    export_id: str
    target: str


def create_local_app(agent: Agent, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="discom agent", docs_url=None, redoc_url=None)
    app.state.agent = agent

    @app.exception_handler(DiscomError)
    async def _domain_error(_request: Request, exc: DiscomError):
        status = 422
        if isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, AuthorizationError):
            status = 403
        elif isinstance(exc, TransportError):
            status = 502
        return JSONResponse(status_code=status, content={"error": str(exc)})

    @app.get("/local/grid")
    def grid():
        view = agent.grid_view()
        view["catalog"] = _catalog(agent)
        return view

    @app.post("/local/cells")
    def edit_cell(body: EditBody):
        addr = parse_address(body.addr)
        if agent.is_import_target(addr):
            raise AuthorizationError(
                f"{addr} is inside an import overlay and is read-only")
        try:
            changes = agent.edit_cell(addr, body.text)
        except ParseError as exc:
            raise IntegrityError(f"formula rejected: {exc}") from None
        return {"changed": [str(a) for a in sorted(changes.addresses(),
                                                   key=lambda a: a.sort_key)],
                "revision": agent.revision}

    @app.post("/local/exports")
    def register_export(body: ExportBody):
        visibility = (comp.Visibility.spacewide() if body.space_wide
                      else comp.Visibility.restricted(body.allowed))
        descriptor = agent.register_export(
            body.space, body.name, body.description, body.range, visibility)
        return {"id": descriptor.id, "range": descriptor.range.to_a1()}

    @app.post("/local/imports")
    def register_import(body: ImportBody):
        binding = agent.register_import(body.export_id, body.target)
        return {"id": binding.id, "target": binding.target.to_a1()}

    @app.get("/local/catalog")
    def catalog():
        return {"exports": _catalog(agent)}

    @app.post("/local/ticks")
    def tick():
        return agent.sync_tick()

    @app.get("/local/status")
    def status():
        return {"online": agent.online, "revision": agent.revision,
                "user": agent.user,
                "roles": sorted(r.value for r in agent.classify())}

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="webgrid")
    return app


def _catalog(agent: Agent) -> list[dict]:
    try:
        entries = agent.transport.list_exports()
    except (TransportError, DiscomError):
        return []
    return [
        {"id": d.id, "name": d.name, "description": d.description,
         "owner": d.owner, "space": d.space, "range": d.range.to_a1(),
         "latest_version": d.latest_version, "revoked": revoked}
        for d, revoked in entries
    ]
