"""HTTP surface: JSON envelopes carrying the canonical XML payloads.

Status mapping: authentication 401, authorization 403, not-found 404,
conflict 409 (body carries latest_version), integrity/precondition 422.
"""

from __future__ import annotations

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from discom import composition as comp
from discom.errors import (AuthenticationError, AuthorizationError,
                           ConflictError, DiscomError, IntegrityError,
                           NotFoundError, PreconditionError)
from discom.model.xmlio import decode_range_image, encode_range_image
from discom.server.service import PlatformService

_STATUS = (
    (AuthenticationError, 401),
    (AuthorizationError, 403),
    (NotFoundError, 404),
    (ConflictError, 409),
    (IntegrityError, 422),
    (PreconditionError, 422),
)


class LoginBody(BaseModel):
    user: str
    secret: str


class SpaceBody(BaseModel):
    name: str


class MemberBody(BaseModel):
    user: str
    role: str = "both"


class VisibilityBody(BaseModel):
    space_wide: bool = False
    allowed: list[str] = Field(default_factory=list)


class ExportBody(BaseModel):
    space: str
    name: str
    description: str = ""
    range: str
    visibility: VisibilityBody


class ExportUpdateBody(BaseModel):
    name: str | None = None
    description: str | None = None
    visibility: VisibilityBody | None = None


class ContributionBody(BaseModel):
    base_version: int
    image: str  # canonical range-image XML


class ImportBody(BaseModel):
    export_id: str
    target: str


class PollItem(BaseModel):
    id: str
    known_version: int


class PollBody(BaseModel):
    bindings: list[PollItem]


class WorkbookBody(BaseModel):
    document: str  # canonical workbook XML
    exports: list[str] = Field(default_factory=list)
    imports: list[str] = Field(default_factory=list)


class UserBody(BaseModel):
    user: str
    name: str = ""
    secret: str


def _visibility(body: VisibilityBody) -> comp.Visibility:
    if body.space_wide:
        return comp.Visibility.spacewide()
    return comp.Visibility.restricted(body.allowed)


def _space_json(space: comp.Space) -> dict:
    return {"id": space.id, "name": space.name, "creator": space.creator,
            "members": [{"user": uid, "role": role.value}
                        for uid, role in space.members]}


def _export_json(descriptor: comp.ExportDescriptor, revoked: bool) -> dict:
    return {"id": descriptor.id, "owner": descriptor.owner,
            "space": descriptor.space, "name": descriptor.name,
            "description": descriptor.description,
            "range": descriptor.range.to_a1(),
            "visibility": {"space_wide": descriptor.visibility.space_wide,
                           "allowed": sorted(descriptor.visibility.allowed)},
            "latest_version": descriptor.latest_version,
            "revoked": revoked}


def _import_json(binding: comp.ImportBinding) -> dict:
    return {"id": binding.id, "importer": binding.importer,
            "export_id": binding.export_id, "target": binding.target.to_a1(),
            "applied_version": binding.applied_version}


def create_app(service: PlatformService) -> FastAPI:
    app = FastAPI(title="discom platform", docs_url=None, redoc_url=None)
    app.state.service = service

    @app.exception_handler(DiscomError)
    async def _domain_error(_request: Request, exc: DiscomError):
        for klass, status in _STATUS:
            if isinstance(exc, klass):
                body = {"error": str(exc)}
                if isinstance(exc, ConflictError):
                    body["latest_version"] = exc.latest_version
                return JSONResponse(status_code=status, content=body)
        return JSONResponse(status_code=500, content={"error": str(exc)})

    def caller(authorization: str | None = Header(default=None)) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise AuthenticationError("missing bearer token")
        return service.authenticate(authorization.removeprefix("Bearer "))

    def admin(authorization: str | None = Header(default=None)) -> None:
        if (not authorization
                or authorization.removeprefix("Bearer ") != service.admin_token):
            raise AuthenticationError("admin token required")

    @app.get("/api/v1/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/api/v1/login")
    def login(body: LoginBody):
        return {"token": service.login(body.user, body.secret)}

    # -- admin -------------------------------------------------------------

    @app.post("/api/v1/admin/users", dependencies=[Depends(admin)])
    def add_user(body: UserBody):
        user = service.add_user(body.user, body.name or body.user, body.secret)
        return {"id": user.id, "name": user.name}

    @app.get("/api/v1/admin/users", dependencies=[Depends(admin)])
    def list_users():
        return {"users": [{"id": u.id, "name": u.name} for u in service.list_users()]}

    @app.delete("/api/v1/admin/users/{user_id}", dependencies=[Depends(admin)])
    def remove_user(user_id: str):
        service.remove_user(user_id)
        return {"removed": user_id}

    # -- spaces -------------------------------------------------------------

    @app.post("/api/v1/spaces")
    def create_space(body: SpaceBody, user: str = Depends(caller)):
        return _space_json(service.create_space(user, body.name))

    @app.get("/api/v1/spaces")
    def list_spaces(user: str = Depends(caller)):
        return {"spaces": [_space_json(s) for s in service.list_spaces(user)]}

    @app.post("/api/v1/spaces/{space_id}/members")
    def add_member(space_id: str, body: MemberBody, user: str = Depends(caller)):
        role = comp.Role(body.role)
        return _space_json(service.add_member(user, space_id, body.user, role))

    @app.delete("/api/v1/spaces/{space_id}/members/{member_id}")
    def remove_member(space_id: str, member_id: str, user: str = Depends(caller)):
        return _space_json(service.remove_member(user, space_id, member_id))

    @app.delete("/api/v1/spaces/{space_id}")
    def delete_space(space_id: str, user: str = Depends(caller)):
        service.delete_space(user, space_id)
        return {"deleted": space_id}

    # -- exports ------------------------------------------------------------

    @app.post("/api/v1/exports")
    def register_export(body: ExportBody, user: str = Depends(caller)):
        descriptor = service.register_export(
            user, body.space, body.name, body.description, body.range,
            _visibility(body.visibility))
        return _export_json(descriptor, False)

    @app.get("/api/v1/exports")
    def list_exports(user: str = Depends(caller)):
        return {"exports": [_export_json(d, revoked)
                            for d, revoked in service.list_exports(user)]}

    @app.get("/api/v1/exports/{export_id}")
    def get_export(export_id: str, user: str = Depends(caller)):
        descriptor, revoked = service.get_export(user, export_id)
        return _export_json(descriptor, revoked)

    @app.put("/api/v1/exports/{export_id}")
    def update_export(export_id: str, body: ExportUpdateBody,
                      user: str = Depends(caller)):
        descriptor = service.update_export(
            user, export_id, name=body.name, description=body.description,
            visibility=_visibility(body.visibility) if body.visibility else None)
        return _export_json(descriptor, False)

    @app.delete("/api/v1/exports/{export_id}")
    def revoke_export(export_id: str, user: str = Depends(caller)):
        service.revoke_export(user, export_id)
        return {"revoked": export_id}

    @app.put("/api/v1/exports/{export_id}/contribution")
    def push_contribution(export_id: str, body: ContributionBody,
                          user: str = Depends(caller)):
        image = decode_range_image(body.image)
        version = service.push_contribution(user, export_id, image,
                                            body.base_version)
        return {"version": version}

    # -- imports -------------------------------------------------------------

    @app.post("/api/v1/imports")
    def register_import(body: ImportBody, user: str = Depends(caller)):
        return _import_json(service.register_import(user, body.export_id, body.target))

    @app.get("/api/v1/imports")
    def list_imports(user: str = Depends(caller)):
        return {"imports": [_import_json(b) for b in service.list_imports(user)]}

    @app.delete("/api/v1/imports/{binding_id}")
    def delete_import(binding_id: str, user: str = Depends(caller)):
        service.delete_import(user, binding_id)
        return {"deleted": binding_id}

    @app.post("/api/v1/updates")
    def poll_updates(body: PollBody, user: str = Depends(caller)):
        deltas, revocations = service.poll_updates(
            user, [(item.id, item.known_version) for item in body.bindings])
        return {
            "deltas": [
                {"binding_id": d.binding_id,
                 "from_version": d.from_version,
                 "to_version": d.to_version,
                 "image": encode_range_image(d.image)}
                for d in deltas
            ],
            "revocations": [
                {"binding_id": r.binding_id, "reason": r.reason}
                for r in revocations
            ],
        }

    # -- intermediate workbooks ------------------------------------------------

    @app.put("/api/v1/workbooks/{workbook_id}")
    def upload_workbook(workbook_id: str, body: WorkbookBody,
                        user: str = Depends(caller)):
        stored_id = service.upload_intermediate(
            user, body.document, body.exports, body.imports,
            expected_id=workbook_id)
        return {"workbook_id": stored_id}

    @app.delete("/api/v1/workbooks/{workbook_id}")
    def delete_workbook(workbook_id: str, user: str = Depends(caller)):
        service.delete_workbook(user, workbook_id)
        return {"deleted": workbook_id}

    return app
