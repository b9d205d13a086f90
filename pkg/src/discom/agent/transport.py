"""Client-side transport to the platform.

Two interchangeable implementations: HttpTransport speaks the JSON+XML
HTTP protocol; LocalTransport calls an in-process PlatformService
directly (deterministic tests, scenario replay) and can simulate being
offline. Both surface the same domain exceptions, so agent logic never
cares which one it is on.
"""

from __future__ import annotations

from typing import Iterable, Protocol

import requests

from discom import composition as comp
from discom.errors import (AuthenticationError, AuthorizationError,
                           ConflictError, IntegrityError, NotFoundError,
                           TransportError)
from discom.model.image import RangeImage
from discom.model.address import parse_range
from discom.model.xmlio import decode_range_image, encode_range_image
from discom.server.service import (PlatformService, RevocationNotice,
                                   UpdateDelta)


class Transport(Protocol):
    def login(self, user: str, secret: str) -> str: ...
    def create_space(self, name: str) -> comp.Space: ...
    def add_member(self, space_id: str, user: str, role: comp.Role) -> comp.Space: ...
    def list_spaces(self) -> list[comp.Space]: ...
    def register_export(self, space: str, name: str, description: str,
                        range_a1: str, visibility: comp.Visibility) -> comp.ExportDescriptor: ...
    def get_export(self, export_id: str) -> tuple[comp.ExportDescriptor, bool]: ...
    def list_exports(self) -> list[tuple[comp.ExportDescriptor, bool]]: ...
    def revoke_export(self, export_id: str) -> None: ...
    def register_import(self, export_id: str, target_a1: str) -> comp.ImportBinding: ...
    def list_imports(self) -> list[comp.ImportBinding]: ...
    def delete_import(self, binding_id: str) -> None: ...
    def push_contribution(self, export_id: str, image: RangeImage,
                          base_version: int) -> int: ...
    def poll_updates(self, items: Iterable[tuple[str, int]]
                     ) -> tuple[list[UpdateDelta], list[RevocationNotice]]: ...
    def upload_workbook(self, workbook_id: str, document: str,
                        export_ids: Iterable[str], import_ids: Iterable[str]) -> str: ...


class LocalTransport:
    """Direct calls into an in-process service; ``set_offline(True)`` makes
    every call fail like a dead network."""

    def __init__(self, service: PlatformService):
        self.service = service
        self.token: str | None = None
        self.offline = False

    def set_offline(self, offline: bool) -> None:
        self.offline = offline

    def _caller(self) -> str:
        if self.offline:
            raise TransportError("simulated network failure")
        return self.service.authenticate(self.token)

    def login(self, user: str, secret: str) -> str:
        if self.offline:
            raise TransportError("simulated network failure")
        self.token = self.service.login(user, secret)
        return self.token

    def create_space(self, name):
        return self.service.create_space(self._caller(), name)

    def add_member(self, space_id, user, role):
        return self.service.add_member(self._caller(), space_id, user, role)

    def list_spaces(self):
        return self.service.list_spaces(self._caller())

    def register_export(self, space, name, description, range_a1, visibility):
        return self.service.register_export(self._caller(), space, name,
                                            description, range_a1, visibility)

    def get_export(self, export_id):
        return self.service.get_export(self._caller(), export_id)

    def list_exports(self):
        return self.service.list_exports(self._caller())

    def revoke_export(self, export_id):
        self.service.revoke_export(self._caller(), export_id)

    def register_import(self, export_id, target_a1):
        return self.service.register_import(self._caller(), export_id, target_a1)

    def list_imports(self):
        return self.service.list_imports(self._caller())

    def delete_import(self, binding_id):
        self.service.delete_import(self._caller(), binding_id)

    def push_contribution(self, export_id, image, base_version):
        return self.service.push_contribution(self._caller(), export_id,
                                              image, base_version)

    def poll_updates(self, items):
        return self.service.poll_updates(self._caller(), list(items))

    def upload_workbook(self, workbook_id, document, export_ids, import_ids):
        return self.service.upload_intermediate(
            self._caller(), document, export_ids, import_ids,
            expected_id=workbook_id)


class HttpTransport:
    def __init__(self, base_url: str, token: str | None = None,
                 timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout = timeout
        self._session = requests.Session()

    # -- plumbing -------------------------------------------------------------

    def _request(self, method: str, path: str, json_body: dict | None = None) -> dict:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            response = self._session.request(
                method, f"{self.base_url}{path}", json=json_body,
                headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"cannot reach platform: {exc}") from None
        if response.status_code < 400:
            return response.json() if response.content else {}
        try:
            payload = response.json()
        except ValueError:
            payload = {}
        message = payload.get("error", response.text)
        code = response.status_code
        if code == 401:
            raise AuthenticationError(message)
        if code == 403:
            raise AuthorizationError(message)
        if code == 404:
            raise NotFoundError(message)
        if code == 409:
            raise ConflictError(message, int(payload.get("latest_version", 0)))
        if code == 422:
            raise IntegrityError(message)
        raise TransportError(f"platform error {code}: {message}")

    # -- protocol -------------------------------------------------------------

    def login(self, user, secret):
        payload = self._request("POST", "/api/v1/login",
                                {"user": user, "secret": secret})
        self.token = payload["token"]
        return self.token

    def healthz(self) -> bool:
        return self._request("GET", "/api/v1/healthz").get("status") == "ok"

    def create_space(self, name):
        return _space_of(self._request("POST", "/api/v1/spaces", {"name": name}))

    def add_member(self, space_id, user, role):
        return _space_of(self._request(
            "POST", f"/api/v1/spaces/{space_id}/members",
            {"user": user, "role": role.value}))

    def list_spaces(self):
        return [_space_of(raw)
                for raw in self._request("GET", "/api/v1/spaces")["spaces"]]

    def register_export(self, space, name, description, range_a1, visibility):
        raw = self._request("POST", "/api/v1/exports", {
            "space": space, "name": name, "description": description,
            "range": range_a1,
            "visibility": {"space_wide": visibility.space_wide,
                           "allowed": sorted(visibility.allowed)},
        })
        return _export_of(raw)[0]

    def get_export(self, export_id):
        return _export_of(self._request("GET", f"/api/v1/exports/{export_id}"))

    def list_exports(self):
        return [_export_of(raw)
                for raw in self._request("GET", "/api/v1/exports")["exports"]]

    def revoke_export(self, export_id):
        self._request("DELETE", f"/api/v1/exports/{export_id}")

    def register_import(self, export_id, target_a1):
        raw = self._request("POST", "/api/v1/imports",
                            {"export_id": export_id, "target": target_a1})
        return _import_of(raw)

    def list_imports(self):
        return [_import_of(raw)
                for raw in self._request("GET", "/api/v1/imports")["imports"]]

    def delete_import(self, binding_id):
        self._request("DELETE", f"/api/v1/imports/{binding_id}")

    def push_contribution(self, export_id, image, base_version):
        payload = self._request(
            "PUT", f"/api/v1/exports/{export_id}/contribution",
            {"base_version": base_version, "image": encode_range_image(image)})
        return int(payload["version"])

    def poll_updates(self, items):
        payload = self._request("POST", "/api/v1/updates", {
            "bindings": [{"id": binding_id, "known_version": known}
                         for binding_id, known in items]})
        deltas = [UpdateDelta(raw["binding_id"],
                              decode_range_image(raw["image"]),
                              raw["from_version"], raw["to_version"])
                  for raw in payload["deltas"]]
        revocations = [RevocationNotice(raw["binding_id"], raw["reason"])
                       for raw in payload["revocations"]]
        return deltas, revocations

    def upload_workbook(self, workbook_id, document, export_ids, import_ids):
        payload = self._request("PUT", f"/api/v1/workbooks/{workbook_id}", {
            "document": document,
            "exports": list(export_ids),
            "imports": list(import_ids)})
        return payload["workbook_id"]

    # -- admin (bearer token must be the platform admin token) -----------------

    def admin_add_user(self, user: str, name: str, secret: str) -> dict:
        return self._request("POST", "/api/v1/admin/users",
                             {"user": user, "name": name, "secret": secret})

    def admin_list_users(self) -> list[dict]:
        return self._request("GET", "/api/v1/admin/users")["users"]

    def admin_remove_user(self, user_id: str) -> None:
        self._request("DELETE", f"/api/v1/admin/users/{user_id}")


def _space_of(raw: dict) -> comp.Space:
    members = tuple((m["user"], comp.Role(m["role"])) for m in raw["members"])
    return comp.Space(raw["id"], raw["name"], raw["creator"], members)


def _export_of(raw: dict) -> tuple[comp.ExportDescriptor, bool]:
    vis_raw = raw["visibility"]
    visibility = (comp.Visibility.spacewide() if vis_raw["space_wide"]
                  else comp.Visibility.restricted(vis_raw["allowed"]))
    descriptor = comp.ExportDescriptor(
        raw["id"], raw["owner"], raw["space"], raw["name"],
        raw.get("description", ""), parse_range(raw["range"]), visibility,
        raw["latest_version"])
    return descriptor, raw.get("revoked", False)


def _import_of(raw: dict) -> comp.ImportBinding:
    return comp.ImportBinding(raw["id"], raw["importer"], raw["export_id"],
                              parse_range(raw["target"]),
                              raw.get("applied_version", 0))
