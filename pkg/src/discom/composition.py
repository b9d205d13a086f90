"""Users, spaces, exports, imports, visibility, and workbook classification.

Pure domain logic shared by server and agent: every function here takes
and returns immutable values; the server serializes version assignment
and persists the results.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, replace
from enum import Enum

from discom.engine.graph import build_dep_graph, canonical_address
from discom.errors import (AuthorizationError, ConflictError, IntegrityError,
                           NotFoundError)
from discom.model.address import CellAddress, RangeRef
from discom.model.workbook import Workbook


class Role(Enum):
    CREATOR = "creator"
    EXPORTER = "exporter"
    IMPORTER = "importer"
    BOTH = "both"


class WorkbookRole(Enum):
    PURE_EXPORTER = "PureExporter"
    PURE_IMPORTER = "PureImporter"
    INTERMEDIATE = "Intermediate"
    DETACHED = "Detached"


@dataclass(frozen=True)
class User:
    id: str
    name: str
    salt: str  # hex
    digest: str  # hex sha256(salt || secret)

    @staticmethod
    def create(user_id: str, name: str, secret: str) -> "User":
        salt = os.urandom(16).hex()
        return User(user_id, name, salt, _digest(salt, secret))

    def verify(self, secret: str) -> bool:
        return _digest(self.salt, secret) == self.digest


def _digest(salt: str, secret: str) -> str:
    return hashlib.sha256(bytes.fromhex(salt) + secret.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Space:
    id: str
    name: str
    creator: str  # user id
    members: tuple[tuple[str, Role], ...]  # (user id, role), creation order

    def member_ids(self) -> set[str]:
        return {uid for uid, _ in self.members}

    def role_of(self, user_id: str) -> Role | None:
        for uid, role in self.members:
            if uid == user_id:
                return role
        return None


@dataclass(frozen=True)
class Visibility:
    space_wide: bool
    allowed: frozenset[str] = frozenset()  # user ids, when restricted

    @staticmethod
    def spacewide() -> "Visibility":
        return Visibility(True)

    @staticmethod
    def restricted(user_ids) -> "Visibility":
        return Visibility(False, frozenset(user_ids))


@dataclass(frozen=True)
class ExportDescriptor:
    id: str
    owner: str  # user id
    space: str  # space id
    name: str
    description: str
    range: RangeRef  # owner-local coordinates
    visibility: Visibility
    latest_version: int = 0  # 0 = registered, no contribution yet

    def bump(self) -> "ExportDescriptor":
        return replace(self, latest_version=self.latest_version + 1)


@dataclass(frozen=True)
class ImportBinding:
    id: str
    importer: str  # user id
    export_id: str
    target: RangeRef  # importer-local coordinates
    applied_version: int = 0


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def create_space(space_id: str, creator: str, name: str,
                 known_users, existing_spaces) -> Space:
    if creator not in known_users:
        raise NotFoundError(f"unknown user {creator!r}")
    if not name:
        raise IntegrityError("space name must be non-empty")
    for space in existing_spaces:
        if space.creator == creator and space.name.casefold() == name.casefold():
            raise ConflictError(f"space {name!r} already exists for this creator", 0)
    return Space(space_id, name, creator, ((creator, Role.CREATOR),))


def add_member(space: Space, caller: str, user_id: str, role: Role) -> Space:
    if caller != space.creator:
        raise AuthorizationError("only the space creator may add members")
    if role is Role.CREATOR:
        raise IntegrityError("the creator role is not assignable")
    current = space.role_of(user_id)
    if current is role:
        return space  # idempotent re-add
    if current is Role.CREATOR:
        raise IntegrityError("cannot change the creator's role")
    members = tuple((uid, role if uid == user_id else r) for uid, r in space.members)
    if current is None:
        members = space.members + ((user_id, role),)
    return replace(space, members=members)


def remove_member(space: Space, caller: str, user_id: str) -> Space:
    if caller != space.creator:
        raise AuthorizationError("only the space creator may remove members")
    if user_id == space.creator:
        raise IntegrityError("the creator cannot be removed")
    if space.role_of(user_id) is None:
        raise NotFoundError(f"{user_id!r} is not a member")
    return replace(space, members=tuple((uid, r) for uid, r in space.members
                                        if uid != user_id))


def authorize(user_id: str, export: ExportDescriptor, space: Space) -> bool:
    """Permit iff owner, or space-wide and a member, or in the restricted set."""
    if user_id == export.owner:
        return True
    if export.visibility.space_wide:
        return user_id in space.member_ids()
    return user_id in export.visibility.allowed


def next_version(export: ExportDescriptor) -> int:
    return export.latest_version + 1


def classify_workbook(wb: Workbook, exports, imports) -> frozenset[WorkbookRole]:
    """Role of a workbook given its registered exports and import bindings.

    Intermediate iff some exported cell coincides with an imported cell
    (direct inclusion) or is reachable from one in the dependency graph
    (formulas). Exports and imports that are both present but dependency-
    disjoint report the composite {PureExporter, PureImporter}.
    """
    for descriptor in exports:
        if not wb.has_sheet(descriptor.range.sheet):
            raise IntegrityError(
                f"export {descriptor.id!r} range names missing sheet {descriptor.range.sheet!r}")
    for binding in imports:
        if not wb.has_sheet(binding.target.sheet):
            raise IntegrityError(
                f"import {binding.id!r} target names missing sheet {binding.target.sheet!r}")

    if not exports and not imports:
        return frozenset({WorkbookRole.DETACHED})
    if exports and not imports:
        return frozenset({WorkbookRole.PURE_EXPORTER})
    if imports and not exports:
        return frozenset({WorkbookRole.PURE_IMPORTER})

    graph = build_dep_graph(wb)
    sheet_map = {s.name.casefold(): s.name for s in wb.sheets}

    def canon(addr: CellAddress) -> CellAddress:
        return canonical_address(wb, addr, sheet_map)

    imported = {canon(a) for b in imports for a in b.target.cells()}
    exported = {canon(a) for d in exports for a in d.range.cells()}
    if imported & exported:  # direct inclusion
        return frozenset({WorkbookRole.INTERMEDIATE})
    if graph.downstream(imported) & exported:  # formulas
        return frozenset({WorkbookRole.INTERMEDIATE})
    return frozenset({WorkbookRole.PURE_EXPORTER, WorkbookRole.PURE_IMPORTER})


def is_intermediate(roles: frozenset[WorkbookRole]) -> bool:
    return WorkbookRole.INTERMEDIATE in roles
