"""The platform core: accounts, spaces, export/import CRUD, versioned
contribution storage, intermediate-workbook hosting, and the data
propagation function that keeps chains updated while owners are offline.

All state mutation happens under one lock and is persisted (when a store
is attached) before the call returns, so a client that saw a commit will
see it again after a restart. Propagation runs on a worker pool with
single-flight per workbook: re-triggers during a run coalesce into one
follow-up run.
"""

from __future__ import annotations

import queue
import secrets as pysecrets
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

from discom import composition as comp
from discom.engine.evaluator import evaluate_all, recalculate
from discom.engine.graph import strongly_connected
from discom.errors import (AuthenticationError, AuthorizationError,
                           ConflictError, DocumentError, IntegrityError,
                           NotFoundError, PreconditionError,
                           PropagationCycleError, StoreCorruptError)
from discom.model.address import parse_range
from discom.model.image import RangeImage
from discom.model.workbook import LiteralContent, Workbook
from discom.model.xmlio import (decode_range_image, decode_workbook,
                                encode_range_image, encode_workbook)
from discom.server.store import SnapshotStore

PLATFORM_AUTHOR = "platform"


@dataclass
class StoredExport:
    descriptor: comp.ExportDescriptor
    images: list[RangeImage] = field(default_factory=list)  # index i = version i+1
    authored_by: list[str] = field(default_factory=list)
    revoked: bool = False

    def latest_image(self) -> RangeImage | None:
        return self.images[-1] if self.images else None


@dataclass
class IntermediateRecord:
    workbook_id: str
    owner: str
    workbook: Workbook  # kept evaluated
    export_ids: tuple[str, ...]
    import_ids: tuple[str, ...]
    last_propagated_versions: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class UpdateDelta:
    binding_id: str
    image: RangeImage
    from_version: int
    to_version: int


@dataclass(frozen=True)
class RevocationNotice:
    binding_id: str
    reason: str  # "export revoked" | "access revoked"


class PlatformService:
    def __init__(self, store: SnapshotStore | None = None, *,
                 workers: int = 2, sweep_interval: float = 0.0,
                 admin_token: str = "admin", inline_propagation: bool = False):
        self._lock = threading.RLock()
        self.admin_token = admin_token
        self.users: dict[str, comp.User] = {}
        self.spaces: dict[str, comp.Space] = {}
        self.exports: dict[str, StoredExport] = {}
        self.imports: dict[str, comp.ImportBinding] = {}
        self.workbooks: dict[str, IntermediateRecord] = {}
        self.diagnostics: list[str] = []
        self._counters: dict[str, int] = {}
        self._tokens: dict[str, str] = {}
        self._store = store
        if store is not None:
            payload = store.load()
            if payload is not None:
                self._restore(payload)
        if inline_propagation:
            self._queue: _PropagationQueue | _InlineQueue = _InlineQueue(self)
        else:
            self._queue = _PropagationQueue(self, max(1, workers))
        self._sweeper = _Sweeper(self, sweep_interval) if sweep_interval > 0 else None

    # -- lifecycle -----------------------------------------------------------

    def close(self) -> None:
        if self._sweeper:
            self._sweeper.stop()
        self._queue.stop()

    def drain(self, timeout: float = 10.0) -> bool:
        """Wait until the propagation queue is idle; False on timeout."""
        return self._queue.drain(timeout)

    def sweep(self) -> None:
        """Enqueue every intermediate workbook (the periodic fallback)."""
        with self._lock:
            ids = list(self.workbooks)
        for wb_id in ids:
            self._queue.enqueue(wb_id)

    # -- authentication --------------------------------------------------------

    def add_user(self, user_id: str, name: str, secret: str) -> comp.User:
        with self._lock:
            if not user_id:
                raise IntegrityError("user id must be non-empty")
            if user_id in self.users:
                raise ConflictError(f"user {user_id!r} already exists", 0)
            user = comp.User.create(user_id, name, secret)
            self.users[user_id] = user
            self._persist()
            return user

    def remove_user(self, user_id: str) -> None:
        with self._lock:
            if user_id not in self.users:
                raise NotFoundError(f"unknown user {user_id!r}")
            del self.users[user_id]
            self._tokens = {t: u for t, u in self._tokens.items() if u != user_id}
            self._persist()

    def list_users(self) -> list[comp.User]:
        with self._lock:
            return [self.users[k] for k in sorted(self.users)]

    def login(self, user_id: str, secret: str) -> str:
        with self._lock:
            user = self.users.get(user_id)
            if user is None or not user.verify(secret):
                raise AuthenticationError("invalid credentials")
            token = pysecrets.token_hex(16)
            self._tokens[token] = user_id
            return token

    def authenticate(self, token: str | None) -> str:
        with self._lock:
            if token and token in self._tokens:
                return self._tokens[token]
        raise AuthenticationError("missing or invalid token")

    # -- spaces ---------------------------------------------------------------

    def create_space(self, caller: str, name: str) -> comp.Space:
        with self._lock:
            self._require_user(caller)
            space = comp.create_space(self._next_id("spc"), caller, name,
                                      self.users, self.spaces.values())
            self.spaces[space.id] = space
            self._persist()
            return space

    def add_member(self, caller: str, space_id: str, user_id: str,
                   role: comp.Role) -> comp.Space:
        with self._lock:
            space = self._require_space(space_id)
            self._require_user(user_id)
            space = comp.add_member(space, caller, user_id, role)
            self.spaces[space_id] = space
            self._persist()
            return space

    def remove_member(self, caller: str, space_id: str, user_id: str) -> comp.Space:
        with self._lock:
            space = self._require_space(space_id)
            space = comp.remove_member(space, caller, user_id)
            self.spaces[space_id] = space
            self._persist()
            return space

    def get_space(self, caller: str, space_id: str) -> comp.Space:
        with self._lock:
            space = self._require_space(space_id)
            if caller not in space.member_ids():
                raise AuthorizationError("not a member of this space")
            return space

    def delete_space(self, caller: str, space_id: str) -> None:
        with self._lock:
            space = self._require_space(space_id)
            if caller != space.creator:
                raise AuthorizationError("only the space creator may delete it")
            live = [record.descriptor.id for record in self.exports.values()
                    if record.descriptor.space == space_id and not record.revoked]
            if live:
                raise PreconditionError(
                    f"space still has live exports: {sorted(live)}")
            del self.spaces[space_id]
            self._persist()

    def list_spaces(self, caller: str) -> list[comp.Space]:
        with self._lock:
            return [s for k, s in sorted(self.spaces.items())
                    if caller in s.member_ids()]

    # -- exports ------------------------------------------------------------

    def register_export(self, caller: str, space_id: str, name: str,
                        description: str, range_a1: str,
                        visibility: comp.Visibility) -> comp.ExportDescriptor:
        with self._lock:
            space = self._require_space(space_id)
            if caller not in space.member_ids():
                raise AuthorizationError("exporter must be a space member")
            rng = parse_range(range_a1)
            self._check_visibility(visibility, space)
            descriptor = comp.ExportDescriptor(
                self._next_id("exp"), caller, space_id, name, description,
                rng, visibility)
            self.exports[descriptor.id] = StoredExport(descriptor)
            self._persist()
            return descriptor

    def update_export(self, caller: str, export_id: str, *,
                      name: str | None = None, description: str | None = None,
                      visibility: comp.Visibility | None = None) -> comp.ExportDescriptor:
        with self._lock:
            record = self._require_export(export_id)
            if record.descriptor.owner != caller:
                raise AuthorizationError("only the owner may update an export")
            descriptor = record.descriptor
            if name is not None:
                descriptor = replace(descriptor, name=name)
            if description is not None:
                descriptor = replace(descriptor, description=description)
            if visibility is not None:
                self._check_visibility(visibility, self._require_space(descriptor.space))
                descriptor = replace(descriptor, visibility=visibility)
            record.descriptor = descriptor
            self._persist()
            return descriptor

    def revoke_export(self, caller: str, export_id: str) -> None:
        """Delete = revoke: importers keep their last image and get flagged."""
        with self._lock:
            record = self._require_export(export_id)
            if record.descriptor.owner != caller:
                raise AuthorizationError("only the owner may revoke an export")
            record.revoked = True
            self._persist()

    def list_exports(self, caller: str) -> list[tuple[comp.ExportDescriptor, bool]]:
        """Visible catalog: (descriptor, revoked) pairs."""
        with self._lock:
            out = []
            for export_id in sorted(self.exports):
                record = self.exports[export_id]
                space = self.spaces.get(record.descriptor.space)
                if space and comp.authorize(caller, record.descriptor, space):
                    out.append((record.descriptor, record.revoked))
            return out

    def get_export(self, caller: str, export_id: str) -> tuple[comp.ExportDescriptor, bool]:
        with self._lock:
            record = self._require_export(export_id)
            space = self._require_space(record.descriptor.space)
            if not comp.authorize(caller, record.descriptor, space):
                raise AuthorizationError("export not visible to caller")
            return record.descriptor, record.revoked

    def push_contribution(self, caller: str, export_id: str, image: RangeImage,
                          base_version: int) -> int:
        with self._lock:
            record = self._require_export(export_id)
            descriptor = record.descriptor
            if descriptor.owner != caller:
                raise AuthorizationError("only the owner may push contributions")
            if record.revoked:
                raise PreconditionError("export has been revoked")
            if image.dims != descriptor.range.dims:
                raise IntegrityError(
                    f"image dims {image.dims} do not match export range {descriptor.range.dims}")
            if base_version != descriptor.latest_version:
                raise ConflictError("stale base version", descriptor.latest_version)
            version = comp.next_version(descriptor)
            record.images.append(image.with_version(export_id, version))
            record.authored_by.append(caller)
            record.descriptor = descriptor.bump()
            self._persist()
            importing = self._importing_workbooks(export_id)
        for wb_id in importing:
            self._queue.enqueue(wb_id)
        return version

    # -- imports -------------------------------------------------------------

    def register_import(self, caller: str, export_id: str,
                        target_a1: str) -> comp.ImportBinding:
        with self._lock:
            self._require_user(caller)
            record = self._require_export(export_id)
            if record.revoked:
                raise PreconditionError("export has been revoked")
            space = self._require_space(record.descriptor.space)
            if not comp.authorize(caller, record.descriptor, space):
                raise AuthorizationError("export not visible to caller")
            target = parse_range(target_a1)
            if target.dims != record.descriptor.range.dims:
                raise IntegrityError(
                    f"target dims {target.dims} do not match export range "
                    f"{record.descriptor.range.dims}")
            binding = comp.ImportBinding(self._next_id("imp"), caller, export_id, target)
            self.imports[binding.id] = binding
            self._persist()
            return binding

    def delete_import(self, caller: str, binding_id: str) -> None:
        with self._lock:
            binding = self.imports.get(binding_id)
            if binding is None or binding.importer != caller:
                raise NotFoundError(f"unknown binding {binding_id!r}")
            del self.imports[binding_id]
            self._persist()

    def list_imports(self, caller: str) -> list[comp.ImportBinding]:
        with self._lock:
            return [b for k, b in sorted(self.imports.items()) if b.importer == caller]

    def poll_updates(self, caller: str, items: Iterable[tuple[str, int]]
                     ) -> tuple[list[UpdateDelta], list[RevocationNotice]]:
        """Latest-only deltas for bindings newer than the caller's
        known_version; authorization is re-checked on every poll."""
        deltas: list[UpdateDelta] = []
        revocations: list[RevocationNotice] = []
        with self._lock:
            for binding_id, known_version in items:
                binding = self.imports.get(binding_id)
                if binding is None or binding.importer != caller:
                    raise NotFoundError(f"unknown binding {binding_id!r}")
                record = self._require_export(binding.export_id)
                if record.revoked:
                    revocations.append(RevocationNotice(binding_id, "export revoked"))
                    continue
                space = self._require_space(record.descriptor.space)
                if not comp.authorize(caller, record.descriptor, space):
                    revocations.append(RevocationNotice(binding_id, "access revoked"))
                    continue
                latest = record.descriptor.latest_version
                if latest > known_version:
                    image = record.latest_image()
                    assert image is not None
                    deltas.append(UpdateDelta(binding_id, image, known_version, latest))
        return deltas, revocations

    # -- intermediate workbooks -----------------------------------------------

    def upload_intermediate(self, caller: str, document: str,
                            export_ids: Iterable[str],
                            import_ids: Iterable[str],
                            expected_id: str | None = None) -> str:
        export_ids = tuple(export_ids)
        import_ids = tuple(import_ids)
        with self._lock:
            try:
                wb = decode_workbook(document)
            except DocumentError as exc:
                raise IntegrityError(f"workbook document rejected: {exc}") from None
            if expected_id is not None and wb.id != expected_id:
                raise IntegrityError(
                    f"document id {wb.id!r} does not match requested id {expected_id!r}")
            descriptors = []
            for export_id in export_ids:
                record = self._require_export(export_id)
                if record.descriptor.owner != caller:
                    raise AuthorizationError(f"export {export_id!r} is not owned by caller")
                descriptors.append(record.descriptor)
            bindings = []
            for binding_id in import_ids:
                binding = self.imports.get(binding_id)
                if binding is None or binding.importer != caller:
                    raise AuthorizationError(f"binding {binding_id!r} is not owned by caller")
                bindings.append(binding)
            roles = comp.classify_workbook(wb, descriptors, bindings)
            if not comp.is_intermediate(roles):
                raise PreconditionError(
                    "only intermediate workbooks are hosted; plain exporters "
                    "exchange cell ranges only")
            wb = evaluate_all(wb)
            self.workbooks[wb.id] = IntermediateRecord(
                wb.id, caller, wb, export_ids, import_ids)
            self._persist()
            wb_id = wb.id
        self._queue.enqueue(wb_id)
        return wb_id

    def delete_workbook(self, caller: str, workbook_id: str) -> None:
        with self._lock:
            record = self.workbooks.get(workbook_id)
            if record is None or record.owner != caller:
                raise NotFoundError(f"unknown workbook {workbook_id!r}")
            del self.workbooks[workbook_id]
            self._persist()

    def propagate(self, workbook_id: str) -> set[tuple[str, int]]:
        """The four-step data propagation function.

        1) load the stored intermediate; 2) insert each import binding's
        latest image into its target; 3) recalculate with those targets
        dirty; 4) re-publish every export whose image changed. Downstream
        intermediates are enqueued, so chains reach fixpoint; a chain that
        returns to this workbook aborts with a cycle diagnostic instead.
        """
        committed: set[tuple[str, int]] = set()
        downstream: set[str] = set()
        with self._lock:
            record = self.workbooks.get(workbook_id)
            if record is None:
                raise NotFoundError(f"unknown workbook {workbook_id!r}")
            cycle_exports = self._cycle_exports(workbook_id)
            if cycle_exports:
                raise PropagationCycleError(cycle_exports)

            wb = record.workbook
            dirty = []
            used_versions: dict[str, int] = {}
            for binding_id in record.import_ids:
                binding = self.imports.get(binding_id)
                if binding is None:
                    continue  # binding deleted since upload
                source = self.exports.get(binding.export_id)
                image = source.latest_image() if source else None
                if image is None:
                    continue  # nothing contributed yet
                used_versions[binding.export_id] = image.version
                wb = _write_image(wb, binding.target, image)
                dirty.extend(binding.target.cells())
            if dirty:
                wb, _ = recalculate(wb, dirty)
            for export_id in record.export_ids:
                export = self.exports.get(export_id)
                if export is None or export.revoked:
                    continue
                descriptor = export.descriptor
                current = export.latest_image()
                candidate = RangeImage.from_workbook(
                    wb, descriptor.range, export_id, descriptor.latest_version + 1)
                if current is not None and current.same_cells(candidate):
                    continue
                export.images.append(candidate)
                export.authored_by.append(PLATFORM_AUTHOR)
                export.descriptor = descriptor.bump()
                committed.add((export_id, candidate.version))
            record.workbook = wb
            record.last_propagated_versions = used_versions
            if committed:
                self._persist()
            for export_id, _ in committed:
                downstream.update(self._importing_workbooks(export_id))
        for wb_id in downstream:
            if wb_id != workbook_id:
                self._queue.enqueue(wb_id)
        return committed

    # -- introspection ---------------------------------------------------------

    def describe(self) -> dict[str, Any]:
        """Deterministic state view for snapshots and scenario comparison;
        excludes credential material and sessions."""
        with self._lock:
            return {
                "users": sorted(self.users),
                "spaces": [
                    {"id": s.id, "name": s.name, "creator": s.creator,
                     "members": [[uid, role.value] for uid, role in s.members]}
                    for _, s in sorted(self.spaces.items())
                ],
                "exports": [
                    {"id": record.descriptor.id,
                     "owner": record.descriptor.owner,
                     "space": record.descriptor.space,
                     "name": record.descriptor.name,
                     "range": record.descriptor.range.to_a1(),
                     "space_wide": record.descriptor.visibility.space_wide,
                     "allowed": sorted(record.descriptor.visibility.allowed),
                     "latest_version": record.descriptor.latest_version,
                     "revoked": record.revoked,
                     "authored_by": list(record.authored_by),
                     "images": [encode_range_image(img) for img in record.images]}
                    for _, record in sorted(self.exports.items())
                ],
                "imports": [
                    {"id": b.id, "importer": b.importer, "export": b.export_id,
                     "target": b.target.to_a1()}
                    for _, b in sorted(self.imports.items())
                ],
                "workbooks": [
                    {"id": r.workbook_id, "owner": r.owner,
                     "exports": list(r.export_ids), "imports": list(r.import_ids),
                     "last_propagated": dict(sorted(r.last_propagated_versions.items())),
                     "document": encode_workbook(r.workbook)}
                    for _, r in sorted(self.workbooks.items())
                ],
                "diagnostics": list(self.diagnostics),
            }

    # -- internals -------------------------------------------------------------

    def _next_id(self, prefix: str) -> str:
        n = self._counters.get(prefix, 0) + 1
        self._counters[prefix] = n
        return f"{prefix}-{n}"

    def _require_user(self, user_id: str) -> comp.User:
        user = self.users.get(user_id)
        if user is None:
            raise NotFoundError(f"unknown user {user_id!r}")
        return user

    def _require_space(self, space_id: str) -> comp.Space:
        space = self.spaces.get(space_id)
        if space is None:
            raise NotFoundError(f"unknown space {space_id!r}")
        return space

    def _require_export(self, export_id: str) -> StoredExport:
        record = self.exports.get(export_id)
        if record is None:
            raise NotFoundError(f"unknown export {export_id!r}")
        return record

    def _check_visibility(self, visibility: comp.Visibility, space: comp.Space) -> None:
        if visibility.space_wide:
            return
        strangers = visibility.allowed - space.member_ids()
        if strangers:
            raise IntegrityError(
                f"restricted visibility names non-members: {sorted(strangers)}")

    def _importing_workbooks(self, export_id: str) -> list[str]:
        out = []
        for record in self.workbooks.values():
            for binding_id in record.import_ids:
                binding = self.imports.get(binding_id)
                if binding and binding.export_id == export_id:
                    out.append(record.workbook_id)
                    break
        return sorted(out)

    def _cycle_exports(self, workbook_id: str) -> tuple[str, ...]:
        """Export ids on a cross-workbook cycle through workbook_id, or ()."""
        export_home: dict[str, str] = {}
        for record in self.workbooks.values():
            for export_id in record.export_ids:
                export_home[export_id] = record.workbook_id
        succs: dict[str, set[str]] = {wb_id: set() for wb_id in self.workbooks}
        edge_exports: dict[tuple[str, str], set[str]] = {}
        for record in self.workbooks.values():
            for binding_id in record.import_ids:
                binding = self.imports.get(binding_id)
                if binding is None:
                    continue
                home = export_home.get(binding.export_id)
                if home is None:
                    continue
                succs[home].add(record.workbook_id)
                edge_exports.setdefault((home, record.workbook_id), set()).add(
                    binding.export_id)
        components = strongly_connected(sorted(succs), lambda n: sorted(succs[n]))
        for component in components:
            members = set(component)
            on_cycle = len(component) > 1 or component[0] in succs[component[0]]
            if workbook_id in members and on_cycle:
                ids: set[str] = set()
                for (src, dst), exports in edge_exports.items():
                    if src in members and dst in members:
                        ids.update(exports)
                return tuple(sorted(ids))
        return ()

    # -- persistence ---------------------------------------------------------

    def _persist(self) -> None:
        if self._store is not None:
            self._store.save(self._snapshot())

    def _snapshot(self) -> dict[str, Any]:
        return {
            "counters": dict(sorted(self._counters.items())),
            "users": [
                {"id": u.id, "name": u.name, "salt": u.salt, "digest": u.digest}
                for _, u in sorted(self.users.items())
            ],
            "spaces": [
                {"id": s.id, "name": s.name, "creator": s.creator,
                 "members": [[uid, role.value] for uid, role in s.members]}
                for _, s in sorted(self.spaces.items())
            ],
            "exports": [
                {"id": record.descriptor.id,
                 "owner": record.descriptor.owner,
                 "space": record.descriptor.space,
                 "name": record.descriptor.name,
                 "description": record.descriptor.description,
                 "range": record.descriptor.range.to_a1(),
                 "space_wide": record.descriptor.visibility.space_wide,
                 "allowed": sorted(record.descriptor.visibility.allowed),
                 "latest_version": record.descriptor.latest_version,
                 "revoked": record.revoked,
                 "versions": [
                     {"image": encode_range_image(img), "authored_by": author}
                     for img, author in zip(record.images, record.authored_by)
                 ]}
                for _, record in sorted(self.exports.items())
            ],
            "imports": [
                {"id": b.id, "importer": b.importer, "export_id": b.export_id,
                 "target": b.target.to_a1(), "applied_version": b.applied_version}
                for _, b in sorted(self.imports.items())
            ],
            "workbooks": [
                {"id": r.workbook_id, "owner": r.owner,
                 "document": encode_workbook(r.workbook),
                 "export_ids": list(r.export_ids),
                 "import_ids": list(r.import_ids),
                 "last_propagated_versions": dict(sorted(
                     r.last_propagated_versions.items()))}
                for _, r in sorted(self.workbooks.items())
            ],
        }

    def _restore(self, payload: dict[str, Any]) -> None:
        try:
            self._counters = dict(payload.get("counters", {}))
            for raw in payload.get("users", []):
                user = comp.User(raw["id"], raw["name"], raw["salt"], raw["digest"])
                self.users[user.id] = user
            for raw in payload.get("spaces", []):
                members = tuple((uid, comp.Role(role)) for uid, role in raw["members"])
                space = comp.Space(raw["id"], raw["name"], raw["creator"], members)
                self.spaces[space.id] = space
            for raw in payload.get("exports", []):
                self._restore_export(raw)
            for raw in payload.get("imports", []):
                binding = comp.ImportBinding(
                    raw["id"], raw["importer"], raw["export_id"],
                    parse_range(raw["target"]), raw.get("applied_version", 0))
                self.imports[binding.id] = binding
            for raw in payload.get("workbooks", []):
                wb = evaluate_all(decode_workbook(raw["document"]))
                self.workbooks[wb.id] = IntermediateRecord(
                    raw["id"], raw["owner"], wb,
                    tuple(raw["export_ids"]), tuple(raw["import_ids"]),
                    dict(raw.get("last_propagated_versions", {})))
        except StoreCorruptError:
            raise
        except Exception as exc:
            raise StoreCorruptError(f"snapshot is not loadable: {exc}",
                                    "snapshot") from exc

    def _restore_export(self, raw: dict[str, Any]) -> None:
        export_id = raw["id"]
        visibility = (comp.Visibility.spacewide() if raw["space_wide"]
                      else comp.Visibility.restricted(raw["allowed"]))
        descriptor = comp.ExportDescriptor(
            export_id, raw["owner"], raw["space"], raw["name"],
            raw.get("description", ""), parse_range(raw["range"]), visibility,
            raw["latest_version"])
        images: list[RangeImage] = []
        authors: list[str] = []
        for index, version_raw in enumerate(raw.get("versions", [])):
            image = decode_range_image(version_raw["image"])
            if image.version != index + 1 or image.export_id != export_id:
                raise StoreCorruptError(
                    f"export {export_id!r} version chain broken at {index + 1}",
                    f"export {export_id}")
            images.append(image)
            authors.append(version_raw["authored_by"])
        if len(images) != descriptor.latest_version:
            raise StoreCorruptError(
                f"export {export_id!r} holds {len(images)} images but "
                f"latest_version is {descriptor.latest_version}",
                f"export {export_id}")
        self.exports[export_id] = StoredExport(descriptor, images, authors,
                                               raw.get("revoked", False))


def _write_image(wb: Workbook, target, image: RangeImage) -> Workbook:
    """Insert image values into the target range as literals, row-major."""
    for addr, value in zip(target.cells(), image.cells):
        wb = wb.with_content(addr, LiteralContent(value))
    return wb


# ---------------------------------------------------------------------------
# Propagation queue: bounded worker pool, single-flight per workbook
# ---------------------------------------------------------------------------


class _PropagationQueue:
    def __init__(self, service: PlatformService, workers: int):
        self._service = service
        self._queue: queue.Queue[str | None] = queue.Queue()
        self._cv = threading.Condition()
        self._pending: set[str] = set()
        self._running: dict[str, bool] = {}  # wb_id -> rerun requested
        self._stopped = False
        self._threads = [
            threading.Thread(target=self._work, name=f"propagate-{i}", daemon=True)
            for i in range(workers)
        ]
        for t in self._threads:
            t.start()

    def enqueue(self, wb_id: str) -> None:
        with self._cv:
            if self._stopped:
                return
            if wb_id in self._running:
                self._running[wb_id] = True  # coalesce onto the active run
                return
            if wb_id in self._pending:
                return
            self._pending.add(wb_id)
            self._queue.put(wb_id)

    def _work(self) -> None:
        while True:
            wb_id = self._queue.get()
            if wb_id is None:
                return
            with self._cv:
                self._pending.discard(wb_id)
                self._running[wb_id] = False
            try:
                self._service.propagate(wb_id)
            except PropagationCycleError as exc:
                with self._service._lock:
                    self._service.diagnostics.append(str(exc))
            except NotFoundError:
                pass  # workbook deleted while queued
            except Exception as exc:  # keep the pool alive; surface the failure
                with self._service._lock:
                    self._service.diagnostics.append(
                        f"propagation of {wb_id} failed: {exc}")
            finally:
                with self._cv:
                    rerun = self._running.pop(wb_id, False)
                    if rerun and not self._stopped:
                        self._pending.add(wb_id)
                        self._queue.put(wb_id)
                    self._cv.notify_all()

    def drain(self, timeout: float) -> bool:
        deadline = time.monotonic() + timeout
        with self._cv:
            while self._pending or self._running:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._cv.wait(remaining)
            return True

    def stop(self) -> None:
        with self._cv:
            self._stopped = True
        for _ in self._threads:
            self._queue.put(None)
        for t in self._threads:
            t.join(timeout=5)


class _InlineQueue:
    """Synchronous propagation for deterministic single-threaded drivers
    (scenario replay): triggers run to fixpoint before enqueue returns."""

    def __init__(self, service: PlatformService):
        self._service = service
        self._work: list[str] = []
        self._active = False

    def enqueue(self, wb_id: str) -> None:
        if wb_id not in self._work:
            self._work.append(wb_id)
        if self._active:
            return
        self._active = True
        try:
            while self._work:
                current = self._work.pop(0)
                try:
                    self._service.propagate(current)
                except PropagationCycleError as exc:
                    self._service.diagnostics.append(str(exc))
                except NotFoundError:
                    pass
        finally:
            self._active = False

    def drain(self, timeout: float = 0.0) -> bool:
        return not self._work

    def stop(self) -> None:
        self._work.clear()


class _Sweeper:
    """Periodic fallback: re-enqueue all intermediates, catching work lost
    across restarts."""

    def __init__(self, service: PlatformService, interval: float):
        self._service = service
        self._interval = interval
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="sweep", daemon=True)
        self._thread.start()

    def _run(self) -> None:
        while not self._stop.wait(self._interval):
            self._service.sweep()

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=5)
