"""The participant-side agent: owns one workbook, detects exported-range
changes, caches contributions while offline, polls and applies imports,
classifies the workbook, and uploads it whole when it is intermediate.

Tick order is poll+apply, detect, flush, classify+upload: deltas applied
in a tick are visible to that tick's change detection, so a contribution
pushed in the same tick is never derived from stale pre-delta values.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import replace
from pathlib import Path
from typing import Any

from discom import composition as comp
from discom.engine.evaluator import ChangeSet, evaluate_all, recalculate
from discom.engine.parser import parse_cell_input
from discom.errors import (AuthenticationError, AuthorizationError,
                           ConflictError, IntegrityError, NotFoundError,
                           PreconditionError, TransportError)
from discom.model.address import CellAddress, parse_range
from discom.model.image import RangeImage
from discom.model.workbook import FormulaContent, LiteralContent, Workbook
from discom.model.xmlio import (decode_range_image, decode_workbook,
                                encode_range_image, encode_workbook)
from discom.server.service import UpdateDelta

PROP_EXPORTS = "discom.exports"
PROP_IMPORTS = "discom.imports"
PROP_PUSHED = "discom.pushed"

MAX_EVENTS = 200


class Agent:
    def __init__(self, workbook: Workbook, transport, user: str,
                 secret: str | None = None, workbook_path: str | None = None):
        self._lock = threading.RLock()
        self.transport = transport
        self.user = user
        self.secret = secret
        self.workbook_path = workbook_path
        self.workbook = evaluate_all(workbook)
        self.exports: dict[str, comp.ExportDescriptor] = {}
        self.imports: dict[str, comp.ImportBinding] = {}
        self.last_pushed: dict[str, RangeImage] = {}
        self.pending: list[str] = []  # export ids awaiting push, oldest first
        self.online = False
        self.paused: set[str] = set()  # exports halted after repeated conflict
        self.revoked: set[str] = set()  # exports the platform refused as revoked
        self.stale: set[str] = set()  # bindings flagged by revocation notices
        self.flagged: dict[str, str] = {}  # binding id -> integrity problem
        self.events: list[str] = []
        self.revision = 0
        self._saved_revision = -1
        self._last_uploaded_doc: str | None = None
        self._load_metadata()

    # -- construction ----------------------------------------------------------

    @classmethod
    def from_file(cls, path: str | Path, transport, user: str,
                  secret: str | None = None) -> "Agent":
        document = Path(path).read_text(encoding="utf-8")
        return cls(decode_workbook(document), transport, user, secret, str(path))

    # -- bookkeeping ----------------------------------------------------------

    def _event(self, message: str) -> None:
        self.events.append(message)
        del self.events[:-MAX_EVENTS]

    def _bump(self) -> None:
        self.revision += 1

    def _load_metadata(self) -> None:
        props = self.workbook.properties
        for raw in json.loads(props.get(PROP_EXPORTS, "[]")):
            descriptor = _export_from_json(raw)
            self.exports[descriptor.id] = descriptor
        for raw in json.loads(props.get(PROP_IMPORTS, "[]")):
            binding = _import_from_json(raw)
            self.imports[binding.id] = binding
        for export_id, xml in json.loads(props.get(PROP_PUSHED, "{}")).items():
            self.last_pushed[export_id] = decode_range_image(xml)

    def _metadata_workbook(self, include_pushed: bool) -> Workbook:
        wb = self.workbook
        wb = wb.with_property(PROP_EXPORTS, json.dumps(
            [_export_to_json(d) for _, d in sorted(self.exports.items())],
            sort_keys=True))
        wb = wb.with_property(PROP_IMPORTS, json.dumps(
            [_import_to_json(b) for _, b in sorted(self.imports.items())],
            sort_keys=True))
        if include_pushed:
            wb = wb.with_property(PROP_PUSHED, json.dumps(
                {eid: encode_range_image(img)
                 for eid, img in sorted(self.last_pushed.items())},
                sort_keys=True))
        else:
            wb = wb.without_property(PROP_PUSHED)
        return wb

    def save(self, path: str | Path | None = None) -> None:
        target = Path(path) if path else (
            Path(self.workbook_path) if self.workbook_path else None)
        if target is None:
            return
        if path is None and self.revision == self._saved_revision:
            return
        document = encode_workbook(self._metadata_workbook(include_pushed=True))
        tmp = target.with_suffix(target.suffix + ".tmp")
        tmp.write_text(document, encoding="utf-8")
        os.replace(tmp, target)
        if path is None:
            self._saved_revision = self.revision

    # -- local editing ----------------------------------------------------------

    def edit_cell(self, addr: CellAddress, text: str) -> ChangeSet:
        """Type into a cell: literal or formula; recomputes dependents."""
        with self._lock:
            content = parse_cell_input(text, addr.sheet)
            self.workbook = self.workbook.with_content(addr, content)
            self.workbook, changes = recalculate(self.workbook, [addr])
            self._bump()
            self.save()
            return changes

    def cell_text(self, addr: CellAddress) -> str:
        """The text that would re-create the cell (formula source or literal)."""
        cell = self.workbook.cell(addr)
        if cell is None:
            return ""
        content = cell.content
        if isinstance(content, FormulaContent):
            return content.source
        return content.value.display()

    def is_import_target(self, addr: CellAddress) -> bool:
        return any(b.target.contains(addr) for b in self.imports.values())

    # -- registration -----------------------------------------------------------

    def login(self) -> None:
        self.transport.login(self.user, self.secret or "")

    def register_export(self, space: str, name: str, description: str,
                        range_a1: str, visibility: comp.Visibility) -> comp.ExportDescriptor:
        with self._lock:
            descriptor = self.transport.register_export(
                space, name, description, range_a1, visibility)
            self.exports[descriptor.id] = descriptor
            self.workbook = self.workbook.with_sheet(descriptor.range.sheet)
            self._bump()
            self.save()
            return descriptor

    def register_import(self, export_id: str, target_a1: str) -> comp.ImportBinding:
        with self._lock:
            binding = self.transport.register_import(export_id, target_a1)
            self.imports[binding.id] = binding
            self.workbook = self.workbook.with_sheet(binding.target.sheet)
            self._bump()
            self.save()
            return binding

    # -- core operations ---------------------------------------------------------

    def classify(self) -> frozenset[comp.WorkbookRole]:
        with self._lock:
            return comp.classify_workbook(self.workbook, self.exports.values(),
                                          self.imports.values())

    def current_image(self, export_id: str) -> RangeImage:
        descriptor = self.exports[export_id]
        return RangeImage.from_workbook(self.workbook, descriptor.range,
                                        export_id, descriptor.latest_version + 1)

    def detect_modified_exports(self) -> set[str]:
        """Exports whose computed range image differs from the last
        acknowledged push (value comparison, not edit locations)."""
        with self._lock:
            modified = set()
            for export_id in self.exports:
                if export_id in self.revoked:
                    continue
                image = self.current_image(export_id)
                last = self.last_pushed.get(export_id)
                if last is None or not last.same_cells(image):
                    modified.add(export_id)
            return modified

    def apply_import(self, delta: UpdateDelta) -> ChangeSet:
        """Write a delta's image into its binding target as literals and
        recompute dependents."""
        with self._lock:
            binding = self.imports.get(delta.binding_id)
            if binding is None:
                raise NotFoundError(f"unknown binding {delta.binding_id!r}")
            if delta.binding_id in self.stale:
                self._event(f"ignored delta for stale binding {delta.binding_id}")
                return ChangeSet({})
            if delta.image.dims != binding.target.dims:
                self.flagged[delta.binding_id] = (
                    f"image dims {delta.image.dims} do not fit target "
                    f"{binding.target.dims}")
                raise IntegrityError(self.flagged[delta.binding_id])
            wb = self.workbook
            dirty = list(binding.target.cells())
            for addr, value in zip(dirty, delta.image.cells):
                wb = wb.with_content(addr, LiteralContent(value))
            wb, changes = recalculate(wb, dirty)
            self.workbook = wb
            self.imports[delta.binding_id] = replace(
                binding, applied_version=delta.to_version)
            self._bump()
            return changes

    # -- the periodic cycle -------------------------------------------------------

    def sync_tick(self) -> dict[str, Any]:
        """One full cycle; network failure marks the agent offline and never
        escapes."""
        with self._lock:
            summary: dict[str, Any] = {
                "applied": [], "pushed": [], "revoked": [], "conflicts": [],
                "uploaded": False, "offline": False,
            }
            net_ok = self._poll_and_apply(summary)
            modified = self.detect_modified_exports()
            for export_id in sorted(modified):
                if export_id not in self.pending:
                    self.pending.append(export_id)
            if net_ok:
                net_ok = self._flush_pending(summary)
            if net_ok:
                net_ok = self._upload_if_intermediate(summary)
            self.online = bool(net_ok)
            summary["offline"] = not self.online
            self.save()
            return summary

    def _poll_and_apply(self, summary: dict[str, Any]) -> bool:
        items = [(binding_id, binding.applied_version)
                 for binding_id, binding in sorted(self.imports.items())
                 if binding_id not in self.stale]
        try:
            deltas, revocations = self.transport.poll_updates(items)
        except TransportError:
            return False
        except AuthenticationError:
            if not self._relogin():
                return False
            try:
                deltas, revocations = self.transport.poll_updates(items)
            except (TransportError, AuthenticationError):
                return False
        except NotFoundError as exc:
            # binding disappeared server-side; drop and flag
            self._event(f"poll rejected: {exc}")
            return True
        for notice in revocations:
            if notice.binding_id not in self.stale:
                self.stale.add(notice.binding_id)
                self._event(f"binding {notice.binding_id} stale: {notice.reason}")
                self._bump()
            summary["revoked"].append(notice.binding_id)
        for delta in deltas:
            try:
                self.apply_import(delta)
                summary["applied"].append((delta.binding_id, delta.to_version))
            except IntegrityError as exc:
                self._event(f"delta for {delta.binding_id} rejected: {exc}")
        return True

    def _relogin(self) -> bool:
        if self.secret is None:
            return False
        try:
            self.transport.login(self.user, self.secret)
            return True
        except (TransportError, AuthenticationError):
            return False

    def _flush_pending(self, summary: dict[str, Any]) -> bool:
        for export_id in list(self.pending):
            if export_id in self.paused or export_id in self.revoked:
                continue
            try:
                version = self._push_once(export_id)
            except TransportError:
                return False
            except ConflictError:
                self.paused.add(export_id)
                self._event(f"export {export_id} paused after repeated conflict")
                summary["conflicts"].append(export_id)
                continue
            except (PreconditionError, AuthorizationError, NotFoundError) as exc:
                self.revoked.add(export_id)
                self.pending.remove(export_id)
                self._event(f"export {export_id} no longer accepted: {exc}")
                continue
            self.pending.remove(export_id)
            summary["pushed"].append((export_id, version))
        return True

    def _push_once(self, export_id: str) -> int:
        """Push the current image; on a stale base, refresh and retry once
        (a second conflict surfaces to the caller)."""
        descriptor = self.exports[export_id]
        image = self.current_image(export_id)
        try:
            version = self.transport.push_contribution(
                export_id, image, descriptor.latest_version)
        except ConflictError as exc:
            descriptor = replace(descriptor, latest_version=exc.latest_version)
            self.exports[export_id] = descriptor
            image = image.with_version(export_id, descriptor.latest_version + 1)
            version = self.transport.push_contribution(
                export_id, image, descriptor.latest_version)
        self.exports[export_id] = replace(descriptor, latest_version=version)
        self.last_pushed[export_id] = image.with_version(export_id, version)
        self._bump()
        return version

    def _upload_if_intermediate(self, summary: dict[str, Any]) -> bool:
        try:
            roles = self.classify()
        except IntegrityError as exc:
            self._event(f"classification failed: {exc}")
            return True
        if not comp.is_intermediate(roles):
            return True
        document = encode_workbook(self._metadata_workbook(include_pushed=False))
        if document == self._last_uploaded_doc:
            return True
        try:
            self.transport.upload_workbook(
                self.workbook.id, document,
                sorted(self.exports), sorted(self.imports))
        except TransportError:
            return False
        except (PreconditionError, IntegrityError, AuthorizationError) as exc:
            self._event(f"upload rejected: {exc}")
            return True
        self._last_uploaded_doc = document
        summary["uploaded"] = True
        return True

    def resume_export(self, export_id: str) -> None:
        """Operator acknowledgment after a surfaced push conflict."""
        with self._lock:
            self.paused.discard(export_id)

    # -- view model (webgrid / CLI) ---------------------------------------------

    def grid_view(self) -> dict[str, Any]:
        with self._lock:
            sheets = []
            for sheet in self.workbook.sheets:
                cells = []
                for (row, col) in sorted(sheet.cells):
                    addr = CellAddress(sheet.name, col, row)
                    cell = sheet.cells[(row, col)]
                    cells.append({
                        "addr": addr.to_a1(with_sheet=False),
                        "row": row, "col": col,
                        "display": cell.computed.display(),
                        "input": self.cell_text(addr),
                        "kind": cell.computed.kind.value,
                    })
                sheets.append({"name": sheet.name, "cells": cells})
            return {
                "revision": self.revision,
                "user": self.user,
                "workbook_id": self.workbook.id,
                "online": self.online,
                "roles": sorted(r.value for r in self.classify()),
                "sheets": sheets,
                "exports": [
                    {"id": d.id, "name": d.name, "range": d.range.to_a1(),
                     "space": d.space, "latest_version": d.latest_version,
                     "space_wide": d.visibility.space_wide,
                     "paused": d.id in self.paused,
                     "revoked": d.id in self.revoked}
                    for _, d in sorted(self.exports.items())
                ],
                "imports": [
                    {"id": b.id, "export_id": b.export_id,
                     "target": b.target.to_a1(),
                     "applied_version": b.applied_version,
                     "stale": b.id in self.stale,
                     "flagged": self.flagged.get(b.id)}
                    for _, b in sorted(self.imports.items())
                ],
                "events": list(self.events[-20:]),
            }

    def run_loop(self, stop: threading.Event, interval: float = 5.0) -> None:
        """Tick until stopped; the loop owns all agent mutation."""
        while not stop.is_set():
            self.sync_tick()
            stop.wait(interval)


# ---------------------------------------------------------------------------
# Metadata (de)serialization for workbook properties
# ---------------------------------------------------------------------------


def _export_to_json(d: comp.ExportDescriptor) -> dict:
    return {"id": d.id, "owner": d.owner, "space": d.space, "name": d.name,
            "description": d.description, "range": d.range.to_a1(),
            "space_wide": d.visibility.space_wide,
            "allowed": sorted(d.visibility.allowed),
            "latest_version": d.latest_version}


def _export_from_json(raw: dict) -> comp.ExportDescriptor:
    visibility = (comp.Visibility.spacewide() if raw["space_wide"]
                  else comp.Visibility.restricted(raw["allowed"]))
    return comp.ExportDescriptor(
        raw["id"], raw["owner"], raw["space"], raw["name"],
        raw.get("description", ""), parse_range(raw["range"]), visibility,
        raw["latest_version"])


def _import_to_json(b: comp.ImportBinding) -> dict:
    return {"id": b.id, "importer": b.importer, "export_id": b.export_id,
            "target": b.target.to_a1(), "applied_version": b.applied_version}


def _import_from_json(raw: dict) -> comp.ImportBinding:
    return comp.ImportBinding(raw["id"], raw["importer"], raw["export_id"],
                              parse_range(raw["target"]),
                              raw.get("applied_version", 0))
