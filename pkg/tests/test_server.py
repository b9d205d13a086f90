import threading

import pytest

from discom import composition as comp
from discom.engine.evaluator import evaluate_all, recalculate
from discom.engine.parser import parse_cell_input
from discom.errors import (AuthorizationError, ConflictError, IntegrityError,
                           NotFoundError, PreconditionError,
                           PropagationCycleError, StoreCorruptError)
from discom.model import (RangeImage, Workbook, encode_range_image,
                          encode_workbook, parse_address, parse_range)
from discom.model.values import CellValue
from discom.model.workbook import LiteralContent
from discom.server.service import PlatformService
from discom.server.store import SnapshotStore

NUM = CellValue.number


def image_of(values, rows, cols, export_id="exp-1", version=1):
    cells = tuple(NUM(v) if isinstance(v, (int, float)) else v for v in values)
    return RangeImage(export_id, version, rows, cols, cells)


def setup_people(svc: PlatformService):
    for user in ("carl", "john", "mary"):
        svc.add_user(user, user.title(), "pw")
    space = svc.create_space("carl", "Area North 2010")
    svc.add_member("carl", space.id, "john", comp.Role.EXPORTER)
    svc.add_member("carl", space.id, "mary", comp.Role.BOTH)
    return space


def register_sales_export(svc, space, owner="john", to=("carl",)):
    return svc.register_export(owner, space.id, "Oct sales", "",
                               "Sales!A2:B3", comp.Visibility.restricted(set(to)))


def build_intermediate_doc(wb_id: str):
    """Workbook importing into In!A1:B2 and exporting Out!A1:A1 (= SUM of imports)."""
    wb = Workbook(wb_id).with_sheet("In").with_sheet("Out")
    addr = parse_address("Out!A1")
    wb = wb.with_content(addr, parse_cell_input("=SUM(In!A1:B2)", "Out"))
    return encode_workbook(wb)


# ---------------------------------------------------------------------------
# contributions (optimistic concurrency)
# ---------------------------------------------------------------------------


def test_first_push_commits_version_one(service):
    space = setup_people(service)
    export = register_sales_export(service, space)
    version = service.push_contribution("john", export.id,
                                        image_of([1, 2, 3, 4], 2, 2, export.id), 0)
    assert version == 1
    assert service.exports[export.id].descriptor.latest_version == 1


def test_stale_base_rejected_with_latest(service):
    space = setup_people(service)
    export = register_sales_export(service, space)
    for base in range(5):
        service.push_contribution("john", export.id,
                                  image_of([base] * 4, 2, 2, export.id), base)
    with pytest.raises(ConflictError) as err:
        service.push_contribution("john", export.id,
                                  image_of([9] * 4, 2, 2, export.id), 3)
    assert err.value.latest_version == 5


def test_non_owner_push_denied(service):
    space = setup_people(service)
    export = register_sales_export(service, space)
    with pytest.raises(AuthorizationError):
        service.push_contribution("mary", export.id,
                                  image_of([0] * 4, 2, 2, export.id), 0)


def test_dim_mismatch_rejected(service):
    space = setup_people(service)
    export = register_sales_export(service, space)
    with pytest.raises(IntegrityError):
        service.push_contribution("john", export.id,
                                  image_of([1, 2], 1, 2, export.id), 0)


def test_concurrent_pushes_one_winner(service):
    space = setup_people(service)
    export = register_sales_export(service, space)
    for base in range(5):
        service.push_contribution("john", export.id,
                                  image_of([base] * 4, 2, 2, export.id), base)
    barrier = threading.Barrier(2)
    outcomes = []

    def pusher(tag):
        barrier.wait()
        try:
            version = service.push_contribution(
                "john", export.id, image_of([tag] * 4, 2, 2, export.id), 5)
            outcomes.append(("ok", version))
        except ConflictError as exc:
            outcomes.append(("conflict", exc.latest_version))

    threads = [threading.Thread(target=pusher, args=(i,)) for i in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(kind for kind, _ in outcomes) == ["conflict", "ok"]
    assert ("ok", 6) in outcomes
    assert ("conflict", 6) in outcomes
    versions = [img.version for img in service.exports[export.id].images]
    assert versions == list(range(1, 7))  # gapless


# ---------------------------------------------------------------------------
# polling
# ---------------------------------------------------------------------------


def test_poll_when_current_is_empty(service):
    space = setup_people(service)
    export = register_sales_export(service, space)
    service.push_contribution("john", export.id, image_of([1] * 4, 2, 2, export.id), 0)
    binding = service.register_import("carl", export.id, "In!A1:B2")
    deltas, revocations = service.poll_updates("carl", [(binding.id, 1)])
    assert deltas == [] and revocations == []


def test_poll_returns_latest_only(service):
    space = setup_people(service)
    export = register_sales_export(service, space)
    binding = service.register_import("carl", export.id, "In!A1:B2")
    for base in range(4):
        service.push_contribution("john", export.id,
                                  image_of([base] * 4, 2, 2, export.id), base)
    deltas, _ = service.poll_updates("carl", [(binding.id, 2)])
    assert len(deltas) == 1
    assert deltas[0].to_version == 4 and deltas[0].from_version == 2
    assert deltas[0].image.cells == (NUM(3),) * 4


def test_poll_unknown_binding(service):
    setup_people(service)
    with pytest.raises(NotFoundError):
        service.poll_updates("carl", [("imp-999", 0)])
    # someone else's binding is invisible too
    space = service.spaces["spc-1"]
    export = register_sales_export(service, space)
    binding = service.register_import("carl", export.id, "In!A1:B2")
    with pytest.raises(NotFoundError):
        service.poll_updates("mary", [(binding.id, 0)])


def test_acl_revocation_becomes_notice(service):
    space = setup_people(service)
    export = register_sales_export(service, space, to=("carl", "mary"))
    service.push_contribution("john", export.id, image_of([1] * 4, 2, 2, export.id), 0)
    binding = service.register_import("mary", export.id, "In!A1:B2")
    deltas, _ = service.poll_updates("mary", [(binding.id, 0)])
    assert len(deltas) == 1
    # owner narrows visibility; mary is out
    service.update_export("john", export.id,
                          visibility=comp.Visibility.restricted({"carl"}))
    deltas, revocations = service.poll_updates("mary", [(binding.id, 1)])
    assert deltas == []
    assert [r.reason for r in revocations] == ["access revoked"]


def test_deleted_export_notifies_importers(service):
    space = setup_people(service)
    export = register_sales_export(service, space)
    service.push_contribution("john", export.id, image_of([1] * 4, 2, 2, export.id), 0)
    binding = service.register_import("carl", export.id, "In!A1:B2")
    service.revoke_export("john", export.id)
    deltas, revocations = service.poll_updates("carl", [(binding.id, 0)])
    assert deltas == []
    assert [r.reason for r in revocations] == ["export revoked"]


# ---------------------------------------------------------------------------
# catalog / crud authorization
# ---------------------------------------------------------------------------


def test_catalog_excludes_sibling_restricted_exports(service):
    space = setup_people(service)
    john_export = register_sales_export(service, space, owner="john", to=("carl",))
    service.register_export("mary", space.id, "Mary sales", "", "Sales!A2:B3",
                            comp.Visibility.restricted({"carl"}))
    comparison = service.register_export("carl", space.id, "Comparison", "",
                                         "Cmp!A1:B4", comp.Visibility.spacewide())
    visible_to_john = {d.id for d, _ in service.list_exports("john")}
    assert visible_to_john == {john_export.id, comparison.id}
    visible_to_carl = {d.id for d, _ in service.list_exports("carl")}
    assert len(visible_to_carl) == 3


def test_update_description_by_non_owner_denied(service):
    space = setup_people(service)
    export = register_sales_export(service, space)
    with pytest.raises(AuthorizationError):
        service.update_export("mary", export.id, description="hijack")


def test_restricted_visibility_must_name_members(service):
    space = setup_people(service)
    with pytest.raises(IntegrityError):
        service.register_export("john", space.id, "x", "", "S!A1:A1",
                                comp.Visibility.restricted({"stranger"}))


def test_import_denied_at_binding_time(service):
    space = setup_people(service)
    export = register_sales_export(service, space, to=("carl",))
    with pytest.raises(AuthorizationError):
        service.register_import("mary", export.id, "In!A1:B2")


def test_import_dim_mismatch_rejected_at_registration(service):
    space = setup_people(service)
    export = register_sales_export(service, space)
    with pytest.raises(IntegrityError):
        service.register_import("carl", export.id, "In!A1:A4")


# ---------------------------------------------------------------------------
# intermediate upload + propagation
# ---------------------------------------------------------------------------


def wire_chain(service):
    """john exports Sales!A2:B3; carl hosts an intermediate that imports it
    into In!A1:B2 and exports Out!A1:A1 (the sum) space-wide; mary imports
    the comparison."""
    space = setup_people(service)
    sales = register_sales_export(service, space)
    binding = service.register_import("carl", sales.id, "In!A1:B2")
    out = service.register_export("carl", space.id, "Comparison", "",
                                  "Out!A1:A1", comp.Visibility.spacewide())
    doc = build_intermediate_doc("wb-carl")
    wb_id = service.upload_intermediate("carl", doc, [out.id], [binding.id])
    watcher = service.register_import("mary", out.id, "Watch!A1:A1")
    return space, sales, binding, out, wb_id, watcher


def test_upload_requires_intermediate(service):
    space = setup_people(service)
    export = register_sales_export(service, space)
    wb = Workbook("wb-x").with_sheet("Sales")
    with pytest.raises(PreconditionError):
        service.upload_intermediate("john", encode_workbook(wb), [export.id], [])


def test_upload_decode_failure_is_integrity_error(service):
    setup_people(service)
    with pytest.raises(IntegrityError):
        service.upload_intermediate("carl", "<workbook", [], [])


def test_reupload_replaces_previous_copy(service):
    space, sales, binding, out, wb_id, _ = wire_chain(service)
    assert service.drain()
    doc2 = build_intermediate_doc(wb_id)
    stored = service.upload_intermediate("carl", doc2, [out.id], [binding.id])
    assert stored == wb_id
    assert len(service.workbooks) == 1


def test_chain_propagates_while_owner_offline(service):
    _, sales, binding, out, wb_id, watcher = wire_chain(service)
    assert service.drain()
    before = service.exports[out.id].descriptor.latest_version
    # exporter pushes; carl's agent never shows up
    service.push_contribution("john", sales.id,
                              image_of([1, 2, 3, 4], 2, 2, sales.id), 0)
    assert service.drain()
    record = service.exports[out.id]
    assert record.descriptor.latest_version == before + 1
    assert record.images[-1].cells == (NUM(10),)
    assert record.authored_by[-1] == "platform"
    # mary's next poll sees the republished comparison
    deltas, _ = service.poll_updates("mary", [(watcher.id, before)])
    assert len(deltas) == 1 and deltas[0].image.cells == (NUM(10),)


def test_propagation_noop_when_inputs_unchanged(service):
    _, sales, binding, out, wb_id, _ = wire_chain(service)
    service.push_contribution("john", sales.id,
                              image_of([1, 2, 3, 4], 2, 2, sales.id), 0)
    assert service.drain()
    version = service.exports[out.id].descriptor.latest_version
    committed = service.propagate(wb_id)
    assert committed == set()
    assert service.exports[out.id].descriptor.latest_version == version


def test_propagate_matches_agent_side_recalculation(service):
    _, sales, binding, out, wb_id, _ = wire_chain(service)
    image = image_of([5, 6, 7, 8], 2, 2, sales.id)
    service.push_contribution("john", sales.id, image, 0)
    assert service.drain()
    # oracle: apply the same image to the same workbook locally
    wb = evaluate_all(Workbook("oracle").with_sheet("In").with_sheet("Out")
                      .with_content(parse_address("Out!A1"),
                                    parse_cell_input("=SUM(In!A1:B2)", "Out")))
    dirty = list(parse_range("In!A1:B2").cells())
    for addr, value in zip(dirty, image.cells):
        wb = wb.with_content(addr, LiteralContent(value))
    wb, _ = recalculate(wb, dirty)
    local = RangeImage.from_workbook(wb, parse_range("Out!A1:A1"), out.id, 1)
    server_img = service.exports[out.id].images[-1]
    assert encode_range_image(local) == encode_range_image(
        server_img.with_version(out.id, 1))


def test_cross_workbook_cycle_diagnostic(service):
    space = setup_people(service)
    # two intermediates exporting to each other
    exp_a = service.register_export("carl", space.id, "A", "", "Out!A1:A1",
                                    comp.Visibility.spacewide())
    exp_b = service.register_export("mary", space.id, "B", "", "Out!A1:A1",
                                    comp.Visibility.spacewide())
    imp_ba = service.register_import("carl", exp_b.id, "In!A1:A1")
    imp_ab = service.register_import("mary", exp_a.id, "In!A1:A1")

    def doc(wb_id):
        wb = Workbook(wb_id).with_sheet("In")
        wb = wb.with_content(parse_address("Out!A1"),
                             parse_cell_input("=In!A1+1", "Out"))
        return encode_workbook(wb)

    service.upload_intermediate("carl", doc("wb-a"), [exp_a.id], [imp_ba.id])
    service.upload_intermediate("mary", doc("wb-b"), [exp_b.id], [imp_ab.id])
    assert service.drain(timeout=5.0), "propagation must not livelock"
    with pytest.raises(PropagationCycleError) as err:
        service.propagate("wb-a")
    assert set(err.value.export_ids) == {exp_a.id, exp_b.id}
    assert any("cycle" in d for d in service.diagnostics)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def test_commit_survives_restart(tmp_path):
    store = SnapshotStore(tmp_path / "data")
    svc = PlatformService(store)
    space = setup_people(svc)
    export = register_sales_export(svc, space)
    for base in range(3):
        svc.push_contribution("john", export.id,
                              image_of([base] * 4, 2, 2, export.id), base)
    svc.close()  # simulates an abrupt stop: nothing else is flushed

    revived = PlatformService(SnapshotStore(tmp_path / "data"))
    record = revived.exports[export.id]
    assert record.descriptor.latest_version == 3
    assert [img.version for img in record.images] == [1, 2, 3]
    assert record.images[-1].cells == (NUM(2),) * 4
    revived.close()


def test_fresh_directory_is_empty_state(tmp_path):
    svc = PlatformService(SnapshotStore(tmp_path / "data"))
    assert svc.users == {} and svc.exports == {}
    svc.close()


def test_truncated_snapshot_names_file(tmp_path):
    store = SnapshotStore(tmp_path / "data")
    svc = PlatformService(store)
    svc.add_user("u", "U", "pw")
    svc.close()
    path = store.path
    path.write_bytes(path.read_bytes()[:20])
    with pytest.raises(StoreCorruptError) as err:
        PlatformService(SnapshotStore(tmp_path / "data"))
    assert "state.json" in str(err.value)


def test_leftover_tmp_file_ignored(tmp_path):
    store = SnapshotStore(tmp_path / "data")
    svc = PlatformService(store)
    svc.add_user("u", "U", "pw")
    svc.close()
    (tmp_path / "data" / "state.json.tmp").write_text("{torn", encoding="utf-8")
    revived = PlatformService(SnapshotStore(tmp_path / "data"))
    assert "u" in revived.users
    revived.close()


def test_broken_version_chain_detected(tmp_path):
    import json
    store = SnapshotStore(tmp_path / "data")
    svc = PlatformService(store)
    space = setup_people(svc)
    export = register_sales_export(svc, space)
    svc.push_contribution("john", export.id, image_of([1] * 4, 2, 2, export.id), 0)
    svc.close()
    payload = json.loads(store.path.read_text())
    payload["exports"][0]["versions"] = []  # latest_version stays 1: torn
    store.path.write_text(json.dumps(payload))
    with pytest.raises(StoreCorruptError) as err:
        PlatformService(SnapshotStore(tmp_path / "data"))
    assert export.id in str(err.value)
