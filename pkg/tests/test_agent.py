import pytest

from discom import composition as comp
from discom.agent.core import Agent
from discom.agent.transport import LocalTransport
from discom.errors import IntegrityError
from discom.model import RangeImage, Workbook, parse_address
from discom.model.values import BLANK, CellValue
from discom.server.service import PlatformService, UpdateDelta

NUM = CellValue.number


class CountingTransport(LocalTransport):
    """LocalTransport that tallies calls, split into reads and writes."""

    WRITES = {"push_contribution", "upload_workbook", "register_export",
              "register_import", "create_space", "add_member", "revoke_export",
              "delete_import"}

    def __init__(self, service):
        super().__init__(service)
        self.calls: list[str] = []

    def __getattribute__(self, name):
        attr = super().__getattribute__(name)
        if name in ("login", "poll_updates", "push_contribution",
                    "upload_workbook", "register_export", "register_import",
                    "list_exports", "get_export", "create_space", "add_member",
                    "revoke_export", "delete_import"):
            def wrapper(*args, **kwargs):
                self.calls.append(name)
                return attr(*args, **kwargs)
            return wrapper
        return attr

    def writes(self):
        return [c for c in self.calls if c in self.WRITES]


@pytest.fixture
def platform():
    svc = PlatformService(inline_propagation=True)
    for user in ("carl", "john"):
        svc.add_user(user, user.title(), "pw")
    space = svc.create_space("carl", "north")
    svc.add_member("carl", space.id, "john", comp.Role.BOTH)
    yield svc, space
    svc.close()


def make_agent(svc, user, wb_id=None, transport_cls=LocalTransport):
    transport = transport_cls(svc)
    agent = Agent(Workbook(wb_id or f"wb-{user}"), transport, user, secret="pw")
    agent.login()
    return agent


def seeded_exporter(svc, space, user="john"):
    """Agent with a 1x3 export already registered and pushed."""
    agent = make_agent(svc, user)
    for col, value in zip("ABC", ("10", "20", "=A1+B1")):
        agent.edit_cell(parse_address(f"Sales!{col}1"), value)
    descriptor = agent.register_export(space.id, "sales", "", "Sales!A1:C1",
                                       comp.Visibility.spacewide())
    agent.sync_tick()
    return agent, descriptor


# ---------------------------------------------------------------------------
# detection
# ---------------------------------------------------------------------------


def test_untouched_workbook_detects_nothing(platform):
    svc, space = platform
    agent, _ = seeded_exporter(svc, space)
    assert agent.detect_modified_exports() == set()


def test_edit_inside_range_detected(platform):
    svc, space = platform
    agent, descriptor = seeded_exporter(svc, space)
    agent.edit_cell(parse_address("Sales!A1"), "11")
    assert agent.detect_modified_exports() == {descriptor.id}


def test_precedent_edit_outside_range_detected(platform):
    svc, space = platform
    agent = make_agent(svc, "john")
    # Z9 feeds C1 which is inside the exported range
    agent.edit_cell(parse_address("Sales!Z9"), "5")
    agent.edit_cell(parse_address("Sales!C1"), "=Z9*2")
    descriptor = agent.register_export(space.id, "sales", "", "Sales!A1:C1",
                                       comp.Visibility.spacewide())
    agent.sync_tick()
    assert agent.detect_modified_exports() == set()
    agent.edit_cell(parse_address("Sales!Z9"), "6")  # outside the range
    assert agent.detect_modified_exports() == {descriptor.id}


# ---------------------------------------------------------------------------
# sync_tick
# ---------------------------------------------------------------------------


def test_offline_edits_coalesce_into_one_push(platform):
    svc, space = platform
    agent, descriptor = seeded_exporter(svc, space)
    agent.transport.set_offline(True)
    for value in ("11", "12", "13"):
        agent.edit_cell(parse_address("Sales!A1"), value)
        summary = agent.sync_tick()
        assert summary["offline"] is True
    assert agent.pending == [descriptor.id]
    agent.transport.set_offline(False)
    summary = agent.sync_tick()
    assert summary["offline"] is False
    assert [p[0] for p in summary["pushed"]] == [descriptor.id]
    record = svc.exports[descriptor.id]
    assert record.descriptor.latest_version == 2  # v1 seed + one coalesced push
    assert record.images[-1].cells[0] == NUM(13)


def test_push_order_preserved_across_exports(platform):
    svc, space = platform
    agent = make_agent(svc, "john")
    agent.edit_cell(parse_address("S!A1"), "1")
    agent.edit_cell(parse_address("S!B1"), "2")
    exp_b = agent.register_export(space.id, "b", "", "S!B1:B1",
                                  comp.Visibility.spacewide())
    exp_a = agent.register_export(space.id, "a", "", "S!A1:A1",
                                  comp.Visibility.spacewide())
    agent.transport.set_offline(True)
    agent.sync_tick()
    agent.transport.set_offline(False)
    summary = agent.sync_tick()
    assert [p[0] for p in summary["pushed"]] == sorted([exp_a.id, exp_b.id])


def test_quiescent_tick_only_polls(platform):
    svc, space = platform
    agent, _ = seeded_exporter(svc, space, user="john")
    transport = CountingTransport(svc)
    transport.token = agent.transport.token
    agent.transport = transport
    summary = agent.sync_tick()
    assert summary["pushed"] == [] and summary["uploaded"] is False
    assert transport.writes() == []
    assert transport.calls.count("poll_updates") == 1


def test_delta_applied_then_dependent_export_pushed_same_tick(platform):
    svc, space = platform
    exporter, sales = seeded_exporter(svc, space)
    # carl's intermediate: import into In!A1:C1, export the sum
    intermediate = make_agent(svc, "carl")
    intermediate.edit_cell(parse_address("Out!A1"), "=SUM(In!A1:C1)")
    binding = intermediate.register_import(sales.id, "In!A1:C1")
    out = intermediate.register_export(space.id, "sum", "", "Out!A1:A1",
                                       comp.Visibility.spacewide())
    summary = intermediate.sync_tick()
    assert [a[0] for a in summary["applied"]] == [binding.id]
    assert [p[0] for p in summary["pushed"]] == [out.id]
    assert summary["uploaded"] is True
    assert intermediate.workbook.computed(parse_address("Out!A1")) == NUM(60)
    assert svc.exports[out.id].images[-1].cells == (NUM(60),)


def test_tick_never_raises_on_network_failure(platform):
    svc, space = platform
    agent, _ = seeded_exporter(svc, space)
    agent.transport.set_offline(True)
    agent.edit_cell(parse_address("Sales!A1"), "99")
    summary = agent.sync_tick()  # must not raise
    assert summary["offline"] is True and agent.online is False
    assert agent.pending  # retained


# ---------------------------------------------------------------------------
# apply_import
# ---------------------------------------------------------------------------


def test_apply_import_recomputes_dependents(platform):
    svc, space = platform
    _, sales = seeded_exporter(svc, space)
    importer = make_agent(svc, "carl")
    importer.edit_cell(parse_address("Calc!D1"), "=SUM(In!A1:C1)")
    binding = importer.register_import(sales.id, "In!A1:C1")
    image = svc.exports[sales.id].images[-1]
    changes = importer.apply_import(UpdateDelta(binding.id, image, 0, 1))
    assert importer.workbook.computed(parse_address("Calc!D1")) == NUM(60)
    assert changes


def test_identical_image_reapplied_is_empty_changeset(platform):
    svc, space = platform
    _, sales = seeded_exporter(svc, space)
    importer = make_agent(svc, "carl")
    binding = importer.register_import(sales.id, "In!A1:C1")
    image = svc.exports[sales.id].images[-1]
    first = importer.apply_import(UpdateDelta(binding.id, image, 0, 1))
    assert first
    again = importer.apply_import(UpdateDelta(binding.id, image, 1, 2))
    assert not again


def test_dim_mismatch_delta_flags_binding(platform):
    svc, space = platform
    _, sales = seeded_exporter(svc, space)
    importer = make_agent(svc, "carl")
    binding = importer.register_import(sales.id, "In!A1:C1")
    bad = RangeImage(sales.id, 1, 2, 2, (BLANK,) * 4)
    with pytest.raises(IntegrityError):
        importer.apply_import(UpdateDelta(binding.id, bad, 0, 1))
    assert binding.id in importer.flagged


def test_revoked_binding_ignores_late_delta(platform):
    svc, space = platform
    exporter, sales = seeded_exporter(svc, space)
    importer = make_agent(svc, "carl")
    binding = importer.register_import(sales.id, "In!A1:C1")
    importer.sync_tick()
    applied_before = importer.imports[binding.id].applied_version
    exporter.transport.revoke_export(sales.id)
    importer.sync_tick()
    assert binding.id in importer.stale
    # values kept, not blanked
    assert importer.workbook.computed(parse_address("In!A1")) == NUM(10)
    image = svc.exports[sales.id].images[-1]
    late = importer.apply_import(UpdateDelta(binding.id, image, 0, 99))
    assert not late
    assert importer.imports[binding.id].applied_version == applied_before


# ---------------------------------------------------------------------------
# conflicts
# ---------------------------------------------------------------------------


def test_conflict_refresh_and_retry_succeeds(platform):
    svc, space = platform
    agent, descriptor = seeded_exporter(svc, space)
    # another copy of the same workbook pushes behind our back
    other = svc.exports[descriptor.id].images[-1]
    svc.push_contribution("john", descriptor.id,
                          other.with_version(descriptor.id, 2), 1)
    agent.edit_cell(parse_address("Sales!A1"), "77")
    summary = agent.sync_tick()
    assert summary["conflicts"] == []
    assert svc.exports[descriptor.id].descriptor.latest_version == 3
    assert svc.exports[descriptor.id].images[-1].cells[0] == NUM(77)


def test_persistent_conflict_pauses_export(platform):
    svc, space = platform
    agent, descriptor = seeded_exporter(svc, space)

    class RacingTransport(LocalTransport):
        # someone else wins the race before every push attempt
        def push_contribution(self, export_id, image, base_version):
            record = self.service.exports[export_id]
            current = record.descriptor.latest_version
            self.service.push_contribution(
                "john", export_id,
                record.images[-1].with_version(export_id, current + 1), current)
            return super().push_contribution(export_id, image, base_version)

    racing = RacingTransport(svc)
    racing.token = agent.transport.token
    agent.transport = racing
    agent.edit_cell(parse_address("Sales!A1"), "55")
    summary = agent.sync_tick()
    assert summary["conflicts"] == [descriptor.id]
    assert descriptor.id in agent.paused
    assert descriptor.id in agent.pending  # kept for the operator
    # operator resumes; next tick succeeds
    agent.resume_export(descriptor.id)
    agent.transport = LocalTransport(svc)
    agent.transport.token = racing.token
    summary = agent.sync_tick()
    assert [p[0] for p in summary["pushed"]] == [descriptor.id]


# ---------------------------------------------------------------------------
# persistence / crash safety
# ---------------------------------------------------------------------------


def test_agent_state_survives_reload(tmp_path, platform):
    svc, space = platform
    path = tmp_path / "john.xml"
    transport = LocalTransport(svc)
    agent = Agent(Workbook("wb-john"), transport, "john", secret="pw",
                  workbook_path=str(path))
    agent.login()
    agent.edit_cell(parse_address("Sales!A1"), "10")
    descriptor = agent.register_export(space.id, "sales", "", "Sales!A1:A1",
                                       comp.Visibility.spacewide())
    agent.sync_tick()

    revived = Agent.from_file(path, LocalTransport(svc), "john", secret="pw")
    revived.login()
    assert descriptor.id in revived.exports
    assert revived.exports[descriptor.id].latest_version == 1
    assert revived.detect_modified_exports() == set()  # nothing re-pushed
    summary = revived.sync_tick()
    assert summary["pushed"] == []
    assert svc.exports[descriptor.id].descriptor.latest_version == 1


def test_interrupted_tick_rerun_never_regresses(tmp_path, platform):
    svc, space = platform
    path = tmp_path / "john.xml"
    agent = Agent(Workbook("wb-john"), LocalTransport(svc), "john", secret="pw",
                  workbook_path=str(path))
    agent.login()
    agent.edit_cell(parse_address("Sales!A1"), "1")
    descriptor = agent.register_export(space.id, "sales", "", "Sales!A1:A1",
                                       comp.Visibility.spacewide())
    agent.sync_tick()
    # edit lands in the file, the tick's push is acknowledged as v2, and the
    # process dies before the post-push save: the file still claims v1
    agent.edit_cell(parse_address("Sales!A1"), "2")
    pre_push_file = path.read_text()
    agent.sync_tick()
    assert svc.exports[descriptor.id].descriptor.latest_version == 2
    path.write_text(pre_push_file)

    revived = Agent.from_file(path, LocalTransport(svc), "john", secret="pw")
    revived.login()
    revived.sync_tick()  # stale base -> refresh-and-retry pushes current image
    record = svc.exports[descriptor.id]
    assert record.descriptor.latest_version == 3
    assert record.images[-1].cells == (NUM(2),)  # current value, never older
    assert [img.version for img in record.images] == [1, 2, 3]
