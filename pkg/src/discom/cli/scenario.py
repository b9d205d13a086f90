"""Deterministic scenario replay: a scripted trace drives an in-process
platform plus any number of in-process agents.

Traces are line-oriented; ``#`` starts a comment; tokens follow shell
quoting. Entities are referred to by trace-local keys that map onto the
platform's generated ids, so the same file replays identically from any
clean state. Connectivity is scripted with ``offline``/``online`` and
agent lifecycle with ``stop``/``start``; ``tick`` runs sync cycles;
``drain`` waits out server-side propagation; ``expect*`` lines assert.

    user carl pw
    space north carl "Area North 2010"
    member north carl john exporter
    agent cd1 john
    set cd1 Sales!B2 10
    export cd1 sales_j north "Oct. 2010 sales" Sales!A2:D6 --to carl
    import asm imp_j sales_j Input!A2:D6
    tick *
    drain
    expect asm Index!B2 25
"""

from __future__ import annotations

import shlex
from typing import Any

from discom import composition as comp
from discom.agent.core import Agent
from discom.agent.transport import LocalTransport
from discom.errors import DiscomError
from discom.model.address import parse_address
from discom.model.values import BLANK, CellValue, ErrorCode, parse_number
from discom.model.workbook import Workbook
from discom.server.service import PlatformService


class ScenarioError(DiscomError):
    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ScenarioRunner:
    def __init__(self):
        self.service = PlatformService(inline_propagation=True)
        self.agents: dict[str, Agent] = {}
        self.transports: dict[str, LocalTransport] = {}
        self.stopped: set[str] = set()
        self.secrets: dict[str, str] = {}
        self.space_ids: dict[str, str] = {}
        self.export_ids: dict[str, str] = {}
        self.import_ids: dict[str, str] = {}
        self.log: list[str] = []

    # -- execution ---------------------------------------------------------

    def run(self, text: str) -> dict[str, Any]:
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                tokens = shlex.split(line)
                self._dispatch(tokens, line_no)
            except ScenarioError:
                raise
            except DiscomError as exc:
                raise ScenarioError(str(exc), line_no) from exc
        self.service.close()
        return {"log": self.log, "snapshot": self.service.describe()}

    def _dispatch(self, tokens: list[str], line_no: int) -> None:
        verb, args = tokens[0], tokens[1:]
        handler = getattr(self, f"_cmd_{verb.replace('-', '_')}", None)
        if handler is None:
            raise ScenarioError(f"unknown directive {verb!r}", line_no)
        handler(args, line_no)

    def _agent(self, name: str, line_no: int) -> Agent:
        agent = self.agents.get(name)
        if agent is None:
            raise ScenarioError(f"unknown agent {name!r}", line_no)
        return agent

    # -- directives ------------------------------------------------------------

    def _cmd_user(self, args, line_no):
        name = args[0]
        secret = args[1] if len(args) > 1 else "pw"
        self.service.add_user(name, name, secret)
        self.secrets[name] = secret
        self.log.append(f"user {name}")

    def _cmd_space(self, args, line_no):
        key, creator, name = args[0], args[1], args[2]
        transport = LocalTransport(self.service)
        transport.login(creator, self.secrets[creator])
        space = transport.create_space(name)
        self.space_ids[key] = space.id
        self.log.append(f"space {key} -> {space.id}")

    def _cmd_member(self, args, line_no):
        space_key, caller, user, role = args
        transport = LocalTransport(self.service)
        transport.login(caller, self.secrets[caller])
        transport.add_member(self.space_ids[space_key], user, comp.Role(role))
        self.log.append(f"member {user} ({role}) in {space_key}")

    def _cmd_agent(self, args, line_no):
        name, user = args[0], args[1]
        workbook_id = args[2] if len(args) > 2 else f"wb-{name}"
        transport = LocalTransport(self.service)
        agent = Agent(Workbook(workbook_id), transport, user,
                      secret=self.secrets[user])
        agent.login()
        self.agents[name] = agent
        self.transports[name] = transport
        self.log.append(f"agent {name} ({user})")

    def _cmd_set(self, args, line_no):
        agent = self._agent(args[0], line_no)
        addr = parse_address(args[1])
        agent.edit_cell(addr, args[2])

    def _cmd_export(self, args, line_no):
        agent = self._agent(args[0], line_no)
        key, space_key, name, range_a1 = args[1], args[2], args[3], args[4]
        visibility = comp.Visibility.spacewide()
        rest = args[5:]
        while rest:
            flag = rest.pop(0)
            if flag == "--space-wide":
                visibility = comp.Visibility.spacewide()
            elif flag == "--to":
                visibility = comp.Visibility.restricted(rest.pop(0).split(","))
            else:
                raise ScenarioError(f"unknown export flag {flag!r}", line_no)
        descriptor = agent.register_export(
            self.space_ids[space_key], name, "", range_a1, visibility)
        self.export_ids[key] = descriptor.id
        self.log.append(f"export {key} -> {descriptor.id}")

    def _cmd_import(self, args, line_no):
        agent = self._agent(args[0], line_no)
        key, export_key, target = args[1], args[2], args[3]
        binding = agent.register_import(self.export_ids[export_key], target)
        self.import_ids[key] = binding.id
        self.log.append(f"import {key} -> {binding.id}")

    def _cmd_revoke(self, args, line_no):
        agent = self._agent(args[0], line_no)
        agent.transport.revoke_export(self.export_ids[args[1]])
        self.log.append(f"revoke {args[1]}")

    def _cmd_tick(self, args, line_no):
        names = sorted(self.agents) if args[0] == "*" else args
        for name in names:
            if name in self.stopped:
                continue
            summary = self._agent(name, line_no).sync_tick()
            self.log.append(
                f"tick {name}: pushed={len(summary['pushed'])} "
                f"applied={len(summary['applied'])} "
                f"uploaded={summary['uploaded']} offline={summary['offline']}")

    def _cmd_offline(self, args, line_no):
        self.transports[args[0]].set_offline(True)

    def _cmd_online(self, args, line_no):
        self.transports[args[0]].set_offline(False)

    def _cmd_stop(self, args, line_no):
        self.stopped.add(args[0])
        self.log.append(f"stop {args[0]}")

    def _cmd_start(self, args, line_no):
        self.stopped.discard(args[0])
        self.log.append(f"start {args[0]}")

    def _cmd_drain(self, args, line_no):
        if not self.service.drain(timeout=10.0):
            raise ScenarioError("propagation did not reach fixpoint", line_no)

    def _cmd_sweep(self, args, line_no):
        self.service.sweep()

    # -- assertions ----------------------------------------------------------

    def _cmd_expect(self, args, line_no):
        agent = self._agent(args[0], line_no)
        addr = parse_address(args[1])
        actual = agent.workbook.computed(addr)
        expected = _parse_expected(args[2])
        if actual != expected:
            raise ScenarioError(
                f"expect {args[1]}: wanted {expected.display()!r}, "
                f"got {actual.display()!r}", line_no)
        self.log.append(f"expect {args[0]} {args[1]} == {args[2]} ok")

    def _cmd_expect_version(self, args, line_no):
        export_id = self.export_ids[args[0]]
        wanted = int(args[1])
        record = self.service.exports[export_id]
        actual = record.descriptor.latest_version
        if actual != wanted:
            raise ScenarioError(
                f"expect-version {args[0]}: wanted {wanted}, got {actual}", line_no)
        self.log.append(f"expect-version {args[0]} == {wanted} ok")

    def _cmd_expect_role(self, args, line_no):
        agent = self._agent(args[0], line_no)
        wanted = {comp.WorkbookRole(part) for part in args[1].split(",")}
        actual = set(agent.classify())
        if actual != wanted:
            raise ScenarioError(
                f"expect-role {args[0]}: wanted {sorted(r.value for r in wanted)}, "
                f"got {sorted(r.value for r in actual)}", line_no)
        self.log.append(f"expect-role {args[0]} == {args[1]} ok")

    def _cmd_expect_stale(self, args, line_no):
        agent = self._agent(args[0], line_no)
        binding_id = self.import_ids[args[1]]
        if binding_id not in agent.stale:
            raise ScenarioError(f"binding {args[1]} is not flagged stale", line_no)
        self.log.append(f"expect-stale {args[0]} {args[1]} ok")


def _parse_expected(text: str) -> CellValue:
    if text == "blank":
        return BLANK
    if text.startswith("#"):
        return CellValue.error(ErrorCode(text[1:]))
    if text.upper() in ("TRUE", "FALSE"):
        return CellValue.boolean(text.upper() == "TRUE")
    try:
        return CellValue.number(parse_number(text))
    except ValueError:
        return CellValue.text(text)


def replay(text: str) -> dict[str, Any]:
    return ScenarioRunner().run(text)
