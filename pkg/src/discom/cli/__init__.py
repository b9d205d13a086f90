"""Command-line frontend: platform administration, export/import
registration, the agent loop, offline cell edits, and scenario replay.

Exit codes: 0 success, 1 user error, 2 server/transport error.
Global flags: --server / --token / --json; environment overrides
DISCOM_SERVER and DISCOM_TOKEN.
"""

from __future__ import annotations

import json
import sys
import threading
from pathlib import Path

import click

from discom import composition as comp
from discom.agent.core import (PROP_EXPORTS, PROP_IMPORTS, Agent,
                               _export_to_json, _import_to_json)
from discom.agent.localapi import create_local_app
from discom.agent.transport import HttpTransport
from discom.cli.scenario import replay
from discom.engine.evaluator import evaluate_all
from discom.engine.parser import parse_cell_input
from discom.errors import DiscomError, TransportError
from discom.model.address import parse_address
from discom.model.workbook import Workbook
from discom.model.xmlio import decode_workbook, encode_workbook
from discom.server.api import create_app
from discom.server.config import load_config
from discom.server.service import PlatformService
from discom.server.store import SnapshotStore


@click.group()
@click.option("--server", envvar="DISCOM_SERVER",
              default="http://127.0.0.1:8787", show_default=True,
              help="Platform base URL.")
@click.option("--token", envvar="DISCOM_TOKEN", default=None,
              help="Bearer token (admin token for admin commands).")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_context
def cli(ctx, server, token, as_json):
    ctx.obj = {"server": server, "token": token, "json": as_json}


def _transport(ctx) -> HttpTransport:
    return HttpTransport(ctx.obj["server"], ctx.obj["token"])


def _emit(ctx, text: str, payload) -> None:
    if ctx.obj["json"]:
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(text)


def _attach_metadata(workbook_path: str, prop: str, entry: dict) -> None:
    """Record a freshly registered export/import inside the workbook file's
    properties so a later `agent run` on that file picks it up."""
    path = Path(workbook_path)
    wb = decode_workbook(path.read_text(encoding="utf-8"))
    entries = json.loads(wb.properties.get(prop, "[]"))
    entries = [e for e in entries if e["id"] != entry["id"]] + [entry]
    entries.sort(key=lambda e: e["id"])
    wb = wb.with_property(prop, json.dumps(entries, sort_keys=True))
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(encode_workbook(wb), encoding="utf-8")
    tmp.replace(path)


# ---------------------------------------------------------------------------
# server
# ---------------------------------------------------------------------------


@cli.group()
def server():
    """Run and inspect the platform service."""


@server.command("run")
@click.option("--config", "config_file", type=click.Path(exists=True),
              help="JSON config file.")
@click.option("--data-dir", default=None)
@click.option("--listen", default=None, help="host:port")
@click.option("--sweep-interval", type=float, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--admin-token", default=None)
def server_run(config_file, data_dir, listen, sweep_interval, workers, admin_token):
    """Start the platform (blocks until interrupted)."""
    import uvicorn

    cfg = load_config(config_file, overrides={
        "data_dir": data_dir, "listen": listen,
        "sweep_interval": sweep_interval, "workers": workers,
        "admin_token": admin_token,
    })
    service = PlatformService(SnapshotStore(cfg.data_dir), workers=cfg.workers,
                              sweep_interval=cfg.sweep_interval,
                              admin_token=cfg.admin_token)
    app = create_app(service)
    try:
        uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
    finally:
        service.close()


# ---------------------------------------------------------------------------
# admin
# ---------------------------------------------------------------------------


@cli.group()
def admin():
    """Account administration (requires the platform admin token)."""


@admin.group("user")
def admin_user():
    """Manage user accounts."""


@admin_user.command("add")
@click.argument("user_id")
@click.option("--name", default="")
@click.option("--secret", required=True)
@click.pass_context
def admin_user_add(ctx, user_id, name, secret):
    payload = _transport(ctx).admin_add_user(user_id, name or user_id, secret)
    _emit(ctx, f"user {payload['id']} created", payload)


@admin_user.command("list")
@click.pass_context
def admin_user_list(ctx):
    users = _transport(ctx).admin_list_users()
    _emit(ctx, "\n".join(f"{u['id']}\t{u['name']}" for u in users) or "(none)",
          {"users": users})


@admin_user.command("remove")
@click.argument("user_id")
@click.pass_context
def admin_user_remove(ctx, user_id):
    _transport(ctx).admin_remove_user(user_id)
    _emit(ctx, f"user {user_id} removed", {"removed": user_id})


@cli.command()
@click.argument("user_id")
@click.option("--secret", prompt=True, hide_input=True)
@click.pass_context
def login(ctx, user_id, secret):
    """Authenticate; prints a bearer token for later calls."""
    token = _transport(ctx).login(user_id, secret)
    _emit(ctx, token, {"token": token})


# ---------------------------------------------------------------------------
# spaces
# ---------------------------------------------------------------------------


@cli.group()
def space():
    """Create and manage spaces."""


@space.command("create")
@click.argument("name")
@click.pass_context
def space_create(ctx, name):
    created = _transport(ctx).create_space(name)
    _emit(ctx, f"space {created.id} ({created.name})",
          {"id": created.id, "name": created.name})


@space.command("add-member")
@click.argument("space_id")
@click.argument("user_id")
@click.option("--role", default="both",
              type=click.Choice([r.value for r in comp.Role if r != comp.Role.CREATOR]))
@click.pass_context
def space_add_member(ctx, space_id, user_id, role):
    updated = _transport(ctx).add_member(space_id, user_id, comp.Role(role))
    _emit(ctx, f"space {updated.id} now has {len(updated.members)} members",
          {"id": updated.id, "members": [[uid, r.value] for uid, r in updated.members]})


@space.command("list")
@click.pass_context
def space_list(ctx):
    spaces = _transport(ctx).list_spaces()
    lines = [f"{s.id}\t{s.name}\t{len(s.members)} members" for s in spaces]
    _emit(ctx, "\n".join(lines) or "(none)",
          {"spaces": [{"id": s.id, "name": s.name,
                       "members": [[uid, r.value] for uid, r in s.members]}
                      for s in spaces]})


# ---------------------------------------------------------------------------
# exports / imports
# ---------------------------------------------------------------------------


@cli.group()
def export():
    """Register and manage exported ranges."""


@export.command("register")
@click.option("--space", "space_id", required=True)
@click.option("--name", required=True)
@click.option("--description", default="")
@click.option("--range", "range_a1", required=True, help='e.g. "Sales!A2:D6"')
@click.option("--to", "allowed", default=None,
              help="Comma-separated user ids (restricted visibility).")
@click.option("--space-wide", is_flag=True)
@click.option("--workbook", "workbook_path", type=click.Path(exists=True),
              default=None, help="Also record the export in this workbook file.")
@click.pass_context
def export_register(ctx, space_id, name, description, range_a1, allowed,
                    space_wide, workbook_path):
    if space_wide and allowed:
        raise click.UsageError("--space-wide and --to are mutually exclusive")
    visibility = (comp.Visibility.spacewide() if space_wide or not allowed
                  else comp.Visibility.restricted(allowed.split(",")))
    descriptor = _transport(ctx).register_export(
        space_id, name, description, range_a1, visibility)
    if workbook_path:
        _attach_metadata(workbook_path, PROP_EXPORTS, _export_to_json(descriptor))
    _emit(ctx, descriptor.id, {"id": descriptor.id, "range": descriptor.range.to_a1()})


@export.command("list")
@click.pass_context
def export_list(ctx):
    entries = _transport(ctx).list_exports()
    lines = [f"{d.id}\t{d.name}\t{d.range.to_a1()}\tv{d.latest_version}"
             + ("\trevoked" if revoked else "")
             for d, revoked in entries]
    _emit(ctx, "\n".join(lines) or "(none)",
          {"exports": [{"id": d.id, "name": d.name, "range": d.range.to_a1(),
                        "latest_version": d.latest_version, "revoked": revoked}
                       for d, revoked in entries]})


@export.command("revoke")
@click.argument("export_id")
@click.pass_context
def export_revoke(ctx, export_id):
    _transport(ctx).revoke_export(export_id)
    _emit(ctx, f"export {export_id} revoked", {"revoked": export_id})


@cli.group("import")
def import_():
    """Bind remote exports into local target ranges."""


@import_.command("bind")
@click.option("--export", "export_id", required=True)
@click.option("--target", required=True, help='e.g. "Input!A2:D6"')
@click.option("--workbook", "workbook_path", type=click.Path(exists=True),
              default=None, help="Also record the binding in this workbook file.")
@click.pass_context
def import_bind(ctx, export_id, target, workbook_path):
    binding = _transport(ctx).register_import(export_id, target)
    if workbook_path:
        _attach_metadata(workbook_path, PROP_IMPORTS, _import_to_json(binding))
    _emit(ctx, binding.id, {"id": binding.id, "target": binding.target.to_a1()})


@import_.command("list")
@click.pass_context
def import_list(ctx):
    bindings = _transport(ctx).list_imports()
    lines = [f"{b.id}\t{b.export_id} -> {b.target.to_a1()}\tv{b.applied_version}"
             for b in bindings]
    _emit(ctx, "\n".join(lines) or "(none)",
          {"imports": [{"id": b.id, "export_id": b.export_id,
                        "target": b.target.to_a1(),
                        "applied_version": b.applied_version}
                       for b in bindings]})


# ---------------------------------------------------------------------------
# agent
# ---------------------------------------------------------------------------


@cli.group()
def agent():
    """Run the sync agent over a local workbook file."""


@agent.command("run")
@click.option("--config", "config_file", type=click.Path(exists=True),
              help="Per-user JSON config: server, user, secret, interval, "
                   "workbook, ui_port, ui_static. Flags win over the file.")
@click.option("--workbook", "workbook_path", type=click.Path(), default=None)
@click.option("--user", default=None)
@click.option("--secret", envvar="DISCOM_SECRET", default=None)
@click.option("--interval", type=float, default=None,
              help="Poll/push period in seconds [default: 5].")
@click.option("--workbook-id", default=None,
              help="Id for a freshly created workbook file.")
@click.option("--ui-port", type=int, default=None,
              help="Also serve the loopback grid API on this port.")
@click.option("--ui-static", type=click.Path(), default=None,
              help="Directory with the built web grid to serve at /.")
@click.option("--ticks", type=int, default=None, hidden=True,
              help="Run a fixed number of ticks, then exit (for scripting).")
@click.pass_context
def agent_run(ctx, config_file, workbook_path, user, secret, interval,
              workbook_id, ui_port, ui_static, ticks):
    settings = {}
    if config_file:
        try:
            settings = json.loads(Path(config_file).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise click.UsageError(f"cannot read agent config: {exc}")
    workbook_path = workbook_path or settings.get("workbook")
    user = user or settings.get("user")
    secret = secret if secret is not None else settings.get("secret")
    interval = interval if interval is not None else float(settings.get("interval", 5.0))
    ui_port = ui_port if ui_port is not None else settings.get("ui_port")
    ui_static = ui_static or settings.get("ui_static")
    if settings.get("server") and ctx.obj["server"] == "http://127.0.0.1:8787":
        ctx.obj["server"] = settings["server"]
    if not workbook_path or not user or secret is None:
        raise click.UsageError("agent run needs --workbook, --user and --secret "
                               "(flags or config file)")
    transport = _transport(ctx)
    path = Path(workbook_path)
    if path.exists():
        runner = Agent.from_file(path, transport, user, secret)
    else:
        wb = Workbook(workbook_id or path.stem)
        runner = Agent(wb, transport, user, secret, str(path))
        runner.save()
    try:
        runner.login()
    except (TransportError, DiscomError) as exc:
        click.echo(f"starting offline: {exc}", err=True)

    stop = threading.Event()
    if ui_port is not None:
        import uvicorn

        app = create_local_app(runner, ui_static)
        config = uvicorn.Config(app, host="127.0.0.1", port=ui_port,
                                log_level="warning")
        ui_server = uvicorn.Server(config)
        threading.Thread(target=ui_server.run, daemon=True).start()
        click.echo(f"grid API on http://127.0.0.1:{ui_port}/local/grid", err=True)

    if ticks is not None:
        for _ in range(ticks):
            runner.sync_tick()
        return
    try:
        runner.run_loop(stop, interval)
    except KeyboardInterrupt:
        pass
    finally:
        runner.save()


# ---------------------------------------------------------------------------
# cells (direct workbook-file editing, works fully offline)
# ---------------------------------------------------------------------------


@cli.group()
def cell():
    """Edit or read a workbook file's cells."""


@cell.command("set")
@click.argument("addr")
@click.argument("value")
@click.option("--workbook", "workbook_path", required=True, type=click.Path(exists=True))
def cell_set(addr, value, workbook_path):
    path = Path(workbook_path)
    wb = decode_workbook(path.read_text(encoding="utf-8"))
    address = parse_address(addr)
    wb = wb.with_content(address, parse_cell_input(value, address.sheet))
    wb = evaluate_all(wb)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(encode_workbook(wb), encoding="utf-8")
    tmp.replace(path)
    click.echo(f"{address} = {wb.computed(address).display()}")


@cell.command("get")
@click.argument("addr")
@click.option("--workbook", "workbook_path", required=True, type=click.Path(exists=True))
@click.pass_context
def cell_get(ctx, addr, workbook_path):
    path = Path(workbook_path)
    wb = evaluate_all(decode_workbook(path.read_text(encoding="utf-8")))
    address = parse_address(addr)
    value = wb.computed(address)
    _emit(ctx, value.display(), {"addr": str(address), "value": value.display(),
                                 "kind": value.kind.value})


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------


@cli.group()
def scenario():
    """Deterministic scripted end-to-end runs."""


@scenario.command("replay")
@click.argument("trace_file", type=click.Path(exists=True))
@click.pass_context
def scenario_replay(ctx, trace_file):
    result = replay(Path(trace_file).read_text(encoding="utf-8"))
    text = "\n".join(result["log"]) + "\nreplay ok"
    _emit(ctx, text, result)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except TransportError as exc:
        click.echo(f"transport error: {exc}", err=True)
        return 2
    except DiscomError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
