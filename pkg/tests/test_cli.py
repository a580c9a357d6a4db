"""CLI subcommands, exit codes, and payload parity with the service."""

import json

import pytest
from fastapi.testclient import TestClient

from conftest import FIXTURES, fixture_source
from modelmend.cli import main
from modelmend.service import create_app


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_check_feasible(capsys):
    # max make_a + make_b s.t. 2*make_a + 3*make_b <= 20, both >= 0: optimum 10
    code, out, _ = run(capsys, "check", str(FIXTURES / "feasible.om"))
    assert code == 0 and out.strip() == "feasible, optimal objective 10"


def test_check_infeasible_exit_one(capsys):
    code, out, _ = run(capsys, "check", str(FIXTURES / "two_row.om"))
    assert code == 1 and out.strip() == "infeasible"


def test_check_json_point(capsys):
    code, out, _ = run(capsys, "check", str(FIXTURES / "feasible.om"), "--json")
    payload = json.loads(out)
    assert code == 0 and payload["feasible"] is True
    assert payload["objective"] == "10"
    assert payload["point"] == {"make_a": "10", "make_b": "0"}


def test_check_integer_objective(capsys, tmp_path):
    # min x s.t. x >= 3/2, x integer: the relaxation gives 3/2, integrality 2
    path = tmp_path / "ceil.om"
    path.write_text("model ceil; var x integer; s.t. low: x >= 3/2; min: x;\n")
    code, out, _ = run(capsys, "check", str(path))
    assert code == 0 and out.strip() == "feasible, optimal objective 2"


def test_iis_json_members(capsys):
    code, out, _ = run(capsys, "iis", str(FIXTURES / "two_row.om"),
                       "--method", "deletion", "--json")
    assert code == 0
    payload = json.loads(out)
    assert payload[0]["members"] == ["cap_limit", "demand"]
    assert payload[0]["solver_calls"] == 2


def test_iis_all_methods_agree(capsys):
    code, out, _ = run(capsys, "iis", str(FIXTURES / "fig2.om"),
                       "--method", "all", "--json")
    assert code == 0
    payload = json.loads(out)
    assert len(payload) >= 3
    member_sets = {tuple(p["members"]) for p in payload}
    assert member_sets == {("budget_cap", "need_x", "need_y")}


def test_iis_on_feasible_model(capsys):
    code, _, err = run(capsys, "iis", str(FIXTURES / "feasible.om"))
    assert code == 1
    assert "feasible" in err


def test_repair_apply_roundtrip(capsys, tmp_path):
    out_path = tmp_path / "repaired.om"
    code, out, _ = run(capsys, "repair", str(FIXTURES / "two_row.om"),
                       "--params", "dmin", "--apply", str(out_path))
    assert code == 0
    assert "decrease dmin from 1 to 0" in out
    code, out, _ = run(capsys, "check", str(out_path))
    assert code == 0 and out.strip() == "feasible"


def test_repair_unknown_param_usage_error(capsys):
    code, _, err = run(capsys, "repair", str(FIXTURES / "two_row.om"),
                       "--params", "ghost")
    assert code == 2 and "unknown" in err


def test_repair_lhs_param_refused(capsys):
    code, _, err = run(capsys, "repair", str(FIXTURES / "knapsack.om"),
                       "--params", "w_tent")
    assert code == 1 and "quadratically constrained" in err


def test_describe_contains_keys(capsys):
    code, out, _ = run(capsys, "describe", str(FIXTURES / "training.om"))
    assert code == 0
    for name in ("staff_cap", "demand", "hours", "ratio",
                 "operators", "mentors", "headcount", "coverage"):
        assert name in out


def test_diagnose_text_and_json(capsys):
    code, out, _ = run(capsys, "diagnose", str(FIXTURES / "two_row.om"))
    assert code == 0 and "cap_limit" in out and "Worth changing" in out
    code, out, _ = run(capsys, "diagnose", str(FIXTURES / "two_row.om"), "--json")
    payload = json.loads(out)
    assert payload["iis"]["members"] == ["cap_limit", "demand"]
    assert [c["param"] for c in payload["candidates"]] == ["dmin", "cap"]


def test_parse_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.om"
    bad.write_text("s.t. c: x <= ;")
    code, out, err = run(capsys, "check", str(bad))
    assert code == 4
    assert json.loads(out)[0]["kind"] == "syntax"
    assert "bad.om:1:" in err


def test_missing_file_usage(capsys):
    code, _, err = run(capsys, "check", "/nonexistent/file.om")
    assert code == 2 and "no such file" in err


def test_bad_subcommand_usage(capsys):
    assert run(capsys, "frobnicate")[0] == 2


def test_chat_repl(capsys, monkeypatch):
    lines = iter(["why is this infeasible?", "exit"])
    monkeypatch.setattr("builtins.input", lambda prompt="": next(lines))
    code, out, err = run(capsys, "chat", str(FIXTURES / "two_row.om"))
    assert code == 0
    assert "mock mode" in err
    assert "cap_limit" in out


def test_cli_payloads_match_service(capsys, tmp_path):
    """--json schemas are exactly the service's structured payloads."""
    client = TestClient(create_app(data_dir=tmp_path / "svc"))
    info = client.post("/sessions", json={"source": fixture_source("two_row.om"),
                                          "format": "text"}).json()
    sid = info["id"]

    service_diag = client.get(f"/sessions/{sid}/diagnosis").json()
    _, out, _ = run(capsys, "iis", str(FIXTURES / "two_row.om"), "--json")
    cli_iis = json.loads(out)[0]
    assert cli_iis == {k: service_diag[k]
                       for k in ("members", "rows", "method", "solver_calls")}

    service_plan = client.post(f"/sessions/{sid}/repair",
                               json={"params": ["dmin"], "mode": "tied"}).json()
    _, out, _ = run(capsys, "repair", str(FIXTURES / "two_row.om"),
                    "--params", "dmin", "--json")
    assert json.loads(out) == service_plan
