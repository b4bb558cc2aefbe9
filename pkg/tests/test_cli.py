import json

import pytest

from rs_subspace_repair.cli import main
from rs_subspace_repair.gfield import make_field_ctx
from rs_subspace_repair.goodpair import GoodPair, SchemeParams, counterexample_pair
from rs_subspace_repair.subspace import span

PROP6 = ["--construction", "prop6", "--m", "4", "--d", "3", "--s", "2", "--r", "2"]


def test_feasible_q3(capsys, tmp_path):
    report = tmp_path / "feasible.json"
    code = main(["feasible", "--q", "3", "--m", "4", "--d", "4", "--s", "3", "--r", "1", "--json", str(report)])
    out = capsys.readouterr().out
    assert code == 0, f"Expected exit 0, got {code}"
    assert "2/5" in out
    data = json.loads(report.read_text())
    assert data["verdict"] == "ok_q3"
    assert data["bound"] == "2/5"


def test_feasible_q2_without_slack(capsys):
    code = main(["feasible", "--q", "2", "--m", "4", "--d", "4", "--s", "3", "--r", "1"])
    assert code == 1, f"Expected exit 1, got {code}"
    assert "infeasible" in capsys.readouterr().out


def test_feasible_q2_slack(capsys):
    code = main(["feasible", "--m", "5", "--d", "2", "--s", "1", "--r", "3"])
    assert code == 0
    assert "ok_q2_slack" in capsys.readouterr().out


def test_malformed_params_exit_2(capsys):
    assert main(["feasible", "--m", "4", "--d", "9"]) == 2
    assert "[error]" in capsys.readouterr().out
    assert main(["feasible", "--q", "6"]) == 2


def test_unknown_command_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2


def test_build_needs_a_source(capsys):
    assert main(["build"]) == 2


def test_build_verify_round_trip(capsys, tmp_path):
    scheme = tmp_path / "scheme.json"
    assert main(["build", *PROP6, "--out", str(scheme)]) == 0
    assert "[8,4]" in capsys.readouterr().out
    assert main(["verify", "--scheme", str(scheme)]) == 0
    assert "ok: 8 nodes" in capsys.readouterr().out


def test_verify_rejects_tampered_scheme(capsys, tmp_path):
    scheme = tmp_path / "scheme.json"
    assert main(["build", *PROP6, "--out", str(scheme)]) == 0
    data = json.loads(scheme.read_text())
    residue = data["nodes"][0]["x"][0][3][0]
    residue[0] = 1 - residue[0]
    scheme.write_text(json.dumps(data))
    capsys.readouterr()
    assert main(["verify", "--scheme", str(scheme)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_verify_rejects_missing_node(capsys, tmp_path):
    scheme = tmp_path / "scheme.json"
    assert main(["build", *PROP6, "--out", str(scheme)]) == 0
    data = json.loads(scheme.read_text())
    del data["nodes"][3]
    scheme.write_text(json.dumps(data))
    capsys.readouterr()
    assert main(["verify", "--scheme", str(scheme)]) == 1
    assert "FAIL at node 3" in capsys.readouterr().out


def test_verify_rejects_empty_scheme(capsys, tmp_path):
    scheme = tmp_path / "scheme.json"
    assert main(["build", *PROP6, "--out", str(scheme)]) == 0
    data = json.loads(scheme.read_text())
    data["nodes"] = []
    scheme.write_text(json.dumps(data))
    assert main(["verify", "--scheme", str(scheme)]) == 1


def test_build_notes_params_outside_search_guarantee(capsys):
    argv = ["build", "--construction", "prop6", "--m", "6", "--d", "4", "--s", "2", "--r", "3"]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert "note: parameters are outside the search guarantee" in out
    assert "[16,12]" in out


def test_build_with_feasible_params_has_no_note(capsys):
    assert main(["build", *PROP6]) == 0
    assert "note:" not in capsys.readouterr().out


def test_unreadable_scheme(capsys, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["verify", "--scheme", str(path)]) == 2


def test_search_build_repair(capsys, tmp_path):
    pair = tmp_path / "pair.json"
    scheme = tmp_path / "scheme.json"
    transcript = tmp_path / "transcript.json"
    assert main(["search", "--q", "3", "--m", "4", "--d", "2", "--s", "1", "--r", "2", "--out", str(pair)]) == 0
    assert main(["build", "--pair", str(pair), "--out", str(scheme)]) == 0
    assert main(["verify", "--scheme", str(scheme)]) == 0
    assert main(["repair", "--scheme", str(scheme), "--node", "4", "--out", str(transcript)]) == 0
    data = json.loads(transcript.read_text())
    assert data["failed"] == 4 and len(data["helpers"]) == 8


def test_search_infeasible(capsys):
    assert main(["search", "--m", "4", "--d", "4", "--s", "3", "--r", "1"]) == 1


def test_repair_node_out_of_range(capsys):
    assert main(["repair", *PROP6, "--node", "99"]) == 2


def test_build_from_bad_pair_exits_1(capsys, tmp_path):
    ctx = make_field_ctx(2, 1, 4)
    U = span(ctx, ctx.basis.elems[:2])
    ce = counterexample_pair(U, 2, 1)
    path = tmp_path / "pair.json"
    path.write_text(json.dumps(GoodPair(U, ce.V, SchemeParams(2, 4, 2, 1, 2), 0).to_dict()))
    assert main(["build", "--pair", str(path)]) == 1


def test_simulate_composite_14_10(capsys):
    argv = ["simulate", "--construction", "prop7", "--m", "8", "--d", "4", "--s", "2", "--shorten", "2", "--codewords", "2"]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert "28 repairs, 0 failures, 52 bits per repair" in out


def test_simulate_is_deterministic(capsys, tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["simulate", *PROP6, "--seed", "5", "--json", str(first)]) == 0
    assert main(["simulate", *PROP6, "--seed", "5", "--json", str(second)]) == 0
    assert first.read_text() == second.read_text()


def test_badscan_dichotomy(capsys):
    assert main(["badscan", "--m", "4", "--d", "3", "--s", "2", "--r", "2"]) == 0
    assert "expected empty: ok" in capsys.readouterr().out
    assert main(["badscan", "--m", "4", "--d", "2", "--s", "1", "--r", "2"]) == 0
    assert "expected nonempty: ok" in capsys.readouterr().out


def test_badscan_guard(capsys):
    assert main(["badscan", "--d", "2", "--s", "1", "--r", "2", "--guard", "10"]) == 2
