from __future__ import annotations

import json
import subprocess
import sys

import pytest

from fmst.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check(capsys, corpus):
    code, out, _ = run(capsys, "check", corpus / "bsc.fmst")
    assert code == 0 and "Main: well-typed, rank 1" in out
    code, out, _ = run(capsys, "check", corpus / "corules.fmst")
    assert code == 1 and "A: ill-typed (NoFiniteDerivation" in out


def test_check_json(capsys, corpus):
    code, out, _ = run(capsys, "check", corpus / "rank_inf.fmst", "--json")
    data = json.loads(out)
    assert code == 1 and data["ok"] is False
    assert data["definitions"][0]["errors"][0]["kind"] == "InfiniteRank"


def test_subtype(capsys, corpus):
    f = corpus / "types.fmst"
    code, out, _ = run(capsys, "subtype", f, "--left", "S", "--right", "T")
    assert code == 0 and out.strip() == "fair subtype, rank 1"
    code, out, _ = run(capsys, "subtype", f, "--left", "S", "--right", "U")
    assert code == 1 and "not a fair subtype (divergent pair)" in out
    code, out, _ = run(capsys, "subtype", f, "--left", "S", "--right", "Pay", "--table", "--json")
    data = json.loads(out)
    assert data["fair"] and data["rank"] == 1 and data["pairs"]


def test_subtype_expression(capsys, corpus):
    code, out, _ = run(capsys, "subtype", corpus / "types.fmst", "--left", "S", "--right", "seller!pay.end!")
    assert code == 0


def test_coherence_and_rank(capsys, corpus):
    f = corpus / "bsc_map.fmst"
    assert run(capsys, "coherence", f)[:2] == (0, "coherent, rank 3\n")
    assert run(capsys, "rank", f)[:2] == (0, "rank 3\n")
    code, out, _ = run(capsys, "coherence", f, "--map", "{p: end!, q: end!}")
    assert code == 1 and out.strip() == "incoherent"


def test_bounded(capsys, corpus):
    f = corpus / "types.fmst"
    assert run(capsys, "bounded", f, "--type", "S")[:2] == (0, "bounded\n")
    assert run(capsys, "bounded", f, "--type", "U")[:2] == (1, "unbounded\n")


def test_dual_and_discriminate(capsys, corpus):
    f = corpus / "types.fmst"
    code, out, _ = run(capsys, "dual", f, "--type", "Pay", "--role", "buyer", "--roles", "seller")
    assert code == 0 and "seller" in out
    code, out, _ = run(capsys, "discriminate", f, "--left", "S", "--right", "U", "--role", "buyer")
    assert code == 0 and "map {seller: " in out
    code, _, err = run(capsys, "discriminate", f, "--left", "S", "--right", "S", "--role", "buyer")
    assert code == 2 and err


def test_lts(capsys, corpus):
    f = corpus / "bsc_map.fmst"
    code, out, _ = run(capsys, "lts", f)
    assert code == 0 and out.startswith("states ")
    code, out, _ = run(capsys, "lts", f, "--dot")
    assert code == 0 and out.startswith("digraph")


def test_simulate(capsys, corpus):
    f = corpus / "bsc.fmst"
    code, out, _ = run(capsys, "simulate", f, "--trace")
    assert code == 0 and out.splitlines()[-1].startswith("Terminated after")
    code, out, _ = run(capsys, "simulate", f, "--json", "--scheduler", "random", "--seed", "4")
    lines = [json.loads(x) for x in out.splitlines()]
    assert code == 0 and lines[-1]["outcome"] == "Terminated"
    code, out, _ = run(capsys, "simulate", f, "--scheduler", "random", "--max-steps", "1")
    assert code == 1 and out.startswith("MaxSteps")


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["bounded", "missing.fmst", "--type", "S"],
    ],
)
def test_usage_errors(capsys, argv):
    assert main(argv) == 2


def test_parse_error_exit(capsys, tmp_path):
    bad = tmp_path / "bad.fmst"
    bad.write_text("def = ")
    code, _, err = run(capsys, "check", bad)
    assert code == 2 and err


def test_module_entry_point(corpus):
    res = subprocess.run(
        [sys.executable, "-m", "fmst", "check", str(corpus / "pms.fmst")], capture_output=True, text=True
    )
    assert res.returncode == 0 and "Main: well-typed, rank 1" in res.stdout
