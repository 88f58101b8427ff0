from __future__ import annotations

import math

import pytest

from fmst.parser import load_file, load_program
from fmst.typecheck import RankGraph, check_program, evaluate, solve, terminable
from oracles import oracle_ranks

CORPUS = {
    "bsc.fmst": {"Main": 1, "Buyer": 0, "Seller": 0, "Carrier": 0},
    "2bsc.fmst": {"Main": 3, "Buyer": 2, "Buyer1": 1},
    "pms.fmst": {"Main": 1, "Sort": 0, "Merge": 0},
    "nondet.fmst": {"B": 1, "Seller": 0, "Main": 2},
    "slot.fmst": {"Slot": 0, "Player": 1, "Main": 2},
}


def kinds(rep, name):
    return [e.kind for e in rep.definitions[name].errors]


@pytest.mark.parametrize("name, ranks", CORPUS.items())
def test_well_typed_corpus(corpus, name, ranks):
    rep = check_program(load_file(str(corpus / name)))
    assert rep.ok
    for d, r in ranks.items():
        assert rep.rank(d) == r


@pytest.mark.parametrize("name", ["2bsc_nocast.fmst", "2bsc_nocast_yes.fmst", "2bsc_nocast_giveup.fmst"])
def test_missing_casts(corpus, name):
    rep = check_program(load_file(str(corpus / name)))
    assert kinds(rep, "Buyer1") == ["BranchMismatch"]
    assert kinds(rep, "Buyer") == ["DependsOnIllTyped"]
    assert kinds(rep, "Main") == ["DependsOnIllTyped"]


def test_corules(corpus):
    rep = check_program(load_file(str(corpus / "corules.fmst")))
    assert kinds(rep, "A") == ["NoFiniteDerivation"]
    assert kinds(rep, "B") == ["NoFiniteDerivation"]
    assert rep.definitions["C"].well_typed and rep.rank("C") == 0


@pytest.mark.parametrize("name", ["rank_inf.fmst", "slot_cast.fmst"])
def test_infinite_rank(corpus, name):
    rep = check_program(load_file(str(corpus / name)))
    assert not rep.ok
    assert "InfiniteRank" in [k for r in rep.definitions.values() for k in (e.kind for e in r.errors)]


def test_declared_ranks(corpus):
    src = (corpus / "bsc.fmst").read_text()
    low = check_program(load_program(src.replace("def Main()", "def Main(): 0")))
    assert kinds(low, "Main") == ["RankTooSmall"]
    high = check_program(load_program(src.replace("def Main()", "def Main(): 4")))
    main = high.definitions["Main"]
    assert main.well_typed and main.rank == 4 and main.inferred_rank == 1 and main.warnings


def test_unused_endpoint_is_a_linearity_violation():
    rep = check_program(load_program("def X(x: end!) = done"))
    assert kinds(rep, "X") == ["LinearityViolation"]


def test_report_json(corpus):
    rep = check_program(load_file(str(corpus / "corules.fmst")))
    data = rep.as_json()
    assert data["ok"] is False
    assert [d["name"] for d in data["definitions"]] == ["A", "B", "C"]


# rank graph solver


def test_self_loop_through_positive_add_is_infinite():
    g = RankGraph()
    a = g.add(1, g.call("A"))
    assert solve(g, {"A": a})[a] == math.inf


def test_zero_self_sum_is_zero():
    g = RankGraph()
    a = g.sum([g.call("X"), g.call("X")])
    assert solve(g, {"X": a})[a] == 0


def test_sum_with_positive_sibling_diverges():
    g = RankGraph()
    a = g.sum([g.call("A"), g.const(1)])
    assert solve(g, {"A": a})[a] == math.inf


def test_min_escapes_a_loop():
    g = RankGraph()
    a = g.min([g.add(1, g.call("A")), g.const(2)])
    vals = solve(g, {"A": a})
    assert vals[a] == 2
    assert evaluate(g, a, {"A": 2}) == 2


def test_max_cannot_escape():
    g = RankGraph()
    a = g.max([g.add(1, g.call("A")), g.const(2)])
    assert solve(g, {"A": a})[a] == math.inf


def test_fixed_and_unknown_calls():
    g = RankGraph()
    a = g.add(2, g.call("F"))
    b = g.call("Nope")
    vals = solve(g, {}, {"F": 3})
    assert vals[a] == 5 and vals[b] == math.inf


def test_terminable():
    g = RankGraph()
    a = g.call("A")
    b = g.min([g.call("B"), g.const(0)])
    ok = terminable(g, {"A": a, "B": b})
    assert not ok[a] and ok[b]


@pytest.mark.parametrize(
    "name",
    ["bsc.fmst", "2bsc.fmst", "2bsc_nocast.fmst", "pms.fmst", "nondet.fmst", "slot.fmst", "rank_inf.fmst", "slot_cast.fmst"],
)
def test_inferred_ranks_agree_with_enumeration(corpus, name):
    prog = load_file(str(corpus / name))
    want = oracle_ranks(prog)
    for d, r in check_program(prog).definitions.items():
        kinds = [e.kind for e in r.errors]
        if r.well_typed:
            assert want[d] == r.inferred_rank, d
        elif kinds == ["InfiniteRank"]:
            assert want[d] is None, d


def test_doubling_chain_stays_finite():
    g = RankGraph()
    roots = {"A0": g.const(1)}
    for k in range(1, 12):
        roots[f"A{k}"] = g.sum([g.call(f"A{k - 1}"), g.call(f"A{k - 1}")])
    assert solve(g, roots)[roots["A11"]] == 2048
