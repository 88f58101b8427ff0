from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings

from fmst.core import END_IN, END_OUT, SessionMap, targets
from fmst.errors import PreconditionViolated
from fmst.parser import load_file, parse_session_map, parse_session_type
from fmst.redsys import ReductionSystem, fairly_terminating
from fmst.typelts import (
    IN_DONE,
    TAU,
    ChanAct,
    TagAct,
    analyse,
    bounded,
    can_terminate,
    coherent,
    dual,
    session_rank,
    tau_successors,
    transitions,
)
from oracles import oracle_bounded, oracle_coherent, oracle_rank, random_bounded_type
from strategies import session_maps, session_types


def bsc_map(corpus) -> SessionMap:
    return load_file(str(corpus / "bsc_map.fmst")).maps[0][1]


def test_terminate_transition():
    m = SessionMap({"p": END_IN, "q": END_OUT})
    assert transitions(m) == [(IN_DONE, m)]


def test_pick_commits_each_tag():
    m = parse_session_map("{p: q!{a: end!, b: end!}, q: p?{a: end?, b: end?}}")
    picks = [n for lab, n in transitions(m) if lab == TAU and n["q"] == m["q"]]
    assert {n["p"] for n in picks} == {parse_session_type("q!a.end!"), parse_session_type("q!b.end!")}


def test_sync():
    m = parse_session_map("{p: q!a.end!, q: p?{a: end?}}")
    # l-pick on a single tag is a self-loop
    assert tau_successors(m) == [m, SessionMap({"p": END_OUT, "q": END_IN})]


def test_single_role_actions():
    m = parse_session_map("{p: q!(end!).end?}")
    (lab, _), = transitions(m)
    assert isinstance(lab, ChanAct) and lab.complement().complement() == lab
    a = TagAct("p", "q", parse_session_type("q!a.end!").polarity, "a")
    assert a.complement() == TagAct("q", "p", a.polarity.complement(), "a")


def test_bsc_map_is_coherent_with_rank_3(corpus):
    m = bsc_map(corpus)
    assert coherent(m)
    assert session_rank(m) == 3 == oracle_rank(m)
    rep = analyse(m)
    assert rep.as_json() == {"coherent": True, "rank": 3, "states": rep.states, "transitions": rep.transitions}


def test_small_maps():
    good = SessionMap({"p": END_IN, "q": END_OUT})
    bad = SessionMap({"p": END_OUT, "q": END_OUT})
    assert coherent(good) and session_rank(good) == 1
    assert not coherent(bad) and session_rank(bad) == math.inf
    loop = parse_session_map("type X = q!a.X\ntype Y = p?a.Y\n{p: X, q: Y}")
    assert not coherent(loop)


def test_bounded_examples():
    assert bounded(parse_session_type("type S = seller!{add: S, pay: end!}"))
    assert not bounded(parse_session_type("type U = seller!add.U"))
    assert bounded(parse_session_type("q!a.q?b.end!"))


def test_dual_examples():
    assert dual("p", END_IN, {"q"}) == SessionMap({"q": END_OUT})
    assert dual("p", END_OUT, {"q", "r"}) == SessionMap({"q": END_IN, "r": END_OUT})
    assert dual("p", parse_session_type("q!{a: end!}"), {"q"}) == parse_session_map("{q: p?a.end?}")


@pytest.mark.parametrize(
    "role, src, roles",
    [
        ("p", "type U = q!a.U", {"q"}),
        ("p", "end!", set()),
        ("p", "end!", {"p"}),
        ("p", "r!a.end!", {"q"}),
    ],
)
def test_dual_preconditions(role, src, roles):
    with pytest.raises(PreconditionViolated):
        dual(role, parse_session_type(src), roles)


@given(session_maps(("p", "q", "r")))
@settings(max_examples=300)
def test_lts_agrees_with_oracle(m):
    assert coherent(m) == oracle_coherent(m)
    assert session_rank(m) == oracle_rank(m)


@given(session_maps(("p", "q", "r")))
@settings(max_examples=200)
def test_terminate_shape_and_coherence_laws(m):
    fires = any(lab == IN_DONE for lab, _ in transitions(m))
    ends = [t for t in m.values() if t.is_end]
    assert fires == (len(ends) == len(m) and sum(t.polarity.value == "?" for t in ends) == 1)
    assert fires == can_terminate(m)
    if coherent(m):
        assert session_rank(m) < math.inf
        for n in tau_successors(m):
            assert coherent(n)
        rs = ReductionSystem(successors=tau_successors, is_goal=can_terminate)
        assert fairly_terminating(rs, m)


@given(session_types(max_nodes=6, roles=("p", "q")))
def test_bounded_agrees_with_oracle(s):
    assert bounded(s) == oracle_bounded(s)


def test_duality_on_random_types():
    rng = random.Random(7)
    for _ in range(100):
        s = random_bounded_type(rng, 6, roles=("q", "r"))
        d = {"q", "r"} | set(targets(s))
        assert coherent(dual("p", s, d).union({"p": s}))
