from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmst.core import (
    END_IN,
    END_OUT,
    IN,
    OUT,
    EndNode,
    GraphBuilder,
    Polarity,
    SessionMap,
    TagNode,
    Var,
    Endpoint,
    Call,
    Close,
    Session,
    Participant,
    Wait,
    Done,
    free_names,
    substitute,
    subterms,
    tag_type,
    targets,
    type_equal,
    unfold,
)
from fmst.errors import UnguardedRecursion
from fmst.parser import parse_session_type
from oracles import unfold_equal
from strategies import session_types


def test_polarity_complement_involutive():
    for p in Polarity:
        assert p.complement().complement() is p
    assert OUT.complement() is IN


def test_buyer_type_has_two_nodes():
    s = parse_session_type("type S = seller!{add: S, pay: end!}")
    assert len(subterms(s)) == 2
    assert s.tags == ("add", "pay")
    assert s.branch("add") == s


def test_carrier_type_has_two_nodes():
    assert len(subterms(parse_session_type("seller?ship.end?"))) == 2


def test_end_subterms():
    assert subterms(END_OUT) == frozenset({0})


def test_equirecursive_equality():
    x = parse_session_type("type X = p!{a: X}")
    y = parse_session_type("type Y = p!{a: p!{a: Y}}")
    assert x == y
    assert type_equal(x, y)
    assert unfold_equal(x, y)
    assert not type_equal(END_OUT, END_IN)


def test_builder_alias_cycle_is_unguarded():
    b = GraphBuilder()
    i = b.reserve("S")
    b.alias(i, i)
    with pytest.raises(UnguardedRecursion):
        b.build(i)


def test_builder_shares_nodes():
    b = GraphBuilder()
    root = b.reserve()
    end = b.add(EndNode(OUT))
    b.set(root, TagNode("q", OUT, (("a", root), ("b", end))))
    t = b.build(root)
    assert t == parse_session_type("type T = q!{a: T, b: end!}")


def test_commit_and_targets():
    s = parse_session_type("type S = seller!{add: carrier?x.S, pay: end!}")
    assert s.commit("pay") == parse_session_type("seller!pay.end!")
    assert targets(s) == {"seller", "carrier"}


def test_unfold_cut():
    s = parse_session_type("type S = q!a.S")
    assert unfold(s, 1) == ("tag", "q", "!", (("a", ...),))


def test_session_map_is_sorted_and_hashable():
    m = SessionMap({"q": END_OUT, "p": END_IN})
    assert list(m) == ["p", "q"]
    assert m == SessionMap([("p", END_IN), ("q", END_OUT)])
    assert hash(m) == hash(SessionMap({"p": END_IN, "q": END_OUT}))
    assert m.update(q=END_IN)["q"] == END_IN
    with pytest.raises(ValueError):
        m.union({"p": END_OUT})


def test_free_names_and_substitution():
    x, y = Var("x"), Var("y")
    p = Session(
        "s",
        (
            Participant("a", Wait(Endpoint("s", "a"), Call("F", (x,)))),
            Participant("b", Close(Endpoint("s", "b"))),
        ),
    )
    assert free_names(p) == {x}
    q = substitute(p, {x: y, Endpoint("s", "a"): Endpoint("t", "a")})
    assert free_names(q) == {y}
    assert q.participants[0].body.chan == Endpoint("s", "a")
    assert free_names(Done()) == frozenset()


@given(session_types(), session_types())
@settings(max_examples=300)
def test_type_equal_matches_unfolding_oracle(s, t):
    assert type_equal(s, t) == unfold_equal(s, t) == (s == t)


@given(session_types(), session_types(), session_types())
@settings(max_examples=200)
def test_type_equal_is_an_equivalence(s, t, u):
    assert type_equal(s, s)
    assert type_equal(s, t) == type_equal(t, s)
    if type_equal(s, t) and type_equal(t, u):
        assert type_equal(s, u)


@given(session_types(max_nodes=6))
def test_subterms_closed(s):
    for i in subterms(s):
        sub = s.at(i)
        for j in subterms(sub):
            assert any(sub.at(j) == s.at(k) for k in subterms(s))


@given(session_types(max_nodes=6))
def test_canonical_form_is_stable(s):
    from fmst.core import SessionType

    assert SessionType.canonical(s.nodes, 0) == s
    assert tag_type  # constructor exported
