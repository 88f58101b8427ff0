"""The labelled transition system of session maps and the analyses built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

from .core import (
    IN,
    OUT,
    ChannelNode,
    EndNode,
    GraphBuilder,
    Polarity,
    SessionMap,
    SessionType,
    TagNode,
    subterms,
    targets,
)
from .errors import PreconditionViolated
from .redsys import DEFAULT_CAP, ReductionSystem, StateGraph, backward_closure, explore, termination_distance


@dataclass(frozen=True)
class Tau:
    def __str__(self) -> str:
        return "τ"


TAU = Tau()


@dataclass(frozen=True)
class DoneAct:
    """``!✓`` or ``?✓``."""

    polarity: Polarity

    def __str__(self) -> str:
        return f"{self.polarity.value}✓"


@dataclass(frozen=True)
class TagAct:
    subject: str
    peer: str
    polarity: Polarity
    tag: str

    def complement(self) -> TagAct:
        return TagAct(self.peer, self.subject, self.polarity.complement(), self.tag)

    def __str__(self) -> str:
        return f"{self.subject}:{self.peer}{self.polarity.value}{self.tag}"


@dataclass(frozen=True)
class ChanAct:
    subject: str
    peer: str
    polarity: Polarity
    payload: SessionType

    def complement(self) -> ChanAct:
        return ChanAct(self.peer, self.subject, self.polarity.complement(), self.payload)

    def __str__(self) -> str:
        return f"{self.subject}:{self.peer}{self.polarity.value}({self.payload})"


Action = Union[DoneAct, TagAct, ChanAct]
Label = Union[Tau, DoneAct, TagAct, ChanAct]

IN_DONE = DoneAct(IN)
OUT_DONE = DoneAct(OUT)


def _single(role: str, s: SessionType) -> list[tuple[Label, SessionType]]:
    """Transitions of the one-role map ``{role: s}`` (rules l-end, l-channel, l-pick, l-tag)."""
    n = s.node
    if isinstance(n, EndNode):
        return [(DoneAct(n.polarity), s)]
    if isinstance(n, ChannelNode):
        return [(ChanAct(role, n.role, n.polarity, s.payload), s.continuation)]
    out: list[tuple[Label, SessionType]] = []
    if n.polarity is OUT:
        out.extend((TAU, s.commit(tag)) for tag in s.tags)
    out.extend((TagAct(role, n.role, n.polarity, tag), s.branch(tag)) for tag in s.tags)
    return out


def can_terminate(m: SessionMap) -> bool:
    """The l-terminate shape: exactly one role at ``end?``, all others at ``end!``."""
    ins = 0
    for t in m.values():
        n = t.node
        if not isinstance(n, EndNode):
            return False
        ins += n.polarity is IN
    return ins == 1


def transitions(m: SessionMap) -> list[tuple[Label, SessionMap]]:
    """Every derivable transition of ``m``, in a deterministic order."""
    if len(m) == 1:
        (role, s), = m.items()
        return [(lab, SessionMap({role: t})) for lab, t in _single(role, s)]
    out: list[tuple[Label, SessionMap]] = []
    if can_terminate(m):
        out.append((IN_DONE, m))
    for role, s in m.items():
        if s.is_tag and s.polarity is OUT:
            out.extend((TAU, m.update(**{role: s.commit(tag)})) for tag in s.tags)
    for sender, s in m.items():
        n = s.node
        if isinstance(n, EndNode) or n.polarity is IN or n.role == sender or n.role not in m:
            continue
        receiver = n.role
        r = m[receiver]
        rn = r.node
        if isinstance(rn, EndNode) or rn.polarity is OUT or rn.role != sender:
            continue
        if isinstance(n, TagNode) and isinstance(rn, TagNode):
            shared = [tag for tag in s.tags if tag in r.branches()]
            for tag in shared:
                out.append((TAU, m.replace({sender: s.branch(tag), receiver: r.branch(tag)})))
        elif isinstance(n, ChannelNode) and isinstance(rn, ChannelNode):
            if s.payload == r.payload:
                out.append((TAU, m.replace({sender: s.continuation, receiver: r.continuation})))
    return out


def tau_successors(m: SessionMap) -> list[SessionMap]:
    return [n for lab, n in transitions(m) if lab == TAU]


def _tau_system(cap: int) -> ReductionSystem[SessionMap]:
    return ReductionSystem(successors=tau_successors, is_goal=can_terminate, cap=cap)


def tau_graph(m: SessionMap, cap: int = DEFAULT_CAP) -> StateGraph[SessionMap]:
    """The τ-reachable state graph of ``m``; goals are states that can fire ``?✓``."""
    return explore(_tau_system(cap), m)


def coherent(m: SessionMap, cap: int = DEFAULT_CAP) -> bool:
    """Every τ-reachable state can still τ-reach a state that fires ``?✓``."""
    g = tau_graph(m, cap)
    return len(backward_closure(g, g.goals)) == len(g.states)


def session_rank(m: SessionMap, cap: int = DEFAULT_CAP) -> float:
    """Length of the shortest ``τ* ?✓`` sequence, counting the final step; ``inf`` if none."""
    d = termination_distance(_tau_system(cap), m)
    return d + 1 if d != math.inf else math.inf


def bounded(s: SessionType) -> bool:
    """From every continuation subterm some ``end`` leaf is reachable."""
    nodes = subterms(s, payloads=False)
    parents: dict[int, list[int]] = {i: [] for i in nodes}
    for i in nodes:
        n = s.nodes[i]
        kids = [c for _, c in n.branches] if isinstance(n, TagNode) else [n.cont] if isinstance(n, ChannelNode) else []
        for c in kids:
            parents[c].append(i)
    good = {i for i in nodes if isinstance(s.nodes[i], EndNode)}
    stack = list(good)
    while stack:
        for j in parents[stack.pop()]:
            if j not in good:
                good.add(j)
                stack.append(j)
    return len(good) == len(nodes)


def dual(p: str, s: SessionType, roles: Iterable[str]) -> SessionMap:
    """The canonical map over ``roles`` that completes ``p▷s`` into a coherent session.

    A message exchanged with peer ``q`` is answered by ``q``, which then forwards
    the chosen tag to every other role in sorted order; only ``min(roles)`` waits
    when ``s`` closes.
    """
    order = sorted(set(roles))
    if not order:
        raise PreconditionViolated("the role set must not be empty")
    if p in order:
        raise PreconditionViolated(f"role {p!r} must not belong to the dual's role set")
    missing = targets(s) - set(order)
    if missing:
        raise PreconditionViolated(f"peer roles {sorted(missing)} are not in the role set")
    if not bounded(s):
        raise PreconditionViolated("the type is not bounded")
    b = GraphBuilder()
    ids: dict[tuple[int, str], int] = {}
    work: list[tuple[int, str]] = []

    def node(i: int, r: str) -> int:
        if (i, r) not in ids:
            ids[(i, r)] = b.reserve()
            work.append((i, r))
        return ids[(i, r)]

    roots = {r: node(0, r) for r in order}
    while work:
        i, r = work.pop()
        me = ids[(i, r)]
        n = s.nodes[i]
        if isinstance(n, EndNode):
            closer = n.polarity is IN or r != order[0]
            b.set(me, EndNode(OUT if closer else IN))
        elif isinstance(n, TagNode):
            q = n.role
            if r == q:
                others = [x for x in order if x != q]
                kids = []
                for tag, c in n.branches:
                    tail = node(c, q)
                    for x in reversed(others):
                        tail = b.add(TagNode(x, OUT, ((tag, tail),)))
                    kids.append((tag, tail))
                b.set(me, TagNode(p, n.polarity.complement(), tuple(kids)))
            else:
                b.set(me, TagNode(q, IN, tuple((tag, node(c, r)) for tag, c in n.branches)))
        else:
            if r == n.role:
                b.set(me, ChannelNode(p, n.polarity.complement(), b.embed(s.at(n.payload)), node(n.cont, r)))
            else:
                b.alias(me, node(n.cont, r))
    return SessionMap({r: b.build(i) for r, i in roots.items()})


@dataclass(frozen=True)
class LtsReport:
    coherent: bool
    rank: float
    states: int
    transitions: int

    def as_json(self) -> dict:
        return {
            "coherent": self.coherent,
            "rank": None if self.rank == math.inf else int(self.rank),
            "states": self.states,
            "transitions": self.transitions,
        }


def analyse(m: SessionMap, cap: int = DEFAULT_CAP) -> LtsReport:
    g = tau_graph(m, cap)
    ok = len(backward_closure(g, g.goals)) == len(g.states)
    return LtsReport(ok, session_rank(m, cap), len(g.states), sum(len(v) for v in g.edges.values()))


def full_graph(m: SessionMap, cap: int = DEFAULT_CAP) -> tuple[StateGraph[SessionMap], dict]:
    """All transitions (not only τ) from ``m``, with edge labels for DOT export."""
    labels: dict[tuple, str] = {}

    def succ(state: SessionMap) -> list[SessionMap]:
        out = []
        for lab, nxt in transitions(state):
            key = (state, nxt)
            labels[key] = f"{labels[key]}, {lab}" if key in labels and str(lab) not in labels[key] else str(lab)
            out.append(nxt)
        return out

    g = explore(ReductionSystem(successors=succ, is_goal=can_terminate, cap=cap), m)
    return g, labels
