"""Finite reduction systems: reachability, weak and fair termination, distances.

Fair termination is decided through its characterization as "every reachable
state is weakly terminating"; runs are never enumerated.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Generic, Hashable, Iterable, TypeVar

from .errors import StateCapExceeded

S = TypeVar("S")

DEFAULT_CAP = 1_000_000


@dataclass
class ReductionSystem(Generic[S]):
    """A reduction relation given by a deterministic successor function.

    ``is_goal`` defaults to "has no successors"; analyses that care about a
    different success condition (for example a ``?✓`` transition) override it.
    """

    successors: Callable[[S], Iterable[S]]
    key: Callable[[S], Hashable] = lambda s: s
    is_goal: Callable[[S], bool] | None = None
    cap: int = DEFAULT_CAP


@dataclass
class StateGraph(Generic[S]):
    """The explored part of a reduction system, indexed by state key."""

    root: Hashable
    states: dict[Hashable, S] = field(default_factory=dict)
    edges: dict[Hashable, list[Hashable]] = field(default_factory=dict)
    goals: set[Hashable] = field(default_factory=set)

    def predecessors(self) -> dict[Hashable, list[Hashable]]:
        pred: dict[Hashable, list[Hashable]] = {k: [] for k in self.states}
        for k, succ in self.edges.items():
            for j in succ:
                pred[j].append(k)
        return pred


def explore(rs: ReductionSystem[S], c: S) -> StateGraph[S]:
    """Breadth-first exploration of everything reachable from ``c``."""
    root = rs.key(c)
    g: StateGraph[S] = StateGraph(root)
    g.states[root] = c
    queue = deque([c])
    while queue:
        s = queue.popleft()
        k = rs.key(s)
        succ = []
        for t in rs.successors(s):
            kt = rs.key(t)
            succ.append(kt)
            if kt not in g.states:
                if len(g.states) >= rs.cap:
                    raise StateCapExceeded(rs.cap)
                g.states[kt] = t
                queue.append(t)
        g.edges[k] = succ
        goal = rs.is_goal(s) if rs.is_goal is not None else not succ
        if goal:
            g.goals.add(k)
    return g


def backward_closure(g: StateGraph, targets: Iterable[Hashable]) -> set[Hashable]:
    """States of ``g`` from which some state in ``targets`` is reachable."""
    pred = g.predecessors()
    seen = set(targets)
    queue = deque(seen)
    while queue:
        k = queue.popleft()
        for j in pred[k]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return seen


def reachable(rs: ReductionSystem[S], c: S) -> list[S]:
    """All states reachable from ``c`` (including ``c``), in BFS order."""
    return list(explore(rs, c).states.values())


def weakly_terminating(rs: ReductionSystem[S], c: S) -> bool:
    return bool(explore(rs, c).goals)


def fairly_terminating(rs: ReductionSystem[S], c: S) -> bool:
    g = explore(rs, c)
    return len(backward_closure(g, g.goals)) == len(g.states)


def termination_distance(rs: ReductionSystem[S], c: S) -> float:
    """Length of a shortest path to a goal state; ``math.inf`` if there is none."""
    root = rs.key(c)
    dist = {root: 0}
    queue = deque([c])
    while queue:
        s = queue.popleft()
        k = rs.key(s)
        succ = list(rs.successors(s))
        goal = rs.is_goal(s) if rs.is_goal is not None else not succ
        if goal:
            return dist[k]
        for t in succ:
            kt = rs.key(t)
            if kt not in dist:
                if len(dist) >= rs.cap:
                    raise StateCapExceeded(rs.cap)
                dist[kt] = dist[k] + 1
                queue.append(t)
    return math.inf


def is_terminating(rs: ReductionSystem[S], c: S) -> bool:
    """True iff no infinite run exists (the explored graph is acyclic)."""
    g = explore(rs, c)
    indeg = {k: 0 for k in g.states}
    for succ in g.edges.values():
        for j in succ:
            indeg[j] += 1
    queue = deque(k for k, d in indeg.items() if d == 0)
    removed = 0
    while queue:
        k = queue.popleft()
        removed += 1
        for j in g.edges[k]:
            indeg[j] -= 1
            if indeg[j] == 0:
                queue.append(j)
    return removed == len(g.states)


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def to_dot(
    g: StateGraph,
    label: Callable[[Hashable], str] = str,
    edge_labels: dict[tuple[Hashable, Hashable], str] | None = None,
) -> str:
    """GraphViz rendering; state ids follow exploration order."""
    ids = {k: i for i, k in enumerate(g.states)}
    lines = ["digraph lts {", "  node [shape=box];"]
    for k, i in ids.items():
        attrs = f'label="{_dot_escape(label(k))}"'
        if k == g.root:
            attrs += ", style=bold"
        if k in g.goals:
            attrs += ", peripheries=2"
        lines.append(f"  s{i} [{attrs}];")
    for k, succ in g.edges.items():
        for j in succ:
            extra = ""
            if edge_labels and (k, j) in edge_labels:
                extra = f' [label="{_dot_escape(edge_labels[(k, j)])}"]'
            lines.append(f"  s{ids[k]} -> s{ids[j]}{extra};")
    lines.append("}")
    return "\n".join(lines) + "\n"
