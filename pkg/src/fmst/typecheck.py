"""Type checking with corules and minimal-rank inference.

Checking a definition body is syntax directed and produces a *rank graph*: a
DAG of ``const``/``add``/``sum``/``max``/``min``/``call`` nodes mirroring the
rank arithmetic of the typing rules (``max`` for tag branches, ``min`` for
choices, ``1 + sum`` for sessions, ``m + ...`` for casts).  The same graph
decides the corule-based terminability check (tags and choices need one
terminable branch, sessions need all participants).

Ranks are the least solution of the graph equations with calls bound to the
callee's rank.  Infinite values are found exactly by a Büchi game (see
:func:`solve`), after which plain Kleene iteration on the finite part
terminates.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import (
    END_IN,
    END_OUT,
    IN,
    OUT,
    Call,
    Cast,
    Channel,
    ChanIn,
    ChanOut,
    Choice,
    Close,
    Definition,
    Done,
    Endpoint,
    Participant,
    Process,
    Program,
    Session,
    SessionMap,
    SessionType,
    TagBranch,
    Var,
    Wait,
    channel_type,
    free_names,
    tag_type,
)
from .errors import (
    ArityMismatch,
    BranchMismatch,
    ContextMismatch,
    DependsOnIllTyped,
    FmstError,
    IncoherentSession,
    InfiniteRank,
    LinearityViolation,
    MissingAnnotation,
    NoFiniteDerivation,
    NotASubtype,
    RankTooSmall,
    Span,
    StateCapExceeded,
    TypingError,
)
from .subtyping import analyse as analyse_subtyping
from .typelts import coherent

INF = math.inf

Context = Mapping[Channel, SessionType]


# rank graphs


@dataclass
class RankGraph:
    """Rank expressions shared by a whole program; node ids are list indices."""

    kinds: list[str] = field(default_factory=list)
    consts: list[float] = field(default_factory=list)
    kids: list[tuple[int, ...]] = field(default_factory=list)
    names: list[str | None] = field(default_factory=list)

    def _add(self, kind: str, const: float = 0, kids: tuple[int, ...] = (), name: str | None = None) -> int:
        self.kinds.append(kind)
        self.consts.append(const)
        self.kids.append(kids)
        self.names.append(name)
        return len(self.kinds) - 1

    def const(self, c: float) -> int:
        return self._add("const", c)

    def add(self, c: int, k: int) -> int:
        return k if c == 0 else self._add("add", c, (k,))

    def sum(self, ks: Sequence[int]) -> int:
        return self._add("sum", 0, tuple(ks))

    def max(self, ks: Sequence[int]) -> int:
        return ks[0] if len(ks) == 1 else self._add("max", 0, tuple(ks))

    def min(self, ks: Sequence[int]) -> int:
        return self._add("min", 0, tuple(ks))

    def call(self, name: str) -> int:
        return self._add("call", 0, (), name)

    def __len__(self) -> int:
        return len(self.kinds)


def _succ(g: RankGraph, v: int, roots: Mapping[str, int], fixed: Mapping[str, float]) -> tuple[int, ...]:
    if g.kinds[v] == "call":
        name = g.names[v]
        if name in fixed or name not in roots:
            return ()
        return (roots[name],)
    return g.kids[v]


def _leaf_value(g: RankGraph, v: int, roots: Mapping[str, int], fixed: Mapping[str, float]) -> float:
    """Value of nodes without successors."""
    if g.kinds[v] == "call":
        name = g.names[v]
        return fixed.get(name, INF) if name not in roots or name in fixed else 0
    return g.consts[v]


def solve(g: RankGraph, roots: Mapping[str, int], fixed: Mapping[str, float] | None = None) -> list[float]:
    """Least solution of the rank equations, with ``math.inf`` for divergence.

    ``roots`` maps definition names to the node of their body; calls to names in
    ``fixed`` take that value, calls to unknown names are infinite.

    A node is infinite iff the maximizer wins a Büchi game on the graph where
    the minimizer owns ``min`` nodes and every other node belongs to the
    maximizer. Accepting edges are those into ``add`` continuations with a
    positive constant, and those from a ``sum`` to one child when another child
    has a positive value (positivity is the Boolean abstraction of the least
    solution). Finite nodes are then solved by Kleene iteration.
    """
    fixed = dict(fixed or {})
    n = len(g)
    succ = [_succ(g, v, roots, fixed) for v in range(n)]

    # Boolean abstraction: value > 0.
    pos = [False] * n
    changed = True
    while changed:
        changed = False
        for v in range(n):
            if pos[v]:
                continue
            k = g.kinds[v]
            s = succ[v]
            if not s and k in ("const", "call"):
                new = _leaf_value(g, v, roots, fixed) > 0
            elif k == "add":
                new = g.consts[v] > 0 or pos[s[0]]
            elif k == "min":
                new = all(pos[c] for c in s)
            else:
                new = any(pos[c] for c in s)
            if new:
                pos[v] = True
                changed = True

    # Game arena: nodes 0..n-1 plus one extra accepting node per weighted edge.
    arena: list[list[int]] = [[] for _ in range(n)]
    owner_min = [g.kinds[v] == "min" for v in range(n)]
    accepting = [False] * n
    for v in range(n):
        k = g.kinds[v]
        s = succ[v]
        if not s and _leaf_value(g, v, roots, fixed) == INF:
            arena[v].append(v)
            accepting[v] = True
            continue
        for i, c in enumerate(s):
            weighted = (k == "add" and g.consts[v] > 0) or (
                k == "sum" and any(pos[d] for j, d in enumerate(s) if j != i)
            )
            if weighted:
                arena.append([c])
                owner_min.append(False)
                accepting.append(True)
                arena[v].append(len(arena) - 1)
            else:
                arena[v].append(c)
    infinite = _buchi_max(arena, owner_min, accepting)

    val = [INF if infinite[v] else 0 for v in range(n)]
    for _ in range(100 * n * n + 100):
        changed = False
        for v in range(n):
            if infinite[v]:
                continue
            k = g.kinds[v]
            s = succ[v]
            if not s and k in ("const", "call"):
                new = _leaf_value(g, v, roots, fixed)
            elif k == "add":
                new = g.consts[v] + val[s[0]]
            elif k == "sum":
                new = sum(val[c] for c in s)
            elif k == "max":
                new = max(val[c] for c in s)
            elif k == "min":
                new = min(val[c] for c in s)
            else:  # call
                new = val[s[0]]
            if new != val[v]:
                val[v] = new
                changed = True
        if not changed:
            return val
    raise AssertionError("rank iteration did not stabilize on the finite part")


def _attractor(arena, owner_min, alive, target, for_min: bool) -> set[int]:
    """Nodes (within ``alive``) from which the given player forces a visit to ``target``."""
    pred: dict[int, list[int]] = {v: [] for v in alive}
    for v in alive:
        for c in arena[v]:
            if c in alive:
                pred[c].append(v)
    count = {v: sum(1 for c in arena[v] if c in alive) for v in alive}
    attr = set(target)
    queue = deque(attr)
    while queue:
        c = queue.popleft()
        for v in pred[c]:
            if v in attr:
                continue
            mine = owner_min[v] == for_min
            if mine:
                attr.add(v)
                queue.append(v)
            else:
                count[v] -= 1
                if count[v] == 0:
                    attr.add(v)
                    queue.append(v)
    return attr


def _buchi_max(arena, owner_min, accepting) -> list[bool]:
    """Winning region of the maximizer for "visit accepting nodes infinitely often".

    Plays that reach a node without moves are won by the minimizer.
    """
    alive = set(range(len(arena)))
    while True:
        reach = _attractor(arena, owner_min, alive, {v for v in alive if accepting[v]}, for_min=False)
        escape = alive - reach
        lost = _attractor(arena, owner_min, alive, escape, for_min=True)
        if not lost:
            break
        alive -= lost
    return [v in alive for v in range(len(arena))]


def evaluate(g: RankGraph, root: int, sigma: Mapping[str, float]) -> float:
    """Value of an acyclic expression whose calls are bound by ``sigma``."""
    memo: dict[int, float] = {}

    def go(v: int) -> float:
        if v in memo:
            return memo[v]
        k = g.kinds[v]
        s = g.kids[v]
        if k == "const":
            r = g.consts[v]
        elif k == "call":
            r = sigma.get(g.names[v], INF)
        elif k == "add":
            r = g.consts[v] + go(s[0])
        elif k == "sum":
            r = sum(go(c) for c in s)
        elif k == "max":
            r = max(go(c) for c in s)
        else:
            r = min(go(c) for c in s)
        memo[v] = r
        return r

    return go(root)


def terminable(g: RankGraph, roots: Mapping[str, int]) -> list[bool]:
    """Corule reading: least set of nodes with a finite derivation."""
    n = len(g)
    ok = [False] * n
    changed = True
    while changed:
        changed = False
        for v in range(n):
            if ok[v]:
                continue
            k = g.kinds[v]
            s = g.kids[v]
            if k == "const":
                new = g.consts[v] != INF
            elif k == "call":
                r = roots.get(g.names[v])
                new = r is not None and ok[r]
            elif k in ("add", "sum"):
                new = all(ok[c] for c in s)
            else:  # max (co-tag) and min (co-choice) need one branch
                new = any(ok[c] for c in s)
            if new:
                ok[v] = True
                changed = True
    return ok


# the checker


@dataclass(frozen=True)
class Signature:
    """Entry of the global assignment: parameter types and rank (``None`` until known)."""

    params: tuple[SessionType, ...]
    rank: float | None = None


def _show(c: Channel) -> str:
    return str(c)


def _render(t: SessionType) -> str:
    from .parser import render_type

    return render_type(t).replace("\n", "; ")


class Checker:
    """Syntax-directed checking of process bodies against a global assignment."""

    def __init__(self, sigma: Mapping[str, Signature], graph: RankGraph | None = None, cap: int = 100_000):
        self.sigma = sigma
        self.graph = graph if graph is not None else RankGraph()
        self.cap = cap
        self.visited: list[tuple[int, Span | None]] = []  # (rank node, span) per syntax node
        self.calls: set[str] = set()

    # entry points

    def check(self, p: Process, ctx: Context) -> tuple[int, Process]:
        """Check ``ctx ⊢ p``; returns the rank node and ``p`` with session types filled in."""
        rid, q = self._check(p, dict(ctx))
        return rid, q

    def check_definition(self, d: Definition) -> tuple[int, Definition]:
        ctx: dict[Channel, SessionType] = {}
        for var, t in d.params:
            ctx[Var(var)] = t  # type: ignore[assignment]
        rid, body = self._check(d.body, ctx)
        return rid, Definition(d.name, d.params, d.rank, body, d.span)

    # rules

    def _check(self, p: Process, ctx: dict[Channel, SessionType]) -> tuple[int, Process]:
        rid, q = self._rule(p, ctx)
        self.visited.append((rid, p.span))
        return rid, q

    def _take(self, p: Process, ctx: dict, u: Channel) -> SessionType:
        if u not in ctx:
            raise LinearityViolation(f"channel {_show(u)} is not available here", p.span)
        return ctx[u]

    def _rule(self, p: Process, ctx: dict[Channel, SessionType]) -> tuple[int, Process]:
        g = self.graph
        if isinstance(p, Done):
            if ctx:
                raise LinearityViolation(f"unused channels at done: {', '.join(sorted(map(_show, ctx)))}", p.span)
            return g.const(0), p
        if isinstance(p, Close):
            t = self._take(p, ctx, p.chan)
            if t != END_OUT:
                raise ContextMismatch(f"close {_show(p.chan)} needs end!, the channel has type {_render(t)}", p.span)
            rest = [c for c in ctx if c != p.chan]
            if rest:
                raise LinearityViolation(f"unused channels at close: {', '.join(sorted(map(_show, rest)))}", p.span)
            return g.const(0), p
        if isinstance(p, Wait):
            t = self._take(p, ctx, p.chan)
            if t != END_IN:
                raise ContextMismatch(f"wait {_show(p.chan)} needs end?, the channel has type {_render(t)}", p.span)
            inner = {c: v for c, v in ctx.items() if c != p.chan}
            rid, cont = self._check(p.cont, inner)
            return rid, Wait(p.chan, cont, p.span)
        if isinstance(p, TagBranch):
            t = self._take(p, ctx, p.chan)
            if not t.is_tag or t.role != p.peer or t.polarity is not p.polarity:
                raise ContextMismatch(
                    f"{_show(p.chan)} {p.peer}{p.polarity.value}... does not match type {_render(t)}", p.span
                )
            if set(t.tags) != set(p.tags):
                raise BranchMismatch(
                    f"branches {{{', '.join(p.tags)}}} do not match the type's tags {{{', '.join(t.tags)}}} on {_show(p.chan)}",
                    p.span,
                )
            rids, branches = [], []
            for tag, q in p.branches:
                inner = dict(ctx)
                inner[p.chan] = t.branch(tag)
                rid, q2 = self._check(q, inner)
                rids.append(rid)
                branches.append((tag, q2))
            return g.max(rids), TagBranch(p.chan, p.peer, p.polarity, tuple(branches), p.span)
        if isinstance(p, ChanOut):
            t = self._take(p, ctx, p.chan)
            if not t.is_channel or t.role != p.peer or t.polarity is not OUT:
                raise ContextMismatch(f"{_show(p.chan)} cannot send a channel to {p.peer} at type {_render(t)}", p.span)
            if p.payload == p.chan:
                raise LinearityViolation(f"{_show(p.chan)} cannot be sent over itself", p.span)
            v = self._take(p, ctx, p.payload)
            if v != t.payload:
                raise ContextMismatch(
                    f"payload {_show(p.payload)} has type {_render(v)}, expected {_render(t.payload)}", p.span
                )
            inner = {c: s for c, s in ctx.items() if c != p.payload}
            inner[p.chan] = t.continuation
            rid, cont = self._check(p.cont, inner)
            return rid, ChanOut(p.chan, p.peer, p.payload, cont, p.span)
        if isinstance(p, ChanIn):
            t = self._take(p, ctx, p.chan)
            if not t.is_channel or t.role != p.peer or t.polarity is not IN:
                raise ContextMismatch(f"{_show(p.chan)} cannot receive a channel from {p.peer} at type {_render(t)}", p.span)
            x = Var(p.var)
            if x in ctx:
                raise LinearityViolation(f"variable {p.var} is already in use", p.span)
            inner = dict(ctx)
            inner[p.chan] = t.continuation
            inner[x] = t.payload
            rid, cont = self._check(p.cont, inner)
            return rid, ChanIn(p.chan, p.peer, p.var, cont, p.span)
        if isinstance(p, Choice):
            lr, left = self._check(p.left, dict(ctx))
            rr, right = self._check(p.right, dict(ctx))
            return g.min([lr, rr]), Choice(left, right, p.span)
        if isinstance(p, Cast):
            s = self._take(p, ctx, p.chan)
            target = p.target
            assert isinstance(target, SessionType)
            res = analyse_subtyping(s, target)
            if not res.fair:
                raise NotASubtype(
                    f"cast of {_show(p.chan)}: {_render(s)} is not a fair subtype of {_render(target)} ({res.reason})",
                    p.span,
                )
            inner = dict(ctx)
            inner[p.chan] = target
            rid, cont = self._check(p.cont, inner)
            return g.add(res.rank, rid), Cast(p.chan, target, cont, p.span)
        if isinstance(p, Session):
            return self._session(p, ctx)
        if isinstance(p, Call):
            sig = self.sigma.get(p.name)
            if sig is None:
                raise TypingError(f"no assignment for process {p.name}", p.span)
            if len(sig.params) != len(p.args):
                raise ArityMismatch(f"{p.name} expects {len(sig.params)} arguments, got {len(p.args)}", p.span)
            if len(set(p.args)) != len(p.args):
                raise LinearityViolation(f"a channel is passed twice to {p.name}", p.span)
            extra = [c for c in ctx if c not in p.args]
            if extra:
                raise LinearityViolation(
                    f"unused channels at call of {p.name}: {', '.join(sorted(map(_show, extra)))}", p.span
                )
            for a, want in zip(p.args, sig.params):
                have = self._take(p, ctx, a)
                if have != want:
                    raise ContextMismatch(
                        f"argument {_show(a)} of {p.name} has type {_render(have)}, expected {_render(want)}", p.span
                    )
            self.calls.add(p.name)
            return g.call(p.name), p
        raise TypeError(p)

    def _session(self, p: Session, ctx: dict[Channel, SessionType]) -> tuple[int, Process]:
        owners: dict[Channel, str] = {}
        fns = {}
        for part in p.participants:
            fns[part.role] = free_names(part.body)
            for c in fns[part.role]:
                if c in ctx:
                    if c in owners:
                        raise LinearityViolation(
                            f"{_show(c)} is used by both {owners[c]} and {part.role} in session {p.name}", p.span
                        )
                    owners[c] = part.role
        unused = [c for c in ctx if c not in owners]
        if unused:
            raise LinearityViolation(f"unused channels at session {p.name}: {', '.join(sorted(map(_show, unused)))}", p.span)
        types: dict[str, SessionType] = {}
        for part in p.participants:
            ep = Endpoint(p.name, part.role)
            local = {c: t for c, t in ctx.items() if owners.get(c) == part.role}
            if part.annotation is not None:
                assert isinstance(part.annotation, SessionType)
                types[part.role] = part.annotation
            else:
                types[part.role] = self.infer(part.body, ep, local)
        m = SessionMap(types)
        try:
            ok = coherent(m, cap=self.cap)
        except StateCapExceeded as e:
            raise IncoherentSession(f"coherence of session {p.name} not decided: {e.message}", p.span) from None
        if not ok:
            from .parser import render_map

            raise IncoherentSession(f"session {p.name} is not coherent: {render_map(m)}", p.span)
        rids, parts = [], []
        for part in p.participants:
            ep = Endpoint(p.name, part.role)
            local = {c: t for c, t in ctx.items() if owners.get(c) == part.role}
            local[ep] = types[part.role]
            rid, body = self._check(part.body, local)
            rids.append(rid)
            parts.append(Participant(part.role, body, types[part.role], part.span))
        return self.graph.add(1, self.graph.sum(rids)), Session(p.name, tuple(parts), p.span)

    # endpoint type synthesis

    def infer(self, p: Process, c: Channel, env: Mapping[Channel, SessionType]) -> SessionType:
        """The type at which ``p`` uses ``c``, given the current types of other channels."""
        if c not in free_names(p):
            raise LinearityViolation(f"{_show(c)} is never used", p.span)
        env = {k: v for k, v in env.items() if k != c}

        def drop(e, *keys):
            return {k: v for k, v in e.items() if k not in keys}

        if isinstance(p, Close):
            return END_OUT
        if isinstance(p, Wait):
            if p.chan == c:
                return END_IN
            return self.infer(p.cont, c, drop(env, p.chan))
        if isinstance(p, TagBranch):
            if p.chan == c:
                return tag_type(p.peer, p.polarity, {tag: self.infer(q, c, env) for tag, q in p.branches})
            t = env.get(p.chan)
            found = []
            for tag, q in p.branches:
                inner = drop(env, p.chan)
                if t is not None and t.is_tag and tag in t.tags:
                    inner[p.chan] = t.branch(tag)
                found.append(self.infer(q, c, inner))
            return self._agree(found, c, p.span)
        if isinstance(p, ChanOut):
            if p.chan == c:
                u = env.get(p.payload)
                if u is None:
                    raise MissingAnnotation(f"type of {_show(p.payload)} sent on {_show(c)} is unknown; annotate the participant", p.span)
                return channel_type(p.peer, OUT, u, self.infer(p.cont, c, drop(env, p.payload)))
            if p.payload == c:
                t = env.get(p.chan)
                if t is None or not t.is_channel:
                    raise MissingAnnotation(f"type of {_show(c)} delegated on {_show(p.chan)} is unknown; annotate the participant", p.span)
                return t.payload
            inner = drop(env, p.payload)
            t = env.get(p.chan)
            if t is not None and t.is_channel:
                inner[p.chan] = t.continuation
            return self.infer(p.cont, c, inner)
        if isinstance(p, ChanIn):
            x = Var(p.var)
            if p.chan == c:
                u = self.infer(p.cont, x, env)
                return channel_type(p.peer, IN, u, self.infer(p.cont, c, {**env, x: u}))
            inner = drop(env, p.chan)
            t = env.get(p.chan)
            if t is not None and t.is_channel:
                inner[p.chan] = t.continuation
                inner[x] = t.payload
            return self.infer(p.cont, c, inner)
        if isinstance(p, Choice):
            return self._agree([self.infer(p.left, c, env), self.infer(p.right, c, env)], c, p.span)
        if isinstance(p, Cast):
            if p.chan == c:
                raise MissingAnnotation(f"{_show(c)} is cast before use; annotate the participant", p.span)
            inner = dict(env)
            assert isinstance(p.target, SessionType)
            inner[p.chan] = p.target
            return self.infer(p.cont, c, inner)
        if isinstance(p, Session):
            for part in p.participants:
                if c in free_names(part.body):
                    inner = dict(env)
                    if part.annotation is not None:
                        inner[Endpoint(p.name, part.role)] = part.annotation  # type: ignore[assignment]
                    return self.infer(part.body, c, inner)
        if isinstance(p, Call):
            sig = self.sigma.get(p.name)
            if sig is None or len(sig.params) != len(p.args):
                raise ArityMismatch(f"cannot use {p.name} to determine the type of {_show(c)}", p.span)
            return sig.params[p.args.index(c)]
        raise LinearityViolation(f"{_show(c)} is never used", p.span)

    def _agree(self, found: list[SessionType], c: Channel, span) -> SessionType:
        if any(t != found[0] for t in found):
            raise MissingAnnotation(f"{_show(c)} is used at different types in different branches; annotate the participant", span)
        return found[0]


# programs


@dataclass
class DefinitionReport:
    name: str
    well_typed: bool
    rank: float | None  # the rank in the global assignment
    inferred_rank: float | None  # minimal rank from the least fixpoint
    declared_rank: int | None
    errors: list[FmstError] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def as_json(self) -> dict:
        def num(x):
            if x is None:
                return None
            return "inf" if x == INF else int(x)

        return {
            "name": self.name,
            "well_typed": self.well_typed,
            "rank": num(self.rank),
            "inferred_rank": num(self.inferred_rank),
            "declared_rank": self.declared_rank,
            "errors": [
                {"kind": e.kind, "message": e.message, "span": None if e.span is None else str(e.span)}
                for e in self.errors
            ],
            "warnings": list(self.warnings),
        }


@dataclass
class CheckReport:
    definitions: dict[str, DefinitionReport]
    program: Program  # with synthesized session types filled in
    sigma: dict[str, Signature]

    @property
    def ok(self) -> bool:
        return all(r.well_typed for r in self.definitions.values())

    def rank(self, name: str) -> float | None:
        return self.definitions[name].rank

    def as_json(self) -> dict:
        return {"ok": self.ok, "definitions": [r.as_json() for r in self.definitions.values()]}


def _first(nodes: list[tuple[int, Span | None]], bad) -> tuple[int, Span | None] | None:
    for rid, span in reversed(nodes):  # visited post-order; reversed puts outer nodes first
        if bad(rid):
            return rid, span
    return None


def check_program(prog: Program, cap: int = 100_000) -> CheckReport:
    """Check every definition: coinductive rules, corule terminability, ranks."""
    base = {d.name: Signature(d.param_types) for d in prog.definitions}
    graph = RankGraph()
    roots: dict[str, int] = {}
    visited: dict[str, list[tuple[int, Span | None]]] = {}
    calls: dict[str, set[str]] = {}
    errors: dict[str, list[FmstError]] = {d.name: [] for d in prog.definitions}
    elaborated: dict[str, Definition] = {}

    # (a) coinductive rules
    for d in prog.definitions:
        ch = Checker(base, graph, cap)
        try:
            rid, ed = ch.check_definition(d)
        except TypingError as e:
            errors[d.name].append(e)
            elaborated[d.name] = d
            continue
        roots[d.name] = rid
        visited[d.name] = ch.visited
        calls[d.name] = ch.calls
        elaborated[d.name] = ed

    # dependencies on ill-typed definitions
    bad = {n for n, es in errors.items() if es}
    changed = True
    while changed:
        changed = False
        for name, cs in calls.items():
            if name in bad:
                continue
            hit = sorted(cs & bad)
            if hit:
                errors[name].append(DependsOnIllTyped(f"calls ill-typed {', '.join(hit)}", prog.definition(name).span))
                bad.add(name)
                changed = True
    live = {n: r for n, r in roots.items() if n not in bad}

    # (b) corules: every judgment needs a finite derivation
    term = terminable(graph, live)
    for name in live:
        hit = _first(visited[name], lambda rid: not term[rid])
        if hit is not None:
            errors[name].append(NoFiniteDerivation(f"{name} has no finite derivation", hit[1] or prog.definition(name).span))
            bad.add(name)

    # (c) ranks: free least fixpoint, then the declared assignment
    free_vals = solve(graph, live)
    inferred = {n: free_vals[r] for n, r in live.items()}
    for name in list(live):
        if name in bad:
            continue
        hit = _first(visited[name], lambda rid: free_vals[rid] == INF)
        if hit is not None:
            errors[name].append(InfiniteRank(f"{name} cannot be given a finite rank", hit[1] or prog.definition(name).span))
            bad.add(name)

    declared = {d.name: d.rank for d in prog.definitions if d.rank is not None}
    warnings: dict[str, list[str]] = {d.name: [] for d in prog.definitions}
    for name, r in declared.items():
        if name in bad:
            continue
        if r < inferred[name]:
            errors[name].append(
                RankTooSmall(f"declared rank {r} is below the minimal rank {int(inferred[name])}", prog.definition(name).span)
            )
            bad.add(name)
        elif r > inferred[name]:
            warnings[name].append(f"declared rank {r} exceeds the minimal rank {int(inferred[name])}")
    fixed = {n: float(r) for n, r in declared.items() if n in live}
    final_vals = solve(graph, live, fixed)
    sigma_rank: dict[str, float] = {}
    for name in live:
        sigma_rank[name] = fixed[name] if name in fixed else final_vals[live[name]]
    for name, r in fixed.items():
        if name in bad:
            continue
        body = final_vals[live[name]]
        if body > r:
            errors[name].append(
                RankTooSmall(f"declared rank {int(r)} is below the body's rank {body} under the declared ranks", prog.definition(name).span)
            )
            bad.add(name)

    # dependencies again, after (b) and (c)
    changed = True
    while changed:
        changed = False
        for name, cs in calls.items():
            if name in bad:
                continue
            hit = sorted(cs & bad)
            if hit:
                errors[name].append(DependsOnIllTyped(f"calls ill-typed {', '.join(hit)}", prog.definition(name).span))
                bad.add(name)
                changed = True

    reports = {}
    sigma = {}
    for d in prog.definitions:
        ok = d.name not in bad
        rank = sigma_rank.get(d.name) if ok else None
        reports[d.name] = DefinitionReport(
            d.name,
            ok,
            rank,
            inferred.get(d.name),
            d.rank,
            errors[d.name],
            warnings[d.name],
        )
        sigma[d.name] = Signature(d.param_types, rank)
    elab = Program(prog.types, tuple(elaborated[d.name] for d in prog.definitions), prog.maps)
    return CheckReport(reports, elab, sigma)


def check_term(p: Process, ctx: Context, sigma: Mapping[str, Signature], cap: int = 100_000) -> tuple[float, Process]:
    """Check ``ctx ⊢ p`` against a fixed assignment; returns the minimal rank.

    Every subterm must be terminable and have finite rank; raises otherwise.
    """
    graph = RankGraph()
    ch = Checker(sigma, graph, cap)
    rid, q = ch.check(p, ctx)
    ranks = {n: s.rank for n, s in sigma.items() if s.rank is not None}
    roots: dict[str, int] = {}
    for name in ch.calls:
        if name not in ranks:
            raise DependsOnIllTyped(f"calls {name}, which has no finite rank", p.span)
    value = evaluate(graph, rid, ranks)
    for v, span in ch.visited:
        if evaluate(graph, v, ranks) == INF:
            raise InfiniteRank("a subterm has infinite rank", span)
    ok = terminable(graph, {**roots, **{n: graph.const(0) for n in ranks}})
    hit = _first(ch.visited, lambda v: not ok[v])
    if hit is not None:
        raise NoFiniteDerivation("a subterm has no finite derivation", hit[1])
    return value, q
