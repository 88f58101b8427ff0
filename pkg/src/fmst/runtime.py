"""Operational semantics: flat configurations, reduction, the measure and schedulers.

A configuration is the normal form of a closed process up to structural
precongruence: every live session is restricted at top level, so a
configuration is a set of session maps (the current types of all endpoints)
together with a multiset of threads.  ``normalize`` applies the directed
precongruence rules: calls are unfolded, casts on endpoints are performed by
updating the session map, ``new`` blocks spawn their participants under a
fresh session name ``s#k`` and ``done`` threads disappear.
"""

from __future__ import annotations

import math
import random
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator

from .core import (
    OUT,
    Call,
    Cast,
    ChanIn,
    ChanOut,
    Choice,
    Close,
    Done,
    Endpoint,
    Process,
    Program,
    Session,
    SessionMap,
    SessionType,
    TagBranch,
    Var,
    Wait,
    free_names,
    rename_session,
    substitute,
)
from .errors import FmstError, InternalStuck, NotTyped, PreconditionViolated, StateCapExceeded
from .typecheck import CheckReport, Signature, check_program, check_term
from .typelts import coherent, session_rank

Measure = tuple[float, float]


@dataclass(frozen=True)
class Config:
    """Live sessions (sorted by name) and threads (sorted by rendering)."""

    sessions: tuple[tuple[str, SessionMap], ...]
    threads: tuple[Process, ...]
    counter: int = field(default=0, compare=False)

    @property
    def session_map(self) -> dict[str, SessionMap]:
        return dict(self.sessions)

    @property
    def terminated(self) -> bool:
        return not self.threads and not self.sessions

    def __str__(self) -> str:
        from .parser import render_map, render_process

        if not self.threads:
            return "done"
        parts = [render_process(t) for t in self.threads]
        sess = ", ".join(f"{n} = {render_map(m)}" for n, m in self.sessions)
        return " | ".join(parts) + (f"   [{sess}]" if sess else "")


@dataclass(frozen=True)
class Step:
    rule: str
    description: str
    target: Config


def _thread_key(p: Process) -> str:
    from .parser import render_process

    return render_process(p)


def _make(sessions: dict[str, SessionMap], threads: list[Process], counter: int) -> Config:
    return Config(
        tuple(sorted(sessions.items())),
        tuple(sorted(threads, key=_thread_key)),
        counter,
    )


_SESSION = re.compile(r"[A-Za-z_][A-Za-z0-9_']*#[0-9]+")


def _base(name: str) -> str:
    return name.split("#", 1)[0]


class Machine:
    """Reduction semantics for the closed processes of a checked program."""

    def __init__(self, program: Program, report: CheckReport | None = None, macro: bool = False):
        self.report = report if report is not None else check_program(program)
        self.program = self.report.program
        self.defs = {d.name: d for d in self.program.definitions}
        self.sigma: dict[str, Signature] = self.report.sigma
        self.macro = macro
        self._rank_memo: dict[tuple, float] = {}
        self._map_rank: dict[SessionMap, float] = {}
        self._text: dict[Process, str] = {}

    # configurations

    def initial(self, entry: str) -> Config:
        rep = self.report.definitions.get(entry)
        if rep is None:
            raise PreconditionViolated(f"no definition named {entry}")
        if not rep.well_typed:
            raise NotTyped(f"{entry} is not well typed")
        if self.defs[entry].params:
            raise PreconditionViolated(f"{entry} must not take parameters to be run")
        return self.normalize({}, [Call(entry, ())], 0)

    def normalize(self, sessions: dict[str, SessionMap], threads: list[Process], counter: int) -> Config:
        sessions = dict(sessions)
        work = list(threads)
        out: list[Process] = []
        while work:
            p = work.pop()
            if isinstance(p, Done):
                continue
            if isinstance(p, Call):
                d = self.defs[p.name]
                sub = {Var(x): a for (x, _), a in zip(d.params, p.args)}
                work.append(substitute(d.body, sub))
            elif isinstance(p, Cast) and isinstance(p.chan, Endpoint):
                ep = p.chan
                assert isinstance(p.target, SessionType)
                sessions[ep.session] = sessions[ep.session].update(**{ep.role: p.target})
                work.append(p.cont)
            elif isinstance(p, Session):
                name = f"{_base(p.name)}#{counter}"
                counter += 1
                types = {}
                for part in p.participants:
                    if part.annotation is None:
                        raise NotTyped(f"session {p.name} has no participant types")
                    types[part.role] = part.annotation
                    work.append(rename_session(part.body, p.name, name))
                sessions[name] = SessionMap(types)
            else:
                out.append(p)
        return _make(sessions, out, counter)

    # reductions

    def steps(self, c: Config) -> list[Step]:
        """All reductions enabled in ``c``, in a deterministic order."""
        out: list[Step] = []
        threads = list(c.threads)
        sessions = c.session_map
        owner: dict[Endpoint, int] = {}
        for i, t in enumerate(threads):
            h = _head(t)
            if h is not None:
                owner[h] = i

        def rest(*skip: int) -> list[Process]:
            return [t for j, t in enumerate(threads) if j not in skip]

        for i, t in enumerate(threads):
            if isinstance(t, Choice):
                for side, q in (("left", t.left), ("right", t.right)):
                    out.append(Step("r-choice", f"{side} branch", self.normalize(sessions, rest(i) + [q], c.counter)))
            elif isinstance(t, TagBranch) and t.polarity is OUT and len(t.branches) > 1 and not self.macro:
                ep = t.chan
                for tag, q in t.branches:
                    s2 = dict(sessions)
                    s2[ep.session] = sessions[ep.session].update(**{ep.role: sessions[ep.session][ep.role].commit(tag)})
                    picked = TagBranch(ep, t.peer, OUT, ((tag, q),), t.span)
                    out.append(Step("r-pick", f"{ep} picks {tag}", self.normalize(s2, rest(i) + [picked], c.counter)))
            elif isinstance(t, TagBranch) and t.polarity is OUT:
                ep = t.chan
                j = owner.get(Endpoint(ep.session, t.peer))
                if j is None:
                    continue
                r = threads[j]
                if not (isinstance(r, TagBranch) and r.polarity is not OUT and r.peer == ep.role):
                    continue
                received = dict(r.branches)
                for tag, q in t.branches:
                    if tag not in received:
                        continue
                    m = sessions[ep.session]
                    m2 = m.replace({ep.role: m[ep.role].branch(tag), t.peer: m[t.peer].branch(tag)})
                    s2 = dict(sessions)
                    s2[ep.session] = m2
                    rule = "r-tag" if len(t.branches) == 1 else "r-pick+r-tag"
                    out.append(
                        Step(rule, f"{ep} sends {tag} to {t.peer}", self.normalize(s2, rest(i, j) + [q, received[tag]], c.counter))
                    )
            elif isinstance(t, ChanOut):
                ep = t.chan
                j = owner.get(Endpoint(ep.session, t.peer))
                if j is None:
                    continue
                r = threads[j]
                if not (isinstance(r, ChanIn) and r.peer == ep.role):
                    continue
                m = sessions[ep.session]
                m2 = m.replace({ep.role: m[ep.role].continuation, t.peer: m[t.peer].continuation})
                s2 = dict(sessions)
                s2[ep.session] = m2
                q = substitute(r.cont, {Var(r.var): t.payload})
                out.append(
                    Step("r-channel", f"{ep} sends {t.payload} to {t.peer}", self.normalize(s2, rest(i, j) + [t.cont, q], c.counter))
                )
            elif isinstance(t, Wait):
                ep = t.chan
                m = sessions[ep.session]
                closers = []
                for role in m:
                    if role == ep.role:
                        continue
                    j = owner.get(Endpoint(ep.session, role))
                    if j is None or not isinstance(threads[j], Close):
                        break
                    closers.append(j)
                else:
                    s2 = {k: v for k, v in sessions.items() if k != ep.session}
                    out.append(
                        Step("r-signal", f"session {ep.session} terminates", self.normalize(s2, rest(i, *closers) + [t.cont], c.counter))
                    )
        return out

    # measure and typing

    def thread_rank(self, t: Process, sessions: dict[str, SessionMap]) -> float:
        ctx = {}
        for c in free_names(t):
            if not isinstance(c, Endpoint) or c.session not in sessions:
                raise NotTyped(f"thread uses unknown channel {c}")
            ctx[c] = sessions[c.session][c.role]
        key = (t, tuple(sorted(ctx.items())))
        r = self._rank_memo.get(key)
        if r is None:
            try:
                r, _ = check_term(t, ctx, self.sigma)
            except FmstError as e:
                raise NotTyped(f"thread is not well typed: {e}") from e
            self._rank_memo[key] = r
        return r

    def measure(self, c: Config) -> Measure:
        """``(sum of thread ranks, sum of session map ranks)``."""
        sessions = c.session_map
        future = sum(self.thread_rank(t, sessions) for t in c.threads)
        past = 0.0
        for m in sessions.values():
            r = self._map_rank.get(m)
            if r is None:
                r = self._map_rank[m] = session_rank(m)
            past += r
        return (future, past)

    def check_config(self, c: Config) -> None:
        """Re-type a configuration: linear endpoint ownership, coherent sessions, typed threads."""
        sessions = c.session_map
        used: dict[Endpoint, int] = {}
        for i, t in enumerate(c.threads):
            for ch in free_names(t):
                if not isinstance(ch, Endpoint):
                    raise NotTyped(f"free variable {ch} in a running thread")
                if ch in used:
                    raise NotTyped(f"endpoint {ch} is owned by two threads")
                used[ch] = i
        for name, m in sessions.items():
            for role in m:
                if Endpoint(name, role) not in used:
                    raise NotTyped(f"endpoint {name}[{role}] is not owned by any thread")
            if not coherent(m):
                raise NotTyped(f"session {name} is not coherent")
        for t in c.threads:
            if self.thread_rank(t, sessions) == math.inf:
                raise NotTyped("a thread has infinite rank")

    # exploration

    def key(self, c: Config) -> tuple:
        """Canonical key: sessions renamed in order of first occurrence."""
        texts = []
        for t in c.threads:
            x = self._text.get(t)
            if x is None:
                x = self._text[t] = _thread_key(t)
            texts.append(x)
        names: dict[str, str] = {}
        for x in texts:
            for n in _SESSION.findall(x):
                names.setdefault(n, f"#{len(names)}")
        threads = tuple(sorted(_SESSION.sub(lambda mo: names[mo.group(0)], x) for x in texts))
        sessions = tuple(sorted((names.get(n, n), m) for n, m in c.sessions))
        return (threads, sessions)

    def explore(self, c: Config, limit: int) -> tuple[list[Config], bool]:
        """Breadth-first states reachable from ``c``; the flag tells whether the space was exhausted."""
        seen = {self.key(c): c}
        queue = deque([c])
        while queue:
            s = queue.popleft()
            for st in self.steps(s):
                k = self.key(st.target)
                if k not in seen:
                    if len(seen) >= limit:
                        return list(seen.values()), False
                    seen[k] = st.target
                    queue.append(st.target)
        return list(seen.values()), True

    def helpful_path(self, c: Config, cap: int = 100_000) -> list[Step]:
        """A shortest reduction sequence to ``done`` or to a strictly smaller measure."""
        mu = self.measure(c)
        start = self.key(c)
        parent: dict[tuple, tuple[tuple, Step] | None] = {start: None}
        queue = deque([c])
        while queue:
            s = queue.popleft()
            sk = self.key(s)
            for st in self.steps(s):
                k = self.key(st.target)
                if k in parent:
                    continue
                parent[k] = (sk, st)
                if st.target.terminated or self.measure(st.target) < mu:
                    path = []
                    cur: tuple | None = k
                    while parent[cur] is not None:
                        prev, step = parent[cur]
                        path.append(step)
                        cur = prev
                    return path[::-1]
                if len(parent) >= cap:
                    raise StateCapExceeded(cap)
                queue.append(st.target)
        raise InternalStuck(f"no reduction towards termination from {c}")


def _head(p: Process) -> Endpoint | None:
    if isinstance(p, (Close, Wait, TagBranch, ChanOut, ChanIn)) and isinstance(p.chan, Endpoint):
        return p.chan
    return None


# simulation


@dataclass(frozen=True)
class TraceEntry:
    rule: str
    description: str
    state: str
    measure: Measure | None = None


@dataclass
class Trace:
    outcome: str  # "Terminated", "MaxSteps" or "Stuck"
    entries: list[TraceEntry]
    initial_measure: Measure | None = None

    @property
    def steps(self) -> int:
        return len(self.entries)

    def as_json_lines(self) -> Iterator[dict]:
        for i, e in enumerate(self.entries):
            d = {"step": i + 1, "rule": e.rule, "redex": e.description, "state": e.state}
            if e.measure is not None:
                d["measure"] = [_num(x) for x in e.measure]
            yield d
        yield {"outcome": self.outcome, "steps": self.steps}


def _num(x: float):
    return "inf" if x == math.inf else int(x)


def simulate(
    program: Program,
    entry: str,
    scheduler: str = "guided",
    seed: int = 0,
    max_steps: int = 10_000,
    macro: bool = False,
    recheck: bool = False,
    machine: Machine | None = None,
) -> Trace:
    """Run ``entry`` to completion (or ``max_steps`` reductions).

    The guided scheduler follows, at each macro-step, a shortest reduction
    sequence reaching ``done`` or a strictly smaller measure; it raises
    ``InternalStuck`` if none exists.  The random scheduler picks uniformly.
    With ``recheck`` every visited configuration is re-typed.
    """
    m = machine if machine is not None else Machine(program, macro=macro)
    c = m.initial(entry)
    rng = random.Random(seed)
    entries: list[TraceEntry] = []
    guided = scheduler == "guided"
    if scheduler not in ("guided", "random"):
        raise PreconditionViolated(f"unknown scheduler {scheduler!r}")
    mu0 = m.measure(c) if guided else None
    if recheck:
        m.check_config(c)
    while not c.terminated:
        if len(entries) >= max_steps:
            return Trace("MaxSteps", entries, mu0)
        if guided:
            before = m.measure(c)
            path = m.helpful_path(c)
            for st in path[:-1]:
                entries.append(TraceEntry(st.rule, st.description, str(st.target)))
                if recheck:
                    m.check_config(st.target)
            last = path[-1]
            c = last.target
            after = m.measure(c)
            if not (c.terminated or after < before):
                raise InternalStuck("the measure did not decrease")
            entries.append(TraceEntry(last.rule, last.description, str(c), after))
        else:
            options = m.steps(c)
            if not options:
                return Trace("Stuck", entries, mu0)
            st = rng.choice(options)
            c = st.target
            entries.append(TraceEntry(st.rule, st.description, str(c)))
        if recheck:
            m.check_config(c)
    return Trace("Terminated", entries, mu0)
