"""Surface syntax: lexer, recursive-descent parser, resolution and rendering.

Parsing produces a raw :class:`~fmst.core.Program` whose type annotations are
:class:`~fmst.core.TypeRef` expressions; :func:`resolve_and_validate` turns
them into canonical :class:`~fmst.core.SessionType` graphs and checks the
static well-formedness conditions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .core import (
    Call,
    Cast,
    ChannelNode,
    ChanIn,
    ChanOut,
    Choice,
    Close,
    Definition,
    Done,
    Endpoint,
    EndNode,
    GraphBuilder,
    Participant,
    Polarity,
    Process,
    Program,
    Session,
    SessionMap,
    SessionType,
    TagBranch,
    TagNode,
    TypeRef,
    Var,
    Wait,
    free_names,
)
from .errors import (
    DuplicateDefinition,
    DuplicateName,
    DuplicateRole,
    DuplicateTag,
    FmstError,
    ParseError,
    ScopeError,
    Span,
    UnknownDefinition,
    UnknownTypeName,
)

KEYWORDS = frozenset({"type", "def", "done", "close", "wait", "cast", "new", "map", "end"})

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r\n]+|//[^\n]*)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_']*)"
    r"|(?P<nat>[0-9]+)"
    r"|(?P<sym><\+>|[{}()\[\],:.=|!?])"
)


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "nat", "sym", "eof"
    text: str
    line: int
    column: int

    def span(self, path: str | None) -> Span:
        return Span(self.line, self.column, self.line, self.column + max(len(self.text), 1), path)


def tokenize(text: str, path: str | None = None) -> list[Token]:
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", Span(line, col, line, col + 1, path))
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(Token(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# raw type expressions


@dataclass(frozen=True)
class TEnd:
    polarity: Polarity


@dataclass(frozen=True)
class TTag:
    role: str
    polarity: Polarity
    branches: tuple[tuple[str, object], ...]  # source order, duplicates kept for validation
    span: Span | None = None


@dataclass(frozen=True)
class TChan:
    role: str
    polarity: Polarity
    payload: object
    cont: object


@dataclass(frozen=True)
class TName:
    name: str
    span: Span | None = None


@dataclass(frozen=True)
class RawMap:
    entries: tuple[tuple[str, TypeRef], ...]
    span: Span | None = None


class _Parser:
    def __init__(self, text: str, path: str | None = None):
        self.path = path
        self.toks = tokenize(text, path)
        self.i = 0

    # token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def span(self, tok: Token | None = None) -> Span:
        return (tok or self.tok).span(self.path)

    def span_from(self, start: Token) -> Span:
        last = self.toks[max(self.i - 1, 0)]
        return Span(start.line, start.column, last.line, last.column + len(last.text), self.path)

    def error(self, msg: str) -> ParseError:
        found = "end of input" if self.tok.kind == "eof" else repr(self.tok.text)
        return ParseError(f"{msg}, found {found}", self.span())

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "ident") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str) -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            raise self.error(f"expected {what}")
        self.i += 1
        return t.text

    def nat(self) -> int:
        t = self.tok
        if t.kind != "nat":
            raise self.error("expected a natural number")
        self.i += 1
        return int(t.text)

    def polarity(self) -> Polarity:
        if self.accept("!"):
            return Polarity.OUT
        if self.accept("?"):
            return Polarity.IN
        raise self.error("expected '!' or '?'")

    # types

    def stype(self):
        start = self.tok
        if self.at("end"):
            self.i += 1
            return TEnd(self.polarity())
        name = self.ident("a session type")
        if not (self.at("!") or self.at("?")):
            return TName(name, self.span_from(start))
        pol = self.polarity()
        if self.accept("{"):
            branches = [self.type_branch()]
            while self.accept(","):
                branches.append(self.type_branch())
            self.expect("}")
            return TTag(name, pol, tuple(branches), self.span_from(start))
        if self.accept("("):
            payload = self.stype()
            self.expect(")")
            self.expect(".")
            return TChan(name, pol, payload, self.stype())
        tag = self.ident("a tag, '{' or '('")
        self.expect(".")
        return TTag(name, pol, ((tag, self.stype()),), self.span_from(start))

    def type_branch(self):
        tag = self.ident("a tag")
        self.expect(":")
        return (tag, self.stype())

    def type_ref(self) -> TypeRef:
        start = self.tok
        expr = self.stype()
        return TypeRef(expr, self.span_from(start))

    # channels and processes

    def chan(self):
        name = self.ident("a channel")
        if self.accept("["):
            role = self.ident("a role")
            self.expect("]")
            return Endpoint(name, role)
        return Var(name)

    def proc(self) -> Process:
        start = self.tok
        left = self.prefix()
        if self.accept("<+>"):
            right = self.proc()
            return Choice(left, right, self.span_from(start))
        return left

    def prefix(self) -> Process:
        start = self.tok
        if self.accept("done"):
            return Done(self.span_from(start))
        if self.accept("close"):
            return Close(self.chan(), self.span_from(start))
        if self.accept("wait"):
            c = self.chan()
            self.expect(".")
            return Wait(c, self.prefix(), self.span_from(start))
        if self.accept("cast"):
            c = self.chan()
            self.expect(":")
            target = self.type_ref()
            self.expect(".")
            return Cast(c, target, self.prefix(), self.span_from(start))
        if self.accept("new"):
            return self.session(start)
        if self.accept("("):
            p = self.proc()
            self.expect(")")
            return p
        if self.tok.kind == "ident" and self.tok.text not in KEYWORDS and self.peek().text == "(":
            name = self.ident("a process name")
            self.expect("(")
            args = []
            if not self.at(")"):
                args.append(self.chan())
                while self.accept(","):
                    args.append(self.chan())
            self.expect(")")
            return Call(name, tuple(args), self.span_from(start))
        if self.tok.kind != "ident" or self.tok.text in KEYWORDS:
            raise self.error("expected a process")
        c = self.chan()
        peer = self.ident("a peer role")
        pol = self.polarity()
        if self.accept("{"):
            branches = [self.proc_branch()]
            while self.accept(","):
                branches.append(self.proc_branch())
            self.expect("}")
            return TagBranch(c, peer, pol, tuple(branches), self.span_from(start))
        if self.accept("("):
            if pol is Polarity.OUT:
                payload = self.chan()
                self.expect(")")
                self.expect(".")
                return ChanOut(c, peer, payload, self.prefix(), self.span_from(start))
            var = self.ident("a variable")
            self.expect(")")
            self.expect(".")
            return ChanIn(c, peer, var, self.prefix(), self.span_from(start))
        tag = self.ident("a tag, '{' or '('")
        self.expect(".")
        return TagBranch(c, peer, pol, ((tag, self.prefix()),), self.span_from(start))

    def proc_branch(self):
        tag = self.ident("a tag")
        self.expect(":")
        return (tag, self.proc())

    def session(self, start: Token) -> Session:
        name = self.ident("a session name")
        self.expect("{")
        parts = [self.participant()]
        while self.accept("|"):
            parts.append(self.participant())
        self.expect("}")
        return Session(name, tuple(parts), self.span_from(start))

    def participant(self) -> Participant:
        start = self.tok
        role = self.ident("a role")
        annot = None
        if self.accept(":"):
            annot = self.type_ref()
        self.expect("=")
        body = self.proc()
        return Participant(role, body, annot, self.span_from(start))

    # top level

    def map_body(self) -> RawMap:
        start = self.expect("{")
        entries = [self.map_entry()]
        while self.accept(","):
            entries.append(self.map_entry())
        self.expect("}")
        return RawMap(tuple(entries), self.span_from(start))

    def map_entry(self):
        role = self.ident("a role")
        self.expect(":")
        return (role, self.type_ref())

    def program(self, allow_tail: bool = False):
        types: list[tuple[str, TypeRef]] = []
        defs: list[Definition] = []
        maps: list[tuple[str, RawMap]] = []
        tail = None
        while self.tok.kind != "eof":
            start = self.tok
            if self.accept("type"):
                name = self.ident("a type name")
                self.expect("=")
                types.append((name, self.type_ref()))
                if any(n == name for n, _ in types[:-1]):
                    raise DuplicateName(f"type {name!r} is declared twice", self.span_from(start))
            elif self.accept("def"):
                defs.append(self.definition(start))
            elif self.accept("map"):
                name = "" if self.at("{") else self.ident("a map name")
                maps.append((name, self.map_body()))
            elif allow_tail:
                tail = self.map_body() if self.at("{") else self.type_ref()
                if self.tok.kind != "eof":
                    raise self.error("expected end of input")
                break
            else:
                raise self.error("expected 'type', 'def' or 'map'")
        return types, defs, maps, tail

    def definition(self, start: Token) -> Definition:
        name = self.ident("a process name")
        self.expect("(")
        params = []
        if not self.at(")"):
            params.append(self.param())
            while self.accept(","):
                params.append(self.param())
        self.expect(")")
        rank = None
        if self.accept(":"):
            rank = self.nat()
        self.expect("=")
        body = self.proc()
        return Definition(name, tuple(params), rank, body, self.span_from(start))

    def param(self):
        var = self.ident("a parameter name")
        self.expect(":")
        return (var, self.type_ref())


def parse_program(text: str, path: str | None = None) -> Program:
    """Parse source text into a raw program (type annotations unresolved)."""
    p = _Parser(text, path)
    types, defs, maps, _ = p.program()
    return Program(tuple(types), tuple(defs), tuple(maps))


# resolution


class _Resolver:
    def __init__(self, named: Sequence[tuple[str, TypeRef | SessionType]], env: Mapping[str, SessionType] | None = None):
        self.b = GraphBuilder()
        self.ids: dict[str, int] = {}
        for name, t in (env or {}).items():
            self.ids[name] = self.b.embed(t)
        pending = []
        for name, t in named:
            if isinstance(t, SessionType):
                self.ids[name] = self.b.embed(t)
            else:
                self.ids[name] = self.b.reserve(name)
                pending.append((name, t))
        for name, ref in pending:
            self.b.alias(self.ids[name], self.expr(ref.expr, ref.span))

    def expr(self, e, span: Span | None) -> int:
        if isinstance(e, TEnd):
            return self.b.add(EndNode(e.polarity))
        if isinstance(e, TName):
            if e.name not in self.ids:
                raise UnknownTypeName(f"unknown type {e.name!r}", e.span or span)
            return self.ids[e.name]
        if isinstance(e, TTag):
            seen = set()
            for tag, _ in e.branches:
                if tag in seen:
                    raise DuplicateTag(f"tag {tag!r} occurs twice", e.span or span)
                seen.add(tag)
            kids = tuple(sorted((tag, self.expr(sub, span)) for tag, sub in e.branches))
            return self.b.add(TagNode(e.role, e.polarity, kids))
        if isinstance(e, TChan):
            u = self.expr(e.payload, span)
            k = self.expr(e.cont, span)
            return self.b.add(ChannelNode(e.role, e.polarity, u, k))
        raise TypeError(e)

    def named(self, name: str) -> SessionType:
        return self.b.build(self.ids[name])

    def resolve(self, t: TypeRef | SessionType) -> SessionType:
        if isinstance(t, SessionType):
            return t
        return self.b.build(self.expr(t.expr, t.span))


def resolve_and_validate(program: Program) -> Program:
    """Resolve type expressions and check static well-formedness.

    Raises the first error found; idempotent on already-resolved programs.
    """
    r = _Resolver(program.types)
    types = tuple((name, r.named(name)) for name, _ in program.types)
    seen_defs: dict[str, Definition] = {}
    for d in program.definitions:
        if d.name in seen_defs:
            raise DuplicateDefinition(f"process {d.name!r} is defined twice", d.span)
        seen_defs[d.name] = d
    defs = tuple(_resolve_definition(d, r, seen_defs) for d in program.definitions)
    maps = []
    for name, m in program.maps:
        if any(n == name for n, _ in maps):
            raise DuplicateName(f"map {name or '<anonymous>'!r} is declared twice")
        maps.append((name, _resolve_map(m, r)))
    return Program(types, defs, tuple(maps))


def _resolve_map(m, r: _Resolver) -> SessionMap:
    if isinstance(m, SessionMap):
        return m
    entries: dict[str, SessionType] = {}
    for role, ref in m.entries:
        if role in entries:
            raise DuplicateRole(f"role {role!r} occurs twice", ref.span or m.span)
        entries[role] = r.resolve(ref)
    return SessionMap(entries)


def _resolve_definition(d: Definition, r: _Resolver, defs: Mapping[str, Definition]) -> Definition:
    params = []
    for var, t in d.params:
        if any(v == var for v, _ in params):
            raise DuplicateName(f"parameter {var!r} occurs twice in {d.name}", d.span)
        params.append((var, r.resolve(t)))
    scope = {v for v, _ in params}
    body = _resolve_process(d.body, r, defs, frozenset(scope), frozenset())
    extra = {c for c in free_names(body) if c not in {Var(v) for v in scope}}
    if extra:
        names = ", ".join(sorted(str(c) for c in extra))
        raise ScopeError(f"{d.name} uses {names}, which are not parameters", d.span)
    return Definition(d.name, tuple(params), d.rank, body, d.span)


def _resolve_process(p: Process, r: _Resolver, defs, vars_: frozenset, sessions: frozenset) -> Process:
    def go(q: Process) -> Process:
        return _resolve_process(q, r, defs, vars_, sessions)

    if isinstance(p, (Done, Close)):
        return p
    if isinstance(p, Wait):
        return replace(p, cont=go(p.cont))
    if isinstance(p, TagBranch):
        seen = set()
        for tag, _ in p.branches:
            if tag in seen:
                raise DuplicateTag(f"tag {tag!r} occurs twice", p.span)
            seen.add(tag)
        return replace(p, branches=tuple(sorted((t, go(q)) for t, q in p.branches)))
    if isinstance(p, ChanOut):
        return replace(p, cont=go(p.cont))
    if isinstance(p, ChanIn):
        if p.var in vars_:
            raise ScopeError(f"variable {p.var!r} is already bound", p.span)
        return replace(p, cont=_resolve_process(p.cont, r, defs, vars_ | {p.var}, sessions))
    if isinstance(p, Choice):
        return replace(p, left=go(p.left), right=go(p.right))
    if isinstance(p, Cast):
        return replace(p, target=r.resolve(p.target), cont=go(p.cont))
    if isinstance(p, Session):
        if p.name in sessions:
            raise ScopeError(f"session {p.name!r} is already bound", p.span)
        roles = set()
        parts = []
        for part in p.participants:
            if part.role in roles:
                raise DuplicateRole(f"role {part.role!r} occurs twice in session {p.name}", part.span or p.span)
            roles.add(part.role)
            body = _resolve_process(part.body, r, defs, vars_, sessions | {p.name})
            for c in free_names(body):
                if isinstance(c, Endpoint) and c.session == p.name and c.role != part.role:
                    raise ScopeError(f"participant {part.role} of {p.name} uses {c}", part.span or p.span)
            annot = None if part.annotation is None else r.resolve(part.annotation)
            parts.append(Participant(part.role, body, annot, part.span))
        return Session(p.name, tuple(parts), p.span)
    if isinstance(p, Call):
        if p.name not in defs:
            raise UnknownDefinition(f"no definition named {p.name!r}", p.span)
        return p
    raise TypeError(p)


def load_program(text: str, path: str | None = None) -> Program:
    return resolve_and_validate(parse_program(text, path))


def load_file(path: str) -> Program:
    with open(path, encoding="utf-8") as f:
        return load_program(f.read(), path)


def parse_session_type(text: str, env: Mapping[str, SessionType] | None = None) -> SessionType:
    """Parse a type expression, optionally preceded by ``type`` equations.

    Without a trailing expression the first equation's type is returned.
    """
    p = _Parser(text)
    types, defs, maps, tail = p.program(allow_tail=True)
    if defs or maps or isinstance(tail, RawMap):
        raise ParseError("expected a session type", None)
    r = _Resolver(types, env)
    if tail is not None:
        return r.resolve(tail)
    if not types:
        raise ParseError("expected a session type", None)
    return r.named(types[0][0])


def parse_session_map(text: str, env: Mapping[str, SessionType] | None = None) -> SessionMap:
    """Parse ``{role: type, ...}`` (optionally ``map {...}``) after optional equations."""
    p = _Parser(text)
    types, defs, maps, tail = p.program(allow_tail=True)
    if defs:
        raise ParseError("expected a session map", None)
    r = _Resolver(types, env)
    if isinstance(tail, RawMap):
        return _resolve_map(tail, r)
    if maps and tail is None:
        return _resolve_map(maps[0][1], r)
    raise ParseError("expected a session map", None)


# rendering


class _TypeNamer:
    """Chooses names for type subterms while rendering."""

    def __init__(self, names: Mapping[SessionType, str] | None = None, prefix: str = "T", taken: Iterable[str] = ()):
        self.names: dict[SessionType, str] = dict(names or {})
        self.taken = set(taken) | set(self.names.values())
        self.prefix = prefix
        self.counter = 0
        self.equations: list[tuple[str, SessionType]] = []

    def fresh(self) -> str:
        while True:
            name = self.prefix if self.counter == 0 else f"{self.prefix}{self.counter}"
            self.counter += 1
            if name not in self.taken:
                self.taken.add(name)
                return name

    def expression(self, t: SessionType, expand_root: bool = False) -> str:
        """Render ``t``, naming every unnamed node that closes a cycle."""
        self._name_cycles(t, expand_root)
        return self._expr(t, 0, expand_root)

    def _name_cycles(self, t: SessionType, expand_root: bool) -> None:
        state: dict[int, int] = {}  # 1 = on stack, 2 = done

        def visit(i: int) -> None:
            state[i] = 1
            for c in _node_children(t.nodes[i]):
                if t.at(c) in self.names:
                    continue
                sub = t.at(c)
                if state.get(c) == 1:
                    self.names[sub] = self.fresh()
                    self.equations.append((self.names[sub], sub))
                elif c not in state:
                    visit(c)
            state[i] = 2

        visit(0)

    def _expr(self, t: SessionType, i: int, expand: bool) -> str:
        sub = t.at(i)
        if not expand and sub in self.names:
            return self.names[sub]
        n = t.nodes[i]
        if isinstance(n, EndNode):
            return f"end{n.polarity.value}"
        if isinstance(n, TagNode):
            if len(n.branches) == 1:
                tag, c = n.branches[0]
                return f"{n.role}{n.polarity.value}{tag}.{self._expr(t, c, False)}"
            inner = ", ".join(f"{tag}: {self._expr(t, c, False)}" for tag, c in n.branches)
            return f"{n.role}{n.polarity.value}{{{inner}}}"
        return f"{n.role}{n.polarity.value}({self._expr(t, n.payload, False)}).{self._expr(t, n.cont, False)}"

    def drain_equations(self) -> list[str]:
        """Render pending equations (which may themselves add more)."""
        out = []
        k = 0
        while k < len(self.equations):
            name, t = self.equations[k]
            out.append(f"type {name} = {self.expression(t, expand_root=True)}")
            k += 1
        self.equations = []
        return out


def _node_children(n) -> tuple[int, ...]:
    if isinstance(n, TagNode):
        return tuple(c for _, c in n.branches)
    if isinstance(n, ChannelNode):
        return (n.payload, n.cont)
    return ()


def _on_cycle(t: SessionType, index: int) -> bool:
    seen: set[int] = set()
    stack = list(_node_children(t.nodes[index]))
    while stack:
        i = stack.pop()
        if i == index:
            return True
        if i not in seen:
            seen.add(i)
            stack.extend(_node_children(t.nodes[i]))
    return False


def render_type(t: SessionType, name: str = "T") -> str:
    """Inline text for acyclic types; ``type`` equations (root first) otherwise."""
    namer = _TypeNamer(prefix=name)
    if _on_cycle(t, 0):
        root = namer.fresh()
        namer.names[t] = root
        namer.equations.append((root, t))
        return "\n".join(namer.drain_equations())
    expr = namer.expression(t)
    if not namer.equations:
        return expr
    root = namer.fresh()
    return "\n".join([f"type {root} = {expr}"] + namer.drain_equations())


def render_map(m: Mapping[str, SessionType]) -> str:
    namer = _TypeNamer(prefix="T")
    body = ", ".join(f"{role}: {namer.expression(t)}" for role, t in sorted(m.items()))
    eqs = namer.drain_equations()
    text = f"map {{{body}}}"
    return "\n".join(eqs + [text]) if eqs else text


def _needs_parens(p: Process) -> bool:
    return isinstance(p, Choice)


class _ProcRenderer:
    def __init__(self, namer: _TypeNamer):
        self.namer = namer

    def ty(self, t) -> str:
        if isinstance(t, TypeRef):
            return _render_type_expr(t.expr)
        return self.namer.expression(t)

    def cont(self, p: Process) -> str:
        s = self.proc(p)
        return f"({s})" if _needs_parens(p) else s

    def proc(self, p: Process) -> str:
        if isinstance(p, Done):
            return "done"
        if isinstance(p, Close):
            return f"close {p.chan}"
        if isinstance(p, Wait):
            return f"wait {p.chan}. {self.cont(p.cont)}"
        if isinstance(p, TagBranch):
            head = f"{p.chan} {p.peer}{p.polarity.value}"
            if len(p.branches) == 1:
                tag, q = p.branches[0]
                return f"{head}{tag}. {self.cont(q)}"
            inner = ", ".join(f"{tag}: {self.proc(q)}" for tag, q in p.branches)
            return f"{head}{{{inner}}}"
        if isinstance(p, ChanOut):
            return f"{p.chan} {p.peer}!({p.payload}). {self.cont(p.cont)}"
        if isinstance(p, ChanIn):
            return f"{p.chan} {p.peer}?({p.var}). {self.cont(p.cont)}"
        if isinstance(p, Choice):
            return f"{self.cont(p.left)} <+> {self.proc(p.right)}"
        if isinstance(p, Cast):
            return f"cast {p.chan} : {self.ty(p.target)}. {self.cont(p.cont)}"
        if isinstance(p, Session):
            parts = []
            for q in p.participants:
                annot = "" if q.annotation is None else f" : {self.ty(q.annotation)}"
                parts.append(f"{q.role}{annot} = {self.proc(q.body)}")
            return f"new {p.name} {{ {' | '.join(parts)} }}"
        if isinstance(p, Call):
            return f"{p.name}({', '.join(str(a) for a in p.args)})"
        raise TypeError(p)


def _render_type_expr(e) -> str:
    if isinstance(e, TEnd):
        return f"end{e.polarity.value}"
    if isinstance(e, TName):
        return e.name
    if isinstance(e, TTag):
        if len(e.branches) == 1:
            tag, sub = e.branches[0]
            return f"{e.role}{e.polarity.value}{tag}.{_render_type_expr(sub)}"
        inner = ", ".join(f"{tag}: {_render_type_expr(sub)}" for tag, sub in e.branches)
        return f"{e.role}{e.polarity.value}{{{inner}}}"
    if isinstance(e, TChan):
        return f"{e.role}{e.polarity.value}({_render_type_expr(e.payload)}).{_render_type_expr(e.cont)}"
    raise TypeError(e)


def render_process(p: Process, type_names: Mapping[SessionType, str] | None = None) -> str:
    namer = _TypeNamer(type_names, prefix="_T")
    text = _ProcRenderer(namer).proc(p)
    eqs = namer.drain_equations()
    return "\n".join(eqs + [text]) if eqs else text


def render_program(prog: Program) -> str:
    """Render a program; named types are reused wherever they occur."""
    names: dict[SessionType, str] = {}
    for name, t in prog.types:
        if isinstance(t, SessionType):
            names.setdefault(t, name)
    namer = _TypeNamer(names, prefix="_T", taken=[n for n, _ in prog.types])
    r = _ProcRenderer(namer)
    lines = []
    for name, t in prog.types:
        if isinstance(t, TypeRef):
            lines.append(f"type {name} = {_render_type_expr(t.expr)}")
        else:
            lines.append(f"type {name} = {namer.expression(t, expand_root=True)}")
    for d in prog.definitions:
        params = ", ".join(f"{v}: {r.ty(t)}" for v, t in d.params)
        rank = "" if d.rank is None else f": {d.rank}"
        lines.append(f"def {d.name}({params}){rank} = {r.proc(d.body)}")
    for name, m in prog.maps:
        if isinstance(m, RawMap):
            body = ", ".join(f"{role}: {_render_type_expr(ref.expr)}" for role, ref in m.entries)
        else:
            body = ", ".join(f"{role}: {namer.expression(t)}" for role, t in sorted(m.items()))
        lines.append(f"map {name + ' ' if name else ''}{{{body}}}")
    eqs = namer.drain_equations()
    return "\n".join(eqs + lines) + "\n"


def render(x) -> str:
    """Render a type, map, process or program as parseable text."""
    if isinstance(x, SessionType):
        return render_type(x)
    if isinstance(x, SessionMap):
        return render_map(x)
    if isinstance(x, Program):
        return render_program(x)
    if isinstance(x, Process):
        return render_process(x)
    raise TypeError(f"cannot render {type(x).__name__}")


__all__ = [
    "FmstError",
    "load_file",
    "load_program",
    "parse_program",
    "parse_session_map",
    "parse_session_type",
    "render",
    "render_map",
    "render_process",
    "render_program",
    "render_type",
    "resolve_and_validate",
    "tokenize",
]
