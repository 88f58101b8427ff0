"""Session types as canonical regular-tree graphs, session maps, and the process AST.

A :class:`SessionType` is a finite rooted graph whose unfolding is the regular
tree it denotes. Every instance is stored in canonical form: the graph is
minimized by bisimulation quotient and its nodes are numbered in breadth-first
order from the root (index 0), visiting tag branches in sorted tag order and
payloads before continuations. Two canonical graphs denote the same tree iff
their node tables are identical, so ``==`` and ``hash`` are cheap and exact.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, NamedTuple, Sequence, Union

from .errors import DuplicateTag, Span, UnguardedRecursion


class Polarity(str, Enum):
    OUT = "!"
    IN = "?"

    def complement(self) -> Polarity:
        return Polarity.IN if self is Polarity.OUT else Polarity.OUT

    def __str__(self) -> str:
        return self.value


OUT = Polarity.OUT
IN = Polarity.IN


class EndNode(NamedTuple):
    polarity: Polarity


class TagNode(NamedTuple):
    role: str
    polarity: Polarity
    branches: tuple[tuple[str, int], ...]  # sorted by tag


class ChannelNode(NamedTuple):
    role: str
    polarity: Polarity
    payload: int
    cont: int


Node = Union[EndNode, TagNode, ChannelNode]


def _children(node: Node) -> tuple[int, ...]:
    if isinstance(node, TagNode):
        return tuple(c for _, c in node.branches)
    if isinstance(node, ChannelNode):
        return (node.payload, node.cont)
    return ()


def _cont_children(node: Node) -> tuple[int, ...]:
    """Children along the continuation structure (payload trees excluded)."""
    if isinstance(node, TagNode):
        return tuple(c for _, c in node.branches)
    if isinstance(node, ChannelNode):
        return (node.cont,)
    return ()


def _relabel(node: Node, f) -> Node:
    if isinstance(node, TagNode):
        return TagNode(node.role, node.polarity, tuple((t, f(c)) for t, c in node.branches))
    if isinstance(node, ChannelNode):
        return ChannelNode(node.role, node.polarity, f(node.payload), f(node.cont))
    return node


def _shape(node: Node) -> tuple:
    """Everything about a node except the identity of its children."""
    if isinstance(node, TagNode):
        return ("tag", node.role, node.polarity.value, tuple(t for t, _ in node.branches))
    if isinstance(node, ChannelNode):
        return ("chan", node.role, node.polarity.value)
    return ("end", node.polarity.value)


def _renumber(nodes: Sequence[Node], root: int) -> tuple[Node, ...]:
    order: dict[int, int] = {root: 0}
    queue = deque([root])
    seq: list[int] = []
    while queue:
        i = queue.popleft()
        seq.append(i)
        for c in _children(nodes[i]):
            if c not in order:
                order[c] = len(order)
                queue.append(c)
    return tuple(_relabel(nodes[i], order.__getitem__) for i in seq)


def _reachable(nodes: Sequence[Node], root: int) -> list[int]:
    seen = {root}
    stack = [root]
    while stack:
        for c in _children(nodes[stack.pop()]):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return sorted(seen)


def _minimize(nodes: Sequence[Node], root: int) -> tuple[Node, ...]:
    """Quotient the reachable part by bisimilarity, then renumber canonically."""
    ids = _reachable(nodes, root)
    shapes: dict[tuple, int] = {}
    block = {i: shapes.setdefault(_shape(nodes[i]), len(shapes)) for i in ids}
    count = len(shapes)
    while True:
        sigs: dict[tuple, int] = {}
        new_block = {}
        for i in ids:
            sig = (block[i], tuple(block[c] for c in _children(nodes[i])))
            new_block[i] = sigs.setdefault(sig, len(sigs))
        block = new_block
        if len(sigs) == count:
            break
        count = len(sigs)
    rep: dict[int, int] = {}
    for i in ids:
        rep.setdefault(block[i], i)
    quotient = {b: _relabel(nodes[i], lambda c: rep[block[c]]) for b, i in rep.items()}
    table = {rep[b]: n for b, n in quotient.items()}
    return _renumber(table, rep[block[root]])


class SessionType:
    """An immutable, canonical session type graph rooted at node 0."""

    __slots__ = ("nodes", "_hash", "_at", "_branch_map")

    def __init__(self, nodes: tuple[Node, ...]):
        # Callers must pass a canonical table; use ``canonical`` otherwise.
        self.nodes = nodes
        self._hash = hash(nodes)
        self._at: dict[int, SessionType] = {}
        self._branch_map: dict[str, SessionType] | None = None

    @staticmethod
    def canonical(nodes: Sequence[Node] | Mapping[int, Node], root: int) -> SessionType:
        return SessionType(_minimize(nodes, root))

    # structure

    @property
    def node(self) -> Node:
        return self.nodes[0]

    @property
    def kind(self) -> str:
        return _shape(self.nodes[0])[0]

    @property
    def is_end(self) -> bool:
        return isinstance(self.nodes[0], EndNode)

    @property
    def is_tag(self) -> bool:
        return isinstance(self.nodes[0], TagNode)

    @property
    def is_channel(self) -> bool:
        return isinstance(self.nodes[0], ChannelNode)

    @property
    def polarity(self) -> Polarity:
        return self.nodes[0].polarity

    @property
    def role(self) -> str | None:
        n = self.nodes[0]
        return None if isinstance(n, EndNode) else n.role

    @property
    def tags(self) -> tuple[str, ...]:
        n = self.nodes[0]
        return tuple(t for t, _ in n.branches) if isinstance(n, TagNode) else ()

    def at(self, index: int) -> SessionType:
        """The subterm rooted at node ``index`` as a canonical type."""
        if index == 0:
            return self
        t = self._at.get(index)
        if t is None:
            t = SessionType(_renumber(self.nodes, index))
            self._at[index] = t
        return t

    def branches(self) -> dict[str, SessionType]:
        if self._branch_map is None:
            n = self.nodes[0]
            if not isinstance(n, TagNode):
                raise ValueError(f"{self!r} has no tag branches")
            self._branch_map = {t: self.at(c) for t, c in n.branches}
        return self._branch_map

    def branch(self, tag: str) -> SessionType:
        return self.branches()[tag]

    @property
    def payload(self) -> SessionType:
        n = self.nodes[0]
        if not isinstance(n, ChannelNode):
            raise ValueError(f"{self!r} is not a channel exchange")
        return self.at(n.payload)

    @property
    def continuation(self) -> SessionType:
        n = self.nodes[0]
        if not isinstance(n, ChannelNode):
            raise ValueError(f"{self!r} is not a channel exchange")
        return self.at(n.cont)

    def commit(self, tag: str) -> SessionType:
        """The singleton output ``role!tag.S_tag`` left after choosing ``tag``."""
        n = self.nodes[0]
        if not (isinstance(n, TagNode) and n.polarity is OUT):
            raise ValueError("only output tag nodes can commit")
        return tag_type(n.role, OUT, {tag: self.branch(tag)})

    # identity

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SessionType):
            return NotImplemented
        return self._hash == other._hash and self.nodes == other.nodes

    def __hash__(self) -> int:
        return self._hash

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        from .parser import render_type

        return f"SessionType({render_type(self)!r})"

    def __str__(self) -> str:
        from .parser import render_type

        return render_type(self)


class GraphBuilder:
    """Mutable scratch graph for building types with sharing, cycles and aliases.

    ``alias(i, j)`` declares node ``i`` to be the same as node ``j``; chains of
    aliases are followed at build time and an alias cycle is unguarded recursion.
    """

    def __init__(self) -> None:
        self._nodes: list[Node | None] = []
        self._alias: dict[int, int] = {}
        self._names: dict[int, str] = {}

    def reserve(self, name: str | None = None) -> int:
        self._nodes.append(None)
        i = len(self._nodes) - 1
        if name is not None:
            self._names[i] = name
        return i

    def set(self, i: int, node: Node) -> None:
        self._nodes[i] = node

    def add(self, node: Node) -> int:
        i = self.reserve()
        self._nodes[i] = node
        return i

    def alias(self, i: int, target: int) -> None:
        self._alias[i] = target

    def embed(self, t: SessionType) -> int:
        base = len(self._nodes)
        self._nodes.extend(_relabel(n, lambda c: c + base) for n in t.nodes)
        return base

    def _resolve(self, i: int) -> int:
        seen = []
        while i in self._alias:
            if i in seen:
                names = sorted({self._names.get(j, "?") for j in seen})
                raise UnguardedRecursion(f"recursion through {', '.join(names)} is not guarded by a prefix")
            seen.append(i)
            i = self._alias[i]
        return i

    def build(self, root: int) -> SessionType:
        table: dict[int, Node] = {}
        for i in _reachable_through(self, self._resolve(root)):
            node = self._nodes[i]
            assert node is not None, "reserved node never set"
            table[i] = _relabel(node, self._resolve)
        return SessionType.canonical(table, self._resolve(root))


def _reachable_through(b: GraphBuilder, root: int) -> list[int]:
    seen = {root}
    stack = [root]
    while stack:
        node = b._nodes[stack.pop()]
        assert node is not None, "reserved node never set"
        for c in _children(node):
            c = b._resolve(c)
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return sorted(seen)


# constructors


def end_type(polarity: Polarity) -> SessionType:
    return SessionType((EndNode(Polarity(polarity)),))


END_OUT = end_type(OUT)
END_IN = end_type(IN)


def tag_type(role: str, polarity: Polarity, branches: Mapping[str, SessionType]) -> SessionType:
    if not branches:
        raise ValueError("a tag node needs at least one branch")
    b = GraphBuilder()
    root = b.reserve()
    kids = tuple((t, b.embed(branches[t])) for t in sorted(branches))
    b.set(root, TagNode(role, Polarity(polarity), kids))
    return b.build(root)


def channel_type(role: str, polarity: Polarity, payload: SessionType, cont: SessionType) -> SessionType:
    b = GraphBuilder()
    root = b.reserve()
    u = b.embed(payload)
    k = b.embed(cont)
    b.set(root, ChannelNode(role, Polarity(polarity), u, k))
    return b.build(root)


def check_tags(tags: Sequence[str], span: Span | None = None) -> None:
    seen = set()
    for t in tags:
        if t in seen:
            raise DuplicateTag(f"tag {t!r} occurs twice", span)
        seen.add(t)


# regular-tree utilities


def type_equal(s: SessionType, t: SessionType) -> bool:
    """Bisimulation check on node pairs; independent of canonical forms."""
    seen = {(0, 0)}
    stack = [(0, 0)]
    while stack:
        i, j = stack.pop()
        a, b = s.nodes[i], t.nodes[j]
        if _shape(a) != _shape(b):
            return False
        for pair in zip(_children(a), _children(b)):
            if pair not in seen:
                seen.add(pair)
                stack.append(pair)
    return True


def subterms(s: SessionType, payloads: bool = True) -> frozenset[int]:
    """Node ids reachable from the root; ``payloads=False`` follows only continuations."""
    if payloads:
        return frozenset(range(len(s.nodes)))
    seen = {0}
    stack = [0]
    while stack:
        for c in _cont_children(s.nodes[stack.pop()]):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return frozenset(seen)


def subterm_types(s: SessionType, payloads: bool = True) -> list[SessionType]:
    return [s.at(i) for i in sorted(subterms(s, payloads))]


def unfold(s: SessionType, depth: int, index: int = 0):
    """Finite tree prefix of the unfolding, as nested tuples; ``...`` marks the cut."""
    if depth == 0:
        return ...
    n = s.nodes[index]
    if isinstance(n, EndNode):
        return ("end", n.polarity.value)
    if isinstance(n, TagNode):
        return ("tag", n.role, n.polarity.value, tuple((t, unfold(s, depth - 1, c)) for t, c in n.branches))
    return ("chan", n.role, n.polarity.value, unfold(s, depth - 1, n.payload), unfold(s, depth - 1, n.cont))


def targets(s: SessionType) -> frozenset[str]:
    """Peer roles occurring along the continuation structure."""
    return frozenset(s.nodes[i].role for i in subterms(s, payloads=False) if not isinstance(s.nodes[i], EndNode))


# session maps


class SessionMap(Mapping[str, SessionType]):
    """Finite map from roles to session types, hashable and ordered by role."""

    __slots__ = ("_items", "_dict", "_hash")

    def __init__(self, entries: Mapping[str, SessionType] | Sequence[tuple[str, SessionType]] = ()):
        d = dict(entries)
        self._items = tuple(sorted(d.items()))
        self._dict = dict(self._items)
        self._hash = hash(self._items)

    def __getitem__(self, role: str) -> SessionType:
        return self._dict[role]

    def __iter__(self) -> Iterator[str]:
        return iter(self._dict)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, SessionMap):
            return self._items == other._items
        return NotImplemented

    def __lt__(self, other: SessionMap) -> bool:
        return [(r, t.nodes) for r, t in self._items] < [(r, t.nodes) for r, t in other._items]

    def update(self, **changes: SessionType) -> SessionMap:
        d = dict(self._items)
        d.update(changes)
        return SessionMap(d)

    def replace(self, changes: Mapping[str, SessionType]) -> SessionMap:
        d = dict(self._items)
        d.update(changes)
        return SessionMap(d)

    def union(self, other: Mapping[str, SessionType]) -> SessionMap:
        clash = set(self) & set(other)
        if clash:
            raise ValueError(f"roles {sorted(clash)} occur in both maps")
        return SessionMap({**self._dict, **dict(other)})

    def __repr__(self) -> str:
        from .parser import render_map

        return f"SessionMap({render_map(self)!r})"


# channels and processes


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class Endpoint:
    session: str
    role: str

    def __str__(self) -> str:
        return f"{self.session}[{self.role}]"


Channel = Union[Var, Endpoint]


@dataclass(frozen=True)
class TypeRef:
    """An unresolved type expression as written in source (see ``parser``)."""

    expr: object
    span: Span | None = field(default=None, compare=False)


TypeAnnot = Union[SessionType, TypeRef]


class Process:
    """Base class of process terms."""

    __slots__ = ()


@dataclass(frozen=True)
class Done(Process):
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Close(Process):
    chan: Channel
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Wait(Process):
    chan: Channel
    cont: Process
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class TagBranch(Process):
    chan: Channel
    peer: str
    polarity: Polarity
    branches: tuple[tuple[str, Process], ...]  # sorted by tag
    span: Span | None = field(default=None, compare=False, repr=False)

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(t for t, _ in self.branches)


@dataclass(frozen=True)
class ChanOut(Process):
    chan: Channel
    peer: str
    payload: Channel
    cont: Process
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ChanIn(Process):
    chan: Channel
    peer: str
    var: str
    cont: Process
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Choice(Process):
    left: Process
    right: Process
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Cast(Process):
    chan: Channel
    target: TypeAnnot
    cont: Process
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Participant:
    role: str
    body: Process
    annotation: TypeAnnot | None = None
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Session(Process):
    name: str
    participants: tuple[Participant, ...]
    span: Span | None = field(default=None, compare=False, repr=False)

    @property
    def roles(self) -> tuple[str, ...]:
        return tuple(p.role for p in self.participants)


@dataclass(frozen=True)
class Call(Process):
    name: str
    args: tuple[Channel, ...]
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Definition:
    name: str
    params: tuple[tuple[str, TypeAnnot], ...]
    rank: int | None
    body: Process
    span: Span | None = field(default=None, compare=False, repr=False)

    @property
    def param_types(self) -> tuple[SessionType, ...]:
        return tuple(t for _, t in self.params)  # type: ignore[misc]


@dataclass(frozen=True)
class Program:
    types: tuple[tuple[str, TypeAnnot], ...] = ()
    definitions: tuple[Definition, ...] = ()
    maps: tuple[tuple[str, object], ...] = ()

    def definition(self, name: str) -> Definition:
        for d in self.definitions:
            if d.name == name:
                return d
        raise KeyError(name)

    @property
    def type_env(self) -> dict[str, SessionType]:
        return dict(self.types)  # type: ignore[arg-type]

    @property
    def map_env(self) -> dict[str, SessionMap]:
        return dict(self.maps)  # type: ignore[arg-type]


# process utilities


def free_names(p: Process) -> frozenset[Channel]:
    if isinstance(p, Done):
        return frozenset()
    if isinstance(p, Close):
        return frozenset({p.chan})
    if isinstance(p, Wait):
        return free_names(p.cont) | {p.chan}
    if isinstance(p, TagBranch):
        out = {p.chan}
        for _, q in p.branches:
            out |= free_names(q)
        return frozenset(out)
    if isinstance(p, ChanOut):
        return free_names(p.cont) | {p.chan, p.payload}
    if isinstance(p, ChanIn):
        return (free_names(p.cont) - {Var(p.var)}) | {p.chan}
    if isinstance(p, Choice):
        return free_names(p.left) | free_names(p.right)
    if isinstance(p, Cast):
        return free_names(p.cont) | {p.chan}
    if isinstance(p, Session):
        out = set()
        for part in p.participants:
            out |= free_names(part.body)
        return frozenset(c for c in out if not (isinstance(c, Endpoint) and c.session == p.name))
    if isinstance(p, Call):
        return frozenset(p.args)
    raise TypeError(p)


def substitute(p: Process, sub: Mapping[Channel, Channel]) -> Process:
    """Replace free channels; respects ``?(x)`` and ``new s`` binders.

    Substituted channels must not be captured, which holds whenever they are
    endpoints of sessions distinct from every bound session name in ``p``.
    """
    if not sub:
        return p

    def ch(c: Channel) -> Channel:
        return sub.get(c, c)

    if isinstance(p, Done):
        return p
    if isinstance(p, Close):
        return Close(ch(p.chan), p.span)
    if isinstance(p, Wait):
        return Wait(ch(p.chan), substitute(p.cont, sub), p.span)
    if isinstance(p, TagBranch):
        return TagBranch(ch(p.chan), p.peer, p.polarity, tuple((t, substitute(q, sub)) for t, q in p.branches), p.span)
    if isinstance(p, ChanOut):
        return ChanOut(ch(p.chan), p.peer, ch(p.payload), substitute(p.cont, sub), p.span)
    if isinstance(p, ChanIn):
        inner = {k: v for k, v in sub.items() if k != Var(p.var)}
        return ChanIn(ch(p.chan), p.peer, p.var, substitute(p.cont, inner), p.span)
    if isinstance(p, Choice):
        return Choice(substitute(p.left, sub), substitute(p.right, sub), p.span)
    if isinstance(p, Cast):
        return Cast(ch(p.chan), p.target, substitute(p.cont, sub), p.span)
    if isinstance(p, Session):
        inner = {k: v for k, v in sub.items() if not (isinstance(k, Endpoint) and k.session == p.name)}
        parts = tuple(
            Participant(q.role, substitute(q.body, inner), q.annotation, q.span) for q in p.participants
        )
        return Session(p.name, parts, p.span)
    if isinstance(p, Call):
        return Call(p.name, tuple(ch(a) for a in p.args), p.span)
    raise TypeError(p)


def rename_session(p: Process, old: str, new: str) -> Process:
    """Rename the free endpoints of session ``old`` to session ``new``."""
    sub = {c: Endpoint(new, c.role) for c in free_names(p) if isinstance(c, Endpoint) and c.session == old}
    return substitute(p, sub)
