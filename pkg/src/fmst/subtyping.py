"""Fair subtyping: unfair simulation plus the ``rk`` weight least fixpoint.

``S`` is a fair subtype of ``T`` with annotation ``n`` when ``S`` is an unfair
subtype of ``T`` and every pair in their pair closure has a finite weight;
``n`` is then the weight of the root pair.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .core import IN, OUT, ChannelNode, EndNode, GraphBuilder, SessionMap, SessionType, TagNode, targets
from .errors import PreconditionViolated
from .typelts import bounded, dual

INF = math.inf

Pair = tuple[int, int]

END = "end"
TAG_IN = "tag-in"
TAG_OUT_SHARED = "tag-out-shared"
TAG_OUT_STRICT = "tag-out-strict"
CHANNEL = "channel"
MISMATCH = "mismatch"


@dataclass(frozen=True)
class PairInfo:
    shape: str
    premises: tuple[tuple[str | None, Pair], ...]  # (tag or None for channels, pair)
    unshared: tuple[str, ...] = ()  # output tags of the left type missing on the right


@dataclass
class PairClosure:
    """Node pairs reachable from ``(left, right)`` by following rule premises."""

    left: SessionType
    right: SessionType
    pairs: dict[Pair, PairInfo] = field(default_factory=dict)

    @property
    def root(self) -> Pair:
        return (0, 0)

    def types(self, pair: Pair) -> tuple[SessionType, SessionType]:
        return self.left.at(pair[0]), self.right.at(pair[1])

    def __len__(self) -> int:
        return len(self.pairs)


def _classify(s: SessionType, t: SessionType, i: int, j: int) -> PairInfo:
    a, b = s.nodes[i], t.nodes[j]
    if isinstance(a, EndNode) and isinstance(b, EndNode):
        return PairInfo(END if a.polarity is b.polarity else MISMATCH, ())
    if isinstance(a, TagNode) and isinstance(b, TagNode):
        if a.role != b.role or a.polarity is not b.polarity:
            return PairInfo(MISMATCH, ())
        left, right = dict(a.branches), dict(b.branches)
        if a.polarity is IN:
            if not set(left) <= set(right):
                return PairInfo(MISMATCH, ())
            return PairInfo(TAG_IN, tuple((tag, (left[tag], right[tag])) for tag in sorted(left)))
        if not set(right) <= set(left):
            return PairInfo(MISMATCH, ())
        premises = tuple((tag, (left[tag], right[tag])) for tag in sorted(right))
        unshared = tuple(sorted(set(left) - set(right)))
        return PairInfo(TAG_OUT_STRICT if unshared else TAG_OUT_SHARED, premises, unshared)
    if isinstance(a, ChannelNode) and isinstance(b, ChannelNode):
        if a.role != b.role or a.polarity is not b.polarity or s.at(a.payload) != t.at(b.payload):
            return PairInfo(MISMATCH, ())
        return PairInfo(CHANNEL, ((None, (a.cont, b.cont)),))
    return PairInfo(MISMATCH, ())


def pair_closure(s: SessionType, t: SessionType) -> PairClosure:
    pc = PairClosure(s, t)
    queue = deque([(0, 0)])
    pc.pairs[(0, 0)] = _classify(s, t, 0, 0)
    while queue:
        for _, q in pc.pairs[queue.popleft()].premises:
            if q not in pc.pairs:
                pc.pairs[q] = _classify(s, t, *q)
                queue.append(q)
    return pc


def unfair_subtype(s: SessionType, t: SessionType) -> bool:
    """Greatest fixpoint of the unfair rules: no mismatch is reachable from the root."""
    return _unfair(pair_closure(s, t))


def _unfair(pc: PairClosure) -> bool:
    return all(info.shape != MISMATCH for info in pc.pairs.values())


def weights(pc: PairClosure) -> dict[Pair, float]:
    """Least solution of the ``rk`` equations over an unfair-subtyping closure.

    Kleene iteration from zero; any value above ``len(pc)`` is set to infinity.
    Finite values of the least solution never exceed the number of pairs (an
    optimal positional strategy reaches ``end`` without repeating a pair), so
    the capped iteration converges to exactly the least solution.
    """
    if not _unfair(pc):
        raise PreconditionViolated("weights are defined only for unfair subtypes")
    cap = len(pc)
    val: dict[Pair, float] = {p: 0 for p in pc.pairs}
    order = list(pc.pairs)
    changed = True
    while changed:
        changed = False
        for p in order:
            info = pc.pairs[p]
            kids = [val[q] for _, q in info.premises]
            if info.shape == END:
                new = 0
            elif info.shape == CHANNEL:
                new = kids[0]
            elif info.shape == TAG_IN:
                new = max(kids)
            elif info.shape == TAG_OUT_STRICT:
                new = 1 + min(kids)
            else:
                new = min(1 + min(kids), max(kids))
            if new > cap:
                new = INF
            if new != val[p]:
                val[p] = new
                changed = True
    return val


@dataclass
class SubtypingResult:
    left: SessionType
    right: SessionType
    closure: PairClosure
    unfair: bool
    weights: dict[Pair, float] | None

    @property
    def rank(self) -> int | None:
        """The fair-subtyping annotation, or ``None`` when not a fair subtype."""
        if not self.unfair or self.weights is None:
            return None
        if any(w == INF for w in self.weights.values()):
            return None
        return int(self.weights[(0, 0)])

    @property
    def fair(self) -> bool:
        return self.rank is not None

    @property
    def root_weight(self) -> float | None:
        return None if self.weights is None else self.weights[(0, 0)]

    @property
    def reason(self) -> str | None:
        if not self.unfair:
            return "mismatch"
        if self.rank is None:
            return "divergent pair"
        return None

    @property
    def left_bounded(self) -> bool:
        return bounded(self.left)

    def table(self) -> list[dict]:
        """Per-pair rows, for reports."""
        from .parser import render_type

        rows = []
        for p, info in self.closure.pairs.items():
            u, v = self.closure.types(p)
            w = None if self.weights is None else self.weights[p]
            rows.append(
                {
                    "left": render_type(u),
                    "right": render_type(v),
                    "rule": info.shape,
                    "weight": None if w is None or w == INF else int(w),
                }
            )
        return rows


def analyse(s: SessionType, t: SessionType) -> SubtypingResult:
    pc = pair_closure(s, t)
    ok = _unfair(pc)
    return SubtypingResult(s, t, pc, ok, weights(pc) if ok else None)


def subtype_weight(s: SessionType, t: SessionType) -> float:
    """``rk(s, t)``; raises unless ``s`` is an unfair subtype of ``t``."""
    pc = pair_closure(s, t)
    return weights(pc)[(0, 0)]


def fair_subtype(s: SessionType, t: SessionType) -> int | None:
    return analyse(s, t).rank


def validate_derivation(pc: PairClosure, w: dict[Pair, float]) -> list[str]:
    """Check every pair's annotation against its rule; returns the violations."""
    problems = []
    for p, info in pc.pairs.items():
        n = w[p]
        kids = [w[q] for _, q in info.premises]
        if n == INF or any(k == INF for k in kids):
            problems.append(f"{p}: infinite annotation")
            continue
        if info.shape == MISMATCH:
            problems.append(f"{p}: no rule applies")
        elif info.shape in (TAG_IN, CHANNEL):
            if any(k > n for k in kids):
                problems.append(f"{p}: premise annotation exceeds {n}")
        elif info.shape == TAG_OUT_STRICT:
            if not any(k < n for k in kids):
                problems.append(f"{p}: no premise strictly below {n}")
        elif info.shape == TAG_OUT_SHARED:
            if not (all(k <= n for k in kids) or any(k < n for k in kids)):
                problems.append(f"{p}: neither output rule applies at {n}")
    return problems


def discriminator(p: str, s: SessionType, t: SessionType) -> SessionMap:
    """A map coherent alongside ``p▷s`` but not alongside ``p▷t``.

    The map first steers the session towards a divergent pair along a shortest
    path in the pair closure, answering every side branch chosen by ``p`` with
    the dual of ``s``'s continuation; inside the divergent region it only sends
    tags leading to divergent pairs and accepts ``s``'s extra outputs by
    switching to the dual, so it can terminate only after an output that ``t``
    never performs.
    """
    if not bounded(s):
        raise PreconditionViolated("the left type is not bounded")
    res = analyse(s, t)
    if not res.unfair:
        raise PreconditionViolated("the types are not related by unfair subtyping")
    if res.fair:
        raise PreconditionViolated(f"the types are fair subtypes with rank {res.rank}")
    w = res.weights
    assert w is not None
    pc = res.closure
    roles = sorted(targets(s))
    if p in roles:
        raise PreconditionViolated(f"role {p!r} is also a peer of the left type")

    path = _path_to_divergence(pc, w)
    b = GraphBuilder()
    ids: dict[tuple, int] = {}
    work: list[tuple] = []
    duals: dict[int, dict[str, int]] = {}

    def node(key: tuple) -> int:
        if key not in ids:
            ids[key] = b.reserve()
            work.append(key)
        return ids[key]

    def dual_node(i: int, r: str) -> int:
        if i not in duals:
            m = dual(p, s.at(i), roles)
            duals[i] = {role: b.embed(m[role]) for role in roles}
        return duals[i][r]

    def forward(tag: str, q: str, tail: int) -> int:
        for x in reversed([x for x in roles if x != q]):
            tail = b.add(TagNode(x, OUT, ((tag, tail),)))
        return tail

    def emit(me: int, pair: Pair, r: str, sends: list[tuple[str, int | str]], step) -> None:
        """Shared tag-node construction; ``step(tag, r)`` builds continuations.

        ``sends`` lists (tag, child) where child is a pair index into ``s`` for
        dual answers or the marker "next" for the continuation of the walk.
        """
        n = s.nodes[pair[0]]
        q = n.role
        kids = []
        for tag, child in sends:
            if r == q:
                tail = step(tag, q) if child == "next" else dual_node(child, q)
                kids.append((tag, forward(tag, q, tail)))
            else:
                kids.append((tag, step(tag, r) if child == "next" else dual_node(child, r)))
        if r == q:
            b.set(me, TagNode(p, n.polarity.complement(), tuple(kids)))
        else:
            b.set(me, TagNode(q, IN, tuple(kids)))

    divergent = _next_pair(pc, path[-1]) if path else (0, 0)
    roots = {r: node(("path", 0, r)) if path else node(("disc", divergent, r)) for r in roles}
    while work:
        key = work.pop()
        me = ids[key]
        if key[0] == "path":
            _, k, r = key
            pair, via = path[k]

            def step(tag, role, k=k):
                if k + 1 < len(path):
                    return node(("path", k + 1, role))
                return node(("disc", divergent, role))

            info = pc.pairs[pair]
            n = s.nodes[pair[0]]
            if info.shape == CHANNEL:
                if r == n.role:
                    b.set(me, ChannelNode(p, n.polarity.complement(), b.embed(s.at(n.payload)), step(None, r)))
                else:
                    b.alias(me, step(None, r))
            elif info.shape == TAG_IN:
                emit(me, pair, r, [(via, "next")], step)
            else:
                left = dict(n.branches)
                emit(me, pair, r, [(tag, "next" if tag == via else left[tag]) for tag in sorted(left)], step)
        else:
            _, pair, r = key
            info = pc.pairs[pair]
            n = s.nodes[pair[0]]
            prem = dict(info.premises)

            def step(tag, role, prem=prem):
                return node(("disc", prem[tag], role))

            if info.shape == CHANNEL:
                cont = prem[None]
                if r == n.role:
                    b.set(me, ChannelNode(p, n.polarity.complement(), b.embed(s.at(n.payload)), node(("disc", cont, r))))
                else:
                    b.alias(me, node(("disc", cont, r)))
            elif info.shape == TAG_IN:
                sends = [(tag, "next") for tag, q in info.premises if w[q] == INF]
                emit(me, pair, r, sends, step)
            elif info.shape in (TAG_OUT_SHARED, TAG_OUT_STRICT):
                left = dict(n.branches)
                emit(me, pair, r, [(tag, "next" if tag in prem else left[tag]) for tag in sorted(left)], step)
            else:  # pragma: no cover - divergent pairs are never end pairs
                raise AssertionError(f"unexpected shape {info.shape} in divergent region")
    return SessionMap({r: b.build(i) for r, i in roots.items()})


def _path_to_divergence(pc: PairClosure, w: dict[Pair, float]) -> list[tuple[Pair, str | None]]:
    """Shortest premise path from the root to a pair of infinite weight.

    Returns the steps before that pair as (pair, tag followed); empty when the
    root itself diverges.
    """
    root = (0, 0)
    if w[root] == INF:
        return []
    prev: dict[Pair, tuple[Pair, str | None]] = {}
    queue = deque([root])
    seen = {root}
    while queue:
        pair = queue.popleft()
        for tag, q in pc.pairs[pair].premises:
            if q in seen:
                continue
            seen.add(q)
            prev[q] = (pair, tag)
            if w[q] == INF:
                steps = []
                cur = q
                while cur != root:
                    back, via = prev[cur]
                    steps.append((back, via))
                    cur = back
                return steps[::-1]
            queue.append(q)
    raise AssertionError("no divergent pair reachable")


def _next_pair(pc: PairClosure, step: tuple[Pair, str | None]) -> Pair:
    pair, via = step
    return dict(pc.pairs[pair].premises)[via]
