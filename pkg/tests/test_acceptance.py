"""Acceptance criteria 1 to 8, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import random
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fmst.core import SessionMap, SessionType, targets  # noqa: E402
from fmst.parser import load_file, parse_session_map  # noqa: E402
from fmst.runtime import Machine, simulate  # noqa: E402
from fmst.subtyping import discriminator, fair_subtype, unfair_subtype  # noqa: E402
from fmst.typecheck import check_program  # noqa: E402
from fmst.typelts import coherent, dual, session_rank  # noqa: E402
from oracles import (  # noqa: E402
    brute_fair_subtype,
    mutate_up,
    oracle_bounded,
    random_bounded_type,
    random_map,
    random_pair,
    random_type,
)

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
LINES: list[str] = []


def report(n: int, ok: bool, detail: str, start: float) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  ({time.perf_counter() - start:.2f}s)"
    LINES.append(line)
    print(line)
    assert ok, line


def types() -> dict[str, SessionType]:
    return load_file(str(CORPUS / "types.fmst")).type_env


def test_criterion_1_fair_subtyping_corpus():
    t0 = time.perf_counter()
    env = types()
    got = {
        "S<=T": fair_subtype(env["S"], env["T"]),
        "S<=U": fair_subtype(env["S"], env["U"]),
        "slot": fair_subtype(env["SlotS"], env["SlotT"]),
        "S<=add.add.S": fair_subtype(env["S"], env["Add2"]),
        "S<=pay": fair_subtype(env["S"], env["Pay"]),
    }
    want = {"S<=T": 1, "S<=U": None, "slot": None, "S<=add.add.S": 2, "S<=pay": 1}
    report(1, got == want, f"{got}", t0)


def test_criterion_2_coherence():
    t0 = time.perf_counter()
    bsc = load_file(str(CORPUS / "bsc_map.fmst")).maps[0][1]
    good = parse_session_map("{p: end?, q: end!}")
    bad = parse_session_map("{p: end!, q: end!}")
    ok = coherent(bsc) and coherent(good) and session_rank(good) == 1 and not coherent(bad)
    report(2, ok, f"bsc {coherent(bsc)}, good rank {session_rank(good)}, bad {coherent(bad)}", t0)


def _check(name: str):
    return check_program(load_file(str(CORPUS / name)))


def test_criterion_3_type_checking():
    t0 = time.perf_counter()
    bsc, twobsc, pms, cor, inf, slot = (
        _check(f)
        for f in ("bsc.fmst", "2bsc.fmst", "pms.fmst", "corules.fmst", "rank_inf.fmst", "slot_cast.fmst")
    )
    nocast = [_check(f) for f in ("2bsc_nocast_yes.fmst", "2bsc_nocast_giveup.fmst")]
    checks = {
        "bsc": bsc.ok and bsc.rank("Main") == 1,
        "2bsc": twobsc.definitions["Buyer1"].well_typed and twobsc.rank("Buyer1") == 1,
        "2bsc without a cast": all(not r.definitions["Buyer1"].well_typed for r in nocast),
        "pms": [pms.rank(d) for d in ("Main", "Sort", "Merge")] == [1, 0, 0],
        "corules": not cor.definitions["A"].well_typed
        and not cor.definitions["B"].well_typed
        and cor.definitions["C"].well_typed
        and cor.rank("C") == 0,
        "rank_inf": any(e.kind == "InfiniteRank" for r in inf.definitions.values() for e in r.errors),
        "slot with casts": not slot.definitions["Slot"].well_typed,
    }
    failed = [k for k, v in checks.items() if not v]
    report(3, not failed, f"{len(checks)} verdicts" + (f", failed {failed}" if failed else " match"), t0)


def test_criterion_4_oracle_equivalence():
    t0 = time.perf_counter()
    rng = random.Random(2024)
    bad = []
    for _ in range(1000):
        s, t = random_pair(rng, 4)
        if fair_subtype(s, t) != brute_fair_subtype(s, t):
            bad.append((s, t))
    report(4, not bad, f"1000 pairs, {len(bad)} disagreements", t0)


def _soundness_cases(rng: random.Random):
    """Yield coherent ``(M, p, S)`` from random two-role maps and from duals."""
    while True:
        if rng.random() < 0.5:
            m = random_map(rng, ("p", "q"), 3)
            if coherent(m):
                yield SessionMap({r: t for r, t in m.items() if r != "p"}), m["p"]
        else:
            s = random_bounded_type(rng, 4, roles=("q", "r"))
            yield dual("p", s, {"q", "r"} | set(targets(s))), s


def test_criterion_5_subtyping_semantics():
    t0 = time.perf_counter()
    rng = random.Random(5)
    sound = unsound = 0
    cases = _soundness_cases(rng)
    while sound + unsound < 200:
        m, s = next(cases)
        t = mutate_up(rng.randint, s, rng.randint(1, 4)) if rng.random() < 0.8 else random_type(rng, 4, ("q", "r"))
        if fair_subtype(s, t) is None:
            continue
        if coherent(m.union({"p": t})):
            sound += 1
        else:
            unsound += 1
    disc_ok = disc_bad = 0
    for _ in range(3000):
        s = random_bounded_type(rng, 4)
        t = mutate_up(rng.randint, s, rng.randint(1, 4))
        if unfair_subtype(s, t) and fair_subtype(s, t) is None and oracle_bounded(s):
            d = discriminator("p", s, t)
            if coherent(d.union({"p": s})) and not coherent(d.union({"p": t})):
                disc_ok += 1
            else:
                disc_bad += 1
    ok = unsound == 0 and sound >= 200 and disc_bad == 0 and disc_ok > 0
    detail = f"soundness {sound}/{sound + unsound}, discriminators {disc_ok}/{disc_ok + disc_bad}"
    report(5, ok, detail, t0)


def test_criterion_6_duality():
    t0 = time.perf_counter()
    rng = random.Random(6)
    bad = 0
    for i in range(500):
        roles = ("q", "r") if i % 2 else ("q",)
        s = random_bounded_type(rng, 6, roles=roles)
        if not coherent(dual("p", s, set(roles) | set(targets(s))).union({"p": s})):
            bad += 1
    report(6, bad == 0, f"500 bounded types, {bad} incoherent duals", t0)


RUNTIME = [
    ("bsc.fmst", "Main", 10_000),
    ("2bsc.fmst", "Main", 10_000),
    ("nondet.fmst", "Main", 10_000),
    ("slot.fmst", "Main", 10_000),
    ("corules.fmst", "C", 10_000),
    ("pms.fmst", "Main", 120),
]


def test_criterion_7_runtime_soundness():
    t0 = time.perf_counter()
    problems = []
    explored = {}
    for name, entry, limit in RUNTIME:
        m = Machine(load_file(str(CORPUS / name)))
        tr = simulate(m.program, entry, machine=m, recheck=True)
        mus = [tr.initial_measure] + [e.measure for e in tr.entries if e.measure is not None]
        # a macro-step ending in done may keep the measure at (0, 0)
        last = len(mus) - 1
        if tr.outcome != "Terminated" or any(b >= a and i < last for i, (a, b) in enumerate(zip(mus, mus[1:]), 1)):
            problems.append(f"{name} guided")
        for seed in range(3):
            simulate(m.program, entry, scheduler="random", seed=seed, max_steps=50, machine=m, recheck=True)
        states, exhausted = m.explore(m.initial(entry), limit)
        explored[name] = f"{len(states)}{'' if exhausted else '+'}"
        for c in states:
            m.check_config(c)
            if not c.terminated:
                path = m.helpful_path(c)
                while not path[-1].target.terminated:
                    path = m.helpful_path(path[-1].target)
    report(7, not problems, f"states {explored}" + (f", failed {problems}" if problems else ""), t0)


def test_criterion_8_preorder():
    t0 = time.perf_counter()
    rng = random.Random(8)
    refl = sum(fair_subtype(s, s) == 0 for s in (random_type(rng, 6, ("q", "r")) for _ in range(1000)))
    triples = trans = 0
    while triples < 500:
        s = random_type(rng, 4)
        t = mutate_up(rng.randint, s, rng.randint(0, 3))
        u = mutate_up(rng.randint, t, rng.randint(0, 3))
        if fair_subtype(s, t) is None or fair_subtype(t, u) is None:
            continue
        triples += 1
        trans += fair_subtype(s, u) is not None
    report(8, refl == 1000 and trans == triples, f"reflexive {refl}/1000, transitive {trans}/{triples}", t0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
