from __future__ import annotations

import pytest

from fmst.core import rename_session
from fmst.errors import NotTyped, PreconditionViolated
from fmst.parser import load_file, load_program
from fmst.runtime import Config, Machine, simulate

RUNNABLE = ["bsc.fmst", "2bsc.fmst", "pms.fmst", "nondet.fmst", "slot.fmst"]


def machine(corpus, name, **kw) -> Machine:
    return Machine(load_file(str(corpus / name)), **kw)


@pytest.mark.parametrize("name", RUNNABLE)
def test_guided_terminates_with_decreasing_measure(corpus, name):
    m = machine(corpus, name)
    tr = simulate(m.program, "Main", machine=m, recheck=True)
    assert tr.outcome == "Terminated"
    mus = [tr.initial_measure] + [e.measure for e in tr.entries if e.measure is not None]
    assert all(b < a for a, b in zip(mus, mus[1:]))
    assert tr.initial_measure <= (m.report.rank("Main"), 0)


@pytest.mark.parametrize("name", RUNNABLE)
@pytest.mark.parametrize("seed", range(5))
def test_random_runs_stay_typed(corpus, name, seed):
    m = machine(corpus, name)
    tr = simulate(m.program, "Main", scheduler="random", seed=seed, max_steps=60, machine=m, recheck=True)
    assert tr.outcome in ("Terminated", "MaxSteps")


@pytest.mark.parametrize("macro", [False, True])
def test_bsc_guided_trace(corpus, macro):
    m = machine(corpus, "bsc.fmst", macro=macro)
    tr = simulate(m.program, "Main", machine=m)
    assert tr.outcome == "Terminated"
    assert tr.entries[-1].rule == "r-signal"
    assert tr.entries[-1].state == "done"


@pytest.mark.parametrize("name, limit", [("bsc.fmst", 500), ("2bsc.fmst", 500), ("nondet.fmst", 200), ("pms.fmst", 120)])
def test_reachable_states_are_typed_and_can_terminate(corpus, name, limit):
    m = machine(corpus, name)
    states, _ = m.explore(m.initial("Main"), limit)
    for c in states[:60]:
        m.check_config(c)
        if not c.terminated:
            assert m.helpful_path(c)


def test_bsc_state_space_is_finite(corpus):
    m = machine(corpus, "bsc.fmst")
    states, exhausted = m.explore(m.initial("Main"), 1000)
    assert exhausted and any(c.terminated for c in states)


def test_choice_with_done_ends_quickly(corpus):
    m = machine(corpus, "corules.fmst")
    tr = simulate(m.program, "C", machine=m)
    assert tr.outcome == "Terminated" and tr.steps <= 2


def test_done_entry():
    tr = simulate(load_program("def D() = done"), "D")
    assert tr.outcome == "Terminated" and tr.steps == 0


def test_signal_rule():
    prog = load_program("def Main() = new s { p = close s[p] | q = wait s[q]. done }")
    tr = simulate(prog, "Main", recheck=True)
    assert [e.rule for e in tr.entries] == ["r-signal"]
    # the session is spawned during normalization
    assert tr.initial_measure == (0, 1)


def test_entry_preconditions(corpus):
    m = machine(corpus, "bsc.fmst")
    with pytest.raises(PreconditionViolated):
        m.initial("Buyer")
    with pytest.raises(PreconditionViolated):
        m.initial("Nope")
    bad = Machine(load_file(str(corpus / "corules.fmst")))
    with pytest.raises(NotTyped):
        bad.initial("A")
    with pytest.raises(PreconditionViolated):
        simulate(m.program, "Main", scheduler="lazy", machine=m)


def test_key_ignores_session_names(corpus):
    m = machine(corpus, "pms.fmst")
    c = m.initial("Main")
    (old, sm), = c.sessions
    renamed = Config((("s#7", sm),), tuple(rename_session(t, old, "s#7") for t in c.threads))
    assert m.key(c) == m.key(renamed)


def test_trace_json_lines(corpus):
    m = machine(corpus, "bsc.fmst")
    lines = list(simulate(m.program, "Main", machine=m).as_json_lines())
    assert lines[-1] == {"outcome": "Terminated", "steps": len(lines) - 1}
    assert all("rule" in x and "state" in x for x in lines[:-1])
