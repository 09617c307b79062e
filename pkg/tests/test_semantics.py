import random

import pytest
from hypothesis import given, settings, strategies as st

from chorver.gen import Gen, GenConfig
from chorver.check import required_inputs
from chorver.parser import parse_program, parse_state
from chorver.semantics import (Config, FixedIndex, HeadOnly, Internal, LabelSel, OutOfFuel,
                               RandomFull, RuntimeFailure, Stepper, Terminated,
                               all_steps, explore, head_steps, label_procs, run)
from chorver.state import State
from chorver.syntax import NIL, Call, RuntimeCall, Seq, pn


def prog_of(src):
    return parse_program(src)


def test_assign_and_sel_head_steps():
    prog = prog_of("processes p, q; main { p.x := 1 + 2; q -> p[L]; 0 }")
    sigma = State.empty(prog.processes)
    [(mu, cfg)] = head_steps(Config(prog.main, sigma), prog)
    assert mu == Internal("p") and cfg.state["p"]["x"] == 3
    [(mu2, cfg2)] = head_steps(cfg, prog)
    assert mu2 == LabelSel("q", "p", "L") and cfg2.state == cfg.state and cfg2.chor == NIL


def test_call_has_one_successor_per_process(zeros):
    prog = zeros[0]
    sigma = State.empty(prog.processes)
    steps = head_steps(Config(Call("Z"), sigma), prog)
    body = prog.procedures["Z"]
    assert steps == [
        (Internal("p"), Config(RuntimeCall("Z", frozenset({"q"}), body), sigma)),
        (Internal("q"), Config(RuntimeCall("Z", frozenset({"p"}), body), sigma)),
    ]
    # the last process to enter finishes the call
    [(_, cfg)] = head_steps(steps[0][1], prog)
    assert cfg.chor == body


def test_single_process_call_collapses():
    prog = prog_of("processes p; procedure X { p.x := 1; 0 } main { X }")
    [(mu, cfg)] = head_steps(Config(prog.main, State.empty(["p"])), prog)
    assert mu == Internal("p") and cfg.chor == prog.procedures["X"]


def test_delay_instruction():
    prog = prog_of("processes p, q; main { p.x := 1; q.y := 2; 0 }")
    cfg = Config(prog.main, State.empty(prog.processes))
    steps = all_steps(cfg, prog)
    assert [mu for mu, _ in steps] == [Internal("p"), Internal("q")]
    assert steps[1][1].chor == Seq(prog.main.instr, NIL)
    res = explore(cfg, prog)
    assert len(res.terminals) == 1 and res.visited >= 3


def test_delay_conditional_needs_both_branches():
    prog = prog_of("processes p, q; main { if p.b then { q.y := 1; 0 } else { q.y := 1; 0 } }")
    sigma = parse_state("p.b = true", prog.processes)
    labels = [mu for mu, _ in all_steps(Config(prog.main, sigma), prog)]
    assert Internal("q") in labels
    prog = prog_of("processes p, q; main { if p.b then { q.y := 1; 0 } else { q.y := 2; 0 } }")
    labels = [mu for mu, _ in all_steps(Config(prog.main, sigma), prog)]
    assert labels == [Internal("p")]


def test_delay_never_evaluates_blocked_instructions(dh):
    prog, sigma, _ = dh
    # q.s := a ^ b mod m reads q.a before it is received; it must not be evaluated early
    assert explore(Config(prog.main, sigma), prog).errors == 0


def test_dh_run_and_explore(dh):
    prog, sigma, _ = dh
    out = run(Config(prog.main, sigma), prog)
    assert isinstance(out, Terminated)
    assert out.state["p"]["s"] == out.state["q"]["s"] == 2 == pow(19, 6, 23) == pow(8, 15, 23)
    assert [str(e.label) for e in out.trace][:2] == ["p->q(8)", "q->p(19)"]
    res = explore(Config(prog.main, sigma), prog)
    assert res.terminals == {out.state}


def test_nil_terminates_immediately():
    prog = prog_of("processes p; main { 0 }")
    sigma = State.empty(["p"])
    for policy in (HeadOnly(), RandomFull(3), FixedIndex((1, 2))):
        out = run(Config(NIL, sigma), prog, policy)
        assert isinstance(out, Terminated) and out.steps == 0 and out.state == sigma
    assert explore(Config(NIL, sigma), prog).terminals == {sigma}


def test_zeros_run(zeros):
    prog, sigma, _ = zeros
    out = run(Config(prog.main, sigma), prog)
    assert isinstance(out, Terminated) and out.state["p"]["x"] == 2
    sels = [str(e.label) for e in out.trace if isinstance(e.label, LabelSel)]
    assert sels == ["q->p[R]", "q->p[R]", "q->p[L]"]


def test_random_policy_is_reproducible(zeros):
    prog, sigma, _ = zeros
    a = run(Config(prog.main, sigma), prog, RandomFull(7))
    b = run(Config(prog.main, sigma), prog, RandomFull(7))
    assert [e.line() for e in a.trace] == [e.line() for e in b.trace]


def test_fuel_and_runtime_errors():
    prog = prog_of("processes p; procedure X { p.x := x + 1; X } main { p.x := 0; X }")
    out = run(Config(prog.main, State.empty(["p"])), prog, fuel=50)
    assert isinstance(out, OutOfFuel) and out.steps == 50
    res = explore(Config(prog.main, State.empty(["p"])), prog, fuel=100)
    assert res.exhausted
    prog = prog_of("processes p; main { p.y := 2 ^ x; 0 }")
    out = run(Config(prog.main, parse_state("p.x = -1", ["p"])), prog)
    assert isinstance(out, RuntimeFailure) and "negative" in out.message
    with pytest.raises(ValueError):
        run(Config(prog.main, State.empty(["p"])), prog, fuel=-1)


def test_trace_line_format(dh):
    prog, sigma, _ = dh
    out = run(Config(prog.main, sigma), prog)
    assert out.trace[0].line() == "0 p->q(8) | q.g ^ b mod m -> p.b"


def _initial(prog, rng):
    keys = sorted(required_inputs(prog))
    data = {p: {} for p in prog.processes}
    for p, x in keys:
        data[p][x] = rng.randint(0, 3)
    return State(data)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_generated_confluence_and_side_conditions(seed):
    rng = random.Random(seed)
    prog = Gen(rng, GenConfig()).program()
    sigma = _initial(prog, rng)
    st_ = Stepper(prog)
    seen, todo = {(prog.main, sigma)}, [(prog.main, sigma)]
    while todo:
        c, s = todo.pop()
        head = st_.head_steps(c, s)
        full = st_.all_steps(c, s)
        if c != NIL:
            assert head, "deadlock"
        assert all(h in full for h in head)
        for mu, c2, s2 in full:
            assert label_procs(mu) == pn(mu)
            if (mu, c2, s2) not in head and isinstance(c, Seq):
                # a delayed step never involves the skipped instruction's processes
                assert not (pn(c.instr) & pn(mu))
            if (c2, s2) not in seen:
                seen.add((c2, s2))
                todo.append((c2, s2))
    res = explore(Config(prog.main, sigma), prog)
    assert len(res.terminals) == 1
    head = run(Config(prog.main, sigma), prog, HeadOnly())
    assert head.state in res.terminals
    rnd = run(Config(prog.main, sigma), prog, RandomFull(seed))
    assert rnd.state in res.terminals
