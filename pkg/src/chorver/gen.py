"""Random generators for small programs, formulas and states."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from chorver.check import check_program
from chorver.logic import (And, EqAtom, Formula, LogVar, Const, Not, Or, TheoryAtom, holds,
                           same)
from chorver.state import State
from chorver.syntax import (NIL, Assign, Call, Chor, Com, Cond, Expr, IntLit, LVar, Op, Program,
                            Sel, Seq, Var)

PROCS = ("p", "q", "r")
VARS = ("x", "y")
LABELS = ("L", "R")


@dataclass(frozen=True)
class GenConfig:
    max_procs: int = 3
    max_vars: int = 2
    max_depth: int = 5
    lo: int = 0
    hi: int = 3
    procedures: bool = True  # allow non-recursive procedures
    free_logvars: bool = True  # allow free logical variables in formulas


class Gen:
    def __init__(self, rng: random.Random, cfg: GenConfig = GenConfig()):
        self.rng = rng
        self.cfg = cfg
        self.procs = PROCS[: rng.randint(1, cfg.max_procs)]
        self.vars = VARS[: cfg.max_vars]

    # expressions

    def const(self) -> Expr:
        return IntLit(self.rng.randint(self.cfg.lo, self.cfg.hi))

    def expr(self, depth: int = 2, wrap=Var) -> Expr:
        r = self.rng.random()
        if depth == 0 or r < 0.45:
            return wrap(self.rng.choice(self.vars)) if self.rng.random() < 0.65 else self.const()
        op = self.rng.choice(["+", "-", "*", "mod", "^"])
        if op == "^":
            return Op("^", (self.expr(depth - 1, wrap), IntLit(self.rng.randint(0, 2))))
        return Op(op, (self.expr(depth - 1, wrap), self.expr(depth - 1, wrap)))

    def guard(self, wrap=Var) -> Expr:
        b = Op(self.rng.choice(["=", "<", "<="]), (self.expr(1, wrap), self.expr(1, wrap)))
        r = self.rng.random()
        if r < 0.15:
            return Op("not", (b,))
        if r < 0.25:
            return Op(self.rng.choice(["and", "or"]), (b, self.guard(wrap)))
        return b

    # choreographies

    def pair(self) -> tuple[str, str]:
        p, q = self.rng.sample(self.procs, 2)
        return p, q

    def chor(self, depth: int, callable_: tuple[str, ...] = ()) -> Chor:
        rng = self.rng
        if depth == 0:
            return Call(rng.choice(callable_)) if callable_ and rng.random() < 0.3 else NIL
        two = len(self.procs) > 1
        kinds = ["assign"] * 2 + ["cond"] * 3 + ["nil"]
        if two:
            kinds += ["com"] * 4 + ["sel"]
        if callable_:
            kinds.append("call")
        k = rng.choice(kinds)
        if k == "nil":
            return NIL
        if k == "call":
            return Call(rng.choice(callable_))
        if k == "cond":
            p = rng.choice(self.procs)
            return Cond(p, self.guard(), self.chor(depth - 1, callable_),
                        self.chor(depth - 1, callable_))
        if k == "assign":
            i = Assign(rng.choice(self.procs), rng.choice(self.vars), self.expr())
        elif k == "com":
            p, q = self.pair()
            i = Com(p, self.expr(), q, rng.choice(self.vars))
        else:
            p, q = self.pair()
            i = Sel(p, q, rng.choice(LABELS))
        return Seq(i, self.chor(depth - 1, callable_))

    def program(self) -> Program:
        procs: dict[str, Chor] = {}
        if self.cfg.procedures and self.rng.random() < 0.3:
            # each procedure may only call earlier ones: no recursion
            for n in range(self.rng.randint(1, 2)):
                name = f"P{n}"
                procs[name] = self.chor(self.rng.randint(1, max(1, self.cfg.max_depth - 2)),
                                        tuple(procs))
        main = self.chor(self.rng.randint(1, self.cfg.max_depth), tuple(procs))
        prog = Program(tuple(self.procs), LABELS, {}, procs, main)
        return check_program(prog)

    # formulas

    def atom(self) -> Formula:
        rng = self.rng

        def lv():
            return LVar(rng.choice(self.procs), rng.choice(self.vars))

        def lexpr():
            p = rng.choice(self.procs)
            return self.expr(1, wrap=lambda x: LVar(p, x)) if rng.random() < 0.4 else lv()

        r = rng.random()
        if r < 0.3:
            return same(lexpr(), lexpr())
        if r < 0.5:
            return same(lexpr(), self.const())
        if r < 0.65 and self.cfg.free_logvars:
            return EqAtom(lexpr(), "X")
        if r < 0.75 and self.cfg.free_logvars:
            return TheoryAtom(rng.choice(["<", "<=", "="]), LogVar("X"),
                              Const(rng.randint(self.cfg.lo, self.cfg.hi)))
        return holds(Op(rng.choice(["<", "<="]), (lexpr(), lexpr())))

    def formula(self, depth: int = 2) -> Formula:
        r = self.rng.random()
        if depth == 0 or r < 0.4:
            return self.atom()
        if r < 0.55:
            return Not(self.formula(depth - 1))
        if r < 0.8:
            return And(self.formula(depth - 1), self.formula(depth - 1))
        return Or(self.formula(depth - 1), self.formula(depth - 1))


def states(procs, keys, lo: int, hi: int):
    """All states assigning ``lo..hi`` to the ``(process, variable)`` keys."""
    keys = sorted(keys)
    for vals in itertools.product(range(lo, hi + 1), repeat=len(keys)):
        data: dict[str, dict] = {p: {} for p in procs}
        for (p, x), v in zip(keys, vals):
            data[p][x] = v
        yield State(data)


def assignments(names, lo: int, hi: int):
    names = sorted(names)
    for vals in itertools.product(range(lo, hi + 1), repeat=len(names)):
        yield dict(zip(names, vals))
