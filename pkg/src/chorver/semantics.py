"""Labelled transition semantics of choreographies.

``head_steps`` implements the in-order rules (assignment, communication,
selection, both conditional rules, and the call/enter/finish bookkeeping of
procedure calls); ``all_steps`` adds the three delay rules that let a process
act ahead of instructions it does not take part in.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Union

from chorver.state import EvalError, State, eval_expr, value_str
from chorver.syntax import (Assign, Chor, Com, Cond, Call, Nil, Program, RuntimeCall, Sel, Seq,
                            Value, head_str, pn)

DEFAULT_RUN_FUEL = 10_000
DEFAULT_EXPLORE_FUEL = 100_000


@dataclass(frozen=True)
class Internal:
    proc: str

    def __str__(self):
        return f"tau@{self.proc}"


@dataclass(frozen=True)
class ValueCom:
    sender: str
    value: Value
    receiver: str

    def __str__(self):
        return f"{self.sender}->{self.receiver}({value_str(self.value)})"


@dataclass(frozen=True)
class LabelSel:
    sender: str
    receiver: str
    label: str

    def __str__(self):
        return f"{self.sender}->{self.receiver}[{self.label}]"


Label = Union[Internal, ValueCom, LabelSel]


def label_procs(mu: Label) -> frozenset[str]:
    if isinstance(mu, Internal):
        return frozenset((mu.proc,))
    return frozenset((mu.sender, mu.receiver))


@dataclass(frozen=True)
class Config:
    chor: Chor
    state: State


class ChorRuntimeError(EvalError):
    """A rule premise could not be evaluated."""


# --- step relation -----------------------------------------------------------


class Stepper:
    """Computes successors of configurations for one program (memoised)."""

    def __init__(self, program: Program):
        self.program = program
        self.procs = program.process_set
        self._all: dict = {}

    def _eval(self, e, sigma: State, p: str):
        try:
            return eval_expr(e, sigma[p], self.program.functions, p)
        except EvalError as err:
            raise ChorRuntimeError(err.msg, err.pos) from None

    def head_steps(self, c: Chor, sigma: State,
                   blocked: frozenset[str] = frozenset()) -> list[tuple[Label, Chor, State]]:
        """In-order transitions, skipping (without evaluating) any by ``blocked``."""
        match c:
            case Seq(instr=Assign(proc=p, var=x, expr=e), cont=k):
                if p in blocked:
                    return []
                return [(Internal(p), k, sigma.update(p, x, self._eval(e, sigma, p)))]
            case Seq(instr=Com(sender=p, expr=e, receiver=q, var=x), cont=k):
                if p in blocked or q in blocked:
                    return []
                v = self._eval(e, sigma, p)
                return [(ValueCom(p, v, q), k, sigma.update(q, x, v))]
            case Seq(instr=Sel(sender=p, receiver=q, label=l), cont=k):
                if p in blocked or q in blocked:
                    return []
                return [(LabelSel(p, q, l), k, sigma)]
            case Cond(proc=p, guard=b, then=c1, else_=c2):
                if p in blocked:
                    return []
                v = self._eval(b, sigma, p)
                if not isinstance(v, bool):
                    raise ChorRuntimeError(f"condition at {p} evaluated to non-boolean {v!r}")
                return [(Internal(p), c1 if v else c2, sigma)]
            case Call(name=x):
                body = self.program.procedures[x]
                # every process takes part in every procedure
                out = []
                for r in sorted(self.procs - blocked):
                    rest = self.procs - {r}
                    nxt = RuntimeCall(x, rest, body) if rest else body
                    out.append((Internal(r), nxt, sigma))
                return out
            case RuntimeCall(name=x, waiting=w, body=body):
                if len(w) == 1:
                    (q,) = w
                    return [] if q in blocked else [(Internal(q), body, sigma)]
                return [(Internal(r), RuntimeCall(x, w - {r}, body), sigma)
                        for r in sorted(w - blocked)]
            case Nil():
                return []
        raise TypeError(f"not a choreography: {c!r}")

    def all_steps(self, c: Chor, sigma: State,
                  blocked: frozenset[str] = frozenset()) -> list[tuple[Label, Chor, State]]:
        """Head transitions plus those derivable through the delay rules.

        Transitions involving a process in ``blocked`` are never computed, so a
        delayed instruction is only evaluated when its side condition holds.
        """
        key = (c, sigma, blocked)
        hit = self._all.get(key)
        if hit is not None:
            return hit
        head = self.head_steps(c, sigma, blocked)
        out = []
        match c:
            case Seq(instr=i, cont=k):
                for mu, k2, s2 in self.all_steps(k, sigma, blocked | pn(i, self.procs)):
                    out.append((mu, Seq(i, k2), s2))
            case Cond(proc=p, guard=b, then=c1, else_=c2):
                inner = blocked | {p}
                right = self.all_steps(c2, sigma, inner)
                for mu, k1, s1 in self.all_steps(c1, sigma, inner):
                    for mu2, k2, s2 in right:
                        if mu2 == mu and _same_label_value(mu, mu2) and s2 == s1:
                            out.append((mu, Cond(p, b, k1, k2), s1))
            case RuntimeCall(name=x, waiting=w, body=body):
                for mu, k2, s2 in self.all_steps(body, sigma, blocked | w):
                    out.append((mu, RuntimeCall(x, w, k2), s2))
        out.sort(key=_acting)
        out = _dedup(head + out)
        if len(self._all) > 200_000:
            self._all.clear()
        self._all[key] = out
        return out


def _acting(step):
    mu = step[0]
    return (mu.proc if isinstance(mu, Internal) else mu.sender, str(mu))


def _same_label_value(a: Label, b: Label) -> bool:
    if isinstance(a, ValueCom):
        return isinstance(a.value, bool) == isinstance(b.value, bool)
    return True


def _dedup(steps):
    seen = set()
    out = []
    for s in steps:
        k = (s[0], _value_tag(s[0]), s[1], s[2])
        if k not in seen:
            seen.add(k)
            out.append(s)
    return out


def _value_tag(mu):
    return isinstance(mu.value, bool) if isinstance(mu, ValueCom) else None


def head_steps(cfg: Config, program: Program) -> list[tuple[Label, Config]]:
    st = Stepper(program)
    return [(mu, Config(c, s)) for mu, c, s in st.head_steps(cfg.chor, cfg.state)]


def all_steps(cfg: Config, program: Program) -> list[tuple[Label, Config]]:
    st = Stepper(program)
    return [(mu, Config(c, s)) for mu, c, s in st.all_steps(cfg.chor, cfg.state)]


# --- schedulers and runs -----------------------------------------------------


@dataclass(frozen=True)
class HeadOnly:
    """Always take the first head transition (in-order execution)."""


@dataclass(frozen=True)
class RandomFull:
    """Choose uniformly among all transitions, reproducibly from ``seed``."""

    seed: int | str = 0


@dataclass(frozen=True)
class FixedIndex:
    """Take ``choices[i]`` at step ``i`` (modulo the number enabled); 0 afterwards."""

    choices: tuple[int, ...] = ()


SchedulerPolicy = Union[HeadOnly, RandomFull, FixedIndex]


@dataclass
class Terminated:
    state: State
    trace: list = field(default_factory=list)
    steps: int = 0


@dataclass
class OutOfFuel:
    config: Config
    trace: list = field(default_factory=list)
    steps: int = 0


@dataclass
class RuntimeFailure:
    message: str
    config: Config | None = None
    trace: list = field(default_factory=list)
    steps: int = 0


StepOutcome = Union[Terminated, OutOfFuel, RuntimeFailure]


@dataclass(frozen=True)
class TraceEntry:
    index: int
    label: Label
    residual: Chor
    state: State

    def line(self, with_state: bool = False) -> str:
        s = f"{self.index} {self.label} | {head_str(self.residual)}"
        if with_state:
            s += "   " + " ".join(f"{p}.{x}={value_str(v)}" for p, x, v in self.state.bindings())
        return s


def run(cfg: Config, program: Program, policy: SchedulerPolicy = HeadOnly(),
        fuel: int = DEFAULT_RUN_FUEL, stepper: Stepper | None = None) -> StepOutcome:
    """Execute until ``0`` is reached or ``fuel`` steps have been taken."""
    if fuel < 0:
        raise ValueError("fuel must be non-negative")
    st = stepper or Stepper(program)
    rng = random.Random(policy.seed) if isinstance(policy, RandomFull) else None
    c, sigma = cfg.chor, cfg.state
    trace: list[TraceEntry] = []
    for n in range(fuel + 1):
        if isinstance(c, Nil):
            return Terminated(sigma, trace, n)
        if n == fuel:
            break
        try:
            if isinstance(policy, HeadOnly):
                steps = st.head_steps(c, sigma)
            else:
                steps = st.all_steps(c, sigma)
        except EvalError as err:
            return RuntimeFailure(str(err), Config(c, sigma), trace, n)
        if not steps:
            return RuntimeFailure("stuck: no transition enabled", Config(c, sigma), trace, n)
        if isinstance(policy, RandomFull):
            mu, c, sigma = steps[rng.randrange(len(steps))]
        elif isinstance(policy, FixedIndex) and n < len(policy.choices):
            mu, c, sigma = steps[policy.choices[n] % len(steps)]
        else:
            mu, c, sigma = steps[0]
        trace.append(TraceEntry(n, mu, c, sigma))
    return OutOfFuel(Config(c, sigma), trace, fuel)


# --- exhaustive exploration --------------------------------------------------


@dataclass
class ExploreResult:
    terminals: frozenset[State]
    visited: int
    exhausted: bool
    stuck: int = 0
    errors: int = 0


def explore(cfg: Config, program: Program, fuel: int = DEFAULT_EXPLORE_FUEL,
            stepper: Stepper | None = None) -> ExploreResult:
    """Breadth-first closure of the full transition relation.

    ``fuel`` bounds the number of distinct configurations visited.
    """
    st = stepper or Stepper(program)
    start = (cfg.chor, cfg.state)
    seen = {start}
    todo = deque([start])
    terminals: set[State] = set()
    stuck = errors = 0
    exhausted = False
    while todo:
        c, sigma = todo.popleft()
        if isinstance(c, Nil):
            terminals.add(sigma)
            continue
        try:
            steps = st.all_steps(c, sigma)
        except EvalError:
            errors += 1
            continue
        if not steps:
            stuck += 1
        for _, c2, s2 in steps:
            k = (c2, s2)
            if k in seen:
                continue
            if len(seen) >= fuel:
                exhausted = True
                continue
            seen.add(k)
            todo.append(k)
    return ExploreResult(frozenset(terminals), len(seen), exhausted, stuck, errors)
