"""Validity backends for state formulas.

``BoundedEnum`` decides validity by exhaustive search over a finite value
domain; ``SmtSolver`` hands the negated sentence to an SMT-LIB 2 solver
(``z3 -in`` by default) over a pipe.
"""

from __future__ import annotations

import itertools
import re
import shutil
import subprocess
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from chorver.check import CheckError, formula_types
from chorver.logic import (And, EqAtom, Formula, Let, LogVar, Not, TheoryAtom,
                           conjuncts, free_logvars, localised_vars, satisfies)
from chorver.state import State, value_str
from chorver.syntax import (BoolLit, ChorError, Expr, FunCall, FunDef, IntLit, LVar, Op,
                            Program, Value, Var)


@dataclass(frozen=True)
class Valid:
    def __str__(self):
        return "Valid"


@dataclass(frozen=True)
class Refuted:
    """A countermodel: a global state and a logical-variable assignment."""

    state: State
    rho: dict = field(default_factory=dict)

    def __str__(self):
        return "Refuted"


class BackendError(ChorError):
    """The backend could not decide the query (never a verdict)."""


Result = Valid | Refuted


def _types(phi: Formula, program: Program | None):
    try:
        return formula_types(phi, program)
    except CheckError:
        return {}, {}


def _free(phi: Formula):
    loc = sorted(localised_vars(phi))
    logical = sorted(free_logvars(phi))
    return loc, logical


def has_variable_exponent(phi: Formula) -> bool:
    def expr_has(e) -> bool:
        match e:
            case Op(op="^", args=(_, n)) if not isinstance(n, IntLit):
                return True
            case Op(args=args) | FunCall(args=args):
                return any(expr_has(a) for a in args)
        return False

    match phi:
        case EqAtom(expr=e):
            return expr_has(e)
        case And(left=a, right=b):
            return has_variable_exponent(a) or has_variable_exponent(b)
        case Not(body=a):
            return has_variable_exponent(a)
        case Let(expr=e, body=b):
            return expr_has(e) or has_variable_exponent(b)
    return False


# --- bounded enumeration -----------------------------------------------------


@dataclass
class BoundedEnum:
    """Exhaustive search over integers ``lo..hi`` (plus booleans)."""

    lo: int = -8
    hi: int = 8
    # drop negative integers when a variable exponent occurs, keeping `^` total
    natural_for_pow: bool = True
    queries: int = 0

    def domain(self, ty: str | None, natural: bool = False) -> list[Value]:
        if ty == "bool":
            return [False, True]
        ints = list(range(max(self.lo, 0) if natural else self.lo, self.hi + 1))
        return ints if ty == "int" else ints + [False, True]

    def check(self, hyp: Formula, goal: Formula, program: Program | None = None,
              exists: Iterable[str] = (), processes: Iterable[str] = ()) -> Result:
        """Decide ``hyp -> (exists <exists>. goal)`` for all states and assignments."""
        self.queries += 1
        funcs = program.functions if program is not None else {}
        exists = frozenset(exists)
        whole = And(hyp, goal)
        loc_t, log_t = _types(whole, program)
        locs, logs = _free(whole)
        # variables of earlier antecedent conjuncts first, for early pruning
        first = []
        for c in conjuncts(hyp):
            first += [v for v in sorted(localised_vars(c)) if v not in first]
        locs = first + [v for v in locs if v not in first]
        univ_logs = [x for x in logs if x not in exists]
        ex_logs = [x for x in logs if x in exists]
        # logical variables first so counterexamples prefer small states
        order: list[tuple[str, object]] = [("log", x) for x in univ_logs] + [("loc", v) for v in locs]
        nat = self.natural_for_pow and has_variable_exponent(whole)
        doms = [self.domain(log_t.get(x) if k == "log" else loc_t.get(x), nat) for k, x in order]
        procs = set(processes) | {p for p, _ in locs}
        if program is not None:
            procs |= program.process_set

        # each antecedent conjunct is tested as soon as its variables are assigned
        pos = {key: i for i, key in enumerate(order)}
        checks: dict[int, list[Formula]] = {}
        for c in conjuncts(hyp):
            need = [pos[("loc", v)] for v in localised_vars(c)]
            need += [pos[("log", x)] for x in free_logvars(c)]
            checks.setdefault(max(need, default=-1), []).append(c)

        ex_doms = [self.domain(log_t.get(x), nat) for x in ex_logs]
        sigma: dict[str, dict[str, Value]] = {p: {} for p in procs}
        rho: dict[str, Value] = {}

        def ok_at(i: int) -> bool:
            return all(satisfies(sigma, rho, c, funcs) for c in checks.get(i, ()))

        def goal_holds() -> bool:
            if not ex_logs:
                return satisfies(sigma, rho, goal, funcs)
            for vals in itertools.product(*ex_doms):
                if satisfies(sigma, {**rho, **dict(zip(ex_logs, vals))}, goal, funcs):
                    return True
            return False

        def dfs(i: int) -> bool:
            # True when a countermodel has been found
            if i == len(order):
                return not goal_holds()
            kind, key = order[i]
            for v in doms[i]:
                if kind == "log":
                    rho[key] = v
                else:
                    sigma[key[0]][key[1]] = v
                if ok_at(i) and dfs(i + 1):
                    return True
            if kind == "log":
                del rho[key]
            else:
                del sigma[key[0]][key[1]]
            return False

        if not ok_at(-1):
            return Valid()
        if dfs(0):
            return Refuted(State(sigma), dict(rho))
        return Valid()


# --- SMT-LIB -----------------------------------------------------------------


def _sym(name: str) -> str:
    return f"|{name}|"


def _sort(ty: str | None) -> str:
    return "Bool" if ty == "bool" else "Int"


class _Emitter:
    def __init__(self, funcs: Mapping[str, FunDef]):
        self.funcs = funcs

    def expr(self, e: Expr, env) -> str:
        match e:
            case IntLit(value=v):
                return str(v) if v >= 0 else f"(- {-v})"
            case BoolLit(value=v):
                return "true" if v else "false"
            case LVar(proc=p, name=x):
                return _sym(f"{p}.{x}")
            case Var(name=x):
                return env(x)
            case FunCall(name=f, args=args):
                return f"({_sym(f)} {' '.join(self.expr(a, env) for a in args)})"
            case Op(op=op, args=args):
                a = [self.expr(x, env) for x in args]
                match op:
                    case "+" | "-" | "*" | "<" | "<=" | "=" | "and" | "or":
                        return f"({op} {a[0]} {a[1]})"
                    case "not":
                        return f"(not {a[0]})"
                    case "mod":
                        return f"(ite (= {a[1]} 0) {a[0]} (mod {a[0]} {a[1]}))"
                    case "^":
                        n = args[1]
                        if not isinstance(n, IntLit) or n.value < 0:
                            raise BackendError("the SMT backend needs a non-negative literal exponent")
                        if n.value == 0:
                            return "1"
                        if n.value == 1:
                            return a[0]
                        return f"(* {' '.join([a[0]] * n.value)})"
        raise BackendError(f"cannot translate {e!r}")

    def formula(self, f: Formula) -> str:
        match f:
            case EqAtom(expr=e, var=x):
                return f"(= {self.expr(e, None)} {_sym('$' + x)})"
            case TheoryAtom(rel=rel, left=l, right=r):
                return f"({rel} {self.term(l)} {self.term(r)})"
            case And(left=a, right=b):
                return f"(and {self.formula(a)} {self.formula(b)})"
            case Not(body=a):
                return f"(not {self.formula(a)})"
            case Let(var=x, expr=e, body=b):
                return f"(let (({_sym('$' + x)} {self.expr(e, None)})) {self.formula(b)})"
        raise BackendError(f"cannot translate {f!r}")

    def term(self, t) -> str:
        if isinstance(t, LogVar):
            return _sym("$" + t.name)
        v = t.value
        if isinstance(v, bool):
            return "true" if v else "false"
        return str(v) if v >= 0 else f"(- {-v})"

    def fundef(self, fd: FunDef) -> str:
        types = fd.param_types or ("int",) * len(fd.params)
        params = " ".join(f"({_sym(x)} {_sort(t)})" for x, t in zip(fd.params, types))
        body = self.expr(fd.body, lambda x: _sym(x))
        return f"(define-fun {_sym(fd.name)} ({params}) {_sort(fd.result_type)} {body})"


def _fun_order(funcs: Mapping[str, FunDef]) -> list[FunDef]:
    from chorver.syntax import fun_calls

    done: list[str] = []

    def visit(n):
        if n in done:
            return
        for m in sorted(fun_calls(funcs[n].body)):
            visit(m)
        done.append(n)

    for n in sorted(funcs):
        visit(n)
    return [funcs[n] for n in done]


def smt_query(hyp: Formula, goal: Formula, program: Program | None = None,
              exists: Iterable[str] = ()) -> tuple[str, list[tuple[str, str]]]:
    """SMT-LIB 2 text checking satisfiability of ``hyp && !(exists. goal)``.

    Returns the script and the ``(symbol, kind)`` list queried by ``get-value``.
    """
    funcs = program.functions if program is not None else {}
    exists = sorted(set(exists))
    whole = And(hyp, goal)
    loc_t, log_t = _types(whole, program)
    locs, logs = _free(whole)
    em = _Emitter(funcs)
    lines = ["(set-logic ALL)"]
    lines += [em.fundef(fd) for fd in _fun_order(funcs)]
    wanted = []
    for p, x in locs:
        lines.append(f"(declare-const {_sym(f'{p}.{x}')} {_sort(loc_t.get((p, x)))})")
        wanted.append((f"{p}.{x}", "loc"))
    for x in logs:
        if x in exists:
            continue
        lines.append(f"(declare-const {_sym('$' + x)} {_sort(log_t.get(x))})")
        wanted.append((x, "log"))
    g = em.formula(goal)
    ex = [x for x in exists if x in logs]
    if ex:
        binders = " ".join(f"({_sym('$' + x)} {_sort(log_t.get(x))})" for x in ex)
        g = f"(exists ({binders}) {g})"
    lines.append(f"(assert (not (=> {em.formula(hyp)} {g})))")
    lines.append("(check-sat)")
    if wanted:
        lines.append(f"(get-value ({' '.join(_sym(s if k == 'loc' else '$' + s) for s, k in wanted)}))")
    return "\n".join(lines) + "\n", wanted


_TOKEN = re.compile(r"\(|\)|\|[^|]*\||[^\s()]+")


def _sexp(text: str):
    toks = _TOKEN.findall(text)
    stack: list[list] = [[]]
    for t in toks:
        if t == "(":
            stack.append([])
        elif t == ")":
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(t)
    return stack[0]


def _value(v) -> Value:
    if v == "true":
        return True
    if v == "false":
        return False
    if isinstance(v, list):
        if len(v) == 2 and v[0] == "-":
            return -_value(v[1])
        raise BackendError(f"unexpected model value {v!r}")
    return int(v)


@dataclass
class SmtSolver:
    """An SMT-LIB 2 solver driven over a subprocess pipe."""

    command: tuple[str, ...] = ("z3", "-in")
    timeout: float = 30.0
    queries: int = 0

    def available(self) -> bool:
        return shutil.which(self.command[0]) is not None

    def check(self, hyp: Formula, goal: Formula, program: Program | None = None,
              exists: Iterable[str] = (), processes: Iterable[str] = ()) -> Result:
        self.queries += 1
        script, wanted = smt_query(hyp, goal, program, exists)
        try:
            proc = subprocess.run(self.command, input=script, capture_output=True, text=True,
                                  timeout=self.timeout)
        except (OSError, subprocess.TimeoutExpired) as err:
            raise BackendError(f"solver failed: {err}") from None
        out = proc.stdout.strip().splitlines()
        if not out:
            raise BackendError(f"solver produced no output: {proc.stderr.strip()}")
        status = out[0].strip()
        if status == "unsat":
            return Valid()
        if status != "sat":
            raise BackendError(f"solver answered {status!r}")
        procs = set(processes) | (program.process_set if program is not None else set())
        sigma: dict[str, dict[str, Value]] = {p: {} for p in procs}
        rho: dict[str, Value] = {}
        if wanted:
            model = _sexp("\n".join(out[1:]))
            pairs = model[0] if model else []
            for (name, kind), pair in zip(wanted, pairs):
                v = _value(pair[1])
                if kind == "loc":
                    p, x = name.split(".", 1)
                    sigma.setdefault(p, {})[x] = v
                else:
                    rho[name] = v
        return Refuted(State(sigma), rho)


Backend = BoundedEnum | SmtSolver


def theory_valid(sentence: Formula, backend: Backend | None = None) -> Result:
    """Validity of a formula over logical variables only."""
    if localised_vars(sentence):
        raise ValueError("theory_valid takes a sentence without localised variables")
    from chorver.logic import TRUE

    return (backend or BoundedEnum()).check(TRUE, sentence)


def entailment_valid(phi: Formula, psi: Formula, backend: Backend | None = None,
                     program: Program | None = None, exists: Iterable[str] = ()) -> Result:
    """Whether every (state, assignment) satisfying ``phi`` satisfies ``psi``.

    Variables in ``exists`` are existentially quantified inside ``psi``.
    """
    return (backend or BoundedEnum()).check(phi, psi, program, exists)


def make_backend(name: str, lo: int = -8, hi: int = 8) -> Backend:
    if name == "enum":
        return BoundedEnum(lo, hi)
    if name == "smt":
        return SmtSolver()
    raise ValueError(f"unknown backend {name!r}")


def describe(result: Result) -> str:
    if isinstance(result, Valid):
        return "Valid"
    binds = [f"{p}.{x}={value_str(v)}" for p, x, v in result.state.bindings()]
    binds += [f"${x}={value_str(v)}" for x, v in sorted(result.rho.items())]
    return "Refuted: " + " ".join(binds)
