"""State formulas over localised expressions and logical variables.

Core connectives are equality atoms ``E = X``, theory atoms over logical
variables and constants, conjunction and negation. ``Let`` binds a logical
variable to the value of a localised expression; it is what the equality
sugar ``e1 == e2`` and the conditional guard of the weakest precondition
expand to, so that their variables are scoped to the place they were written.
Disjunction and implication are abbreviations.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Union

from chorver.state import EvalError, evaluate, same_value, value_str
from chorver.syntax import (BoolLit, ChorError, Expr, FunCall, FunDef, IntLit, LVar, Op,
                            Value, Var, expr_str, expr_vars, lit)


@dataclass(frozen=True)
class LogVar:
    name: str


@dataclass(frozen=True)
class Const:
    value: Value

    def __eq__(self, other):
        return isinstance(other, Const) and same_value(self.value, other.value)

    def __hash__(self):
        return hash((isinstance(self.value, bool), self.value))


Term = Union[LogVar, Const]


@dataclass(frozen=True)
class EqAtom:
    expr: Expr
    var: str


@dataclass(frozen=True)
class TheoryAtom:
    rel: str  # "=", "<" or "<="
    left: Term
    right: Term


@dataclass(frozen=True)
class And:
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Not:
    body: Formula


@dataclass(frozen=True)
class Let:
    var: str
    expr: Expr
    body: Formula


Formula = Union[EqAtom, TheoryAtom, And, Not, Let]

TRUE: Formula = TheoryAtom("=", Const(True), Const(True))
FALSE: Formula = Not(TRUE)


class LogicError(ChorError):
    pass


_fresh = itertools.count(1)


def fresh_var() -> str:
    return f"#{next(_fresh)}"


# --- derived forms -----------------------------------------------------------


def Or(a: Formula, b: Formula) -> Formula:
    return Not(And(Not(a), Not(b)))


def Implies(a: Formula, b: Formula) -> Formula:
    return Not(And(a, Not(b)))


def conj(*fs: Formula) -> Formula:
    if not fs:
        return TRUE
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = And(f, out)
    return out


def disj(*fs: Formula) -> Formula:
    if not fs:
        return FALSE
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = Or(f, out)
    return out


def _is_const_expr(e: Expr) -> bool:
    return isinstance(e, (IntLit, BoolLit))


def same(e1: Expr, e2: Expr, var: str | None = None) -> Formula:
    """``e1 ==X e2``: both sides evaluate to the same value X."""
    x = var or fresh_var()
    if _is_const_expr(e2):
        body = And(EqAtom(e1, x), TheoryAtom("=", LogVar(x), Const(e2.value)))
    else:
        body = And(EqAtom(e1, x), EqAtom(e2, x))
    return Let(x, e1, body)


def holds(b: Expr) -> Formula:
    """A boolean localised expression used as a formula."""
    return same(b, BoolLit(True))


def guard(b: Expr, outcome: bool, var: str | None = None) -> Formula:
    return same(b, BoolLit(outcome), var)


def conjuncts(f: Formula) -> list[Formula]:
    out = []
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, And):
            stack += [g.right, g.left]
        else:
            out.append(g)
    return out


# --- localisation and substitution ------------------------------------------


def localise(e: Expr, p: str) -> Expr:
    """Qualify every variable of ``e`` with process ``p``."""
    match e:
        case Var(name=x, pos=pos):
            return LVar(p, x, pos)
        case Op(op=op, args=args, pos=pos):
            return Op(op, tuple(localise(a, p) for a in args), pos)
        case FunCall(name=f, args=args, pos=pos):
            return FunCall(f, tuple(localise(a, p) for a in args), pos)
    return e


def subst_expr(e: Expr, q: str, x: str, repl: Expr) -> Expr:
    match e:
        case LVar(proc=p, name=y) if p == q and y == x:
            return repl
        case Op(op=op, args=args, pos=pos):
            return Op(op, tuple(subst_expr(a, q, x, repl) for a in args), pos)
        case FunCall(name=f, args=args, pos=pos):
            return FunCall(f, tuple(subst_expr(a, q, x, repl) for a in args), pos)
    return e


def subst(phi: Formula, q: str, x: str, repl: Expr) -> Formula:
    """Replace localised variable ``q.x`` by the localised expression ``repl``."""
    match phi:
        case EqAtom(expr=e, var=v):
            return EqAtom(subst_expr(e, q, x, repl), v)
        case TheoryAtom():
            return phi
        case And(left=a, right=b):
            return And(subst(a, q, x, repl), subst(b, q, x, repl))
        case Not(body=a):
            return Not(subst(a, q, x, repl))
        case Let(var=v, expr=e, body=b):
            return Let(v, subst_expr(e, q, x, repl), subst(b, q, x, repl))
    raise TypeError(f"not a formula: {phi!r}")


def loc_subst(phi: Formula, q: str, x: str, p: str, e: Expr) -> Formula:
    """``phi[q.x := <p>e]``."""
    return subst(phi, q, x, localise(e, p))


# --- variables ---------------------------------------------------------------


def free_logvars(phi: Formula) -> set[str]:
    match phi:
        case EqAtom(var=v):
            return {v}
        case TheoryAtom(left=l, right=r):
            return {t.name for t in (l, r) if isinstance(t, LogVar)}
        case And(left=a, right=b):
            return free_logvars(a) | free_logvars(b)
        case Not(body=a):
            return free_logvars(a)
        case Let(var=v, body=b):
            return free_logvars(b) - {v}
    raise TypeError(f"not a formula: {phi!r}")


def localised_vars(phi: Formula) -> set[tuple[str, str]]:
    """The ``(process, variable)`` pairs read by ``phi``."""
    out: set[tuple[str, str]] = set()
    stack = [phi]
    while stack:
        g = stack.pop()
        match g:
            case EqAtom(expr=e):
                out |= {(v.proc, v.name) for v in expr_vars(e) if isinstance(v, LVar)}
            case And(left=a, right=b):
                stack += [a, b]
            case Not(body=a):
                stack.append(a)
            case Let(expr=e, body=b):
                out |= {(v.proc, v.name) for v in expr_vars(e) if isinstance(v, LVar)}
                stack.append(b)
    return out


def processes_of(phi: Formula) -> set[str]:
    return {p for p, _ in localised_vars(phi)}


# --- satisfaction ------------------------------------------------------------


def _term_value(t: Term, rho: Mapping[str, Value]) -> Value:
    if isinstance(t, Const):
        return t.value
    try:
        return rho[t.name]
    except KeyError:
        raise LogicError(f"logical variable ${t.name} is not assigned") from None


def eval_lexpr(e: Expr, sigma: Mapping, funcs: Mapping[str, FunDef] = {}) -> Value:
    """Evaluate a localised expression: ``p.x`` is read from ``sigma[p]``."""

    def lookup(v):
        if not isinstance(v, LVar):
            raise LogicError(f"unlocalised variable {v.name!r} in formula", v.pos)
        try:
            return sigma[v.proc][v.name]
        except KeyError:
            raise LogicError(f"state does not cover {v.proc}.{v.name}", v.pos) from None

    return evaluate(e, lookup, funcs)


def satisfies(sigma: Mapping, rho: Mapping[str, Value], phi: Formula,
              funcs: Mapping[str, FunDef] = {}) -> bool:
    """``sigma`` satisfies ``phi`` under assignment ``rho``.

    An expression with no value (a negative exponent) satisfies no equality.
    """
    match phi:
        case EqAtom(expr=e, var=x):
            try:
                v = eval_lexpr(e, sigma, funcs)
            except EvalError:
                return False
            return same_value(v, _term_value(LogVar(x), rho))
        case TheoryAtom(rel=rel, left=l, right=r):
            a, b = _term_value(l, rho), _term_value(r, rho)
            if rel == "=":
                return same_value(a, b)
            if isinstance(a, bool) or isinstance(b, bool):
                return False
            return a < b if rel == "<" else a <= b
        case And(left=a, right=b):
            return satisfies(sigma, rho, a, funcs) and satisfies(sigma, rho, b, funcs)
        case Not(body=a):
            return not satisfies(sigma, rho, a, funcs)
        case Let(var=x, expr=e, body=b):
            try:
                v = eval_lexpr(e, sigma, funcs)
            except EvalError:
                return False
            return satisfies(sigma, {**rho, x: v}, b, funcs)
    raise TypeError(f"not a formula: {phi!r}")


# --- alpha-canonical form ----------------------------------------------------


def canonical(phi: Formula) -> Formula:
    """Rename bound variables to ``#1, #2, ...`` in first-occurrence order.

    Free logical variables are left alone: renaming them would change meaning.
    """
    counter = itertools.count(1)

    def go(f: Formula, env: dict[str, str]) -> Formula:
        match f:
            case EqAtom(expr=e, var=v):
                return EqAtom(e, env.get(v, v))
            case TheoryAtom(rel=rel, left=l, right=r):
                return TheoryAtom(rel, _rn(l, env), _rn(r, env))
            case And(left=a, right=b):
                return And(go(a, env), go(b, env))
            case Not(body=a):
                return Not(go(a, env))
            case Let(var=v, expr=e, body=b):
                nv = f"#{next(counter)}"
                return Let(nv, e, go(b, {**env, v: nv}))
        raise TypeError(f"not a formula: {f!r}")

    return go(phi, {})


def _rn(t: Term, env) -> Term:
    if isinstance(t, LogVar) and t.name in env:
        return LogVar(env[t.name])
    return t


def alpha_equal(a: Formula, b: Formula) -> bool:
    return canonical(a) == canonical(b)


# --- printing ----------------------------------------------------------------


def term_str(t: Term) -> str:
    return f"${t.name}" if isinstance(t, LogVar) else value_str(t.value)


def _sugar(f: Let) -> str | None:
    body = f.body
    if not isinstance(body, And) or not isinstance(body.left, EqAtom):
        return None
    if body.left.var != f.var or body.left.expr != f.expr:
        return None
    r = body.right
    if isinstance(r, EqAtom) and r.var == f.var and not _is_const_expr(r.expr):
        return f"{expr_str(f.expr, 5)} == {expr_str(r.expr, 5)}"
    if (isinstance(r, TheoryAtom) and r.rel == "=" and r.left == LogVar(f.var)
            and isinstance(r.right, Const)):
        if r.right == Const(True) and not _is_const_expr(f.expr):
            return expr_str(f.expr, 5) if _bool_shaped(f.expr) else f"{expr_str(f.expr, 5)} == true"
        return f"{expr_str(f.expr, 5)} == {value_str(r.right.value)}"
    return None


def _bool_shaped(e: Expr) -> bool:
    # a bare boolean expression re-parses as "e == true"
    return isinstance(e, Op) and e.op in ("=", "<", "<=", "and", "or", "not")


def formula_str(phi: Formula, top: bool = True) -> str:
    """Surface syntax accepted back by :func:`chorver.parser.parse_formula`."""
    s = _fstr(phi)
    if top and s.startswith("(") and _balanced_outer(s):
        return s[1:-1]
    return s


def _balanced_outer(s: str) -> bool:
    depth = 0
    for i, ch in enumerate(s):
        depth += ch == "("
        depth -= ch == ")"
        if depth == 0 and i < len(s) - 1:
            return False
    return True


def _fstr(f: Formula) -> str:
    match f:
        case _ if f == TRUE:
            return "true"
        case _ if f == FALSE:
            return "false"
        case EqAtom(expr=e, var=v):
            return f"{expr_str(e, 5)} = ${v}"
        case TheoryAtom(rel=rel, left=l, right=r):
            return f"{term_str(l)} {rel} {term_str(r)}"
        case Not(body=And(left=a, right=Not(body=b))):
            return f"({_fstr(a)} => {_fstr(b)})"
        case Not(body=And(left=Not(body=a), right=Not(body=b))):
            return f"({_fstr(a)} || {_fstr(b)})"
        case Not(body=a):
            return f"!{_fstr(a)}"
        case And(left=a, right=b):
            return f"({_fstr(a)} && {_fstr(b)})"
        case Let(var=v, expr=e, body=b):
            s = _sugar(f)
            if s is not None:
                return f"({s})"
            return f"(let ${v} = {expr_str(e)} in {_fstr(b)})"
    raise TypeError(f"not a formula: {f!r}")


def to_lexpr_value(v: Value) -> Expr:
    return lit(v)
