"""Well-formedness checks: names, arities, types and initialisation.

Types are inferred by unification over {int, bool}; every process variable
``p.x`` gets one type for the whole program.
"""

from __future__ import annotations

from dataclasses import replace

from chorver.logic import (And, Const, EqAtom, Formula, Let, Not, TheoryAtom)
from chorver.syntax import (OPERATORS, Assign, BoolLit, ChorError, Chor, Com, Cond, Call, Expr,
                            FunCall, FunDef, IntLit, LVar, Nil, Op, Program, RuntimeCall, Sel,
                            Seq, Var, fun_calls, instructions)


class CheckError(ChorError):
    """The program parsed but is ill-formed (names, arities, types)."""


class TVar:
    __slots__ = ("ref",)

    def __init__(self):
        self.ref = None


def _find(t):
    while isinstance(t, TVar) and t.ref is not None:
        t = t.ref
    return t


def _unify(a, b, pos, what: str):
    a, b = _find(a), _find(b)
    if a is b:
        return
    if isinstance(a, TVar):
        a.ref = b
    elif isinstance(b, TVar):
        b.ref = a
    elif a != b:
        raise CheckError(f"type error: {what} has type {a} but {b} is required", pos)


def resolve(t, default: str | None = "int"):
    t = _find(t)
    return default if isinstance(t, TVar) else t


class Typer:
    """Unification state shared by a program and the formulas checked against it."""

    def __init__(self, functions: dict[str, FunDef]):
        self.functions = functions
        self.vars: dict[tuple[str, str], object] = {}
        self.sigs: dict[str, tuple[list, object]] = {}
        self.logvars: dict[str, object] = {}

    def var(self, p: str, x: str):
        if (p, x) not in self.vars:
            self.vars[(p, x)] = TVar()
        return self.vars[(p, x)]

    def sig(self, name: str):
        if name not in self.sigs:
            fd = self.functions[name]
            params = {x: TVar() for x in fd.params}
            res = TVar()
            self.sigs[name] = ([params[x] for x in fd.params], res)
            body_t = self.expr(fd.body, lambda v: params.get(v.name) if isinstance(v, Var) else None,
                               where=f"function {name}")
            _unify(body_t, res, fd.pos, f"body of {name}")
        return self.sigs[name]

    def expr(self, e: Expr, env, where: str = ""):
        match e:
            case IntLit():
                return "int"
            case BoolLit():
                return "bool"
            case Var(name=x, pos=pos) | LVar(name=x, pos=pos):
                t = env(e)
                if t is None:
                    raise CheckError(f"unknown variable {x!r} in {where}", pos)
                return t
            case Op(op=op, args=args, pos=pos):
                if op not in OPERATORS:
                    raise CheckError(f"unknown operator {op!r}", pos)
                argt, res = OPERATORS[op]
                if len(args) != len(argt):
                    raise CheckError(f"operator {op} expects {len(argt)} arguments", pos)
                shared = TVar()
                for a, want in zip(args, argt):
                    t = self.expr(a, env, where)
                    _unify(t, shared if want == "a" else want, getattr(a, "pos", pos) or pos,
                           f"operand of {op}")
                if op == "^" and isinstance(args[1], IntLit) and args[1].value < 0:
                    raise CheckError("negative constant exponent", pos)
                return res
            case FunCall(name=f, args=args, pos=pos):
                if f not in self.functions:
                    raise CheckError(f"undefined function {f!r}", pos)
                params, res = self.sig(f)
                if len(args) != len(params):
                    raise CheckError(f"function {f} expects {len(params)} arguments, got {len(args)}", pos)
                for a, t in zip(args, params):
                    _unify(self.expr(a, env, where), t, pos, f"argument of {f}")
                return res
        raise CheckError(f"not an expression: {e!r}")

    def local_env(self, p: str):
        return lambda v: self.var(p, v.name) if isinstance(v, Var) else None

    def loc_env(self, v):
        return self.var(v.proc, v.name) if isinstance(v, LVar) else None


def infer_processes(procedures: dict[str, Chor], main: Chor) -> list[str]:
    seen: list[str] = []
    from chorver.syntax import pn

    for c in [*procedures.values(), main]:
        for p in sorted(pn(c)):
            if p not in seen:
                seen.append(p)
    return seen


def _check_function_recursion(functions: dict[str, FunDef]):
    state: dict[str, int] = {}

    def visit(f: str, path: list[str]):
        if state.get(f) == 2:
            return
        if state.get(f) == 1:
            cyc = " -> ".join(path[path.index(f):] + [f])
            raise CheckError(f"recursive functions are not allowed ({cyc})", functions[f].pos)
        state[f] = 1
        for g in sorted(fun_calls(functions[f].body)):
            if g in functions:
                visit(g, path + [f])
        state[f] = 2

    for f in functions:
        visit(f, [])


def _check_names(prog: Program, c: Chor, where: str):
    procs = prog.process_set
    labels = set(prog.labels)

    def need(p, pos):
        if p not in procs:
            raise CheckError(f"undeclared process {p!r} in {where}", pos)

    for i in instructions(c):
        match i:
            case Assign(proc=p, pos=pos):
                need(p, pos)
            case Com(sender=p, receiver=q, pos=pos):
                need(p, pos)
                need(q, pos)
                if p == q:
                    raise CheckError(f"process {p} cannot communicate with itself", pos)
            case Sel(sender=p, receiver=q, label=l, pos=pos):
                need(p, pos)
                need(q, pos)
                if p == q:
                    raise CheckError(f"process {p} cannot select towards itself", pos)
                if l not in labels:
                    raise CheckError(f"undeclared label {l!r}", pos)
    stack = [c]
    while stack:
        n = stack.pop()
        match n:
            case Seq(cont=k):
                stack.append(k)
            case Cond(proc=p, then=a, else_=b, pos=pos):
                need(p, pos)
                stack += [a, b]
            case Call(name=x, pos=pos):
                if x not in prog.procedures:
                    raise CheckError(f"undefined procedure {x!r}", pos)
            case RuntimeCall():
                raise CheckError("runtime procedure terms cannot appear in source programs")


def _type_chor(ty: Typer, c: Chor, where: str):
    stack = [c]
    while stack:
        n = stack.pop()
        match n:
            case Seq(instr=Assign(proc=p, var=x, expr=e, pos=pos), cont=k):
                _unify(ty.expr(e, ty.local_env(p), where), ty.var(p, x), pos, f"{p}.{x}")
                stack.append(k)
            case Seq(instr=Com(sender=p, expr=e, receiver=q, var=x, pos=pos), cont=k):
                _unify(ty.expr(e, ty.local_env(p), where), ty.var(q, x), pos, f"{q}.{x}")
                stack.append(k)
            case Seq(cont=k):
                stack.append(k)
            case Cond(proc=p, guard=b, then=c1, else_=c2, pos=pos):
                _unify(ty.expr(b, ty.local_env(p), where), "bool", pos, "condition")
                stack += [c1, c2]


def check_program(prog: Program) -> Program:
    """Check names and types; return the program with inferred signatures."""
    if len(prog.labels) == 0:
        raise CheckError("the label set is empty")
    mentioned = set(infer_processes(prog.procedures, prog.main))
    undeclared = mentioned - prog.process_set
    if undeclared:
        raise CheckError(f"undeclared process(es): {', '.join(sorted(undeclared))}")
    for f in prog.functions.values():
        bad = {v.name for v in _vars_of(f.body)} - set(f.params)
        if bad:
            raise CheckError(f"function {f.name} uses undefined variable(s) {sorted(bad)}", f.pos)
    _check_function_recursion(prog.functions)
    for name, body in prog.procedures.items():
        _check_names(prog, body, f"procedure {name}")
    _check_names(prog, prog.main, "main")

    ty = Typer(prog.functions)
    for name in prog.functions:
        ty.sig(name)
    for name, body in prog.procedures.items():
        _type_chor(ty, body, f"procedure {name}")
    _type_chor(ty, prog.main, "main")

    functions = {}
    for name, fd in prog.functions.items():
        params, res = ty.sigs[name]
        functions[name] = replace(fd, param_types=tuple(resolve(t) for t in params),
                                  result_type=resolve(res))
    var_types = {k: resolve(t) for k, t in ty.vars.items()}
    return replace(prog, functions=functions, var_types=var_types)


def _vars_of(e: Expr):
    from chorver.syntax import expr_vars

    return [v for v in expr_vars(e) if isinstance(v, Var)]


def formula_types(f: Formula, program: Program | None = None):
    """Infer types of the localised and free logical variables of ``f``.

    Returns ``(localised, logical)`` maps; unconstrained entries are ``None``.
    """
    functions = program.functions if program is not None else {}
    ty = Typer(functions)
    if program is not None:
        for k, t in program.var_types.items():
            ty.vars[k] = t
    scopes: list[dict[str, object]] = [ty.logvars]

    def lv(name):
        for s in reversed(scopes):
            if name in s:
                return s[name]
        scopes[0][name] = TVar()
        return scopes[0][name]

    def term(t):
        if isinstance(t, Const):
            return "bool" if isinstance(t.value, bool) else "int"
        return lv(t.name)

    def go(g: Formula):
        match g:
            case EqAtom(expr=e, var=x):
                _unify(ty.expr(e, ty.loc_env, "formula"), lv(x), None, f"${x}")
            case TheoryAtom(rel=rel, left=l, right=r):
                if rel == "=":
                    _unify(term(l), term(r), None, "theory equality")
                else:
                    _unify(term(l), "int", None, f"operand of {rel}")
                    _unify(term(r), "int", None, f"operand of {rel}")
            case And(left=a, right=b):
                go(a)
                go(b)
            case Not(body=a):
                go(a)
            case Let(var=x, expr=e, body=b):
                t = ty.expr(e, ty.loc_env, "formula")
                scopes.append({x: t})
                go(b)
                scopes.pop()
            case _:
                raise CheckError(f"not a formula: {g!r}")

    go(f)
    loc = {k: resolve(t, None) for k, t in ty.vars.items()}
    logical = {k: resolve(t, None) for k, t in ty.logvars.items()}
    return loc, logical


def check_formula(f: Formula, program: Program):
    """Reject formulas naming undeclared processes, functions or ill-typed terms."""
    from chorver.logic import localised_vars

    for p, x in localised_vars(f):
        if p not in program.process_set:
            raise CheckError(f"formula mentions undeclared process {p!r}")
    formula_types(f, program)


# --- read-before-write -------------------------------------------------------


def _summaries(prog: Program):
    """Per procedure: variables possibly read before written, variables always written."""
    universe = frozenset((p, x) for p in prog.processes for x in _all_var_names(prog))
    reads = {x: frozenset() for x in prog.procedures}
    writes = {x: universe for x in prog.procedures}
    changed = True
    while changed:
        changed = False
        for name, body in prog.procedures.items():
            r, w = _flow(body, frozenset(), reads, writes)
            if r != reads[name] or w != writes[name]:
                reads[name], writes[name] = reads[name] | r, w
                changed = True
    return reads, writes


def _all_var_names(prog: Program) -> set[str]:
    names: set[str] = set()
    for c in [*prog.procedures.values(), prog.main]:
        for i in instructions(c):
            if isinstance(i, (Assign, Com)):
                names.add(i.var)
                names |= {v.name for v in _vars_of(i.expr)}
        stack = [c]
        while stack:
            n = stack.pop()
            if isinstance(n, Seq):
                stack.append(n.cont)
            elif isinstance(n, Cond):
                names |= {v.name for v in _vars_of(n.guard)}
                stack += [n.then, n.else_]
    return names


def _flow(c: Chor, written: frozenset, reads, writes):
    """(possibly-uninitialised reads, definitely-written set after c)."""
    need: set = set()
    while True:
        match c:
            case Seq(instr=Assign(proc=p, var=x, expr=e), cont=k):
                need |= {(p, v.name) for v in _vars_of(e)} - written
                written = written | {(p, x)}
                c = k
            case Seq(instr=Com(sender=p, expr=e, receiver=q, var=x), cont=k):
                need |= {(p, v.name) for v in _vars_of(e)} - written
                written = written | {(q, x)}
                c = k
            case Seq(cont=k):
                c = k
            case Cond(proc=p, guard=b, then=c1, else_=c2):
                need |= {(p, v.name) for v in _vars_of(b)} - written
                r1, w1 = _flow(c1, written, reads, writes)
                r2, w2 = _flow(c2, written, reads, writes)
                return frozenset(need | r1 | r2), w1 & w2
            case Call(name=x):
                need |= reads[x] - written
                return frozenset(need), written | writes[x]
            case RuntimeCall(body=b):
                c = b
            case Nil():
                return frozenset(need), written


def required_inputs(prog: Program, c: Chor | None = None) -> frozenset[tuple[str, str]]:
    """Variables that may be read before any write when running ``c`` (default main)."""
    reads, writes = _summaries(prog)
    r, _ = _flow(prog.main if c is None else c, frozenset(), reads, writes)
    return r


def missing_inputs(prog: Program, sigma, c: Chor | None = None) -> list[tuple[str, str]]:
    return sorted((p, x) for p, x in required_inputs(prog, c)
                  if p not in sigma or x not in sigma[p])
