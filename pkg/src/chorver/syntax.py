"""Abstract syntax of choreographies, process-name analysis and printing.

Expressions are shared between choreographies and the state logic: inside a
choreography variables are plain :class:`Var` nodes, inside formulas they are
localised :class:`LVar` nodes (``p.x``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

Pos = Optional[tuple[int, int]]
Value = Union[int, bool]


class ChorError(Exception):
    """Base class for every diagnostic raised by the toolkit."""

    def __init__(self, msg: str, pos: Pos = None):
        self.msg = msg
        self.pos = pos
        if pos is not None:
            msg = f"{pos[0]}:{pos[1]}: {msg}"
        super().__init__(msg)


# --- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class LVar:
    """Localised variable ``proc.name`` (only occurs in formulas)."""

    proc: str
    name: str
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class IntLit:
    value: int
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BoolLit:
    value: bool
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Op:
    op: str
    args: tuple[Expr, ...]
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class FunCall:
    name: str
    args: tuple[Expr, ...]
    pos: Pos = field(default=None, compare=False, repr=False)


Expr = Union[Var, LVar, IntLit, BoolLit, Op, FunCall]

# operator -> (argument types, result type); "a" is a shared type parameter
OPERATORS: dict[str, tuple[tuple[str, ...], str]] = {
    "+": (("int", "int"), "int"),
    "-": (("int", "int"), "int"),
    "*": (("int", "int"), "int"),
    "mod": (("int", "int"), "int"),
    "^": (("int", "int"), "int"),
    "=": (("a", "a"), "bool"),
    "<": (("int", "int"), "bool"),
    "<=": (("int", "int"), "bool"),
    "and": (("bool", "bool"), "bool"),
    "or": (("bool", "bool"), "bool"),
    "not": (("bool",), "bool"),
}


def lit(v: Value) -> Expr:
    return BoolLit(v) if isinstance(v, bool) else IntLit(v)


def expr_vars(e: Expr) -> set:
    """Variable nodes (``Var`` or ``LVar``) occurring in ``e``."""
    out: set = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, (Var, LVar)):
            out.add(n)
        elif isinstance(n, (Op, FunCall)):
            stack.extend(n.args)
    return out


def fun_calls(e: Expr) -> set[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, FunCall):
            out.add(n.name)
        if isinstance(n, (Op, FunCall)):
            stack.extend(n.args)
    return out


# --- instructions and choreographies -----------------------------------------


@dataclass(frozen=True)
class Assign:
    proc: str
    var: str
    expr: Expr
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Com:
    sender: str
    expr: Expr
    receiver: str
    var: str
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Sel:
    sender: str
    receiver: str
    label: str
    pos: Pos = field(default=None, compare=False, repr=False)


Instruction = Union[Assign, Com, Sel]


@dataclass(frozen=True)
class Seq:
    instr: Instruction
    cont: Chor


@dataclass(frozen=True)
class Cond:
    proc: str
    guard: Expr
    then: Chor
    else_: Chor
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    name: str
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class RuntimeCall:
    """A procedure call some processes have entered; ``waiting`` have not."""

    name: str
    waiting: frozenset[str]
    body: Chor


@dataclass(frozen=True)
class Nil:
    pass


NIL = Nil()

Chor = Union[Seq, Cond, Call, RuntimeCall, Nil]


def seq(*items) -> Chor:
    """Build ``I1; I2; ...; C`` from instructions followed by a final term."""
    *instrs, last = items
    if not isinstance(last, (Seq, Cond, Call, RuntimeCall, Nil)):
        instrs.append(last)
        last = NIL
    for i in reversed(instrs):
        last = Seq(i, last)
    return last


@dataclass(frozen=True)
class FunDef:
    name: str
    params: tuple[str, ...]
    body: Expr
    param_types: tuple[str, ...] = ()
    result_type: str = "int"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Program:
    processes: tuple[str, ...]
    labels: tuple[str, ...]
    functions: dict[str, FunDef]
    procedures: dict[str, Chor]
    main: Chor
    # filled by the checker: (process, variable) -> "int" | "bool"
    var_types: dict[tuple[str, str], str] = field(default_factory=dict, compare=False, repr=False)

    @property
    def process_set(self) -> frozenset[str]:
        return frozenset(self.processes)


# --- process names -----------------------------------------------------------


def pn(term, processes=frozenset()) -> frozenset[str]:
    """Processes involved in an instruction, choreography or transition label.

    ``processes`` is the full process set, returned for unexpanded calls.
    """
    from chorver.semantics import Internal, LabelSel, ValueCom

    match term:
        case Assign(proc=p):
            return frozenset((p,))
        case Com(sender=p, receiver=q) | Sel(sender=p, receiver=q):
            return frozenset((p, q))
        case Seq(instr=i, cont=c):
            return pn(i, processes) | pn(c, processes)
        case Cond(proc=p, then=c1, else_=c2):
            return frozenset((p,)) | pn(c1, processes) | pn(c2, processes)
        case Call():
            return frozenset(processes)
        case RuntimeCall(waiting=w, body=c):
            return frozenset(w) | pn(c, processes)
        case Nil():
            return frozenset()
        case Internal(proc=p):
            return frozenset((p,))
        case ValueCom(sender=p, receiver=q) | LabelSel(sender=p, receiver=q):
            return frozenset((p, q))
    raise TypeError(f"pn: unexpected term {term!r}")


def called_procedures(c: Chor) -> set[str]:
    out: set[str] = set()
    stack = [c]
    while stack:
        n = stack.pop()
        match n:
            case Seq(cont=k):
                stack.append(k)
            case Cond(then=a, else_=b):
                stack += [a, b]
            case Call(name=x):
                out.add(x)
            case RuntimeCall(name=x, body=b):
                out.add(x)
                stack.append(b)
    return out


def instructions(c: Chor):
    """Yield every instruction occurring syntactically in ``c``."""
    stack = [c]
    while stack:
        n = stack.pop()
        match n:
            case Seq(instr=i, cont=k):
                yield i
                stack.append(k)
            case Cond(then=a, else_=b):
                stack += [a, b]
            case RuntimeCall(body=b):
                stack.append(b)


# --- printing ----------------------------------------------------------------

# binding strength, higher binds tighter
_PREC = {"or": 1, "and": 2, "not": 3, "=": 4, "<": 4, "<=": 4,
         "+": 5, "-": 5, "*": 6, "mod": 6, "^": 8}
_ATOM = 10


def expr_str(e: Expr, ctx: int = 0) -> str:
    """Render an expression, parenthesising only where precedence requires."""
    match e:
        case Var(name=x):
            return x
        case LVar(proc=p, name=x):
            return f"{p}.{x}"
        case IntLit(value=v):
            return f"(-{-v})" if v < 0 else str(v)
        case BoolLit(value=v):
            return "true" if v else "false"
        case FunCall(name=f, args=args):
            return f"{f}({', '.join(expr_str(a) for a in args)})"
        case Op(op="not", args=(a,)):
            s = "not " + expr_str(a, _PREC["not"])
            return f"({s})" if ctx > _PREC["not"] else s
        case Op(op=op, args=(a, b)):
            p = _PREC[op]
            if op == "^":
                # right associative
                s = f"{expr_str(a, p + 1)} ^ {expr_str(b, p)}"
            elif p == 4:
                # comparisons do not associate
                s = f"{expr_str(a, p + 1)} {op} {expr_str(b, p + 1)}"
            else:
                s = f"{expr_str(a, p)} {op} {expr_str(b, p + 1)}"
            return f"({s})" if ctx > p else s
    raise TypeError(f"not an expression: {e!r}")


def instr_str(i: Instruction) -> str:
    match i:
        case Assign(proc=p, var=x, expr=e):
            return f"{p}.{x} := {expr_str(e)}"
        case Com(sender=p, expr=e, receiver=q, var=x):
            return f"{p}.{expr_str(e)} -> {q}.{x}"
        case Sel(sender=p, receiver=q, label=l):
            return f"{p} -> {q}[{l}]"
    raise TypeError(f"not an instruction: {i!r}")


def chor_lines(c: Chor, indent: int = 0) -> list[str]:
    pad = "  " * indent
    out: list[str] = []
    while isinstance(c, Seq):
        out.append(f"{pad}{instr_str(c.instr)};")
        c = c.cont
    match c:
        case Nil():
            out.append(pad + "0")
        case Call(name=x):
            out.append(pad + x)
        case Cond(proc=p, guard=b, then=c1, else_=c2):
            out.append(f"{pad}if {p}.{expr_str(b)} then {{")
            out += chor_lines(c1, indent + 1)
            out.append(f"{pad}}} else {{")
            out += chor_lines(c2, indent + 1)
            out.append(pad + "}")
        case RuntimeCall(name=x, waiting=w, body=b):
            out.append(f"{pad}{x}<{', '.join(sorted(w))}> {{")
            out += chor_lines(b, indent + 1)
            out.append(pad + "}")
    return out


def chor_str(c: Chor) -> str:
    """One-line rendering, e.g. ``q -> p[L]; 0``."""
    parts = []
    while isinstance(c, Seq):
        parts.append(instr_str(c.instr))
        c = c.cont
    match c:
        case Nil():
            parts.append("0")
        case Call(name=x):
            parts.append(x)
        case Cond(proc=p, guard=b, then=c1, else_=c2):
            parts.append(f"if {p}.{expr_str(b)} then {{ {chor_str(c1)} }} else {{ {chor_str(c2)} }}")
        case RuntimeCall(name=x, waiting=w, body=b):
            parts.append(f"{x}<{', '.join(sorted(w))}> {{ {chor_str(b)} }}")
    return "; ".join(parts)


def head_str(c: Chor) -> str:
    """Short description of the first construct of ``c`` (trace output)."""
    match c:
        case Seq(instr=i):
            return instr_str(i)
        case Cond(proc=p, guard=b):
            return f"if {p}.{expr_str(b)} then ... else ..."
        case RuntimeCall(name=x, waiting=w):
            return f"{x}<{', '.join(sorted(w))}> ..."
    return chor_str(c)


def program_str(prog: Program) -> str:
    lines = [f"processes {', '.join(prog.processes)};"]
    lines.append(f"labels {', '.join(prog.labels)};")
    for f in prog.functions.values():
        lines.append(f"define {f.name}({', '.join(f.params)}) = {expr_str(f.body)};")
    for name, body in prog.procedures.items():
        lines.append(f"procedure {name} {{")
        lines += chor_lines(body, 1)
        lines.append("}")
    lines.append("main {")
    lines += chor_lines(prog.main, 1)
    lines.append("}")
    return "\n".join(lines) + "\n"


def pretty_print(term) -> str:
    """Source text for a program, choreography, instruction or expression."""
    if isinstance(term, Program):
        return program_str(term)
    if isinstance(term, (Seq, Cond, Call, RuntimeCall, Nil)):
        return chor_str(term)
    if isinstance(term, (Assign, Com, Sel)):
        return instr_str(term)
    return expr_str(term)
