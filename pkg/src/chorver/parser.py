"""Recursive-descent parsers for ``.chor`` programs, ``.spec`` files, formulas
and ``.state`` files.

Grammar (EBNF, ``//`` comments run to end of line)::

    program   ::= section*
    section   ::= "processes" ident ("," ident)* ";"
                | "labels" ident ("," ident)* ";"
                | "define" ident "(" [ident ("," ident)*] ")" "=" expr ";"
                | "procedure" ident "{" chor "}"
                | "main" "{" chor "}"
    chor      ::= instr ";" chor
                | "if" ident "." expr "then" "{" chor "}" "else" "{" chor "}"
                | ident                              (procedure call)
                | "0"
    instr     ::= ident "." ident ":=" expr
                | ident "." expr "->" ident "." ident
                | ident "->" ident "[" ident "]"
    expr      ::= or-expr with, loosest first: "or", "and", "not",
                  "=" "<" "<=" ">" ">=" "!=" (non-associative), "+" "-",
                  "*" "mod", unary "-", "^" (right associative)
    atom      ::= int | "true" | "false" | ident | ident "(" args ")" | "(" expr ")"

    specfile  ::= ("pre" ":" formula ";" | "post" ":" formula ";"
                  | "procedure" ident "{" "pre" ":" formula ";" "post" ":" formula ";" "}")*
    formula   ::= disj ["=>" formula]
    disj      ::= conj ("||" conj)*
    conj      ::= unary ("&&" unary)*
    unary     ::= "!" unary | "true" | "false" | "(" formula ")"
                | "let" logvar "=" lexpr "in" formula
                | lexpr "==" lexpr              (same value)
                | lexpr "=" logvar              (equality atom)
                | term ("=" | "<" | "<=" | ">" | ">=" | "!=") term   (theory atom)
                | lexpr                         (boolean expression holds)
    lexpr     ::= expr whose variables are localised: ident "." ident
    logvar    ::= "$" ident
    term      ::= logvar | int | "true" | "false"

    statefile ::= (ident "." ident "=" (int | "true" | "false"))*
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from chorver.logic import (FALSE, TRUE, And, Const, EqAtom, Formula, Implies, Let, LogVar,
                           Not, Or, TheoryAtom, canonical, holds, same)
from chorver.state import State
from chorver.syntax import (NIL, Assign, BoolLit, ChorError, Chor, Com, Cond, Call, Expr,
                            FunCall, FunDef, IntLit, LVar, Op, Program, Sel, Seq, Var,
                            expr_vars)


class ParseError(ChorError):
    """Malformed input; carries the line and column of the offending token."""


KEYWORDS = {
    "processes", "labels", "define", "procedure", "main", "if", "then", "else",
    "and", "or", "not", "mod", "true", "false", "let", "in",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+|//[^\n]*)
  | (?P<nl>\n)
  | (?P<num>\d+)
  | (?P<logvar>\$(?:[A-Za-z_][A-Za-z0-9_']*|\#\d+))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>:=|->|==|=>|<=|>=|!=|&&|\|\||[=<>+\-*^(){}\[\],;.!:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, logvar, ident, kw, sym, eof
    text: str
    line: int
    col: int

    @property
    def pos(self):
        return (self.line, self.col)


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    line, line_start, i = 1, 0, 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if m is None:
            raise ParseError(f"unexpected character {src[i]!r}", (line, i - line_start + 1))
        kind = m.lastgroup
        text = m.group()
        col = i - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            if kind == "ident" and text in KEYWORDS:
                kind = "kw"
            toks.append(Token(kind, text, line, col))
        i = m.end()
    toks.append(Token("eof", "", line, i - line_start + 1))
    return toks


class _Backtrack(Exception):
    pass


class Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0

    # -- token helpers --

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("sym", "kw", "ident")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"{msg}, found {found}", tok.pos)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            self.error(f"expected {what}")
        t = self.tok
        self.i += 1
        return t

    # -- expressions --

    def expr(self, localised: bool = False, logvars: bool = False) -> Expr:
        self._loc, self._lv = localised, logvars
        return self._or()

    def _or(self):
        e = self._and()
        while self.at("or"):
            t = self.tok
            self.i += 1
            e = Op("or", (e, self._and()), t.pos)
        return e

    def _and(self):
        e = self._not()
        while self.at("and"):
            t = self.tok
            self.i += 1
            e = Op("and", (e, self._not()), t.pos)
        return e

    def _not(self):
        if self.at("not"):
            t = self.tok
            self.i += 1
            return Op("not", (self._not(),), t.pos)
        return self._cmp()

    def _cmp(self):
        e = self._add()
        t = self.tok
        if t.kind == "sym" and t.text in ("=", "<", "<=", ">", ">=", "!="):
            self.i += 1
            r = self._add()
            match t.text:
                case "=" | "<" | "<=":
                    e = Op(t.text, (e, r), t.pos)
                case ">":
                    e = Op("<", (r, e), t.pos)
                case ">=":
                    e = Op("<=", (r, e), t.pos)
                case "!=":
                    e = Op("not", (Op("=", (e, r), t.pos),), t.pos)
            nt = self.tok
            if nt.kind == "sym" and nt.text in ("=", "<", "<=", ">", ">=", "!="):
                self.error("comparisons do not associate; add parentheses")
        return e

    def _add(self):
        e = self._mul()
        while self.tok.kind == "sym" and self.tok.text in ("+", "-"):
            t = self.tok
            self.i += 1
            e = Op(t.text, (e, self._mul()), t.pos)
        return e

    def _mul(self):
        e = self._unary()
        while self.at("*") or self.at("mod"):
            t = self.tok
            self.i += 1
            e = Op(t.text, (e, self._unary()), t.pos)
        return e

    def _unary(self):
        if self.at("-") and self.tok.kind == "sym":
            t = self.tok
            self.i += 1
            if self.tok.kind == "num":
                n = self.tok
                self.i += 1
                base = IntLit(-int(n.text), t.pos)
                if self.at("^"):
                    self.error("write (-n) ^ e for a negative base")
                return base
            return Op("-", (IntLit(0, t.pos), self._unary()), t.pos)
        return self._pow()

    def _pow(self):
        base = self._atom()
        if self.at("^"):
            t = self.tok
            self.i += 1
            return Op("^", (base, self._unary()), t.pos)
        return base

    def _atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return IntLit(int(t.text), t.pos)
        if t.text in ("true", "false") and t.kind == "kw":
            self.i += 1
            return BoolLit(t.text == "true", t.pos)
        if t.kind == "logvar":
            if not self._lv:
                self.error("logical variable not allowed here")
            self.i += 1
            return _LV(t.text[1:], t.pos)
        if t.kind == "sym" and t.text == "(":
            self.i += 1
            e = self._or()
            self.expect(")")
            return e
        if t.kind == "ident":
            self.i += 1
            if self.at("("):
                self.i += 1
                args = []
                if not self.at(")"):
                    args.append(self._or())
                    while self.accept(","):
                        args.append(self._or())
                self.expect(")")
                return FunCall(t.text, tuple(args), t.pos)
            if self._loc:
                if not self.at("."):
                    self.error(f"variable {t.text!r} must be localised as <process>.{t.text}")
                self.i += 1
                x = self.ident("variable name")
                return LVar(t.text, x.text, t.pos)
            return Var(t.text, t.pos)
        self.error("expected an expression")

    # -- choreographies --

    def chor(self) -> Chor:
        t = self.tok
        if t.kind == "num":
            if t.text != "0":
                self.error("expected a choreography")
            self.i += 1
            return NIL
        if self.at("if") and t.kind == "kw":
            self.i += 1
            p = self.ident("process name")
            self.expect(".")
            self._loc = self._lv = False
            b = self._or()
            self.expect("then")
            self.expect("{")
            c1 = self.chor()
            self.expect("}")
            self.expect("else")
            self.expect("{")
            c2 = self.chor()
            self.expect("}")
            return Cond(p.text, b, c1, c2, t.pos)
        if t.kind != "ident":
            self.error("expected a choreography")
        nxt = self.peek()
        if nxt.text == "." or nxt.text == "->":
            instr = self.instruction()
            self.expect(";")
            return Seq(instr, self.chor())
        self.i += 1
        return Call(t.text, t.pos)

    def instruction(self):
        p = self.ident("process name")
        if self.accept("->"):
            q = self.ident("process name")
            self.expect("[")
            lbl = self.ident("label")
            self.expect("]")
            if q.text == p.text:
                raise ParseError(f"process {p.text} cannot select towards itself", p.pos)
            return Sel(p.text, q.text, lbl.text, p.pos)
        self.expect(".")
        self._loc = self._lv = False
        e = self._or()
        if self.at(":="):
            if not isinstance(e, Var):
                self.error("the target of := must be a variable")
            self.i += 1
            return Assign(p.text, e.name, self.expr(), p.pos)
        if self.accept("->"):
            q = self.ident("process name")
            self.expect(".")
            x = self.ident("variable name")
            if q.text == p.text:
                raise ParseError(f"process {p.text} cannot communicate with itself", p.pos)
            return Com(p.text, e, q.text, x.text, p.pos)
        self.error("expected ':=' or '->'")

    def program(self) -> Program:
        processes: list[str] | None = None
        labels: list[str] | None = None
        functions: dict[str, FunDef] = {}
        procedures: dict[str, Chor] = {}
        main: Chor | None = None
        while self.tok.kind != "eof":
            t = self.tok
            if self.accept("processes"):
                processes = self._name_list("process name")
            elif self.accept("labels"):
                labels = self._name_list("label")
            elif self.accept("define"):
                f = self.ident("function name")
                self.expect("(")
                params = []
                if not self.at(")"):
                    params.append(self.ident("parameter").text)
                    while self.accept(","):
                        params.append(self.ident("parameter").text)
                self.expect(")")
                self.expect("=")
                body = self.expr()
                self.expect(";")
                if f.text in functions:
                    raise ParseError(f"function {f.text} defined twice", f.pos)
                if len(set(params)) != len(params):
                    raise ParseError(f"repeated parameter in {f.text}", f.pos)
                functions[f.text] = FunDef(f.text, tuple(params), body, pos=f.pos)
            elif self.accept("procedure"):
                x = self.ident("procedure name")
                self.expect("{")
                body = self.chor()
                self.expect("}")
                if x.text in procedures:
                    raise ParseError(f"procedure {x.text} defined twice", x.pos)
                procedures[x.text] = body
            elif self.accept("main"):
                self.expect("{")
                if main is not None:
                    raise ParseError("main defined twice", t.pos)
                main = self.chor()
                self.expect("}")
            else:
                self.error("expected 'processes', 'labels', 'define', 'procedure' or 'main'")
        if main is None:
            raise ParseError("missing main choreography", self.tok.pos)
        from chorver.check import infer_processes

        if processes is None:
            processes = infer_processes(procedures, main)
        return Program(tuple(processes), tuple(labels if labels is not None else ("L", "R")),
                       functions, procedures, main)

    def _name_list(self, what: str) -> list[str]:
        names = [self.ident(what).text]
        while self.accept(","):
            names.append(self.ident(what).text)
        self.expect(";")
        if len(set(names)) != len(names):
            self.error(f"repeated {what}")
        return names

    # -- formulas --

    def formula(self) -> Formula:
        lhs = self._disj()
        if self.accept("=>"):
            return Implies(lhs, self.formula())
        return lhs

    def _disj(self):
        f = self._conj()
        while self.accept("||"):
            f = Or(f, self._conj())
        return f

    def _conj(self):
        f = self._funary()
        while self.accept("&&"):
            f = And(f, self._funary())
        return f

    def _funary(self) -> Formula:
        t = self.tok
        if t.kind == "sym" and t.text == "!":
            self.i += 1
            return Not(self._funary())
        if t.kind == "kw" and t.text == "let":
            self.i += 1
            v = self.tok
            if v.kind != "logvar":
                self.error("expected a logical variable")
            self.i += 1
            self.expect("=")
            e = self.expr(localised=True)
            self.expect("in")
            return Let(v.text[1:], e, self.formula())
        if t.kind == "kw" and t.text in ("true", "false") and not self._continues_expr(1):
            self.i += 1
            return TRUE if t.text == "true" else FALSE
        if t.kind == "sym" and t.text == "(":
            start = self.i
            try:
                return self._atomic_formula()
            except (ParseError, _Backtrack):
                self.i = start
            self.i += 1
            f = self.formula()
            self.expect(")")
            return f
        return self._atomic_formula()

    def _continues_expr(self, k: int) -> bool:
        t = self.peek(k)
        return t.text in ("==", "=", "<", "<=", ">", ">=", "!=", "and", "or") and t.kind in ("sym", "kw")

    def _atomic_formula(self) -> Formula:
        start = self.tok
        e = self.expr(localised=True, logvars=True)
        if self.at("=="):
            self.i += 1
            r = self.expr(localised=True, logvars=True)
            _no_logvars(e, start)
            _no_logvars(r, start)
            return same(e, r)
        if not (self.tok.kind == "eof" or self.tok.text in (")", "&&", "||", "=>", ";", "in")):
            raise _Backtrack()
        return _classify(e, start)


class _LV(Var):
    """Logical variable occurring inside a parsed comparison (transient)."""


def _has_logvar(e: Expr) -> bool:
    return any(isinstance(v, _LV) for v in expr_vars(e))


def _no_logvars(e: Expr, tok: Token):
    if _has_logvar(e):
        raise ParseError("logical variables cannot appear inside expressions", tok.pos)


def _term(e: Expr):
    if isinstance(e, _LV):
        return LogVar(e.name)
    if isinstance(e, (IntLit, BoolLit)):
        return Const(e.value)
    return None


def _classify(e: Expr, tok: Token) -> Formula:
    if isinstance(e, Op) and e.op == "not" and isinstance(e.args[0], Op) and _has_logvar(e):
        return Not(_classify(e.args[0], tok))
    if isinstance(e, Op) and e.op in ("=", "<", "<=") and _has_logvar(e):
        a, b = e.args
        ta, tb = _term(a), _term(b)
        if ta is not None and tb is not None:
            return TheoryAtom(e.op, ta, tb)
        if e.op == "=" and isinstance(b, _LV) and not _has_logvar(a):
            return EqAtom(a, b.name)
        if e.op == "=" and isinstance(a, _LV) and not _has_logvar(b):
            return EqAtom(b, a.name)
        raise ParseError("a logical variable must stand alone on one side of '=' or in a "
                         "comparison between logical variables and constants", tok.pos)
    _no_logvars(e, tok)
    if isinstance(e, (IntLit, BoolLit)) and not isinstance(e.value, bool):
        raise ParseError("an integer is not a formula", tok.pos)
    return holds(e)


# --- entry points ------------------------------------------------------------


def parse_program(src: str, check: bool = True) -> Program:
    """Parse (and by default type-check) a ``.chor`` source text."""
    prog = Parser(src).program()
    if check:
        from chorver.check import check_program

        prog = check_program(prog)
    return prog


def parse_chor(src: str) -> Chor:
    p = Parser(src)
    c = p.chor()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return c


def parse_expr(src: str, localised: bool = False) -> Expr:
    p = Parser(src)
    e = p.expr(localised=localised)
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return e


def parse_formula(src: str, program: Program | None = None, allow_reserved: bool = True) -> Formula:
    """Parse a state formula; the result is in alpha-canonical form."""
    p = Parser(src)
    f = p.formula()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    if not allow_reserved:
        for t in p.toks:
            if t.kind == "logvar" and t.text.startswith("$#"):
                raise ParseError("logical variables starting with '#' are reserved", t.pos)
    f = canonical(f)
    if program is not None:
        from chorver.check import check_formula

        check_formula(f, program)
    return f


@dataclass
class SpecFile:
    pre: Formula
    post: Formula
    procedures: dict[str, tuple[Formula, Formula]]


def parse_spec(src: str, program: Program | None = None) -> SpecFile:
    p = Parser(src)
    pre = post = None
    procs: dict[str, tuple[Formula, Formula]] = {}

    def clause(key):
        p.expect(key)
        p.expect(":")
        start = p.i
        f = p.formula()
        for t in p.toks[start:p.i]:
            if t.kind == "logvar" and t.text.startswith("$#"):
                raise ParseError("logical variables starting with '#' are reserved", t.pos)
        p.expect(";")
        f = canonical(f)
        if program is not None:
            from chorver.check import check_formula

            check_formula(f, program)
        return f

    while p.tok.kind != "eof":
        if p.at("pre"):
            if pre is not None:
                p.error("duplicate precondition")
            pre = clause("pre")
        elif p.at("post"):
            if post is not None:
                p.error("duplicate postcondition")
            post = clause("post")
        elif p.accept("procedure"):
            x = p.ident("procedure name")
            p.expect("{")
            a = clause("pre")
            b = clause("post")
            p.expect("}")
            if x.text in procs:
                raise ParseError(f"duplicate specification for {x.text}", x.pos)
            if program is not None and x.text not in program.procedures:
                raise ParseError(f"specification for undefined procedure {x.text}", x.pos)
            procs[x.text] = (a, b)
        else:
            p.error("expected 'pre', 'post' or 'procedure'")
    return SpecFile(pre if pre is not None else TRUE, post if post is not None else TRUE, procs)


def parse_state(src: str, processes=()) -> State:
    """Parse ``p.x = v`` lines; every process in ``processes`` gets a local state."""
    data: dict[str, dict] = {p: {} for p in processes}
    p = Parser(src)
    while p.tok.kind != "eof":
        proc = p.ident("process name")
        p.expect(".")
        x = p.ident("variable name")
        p.expect("=")
        data.setdefault(proc.text, {})[x.text] = _literal(p)
        p.accept(";")
    return State(data)


def parse_assignment(src: str) -> dict:
    """Parse ``$X = v`` bindings (a logical assignment) separated by newlines/commas."""
    p = Parser(src)
    out = {}
    while p.tok.kind != "eof":
        t = p.tok
        if t.kind != "logvar":
            p.error("expected a logical variable")
        p.i += 1
        p.expect("=")
        out[t.text[1:]] = _literal(p)
        p.accept(",") or p.accept(";")
    return out


def _literal(p: Parser):
    neg = p.accept("-")
    t = p.tok
    if t.kind == "num":
        p.i += 1
        return -int(t.text) if neg else int(t.text)
    if not neg and t.kind == "kw" and t.text in ("true", "false"):
        p.i += 1
        return t.text == "true"
    p.error("expected an integer or boolean")
