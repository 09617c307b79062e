"""Weakest liberal preconditions, triple verification and derivation trees."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

from chorver.backends import Backend, BackendError, BoundedEnum, Refuted, Result, Valid
from chorver.logic import (And, Formula, Implies, alpha_equal, canonical, formula_str,
                           free_logvars, fresh_var, guard, localise, loc_subst, satisfies)
from chorver.state import value_str
from chorver.syntax import (Assign, Call, Chor, ChorError, Com, Cond, Nil, Program, RuntimeCall,
                            Sel, Seq, chor_str, head_str)

SpecMap = Mapping[str, tuple[Formula, Formula]]


class HoareError(ChorError):
    pass


# --- wlp ---------------------------------------------------------------------


def _spec(spec: SpecMap, x: str) -> tuple[Formula, Formula]:
    try:
        return spec[x]
    except KeyError:
        raise HoareError(f"no specification for procedure {x}") from None


def _wlp(c: Chor, psi: Formula, spec: SpecMap) -> Formula:
    match c:
        case Nil():
            return psi
        case Seq(instr=Assign(proc=p, var=x, expr=e), cont=k):
            return loc_subst(_wlp(k, psi, spec), p, x, p, e)
        case Seq(instr=Com(sender=p, expr=e, receiver=q, var=x), cont=k):
            return loc_subst(_wlp(k, psi, spec), q, x, p, e)
        case Seq(instr=Sel(), cont=k):
            return _wlp(k, psi, spec)
        case Cond(proc=p, guard=b, then=c1, else_=c2):
            x = fresh_var()
            b = localise(b, p)
            return And(Implies(guard(b, True, x), _wlp(c1, psi, spec)),
                       Implies(guard(b, False, x), _wlp(c2, psi, spec)))
        case Call(name=x):
            return _spec(spec, x)[0]
        case RuntimeCall(body=body):
            return _wlp(body, psi, spec)
    raise TypeError(f"not a choreography: {c!r}")


def wlp(c: Chor, psi: Formula, spec: SpecMap = {}) -> Formula:
    """Weakest liberal precondition of ``c`` for ``psi``, alpha-canonical."""
    return canonical(_wlp(c, psi, spec))


def tail_calls(c: Chor) -> set[str]:
    """Names of unexpanded calls reachable in ``c``."""
    out: set[str] = set()
    stack = [c]
    while stack:
        match stack.pop():
            case Seq(cont=k):
                stack.append(k)
            case Cond(then=a, else_=b):
                stack += [a, b]
            case Call(name=x):
                out.add(x)
            case RuntimeCall(body=b):
                stack.append(b)
    return out


# --- verdicts ----------------------------------------------------------------


@dataclass
class Obligation:
    """A validity check ``hyp -> (exists <exists>. goal)``."""

    name: str
    hyp: Formula
    goal: Formula
    exists: frozenset[str] = frozenset()
    result: Result | None = None

    def to_json(self) -> dict:
        out = {"name": self.name, "hyp": formula_str(self.hyp), "goal": formula_str(self.goal)}
        if self.exists:
            out["exists"] = sorted(self.exists)
        if self.result is not None:
            out["result"] = str(self.result)
        return out


@dataclass
class Verdict:
    status: str  # "Valid", "Refuted" or "BackendError"
    obligations: list[Obligation] = field(default_factory=list)
    counterexample: Refuted | None = None
    failing: Obligation | None = None
    message: str = ""
    wlp: Formula | None = None

    @property
    def valid(self) -> bool:
        return self.status == "Valid"

    def to_json(self) -> dict:
        out: dict = {"verdict": self.status}
        if self.wlp is not None:
            out["wlp"] = formula_str(self.wlp)
        out["obligations"] = [o.to_json() for o in self.obligations]
        if self.message:
            out["message"] = self.message
        if self.failing is not None:
            out["failing"] = self.failing.name
        if self.counterexample is not None:
            out["counterexample"] = counterexample_json(self.counterexample)
        return out


def counterexample_json(r: Refuted) -> dict:
    return {
        "state": r.state.to_dict(),
        "rho": dict(sorted(r.rho.items())),
        "state_file": "".join(f"{p}.{x} = {value_str(v)}\n" for p, x, v in r.state.bindings()),
        "assignment": "".join(f"${x} = {value_str(v)}\n" for x, v in sorted(r.rho.items())),
    }


def discharge(obligations: list[Obligation], backend: Backend, program: Program | None,
              wlp_formula: Formula | None = None, stop_early: bool = True) -> Verdict:
    """Decide obligations in order; the verdict reports the first failure."""
    first: Verdict | None = None
    for ob in obligations:
        try:
            ob.result = backend.check(ob.hyp, ob.goal, program, ob.exists)
        except BackendError as err:
            return Verdict("BackendError", obligations, None, ob, str(err), wlp_formula)
        if isinstance(ob.result, Refuted) and first is None:
            first = Verdict("Refuted", obligations, ob.result, ob, f"obligation {ob.name} fails",
                            wlp_formula)
            if stop_early:
                return first
    return first or Verdict("Valid", obligations, wlp=wlp_formula)


def obligations_for(phi: Formula, c: Chor, psi: Formula, spec: SpecMap) -> tuple[Formula, list[Obligation]]:
    w = wlp(c, psi, spec)
    obs = [Obligation("pre", phi, w)]
    # wlp(X, psi) = fst(C(X)) is only sound when snd(C(X)) entails psi
    for x in sorted(tail_calls(c)):
        post = _spec(spec, x)[1]
        if not alpha_equal(post, psi):
            obs.append(Obligation(f"call {x}", post, psi))
    return w, obs


def verify(phi: Formula, c: Chor, psi: Formula, spec: SpecMap = {},
           backend: Backend | None = None, program: Program | None = None) -> Verdict:
    """Decide ``{phi} c {psi}`` by checking ``phi -> wlp(c, psi)``."""
    backend = backend or BoundedEnum()
    w, obs = obligations_for(phi, c, psi, spec)
    return discharge(obs, backend, program, w)


def check_consistency(spec: SpecMap, program: Program,
                      backend: Backend | None = None) -> dict[str, Verdict]:
    """Per procedure: does its body satisfy its specified pre/post pair."""
    backend = backend or BoundedEnum()
    out = {}
    for x in sorted(program.procedures):
        if x not in spec:
            out[x] = Verdict("Refuted", message=f"no specification for procedure {x}")
            continue
        pre, post = spec[x]
        out[x] = verify(pre, program.procedures[x], post, spec, backend, program)
    return out


def check_adequacy(spec: SpecMap, program: Program, psi: Formula,
                   backend: Backend | None = None) -> dict[str, Verdict]:
    """Per procedure: post is ``psi`` and pre is equivalent to the body's wlp.

    Logical variables free on only one side are existentially closed there.
    """
    backend = backend or BoundedEnum()
    out = {}
    for x in sorted(program.procedures):
        if x not in spec:
            out[x] = Verdict("Refuted", message=f"no specification for procedure {x}")
            continue
        pre, post = spec[x]
        if not alpha_equal(post, psi):
            out[x] = Verdict("Refuted", message=f"postcondition of {x} differs from the target")
            continue
        w = wlp(program.procedures[x], psi, spec)
        fv_pre, fv_w = free_logvars(pre), free_logvars(w)
        obs = [Obligation("pre -> wlp", pre, w, frozenset(fv_w - fv_pre)),
               Obligation("wlp -> pre", w, pre, frozenset(fv_pre - fv_w))]
        out[x] = discharge(obs, backend, program, w, stop_early=False)
    return out


def replays(r: Refuted, ob: Obligation, program: Program | None = None) -> bool:
    """A counterexample is genuine: it satisfies the hypothesis but not the goal."""
    funcs = program.functions if program is not None else {}
    return satisfies(r.state, r.rho, ob.hyp, funcs) and not satisfies(r.state, r.rho, ob.goal, funcs)


# --- derivation trees --------------------------------------------------------


@dataclass
class DerivationTree:
    rule: str
    pre: Formula
    chor: Chor
    post: Formula
    children: list[DerivationTree] = field(default_factory=list)
    # H|Weak side conditions as (hypothesis, conclusion) pairs
    side: list[tuple[Formula, Formula]] = field(default_factory=list)

    def size(self) -> int:
        return 1 + sum(ch.size() for ch in self.children)

    def rules(self) -> list[str]:
        """Rule names in pre-order."""
        out = [self.rule]
        for ch in self.children:
            out += ch.rules()
        return out

    def to_json(self) -> dict:
        out = {"rule": self.rule, "pre": formula_str(canonical(self.pre)),
               "chor": head_str(self.chor), "post": formula_str(canonical(self.post))}
        if self.side:
            out["side"] = [f"{formula_str(canonical(a))} -> {formula_str(canonical(b))}"
                           for a, b in self.side]
        if self.children:
            out["children"] = [ch.to_json() for ch in self.children]
        return out

    def render(self, indent: int = 0) -> str:
        pad = "  " * indent
        lines = [f"{pad}{self.rule}  {{{formula_str(canonical(self.pre))}}} "
                 f"{head_str(self.chor)} {{{formula_str(canonical(self.post))}}}"]
        for ch in self.children:
            lines.append(ch.render(indent + 1))
        return "\n".join(lines)


def _weak(pre: Formula, inner: DerivationTree, post: Formula) -> DerivationTree:
    return DerivationTree("H|Weak", pre, inner.chor, post, [inner],
                          [(pre, inner.pre), (inner.post, post)])


def _derive(c: Chor, psi: Formula, spec: SpecMap) -> DerivationTree:
    match c:
        case Nil():
            return DerivationTree("H|Nil", psi, c, psi)
        case Seq(instr=Assign(proc=p, var=x, expr=e), cont=k):
            ch = _derive(k, psi, spec)
            return DerivationTree("H|Assign", loc_subst(ch.pre, p, x, p, e), c, psi, [ch])
        case Seq(instr=Com(sender=p, expr=e, receiver=q, var=x), cont=k):
            ch = _derive(k, psi, spec)
            return DerivationTree("H|Com", loc_subst(ch.pre, q, x, p, e), c, psi, [ch])
        case Seq(instr=Sel(), cont=k):
            ch = _derive(k, psi, spec)
            return DerivationTree("H|Sel", ch.pre, c, psi, [ch])
        case Cond(proc=p, guard=b, then=c1, else_=c2):
            x = fresh_var()
            lb = localise(b, p)
            d1, d2 = _derive(c1, psi, spec), _derive(c2, psi, spec)
            gt, gf = guard(lb, True, x), guard(lb, False, x)
            w = And(Implies(gt, d1.pre), Implies(gf, d2.pre))
            kids = [_weak(And(w, gt), d1, psi), _weak(And(w, gf), d2, psi)]
            return DerivationTree("H|Cond", w, c, psi, kids)
        case Call(name=x):
            pre, post = _spec(spec, x)
            node = DerivationTree("H|Call", pre, c, post)
            return node if post == psi else _weak(pre, node, psi)
        case RuntimeCall(body=body):
            ch = _derive(body, psi, spec)
            return DerivationTree("H|Call'", ch.pre, c, psi, [ch])
    raise TypeError(f"not a choreography: {c!r}")


def reconstruct_derivation(phi: Formula, c: Chor, psi: Formula, spec: SpecMap = {},
                           backend: Backend | None = None,
                           program: Program | None = None) -> DerivationTree:
    """A derivation of ``{phi} c {psi}`` following the structure of wlp.

    The root weakening step is omitted when ``phi`` already is the wlp.
    """
    v = verify(phi, c, psi, spec, backend, program)
    if not v.valid:
        raise HoareError(f"triple does not verify ({v.status})")
    inner = _derive(c, psi, spec)
    if alpha_equal(phi, inner.pre):
        return inner
    return _weak(phi, inner, psi)


# --- independent rule checker ------------------------------------------------


def check_derivation(tree: DerivationTree, spec: SpecMap, backend: Backend | None = None,
                     program: Program | None = None) -> list[str]:
    """Check every node instantiates its inference rule; return the problems found.

    Side conditions of weakening steps are re-decided by ``backend``.
    """
    backend = backend or BoundedEnum()
    problems: list[str] = []

    def bad(node, why):
        problems.append(f"{node.rule} at {head_str(node.chor)}: {why}")

    def entails(a, b) -> bool:
        if alpha_equal(a, b):
            return True
        return isinstance(backend.check(a, b, program), Valid)

    def visit(n: DerivationTree):
        kids = n.children
        arity = {"H|Nil": 0, "H|Call": 0, "H|Cond": 2}.get(n.rule, 1)
        if len(kids) != arity:
            bad(n, f"expected {arity} premise(s), found {len(kids)}")
            return
        if n.rule != "H|Weak" and n.side:
            bad(n, "side conditions on a non-weakening rule")
        c = n.chor
        match n.rule:
            case "H|Nil":
                if not isinstance(c, Nil) or n.pre != n.post:
                    bad(n, "must be {phi} 0 {phi}")
            case "H|Assign" | "H|Com" | "H|Sel":
                k = kids[0]
                want = {"H|Assign": Assign, "H|Com": Com, "H|Sel": Sel}[n.rule]
                if not (isinstance(c, Seq) and isinstance(c.instr, want)):
                    bad(n, "wrong instruction")
                    return
                if k.chor != c.cont or k.post != n.post:
                    bad(n, "premise is not about the continuation")
                i = c.instr
                if isinstance(i, Assign):
                    expect = loc_subst(k.pre, i.proc, i.var, i.proc, i.expr)
                elif isinstance(i, Com):
                    expect = loc_subst(k.pre, i.receiver, i.var, i.sender, i.expr)
                else:
                    expect = k.pre
                if n.pre != expect:
                    bad(n, "precondition is not the substituted premise precondition")
            case "H|Cond":
                if not isinstance(c, Cond):
                    bad(n, "not a conditional")
                    return
                k1, k2 = kids
                if k1.chor != c.then or k2.chor != c.else_:
                    bad(n, "premises are not about the branches")
                if k1.post != n.post or k2.post != n.post:
                    bad(n, "postconditions differ")
                lb = localise(c.guard, c.proc)
                xs = set()
                for k, outcome in ((k1, True), (k2, False)):
                    if not (isinstance(k.pre, And) and k.pre.left == n.pre):
                        bad(n, "premise precondition must extend the conclusion's")
                        continue
                    g = k.pre.right
                    x = getattr(g, "var", None)
                    if x is None or g != guard(lb, outcome, x):
                        bad(n, "premise must add the guard outcome")
                    xs.add(x)
                    if x in free_logvars(n.pre) | free_logvars(n.post):
                        bad(n, "guard variable is not fresh")
                if len(xs) != 1:
                    bad(n, "both premises must use the same guard variable")
            case "H|Call":
                if not isinstance(c, Call):
                    bad(n, "not a call")
                    return
                if c.name not in spec or spec[c.name] != (n.pre, n.post):
                    bad(n, "triple does not match the specification map")
            case "H|Call'":
                k = kids[0]
                if not isinstance(c, RuntimeCall) or k.chor != c.body:
                    bad(n, "premise is not about the procedure body")
                elif (k.pre, k.post) != (n.pre, n.post):
                    bad(n, "pre/postconditions must carry over")
            case "H|Weak":
                k = kids[0]
                if k.chor != c:
                    bad(n, "premise is about a different choreography")
                if len(n.side) != 2 or n.side[0] != (n.pre, k.pre) or n.side[1] != (k.post, n.post):
                    bad(n, "side conditions do not match the premise")
                elif not (entails(n.pre, k.pre) and entails(k.post, n.post)):
                    bad(n, "side condition is not valid")
            case _:
                bad(n, "unknown rule")
        for k in kids:
            visit(k)

    visit(tree)
    return problems


def triple_str(phi: Formula, c: Chor, psi: Formula) -> str:
    return f"{{{formula_str(phi)}}} {chor_str(c)} {{{formula_str(psi)}}}"
