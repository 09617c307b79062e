"""Reproducible experiments: soundness fuzzing, the exhaustive wlp oracle,
confluence checks and counterexample replay."""

from __future__ import annotations

import hashlib
import json
import random
import time
from dataclasses import asdict, dataclass, field

from chorver.backends import Backend, BoundedEnum, Refuted
from chorver.check import required_inputs
from chorver.gen import Gen, GenConfig, assignments, states
from chorver.hoare import check_consistency, verify, wlp
from chorver.logic import (Const, Formula, LogVar, TheoryAtom, conj, disj, formula_str,
                           free_logvars, localised_vars, same, satisfies)
from chorver.parser import SpecFile
from chorver.semantics import (Config, HeadOnly, OutOfFuel, RandomFull,
                               Stepper, Terminated, explore, run)
from chorver.state import State
from chorver.syntax import (Assign, Com, Cond, IntLit, LVar, Op, Program, Seq, program_str,
                            instructions)


@dataclass
class FuzzConfig:
    trials: int = 1000
    lo: int = -8
    hi: int = 8
    fuel: int = 10_000
    seed: int = 0
    max_procs: int = 3
    max_vars: int = 2
    max_depth: int = 5
    recursion: bool = False  # recursive generation is not implemented
    rejection_cap: int = 10_000
    samples: int = 3  # certified states per oracle instance used as a precondition

    def __post_init__(self):
        if self.trials < 0 or self.fuel <= 0 or self.rejection_cap <= 0:
            raise ValueError("trial count, fuel and rejection cap must be positive")
        if self.lo > self.hi:
            raise ValueError("empty value domain")
        if self.recursion:
            raise ValueError("recursive program generation is not supported")


@dataclass
class RunReport:
    command: str
    seed: int | None = None
    inputs: dict[str, str] = field(default_factory=dict)
    outcome: dict = field(default_factory=dict)
    timing: float = 0.0
    artifacts: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True, default=str)


def file_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _sub_rng(seed, *path) -> random.Random:
    # trial-indexed sub-seeds: each trial is reproducible on its own
    return random.Random("/".join(map(str, (seed, *path))))


def program_has_variable_exponent(prog: Program) -> bool:
    def has(e) -> bool:
        match e:
            case Op(op="^", args=(_, n)) if not isinstance(n, IntLit):
                return True
            case Op(args=args):
                return any(has(a) for a in args)
        return False

    bodies = [*prog.procedures.values(), prog.main]
    for c in bodies:
        for i in instructions(c):
            if isinstance(i, (Assign, Com)) and has(i.expr):
                return True
        stack = [c]
        while stack:
            n = stack.pop()
            if isinstance(n, Seq):
                stack.append(n.cont)
            elif isinstance(n, Cond):
                if has(n.guard):
                    return True
                stack += [n.then, n.else_]
    return any(has(f.body) for f in prog.functions.values())


# --- replay ------------------------------------------------------------------


def complete_state(prog: Program, sigma: State, default=0) -> State:
    """Add missing process entries and default values for unset program inputs."""
    data = {p: dict(sigma[p]) if p in sigma else {} for p in prog.processes}
    for p in sigma:
        data.setdefault(p, dict(sigma[p]))
    for p, x in required_inputs(prog):
        if x not in data[p]:
            data[p][x] = False if prog.var_types.get((p, x)) == "bool" else default
    return State(data)


def replay_counterexample(prog: Program, phi: Formula, psi: Formula, ce: Refuted,
                          fuel: int = 100_000) -> dict:
    """Execute from a counterexample state and look for a terminal state violating psi."""
    sigma = complete_state(prog, ce.state)
    funcs = prog.functions
    res = explore(Config(prog.main, sigma), prog, fuel)
    bad = [t for t in sorted(res.terminals, key=lambda s: s.bindings())
           if not satisfies(t, ce.rho, psi, funcs)]
    return {
        "pre_holds": satisfies(sigma, ce.rho, phi, funcs),
        "terminals": len(res.terminals),
        "violating": bool(bad),
        "final_state": bad[0].to_dict() if bad else None,
        "state": sigma.to_dict(),
        "rho": dict(sorted(ce.rho.items())),
    }


# --- soundness fuzzing -------------------------------------------------------


def fuzz_soundness(prog: Program, spec: SpecFile, cfg: FuzzConfig,
                   backend: Backend | None = None, inputs: dict | None = None) -> RunReport:
    """Random runs from states satisfying the precondition must end in the postcondition."""
    t0 = time.perf_counter()
    lo = max(cfg.lo, 0) if program_has_variable_exponent(prog) else cfg.lo
    backend = backend or BoundedEnum(cfg.lo, cfg.hi)
    report = RunReport("fuzz", cfg.seed, dict(inputs or {}))
    v = verify(spec.pre, prog.main, spec.post, spec.procedures, backend, prog)
    cons = check_consistency(spec.procedures, prog, backend)
    if not v.valid or not all(c.valid for c in cons.values()):
        # the triple is not derivable: look for a concrete violation instead
        out = {"mode": "completeness", "verify": v.status,
               "consistency": {k: c.status for k, c in cons.items()}}
        if v.counterexample is not None:
            out["replay"] = replay_counterexample(prog, spec.pre, spec.post, v.counterexample)
        report.outcome = out
        report.timing = time.perf_counter() - t0
        return report

    keys = sorted(required_inputs(prog) | localised_vars(spec.pre))
    logs = sorted(free_logvars(spec.pre) | free_logvars(spec.post))
    funcs = prog.functions
    stepper = Stepper(prog)
    counts = dict(trials=cfg.trials, sampled=0, gave_up=0, terminated=0, violations=0,
                  nonterminating=0, runtime_failures=0)

    def value(rng, ty):
        if ty == "bool":
            return rng.random() < 0.5
        return rng.randint(lo, cfg.hi)

    for t in range(cfg.trials):
        rng = _sub_rng(cfg.seed, t)
        found = None
        for _ in range(cfg.rejection_cap):
            data: dict[str, dict] = {p: {} for p in prog.processes}
            for p, x in keys:
                data[p][x] = value(rng, prog.var_types.get((p, x)))
            rho = {x: value(rng, None) for x in logs}
            sigma = State(data)
            if satisfies(sigma, rho, spec.pre, funcs):
                found = (sigma, rho)
                break
        if found is None:
            counts["gave_up"] += 1
            continue
        counts["sampled"] += 1
        sigma, rho = found
        out = run(Config(prog.main, sigma), prog, RandomFull(f"{cfg.seed}/{t}/run"), cfg.fuel,
                  stepper)
        if isinstance(out, Terminated):
            counts["terminated"] += 1
            if not satisfies(out.state, rho, spec.post, funcs):
                counts["violations"] += 1
                report.artifacts.append({"trial": t, "state": sigma.to_dict(), "rho": rho,
                                         "final": out.state.to_dict()})
        elif isinstance(out, OutOfFuel):
            counts["nonterminating"] += 1
        else:
            counts["runtime_failures"] += 1
            report.artifacts.append({"trial": t, "state": sigma.to_dict(), "error": out.message})
    counts["mode"] = "soundness"
    counts["vacuous"] = counts["sampled"] == 0
    report.outcome = counts
    report.timing = time.perf_counter() - t0
    return report


# --- exhaustive oracle -------------------------------------------------------


def adequate_spec(prog: Program, psi: Formula) -> dict[str, tuple[Formula, Formula]]:
    """The adequate map for non-recursive procedures: callees first."""
    spec: dict[str, tuple[Formula, Formula]] = {}
    pending = dict(prog.procedures)
    while pending:
        for name, body in sorted(pending.items()):
            try:
                spec[name] = (wlp(body, psi, spec), psi)
            except Exception:
                continue
            del pending[name]
            break
        else:
            raise ValueError("procedures are recursive")
    return spec


def describe_state(sigma: State, rho: dict, keys) -> Formula:
    """A formula satisfied exactly by ``sigma`` (on ``keys``) and ``rho``."""
    parts = [same(LVar(p, x), IntLit(sigma[p][x])) for p, x in sorted(keys)]
    parts += [TheoryAtom("=", LogVar(x), Const(v)) for x, v in sorted(rho.items())]
    return conj(*parts)


@dataclass
class InstanceResult:
    divergences: int = 0
    checks: int = 0
    non_singleton: int = 0
    head_mismatch: int = 0
    false_refuted: int = 0
    certified: int = 0
    artifacts: list = field(default_factory=list)


def check_instance(prog: Program, psi: Formula, cfg: FuzzConfig, rng: random.Random,
                   backend: Backend | None = None) -> InstanceResult:
    """Exhaustively compare wlp satisfaction with the terminal states of ``explore``."""
    res = InstanceResult()
    spec = adequate_spec(prog, psi)
    w = wlp(prog.main, psi, spec)
    funcs = prog.functions
    keys = required_inputs(prog) | localised_vars(psi) | localised_vars(w)
    logs = free_logvars(psi)
    stepper = Stepper(prog)
    certified = []
    for sigma in states(prog.processes, keys, cfg.lo, cfg.hi):
        ex = explore(Config(prog.main, sigma), prog, cfg.fuel, stepper)
        if ex.exhausted or ex.errors or ex.stuck:
            raise RuntimeError(f"explore failed: {ex}")
        terms = ex.terminals
        if len(terms) != 1:
            res.non_singleton += 1
        head = run(Config(prog.main, sigma), prog, HeadOnly(), cfg.fuel, stepper)
        if not isinstance(head, Terminated) or head.state not in terms:
            res.head_mismatch += 1
        for rho in assignments(logs, cfg.lo, cfg.hi):
            res.checks += 1
            oracle = all(satisfies(t, rho, psi, funcs) for t in terms)
            if oracle != satisfies(sigma, rho, w, funcs):
                res.divergences += 1
                res.artifacts.append({"kind": "divergence", "program": program_str(prog),
                                      "post": formula_str(psi), "state": sigma.to_dict(),
                                      "rho": rho})
            if oracle:
                certified.append((sigma, rho))
    # partial completeness: a precondition made of oracle-certified states verifies
    if certified:
        picks = rng.sample(certified, min(cfg.samples, len(certified)))
        phi = disj(*(describe_state(s, r, keys) for s, r in picks))
        res.certified = len(picks)
        v = verify(phi, prog.main, psi, spec, backend or BoundedEnum(cfg.lo, cfg.hi), prog)
        if not v.valid:
            res.false_refuted += 1
            res.artifacts.append({"kind": "false refuted", "program": program_str(prog),
                                  "pre": formula_str(phi), "post": formula_str(psi),
                                  "verdict": v.status})
    return res


def oracle_equivalence(cfg: FuzzConfig, instances: int = 500,
                       backend: Backend | None = None) -> RunReport:
    """wlp exactness, partial completeness and confluence on generated programs."""
    t0 = time.perf_counter()
    report = RunReport("oracle", cfg.seed)
    gcfg = GenConfig(cfg.max_procs, cfg.max_vars, cfg.max_depth, cfg.lo, cfg.hi,
                     procedures=True)
    totals = dict(instances=instances, checks=0, divergences=0, non_singleton=0,
                  head_mismatch=0, false_refuted=0, verified=0, exceptions=0)
    for i in range(instances):
        rng = _sub_rng(cfg.seed, i)
        try:
            gen = Gen(rng, gcfg)
            prog = gen.program()
            psi = gen.formula()
            r = check_instance(prog, psi, cfg, rng, backend)
        except Exception as err:  # reported, never hidden
            totals["exceptions"] += 1
            report.artifacts.append({"kind": "exception", "instance": i, "error": repr(err)})
            continue
        totals["checks"] += r.checks
        totals["divergences"] += r.divergences
        totals["non_singleton"] += r.non_singleton
        totals["head_mismatch"] += r.head_mismatch
        totals["false_refuted"] += r.false_refuted
        totals["verified"] += bool(r.certified)
        for a in r.artifacts[:5]:
            report.artifacts.append({"instance": i, **a})
    report.outcome = totals
    report.timing = time.perf_counter() - t0
    return report


def confluence(prog: Program, sigma: State, fuel: int = 100_000) -> dict:
    """Terminal states of full exploration versus the in-order run."""
    ex = explore(Config(prog.main, sigma), prog, fuel)
    head = run(Config(prog.main, sigma), prog, HeadOnly(), fuel)
    head_state = head.state if isinstance(head, Terminated) else None
    return {"terminals": len(ex.terminals), "exhausted": ex.exhausted, "errors": ex.errors,
            "head_reaches": head_state is not None and head_state in ex.terminals}
