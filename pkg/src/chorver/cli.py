"""Command-line front end.

Exit codes: 0 success or Valid, 1 Refuted or violation, 2 input or backend
error, 3 fuel exhausted.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from chorver.backends import BoundedEnum, make_backend
from chorver.check import missing_inputs
from chorver.harness import (FuzzConfig, RunReport, file_hash, fuzz_soundness,
                             oracle_equivalence, replay_counterexample)
from chorver.hoare import (check_adequacy, check_consistency, check_derivation,
                           reconstruct_derivation, verify, wlp)
from chorver.logic import formula_str
from chorver.parser import parse_formula, parse_program, parse_spec, parse_state
from chorver.semantics import (DEFAULT_EXPLORE_FUEL, DEFAULT_RUN_FUEL, Config, FixedIndex,
                               HeadOnly, OutOfFuel, RandomFull, Terminated, explore, run)
from chorver.state import State, value_str
from chorver.syntax import ChorError

OK, REFUTED, INPUT_ERROR, EXHAUSTED = 0, 1, 2, 3


def _domain(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(t) for t in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO..HI, got {text!r}") from None
    if lo > hi:
        raise argparse.ArgumentTypeError("empty domain")
    return lo, hi


def _choices(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from None


def _read(path: str) -> str:
    return Path(path).read_text()


def _load_state(args, prog) -> State:
    text = _read(args.state) if args.state else ""
    if args.set:
        text += "\n" + "\n".join(args.set)
    sigma = parse_state(text, prog.processes)
    missing = missing_inputs(prog, sigma)
    if missing:
        raise ChorError("state does not bind " + ", ".join(f"{p}.{x}" for p, x in missing))
    return sigma


def _emit(report: RunReport, args, text: str):
    if args.json:
        print(report.dumps())
    else:
        print(text, end="" if text.endswith("\n") or not text else "\n")


# --- commands ----------------------------------------------------------------


def cmd_run(args) -> int:
    src = _read(args.chor)
    prog = parse_program(src)
    sigma = _load_state(args, prog)
    if args.policy == "random":
        policy = RandomFull(args.seed)
    elif args.policy == "fixed":
        policy = FixedIndex(args.choices)
    else:
        policy = HeadOnly()
    t0 = time.perf_counter()
    out = run(Config(prog.main, sigma), prog, policy, args.fuel)
    report = RunReport("run", args.seed if args.policy == "random" else None,
                       {args.chor: file_hash(src)})
    lines = [e.line() for e in out.trace]
    report.outcome = {"policy": args.policy, "steps": out.steps,
                      "trace": lines, "result": type(out).__name__}
    if isinstance(out, Terminated):
        report.outcome["final_state"] = out.state.to_dict()
        text = "\n".join(lines + ["terminated after %d steps" % out.steps, str(out.state)])
        code = OK
    elif isinstance(out, OutOfFuel):
        report.outcome["state"] = out.config.state.to_dict()
        text = "\n".join(lines + [f"out of fuel after {out.steps} steps"])
        code = EXHAUSTED
    else:
        report.outcome["error"] = out.message
        text = "\n".join(lines + [f"runtime error: {out.message}"])
        code = INPUT_ERROR
    report.timing = time.perf_counter() - t0
    _emit(report, args, text)
    return code


def cmd_explore(args) -> int:
    src = _read(args.chor)
    prog = parse_program(src)
    sigma = _load_state(args, prog)
    t0 = time.perf_counter()
    res = explore(Config(prog.main, sigma), prog, args.fuel)
    report = RunReport("explore", None, {args.chor: file_hash(src)})
    terms = sorted(res.terminals, key=lambda s: s.bindings())
    report.outcome = {"visited": res.visited, "exhausted": res.exhausted, "stuck": res.stuck,
                      "errors": res.errors, "terminals": [t.to_dict() for t in terms]}
    report.timing = time.perf_counter() - t0
    parts = [f"visited {res.visited} configurations, {len(terms)} terminal state(s)"]
    for i, t in enumerate(terms):
        parts.append(f"-- terminal {i}\n{t}".rstrip())
    if res.exhausted:
        parts.append("exploration stopped: fuel exhausted")
    _emit(report, args, "\n".join(parts))
    if res.exhausted:
        return EXHAUSTED
    return INPUT_ERROR if res.errors else OK


def _load_spec(args):
    src = _read(args.chor)
    prog = parse_program(src)
    spec_src = _read(args.spec) if args.spec else ""
    spec = parse_spec(spec_src, prog)
    if getattr(args, "post", None):
        spec.post = parse_formula(args.post, prog, allow_reserved=False)
    if getattr(args, "pre", None):
        spec.pre = parse_formula(args.pre, prog, allow_reserved=False)
    inputs = {args.chor: file_hash(src)}
    if args.spec:
        inputs[args.spec] = file_hash(spec_src)
    return prog, spec, inputs


def _backend(args):
    lo, hi = args.domain
    return make_backend(args.backend, lo, hi)


def cmd_verify(args) -> int:
    prog, spec, inputs = _load_spec(args)
    backend = _backend(args)
    t0 = time.perf_counter()
    report = RunReport("verify", None, inputs)
    v = verify(spec.pre, prog.main, spec.post, spec.procedures, backend, prog)
    out = {"triple": {"pre": formula_str(spec.pre), "post": formula_str(spec.post)},
           **v.to_json()}
    lines = []
    if args.wlp:
        lines.append(f"wlp: {formula_str(v.wlp)}")
    lines.append(f"verify: {v.status}")
    statuses = [v.status]
    if v.counterexample is not None and v.failing is not None and v.failing.name == "pre":
        rep = replay_counterexample(prog, spec.pre, spec.post, v.counterexample)
        out["replay"] = rep
        lines.append("counterexample state:")
        lines += [f"  {p}.{x} = {value_str(val)}" for p, loc in rep["state"].items() for x, val in loc.items()]
        lines += [f"  ${x} = {value_str(val)}" for x, val in rep["rho"].items()]
        if rep["final_state"] is not None:
            lines.append("final state violating the postcondition:")
            lines += [f"  {p}.{x} = {value_str(val)}" for p, loc in rep["final_state"].items()
                      for x, val in loc.items()]
    elif v.message and not v.valid:
        lines.append(f"  {v.message}")
    for kind in args.check or []:
        fn = check_consistency if kind == "consistency" else None
        res = (fn(spec.procedures, prog, backend) if fn
               else check_adequacy(spec.procedures, prog, spec.post, backend))
        out[kind] = {x: r.to_json() for x, r in res.items()}
        if not res:
            lines.append(f"{kind}: Valid (no procedures)")
        for x, r in res.items():
            lines.append(f"{kind} {x}: {r.status}" + (f" ({r.message})" if r.message and not r.valid else ""))
            statuses.append(r.status)
    if args.derivation and v.valid:
        tree = reconstruct_derivation(spec.pre, prog.main, spec.post, spec.procedures, backend, prog)
        problems = check_derivation(tree, spec.procedures, backend, prog)
        out["derivation"] = tree.to_json()
        out["derivation_check"] = problems or "ok"
        lines.append(tree.render())
        if problems:
            lines += [f"derivation problem: {p}" for p in problems]
            statuses.append("Refuted")
    report.outcome = out
    report.timing = time.perf_counter() - t0
    _emit(report, args, "\n".join(lines))
    if "BackendError" in statuses:
        return INPUT_ERROR
    return OK if all(s == "Valid" for s in statuses) else REFUTED


def cmd_wlp(args) -> int:
    prog, spec, inputs = _load_spec(args)
    w = wlp(prog.main, spec.post, spec.procedures)
    report = RunReport("wlp", None, inputs, {"post": formula_str(spec.post), "wlp": formula_str(w)})
    _emit(report, args, formula_str(w))
    return OK


def cmd_fuzz(args) -> int:
    prog, spec, inputs = _load_spec(args)
    lo, hi = args.domain
    cfg = FuzzConfig(trials=args.trials, lo=lo, hi=hi, fuel=args.fuel, seed=args.seed,
                     rejection_cap=args.rejection_cap)
    backend = make_backend(args.backend, lo, hi)
    report = fuzz_soundness(prog, spec, cfg, backend, inputs)
    o = report.outcome
    if o["mode"] == "soundness":
        text = (f"{o['sampled']} sampled runs ({o['gave_up']} gave up): {o['terminated']} terminated, "
                f"{o['violations']} violations, {o['nonterminating']} out of fuel, "
                f"{o['runtime_failures']} runtime failures" + (" (vacuous)" if o["vacuous"] else ""))
        code = REFUTED if o["violations"] else OK
    else:
        rep = o.get("replay")
        text = f"triple does not verify ({o['verify']}); completeness mode"
        if rep:
            text += f": counterexample {'reaches' if rep['violating'] else 'does not reach'} a violating state"
        code = REFUTED
    _emit(report, args, text)
    return code


def cmd_oracle(args) -> int:
    lo, hi = args.domain
    cfg = FuzzConfig(lo=lo, hi=hi, seed=args.seed, fuel=args.fuel, max_depth=args.depth,
                     max_procs=args.procs)
    report = oracle_equivalence(cfg, args.instances, BoundedEnum(lo, hi))
    o = report.outcome
    text = (f"{o['instances']} instances, {o['checks']} (state, assignment) checks: "
            f"{o['divergences']} divergences, {o['false_refuted']} false refutations, "
            f"{o['non_singleton']} non-singleton terminal sets, {o['head_mismatch']} head mismatches, "
            f"{o['exceptions']} exceptions")
    _emit(report, args, text)
    bad = o["divergences"] + o["false_refuted"] + o["non_singleton"] + o["head_mismatch"] + o["exceptions"]
    return REFUTED if bad else OK


# --- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chorver", description="Run and verify choreographies.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true", help="print a JSON report")

    def state_args(p):
        p.add_argument("chor")
        p.add_argument("state", nargs="?")
        p.add_argument("--set", action="append", metavar="P.X=V", help="override a variable")

    def spec_args(p, domain="-8..8"):
        p.add_argument("chor")
        p.add_argument("spec", nargs="?")
        p.add_argument("--pre", help="precondition (overrides the spec file)")
        p.add_argument("--post", help="postcondition (overrides the spec file)")
        p.add_argument("--backend", choices=["enum", "smt"], default="enum")
        p.add_argument("--domain", type=_domain, default=_domain(domain), metavar="LO..HI")

    p = sub.add_parser("run", help="execute a choreography")
    state_args(p)
    p.add_argument("--policy", choices=["head", "random", "fixed"], default="head")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--choices", type=_choices, default=(), help="indices for --policy fixed")
    p.add_argument("--fuel", type=int, default=DEFAULT_RUN_FUEL)
    common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("explore", help="enumerate all reachable terminal states")
    state_args(p)
    p.add_argument("--fuel", type=int, default=DEFAULT_EXPLORE_FUEL)
    common(p)
    p.set_defaults(fn=cmd_explore)

    p = sub.add_parser("verify", help="verify the triple of a spec file")
    spec_args(p)
    p.add_argument("--check", action="append", choices=["consistency", "adequacy"])
    p.add_argument("--wlp", action="store_true", help="print the weakest precondition")
    p.add_argument("--derivation", action="store_true", help="reconstruct a derivation")
    common(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("wlp", help="print the weakest liberal precondition of main")
    spec_args(p)
    common(p)
    p.set_defaults(fn=cmd_wlp)

    p = sub.add_parser("fuzz", help="random soundness testing of a verified triple")
    spec_args(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fuel", type=int, default=DEFAULT_RUN_FUEL)
    p.add_argument("--rejection-cap", type=int, default=10_000)
    common(p)
    p.set_defaults(fn=cmd_fuzz)

    p = sub.add_parser("oracle", help="compare wlp with exhaustive execution on random programs")
    p.add_argument("--instances", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--domain", type=_domain, default=(0, 3), metavar="LO..HI")
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--procs", type=int, default=3)
    p.add_argument("--fuel", type=int, default=DEFAULT_EXPLORE_FUEL)
    common(p)
    p.set_defaults(fn=cmd_oracle)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ChorError, OSError, ValueError) as err:
        print(f"chorver: error: {err}", file=sys.stderr)
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
