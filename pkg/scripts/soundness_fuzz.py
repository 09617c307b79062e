"""Soundness fuzzing of a choreography against its spec file, as a JSON report."""

import argparse
import sys
from pathlib import Path

from chorver.harness import FuzzConfig, file_hash, fuzz_soundness
from chorver.parser import parse_program, parse_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("chor")
    ap.add_argument("spec")
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lo", type=int, default=-8)
    ap.add_argument("--hi", type=int, default=8)
    ap.add_argument("--fuel", type=int, default=10_000)
    args = ap.parse_args()
    src, spec_src = Path(args.chor).read_text(), Path(args.spec).read_text()
    prog = parse_program(src)
    spec = parse_spec(spec_src, prog)
    cfg = FuzzConfig(trials=args.trials, seed=args.seed, lo=args.lo, hi=args.hi, fuel=args.fuel)
    report = fuzz_soundness(prog, spec, cfg,
                            inputs={args.chor: file_hash(src), args.spec: file_hash(spec_src)})
    print(report.dumps())
    o = report.outcome
    return 0 if o.get("mode") == "soundness" and o["violations"] == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
