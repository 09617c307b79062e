"""Compare wlp against exhaustive exploration on random programs.

Prints the totals as JSON, followed by up to ``--show`` artifacts.
"""

import argparse
import json
import sys

from chorver.harness import FuzzConfig, oracle_equivalence


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=500)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--lo", type=int, default=0)
    ap.add_argument("--hi", type=int, default=3)
    ap.add_argument("--depth", type=int, default=5)
    ap.add_argument("--procs", type=int, default=3)
    ap.add_argument("--show", type=int, default=5)
    args = ap.parse_args()
    cfg = FuzzConfig(seed=args.seed, lo=args.lo, hi=args.hi, max_depth=args.depth,
                     max_procs=args.procs)
    report = oracle_equivalence(cfg, args.instances)
    print(json.dumps({**report.outcome, "seconds": round(report.timing, 1)}, indent=2))
    for a in report.artifacts[: args.show]:
        print(json.dumps(a))
    o = report.outcome
    bad = o["divergences"] + o["false_refuted"] + o["non_singleton"] + o["head_mismatch"]
    return 0 if bad + o["exceptions"] == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
