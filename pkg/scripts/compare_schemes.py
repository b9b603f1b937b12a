"""Desk-scale scheme comparison under both SINR models.

Reports mean sum rates, JBUA's margin over the baselines and the JBUA/ES
ratio, first with interference-free zero-forcing rates and then with
interference leaking through every IRS path.

    python scripts/compare_schemes.py --trials 10000
"""

import argparse
import sys
from dataclasses import replace

from irs_jbua.harness import SCHEMES, ScenarioConfig, run_scenario
from irs_jbua.jbua import ObjectiveMode


def summarize(result):
    st = {s: result.stats[s] for s in SCHEMES}
    line = "  ".join(f"{s}={st[s].mean:.3f}±{st[s].stderr:.3f}" for s in SCHEMES)
    jbua = st["JBUA"].mean
    extra = (
        f"JBUA/ES={jbua / st['ES'].mean:.4f}  "
        f"vs GS {100 * (jbua / st['GS'].mean - 1):+.1f}%  vs RS {100 * (jbua / st['RS'].mean - 1):+.1f}%  "
        f"non-monotone={result.non_monotone}"
    )
    return line + "\n  " + extra


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-k", "--users", type=int, default=4)
    ap.add_argument("-l", "--irs", type=int, default=4)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    base = ScenarioConfig(k_users=args.users, l_irs=args.irs, trials=args.trials,
                          master_seed=args.seed, workers=args.workers)
    for mode in ObjectiveMode:
        cfg = replace(base, objective=mode)
        print(f"{mode.value} ({cfg.trials} trials)")
        print("  " + summarize(run_scenario(cfg)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
