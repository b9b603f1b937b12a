"""Run the power, reflector and area sweeps and write one CSV per sweep.

    python scripts/reproduce_sweeps.py --trials 2000 --outdir results
"""

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from irs_jbua.config import parse_config
from irs_jbua.harness import SCHEMES, run_sweep, write_csv

ROOT = Path(__file__).resolve().parents[1]
SWEEPS = {
    "power": ROOT / "configs" / "sweep_power.toml",
    "reflectors": ROOT / "configs" / "sweep_reflectors.toml",
    "area": ROOT / "configs" / "sweep_area.toml",
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--only", choices=sorted(SWEEPS), action="append", help="run a subset")
    ap.add_argument("--trials", type=int, help="override trials per point")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name in args.only or list(SWEEPS):
        spec = parse_config(SWEEPS[name]).sweep
        base = replace(spec.base, workers=args.workers)
        if args.trials:
            base = replace(base, trials=args.trials)
        spec = replace(spec, base=base)
        t0 = time.perf_counter()
        result = run_sweep(spec)
        path = outdir / f"sweep_{name}.csv"
        write_csv(result.rows, path)
        print(f"\n{name}: {spec.variable.value}, {base.trials} trials/point, {time.perf_counter() - t0:.0f}s -> {path}")
        print(f"{'value':>8} " + " ".join(f"{s:>8}" for s in SCHEMES))
        for value in spec.values:
            cells = [dict(result.table(s))[value].mean for s in SCHEMES]
            print(f"{value:>8g} " + " ".join(f"{c:8.3f}" if c is not None else f"{'-':>8}" for c in cells))
    return 0


if __name__ == "__main__":
    sys.exit(main())
