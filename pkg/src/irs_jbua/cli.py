"""Command-line entry point: ``irs-jbua {run,sweep,validate,demo}``."""

from __future__ import annotations

import argparse
import logging
import sys
import time

from irs_jbua.config import ConfigError, parse_config
from irs_jbua.errors import IrsError
from irs_jbua.harness import (
    SCHEMES,
    ScenarioConfig,
    ScenarioResult,
    SchemeStats,
    run_scenario,
    run_sweep,
    scenario_rows,
    write_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_IO = 4

# name -> (K, L, trials, seed)
DEMO_PROFILES = {
    "small": (2, 2, 300, 11),
    "medium": (4, 4, 300, 22),
    "asymmetric": (3, 5, 300, 33),
}


def _fmt_stats(st: SchemeStats) -> str:
    if st.mean is None:
        return f"{'skipped':>10} {'':>9}"
    return f"{st.mean:10.4f} {st.stderr:9.4f}"


def format_summary(stats: dict[str, SchemeStats]) -> str:
    lines = [f"{'scheme':<6} {'mean':>10} {'stderr':>9}"]
    lines += [f"{s:<6} {_fmt_stats(stats[s])}" for s in SCHEMES]
    return "\n".join(lines)


def jbua_es_ratio(stats: dict[str, SchemeStats]) -> float | None:
    es, jbua = stats["ES"].mean, stats["JBUA"].mean
    if es is None or jbua is None or not es > 0:
        return None
    return jbua / es


def demo_config(name: str) -> ScenarioConfig:
    k, l, trials, seed = DEMO_PROFILES[name]
    return ScenarioConfig(k_users=k, l_irs=l, trials=trials, master_seed=seed)


def run_demo(out=sys.stdout) -> dict[str, float]:
    ratios = {}
    for name in DEMO_PROFILES:
        cfg = demo_config(name)
        result = run_scenario(cfg)
        ratio = jbua_es_ratio(result.stats)
        ratios[name] = ratio
        print(f"== {name}: K={cfg.k_users} L={cfg.l_irs} trials={cfg.trials} seed={cfg.master_seed}", file=out)
        print(format_summary(result.stats), file=out)
        print(f"JBUA/ES ratio: {ratio:.6f}", file=out)
    return ratios


def _load(args):
    return parse_config(args.config, args.set, full_scale=args.full_scale, seed=args.seed)


def cmd_validate(args) -> int:
    loaded = _load(args)
    print(loaded.describe())
    sc = loaded.scenario
    es = "enabled" if sc.es_enabled else f"skipped (over es_limit={sc.es_limit})"
    print(f"# valid: K={sc.k_users} L={sc.l_irs} N={sc.radio.num_ap_antennas} "
          f"M={sc.reflectors_y}x{sc.reflectors_z} trials={sc.trials}; ES {es}")
    if loaded.sweep is not None:
        print(f"# sweep: {loaded.sweep.variable.value} over {list(loaded.sweep.values)}")
    return EXIT_OK


def cmd_run(args) -> int:
    loaded = _load(args)
    cfg = loaded.scenario
    if not cfg.es_enabled:
        print(f"warning: ES skipped, {cfg.l_irs}P{cfg.k_users} assignments exceed es_limit", file=sys.stderr)
    t0 = time.perf_counter()
    result = run_scenario(cfg)
    _report(args, result, time.perf_counter() - t0)
    if args.out:
        write_csv(scenario_rows(result), args.out)
        if not args.quiet:
            print(f"wrote {args.out}")
    return EXIT_OK


def _report(args, result: ScenarioResult, elapsed: float) -> None:
    if args.quiet:
        return
    print(format_summary(result.stats))
    ratio = jbua_es_ratio(result.stats)
    if ratio is not None:
        print(f"JBUA/ES ratio: {ratio:.6f}")
    print(f"({result.config.trials} trials in {elapsed:.1f}s)")


def cmd_sweep(args) -> int:
    loaded = _load(args)
    spec = loaded.sweep
    if spec is None:
        raise ConfigError("sweep needs [sweep] variable and values in the config or via --set")
    out = args.out or "sweep.csv"

    def progress(value, point):
        if args.quiet:
            return
        if point is None:
            print(f"{spec.variable.value}={value:g}: FAILED (see log)")
            return
        means = "  ".join(
            f"{s}={point.stats[s].mean:.4f}" if point.stats[s].mean is not None else f"{s}=skipped"
            for s in SCHEMES
        )
        print(f"{spec.variable.value}={value:g}: {means}", flush=True)

    result = run_sweep(spec, progress)
    if result.es_skipped:
        print(
            f"warning: ES skipped (es_limit={spec.base.es_limit}) at "
            f"{spec.variable.value}={', '.join(f'{v:g}' for v in result.es_skipped)}; CSV cells left empty",
            file=sys.stderr,
        )
    write_csv(result.rows, out)
    if not args.quiet:
        print()
        print(f"{'value':>10} " + " ".join(f"{s:>10}" for s in SCHEMES))
        for value in spec.values:
            cells = []
            for s in SCHEMES:
                st = next(r.stats for r in result.rows if r.value == value and r.scheme == s)
                cells.append(f"{st.mean:10.4f}" if st.mean is not None else f"{'-':>10}")
            print(f"{value:>10g} " + " ".join(cells))
        print(f"wrote {out}")
    return EXIT_RUNTIME if result.errors else EXIT_OK


def cmd_demo(args) -> int:
    run_demo()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML scenario file")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                        help="override a config key (repeatable)")
    common.add_argument("--seed", type=int, help="override master_seed")
    common.add_argument("--out", metavar="PATH", help="CSV output path")
    common.add_argument("--full-scale", action="store_true",
                        help="256 AP antennas and 100x100 reflectors per panel")
    common.add_argument("--quiet", action="store_true", help="only errors and warnings")

    parser = argparse.ArgumentParser(
        prog="irs-jbua", description="Dual-tier IRS beamforming and user association simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, text in (
        ("run", cmd_run, "simulate one scenario"),
        ("sweep", cmd_sweep, "sweep one parameter and write CSV"),
        ("validate", cmd_validate, "check a config and print resolved values"),
        ("demo", cmd_demo, "short fixed-seed demonstration"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except IrsError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
