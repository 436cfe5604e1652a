"""Command-line front end: single runs, policy comparisons, size sweeps
and post-hoc analysis of stored summaries.

Exit codes: 0 on success, 1 for usage errors, 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from .analysis import (
    emit_snapshot_svg,
    emit_summary_json,
    emit_timeseries_csv,
    fit_growth_exponent,
    summary_dict,
)
from .engine import Phase, run
from .model import PolicyKind, SimConfig

POLICY_NAMES = {"least": PolicyKind.LEAST, "moderate": PolicyKind.MODERATE,
                "most": PolicyKind.MOST}

DEFAULTS = SimConfig()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _add_config_flags(p: _Parser):
    p.add_argument("--policy", choices=sorted(POLICY_NAMES), default=None,
                   help="preservation policy (default: least)")
    p.add_argument("--n-max", type=int, default=None,
                   help=f"number of DOs to introduce (default: {DEFAULTS.n_max})")
    p.add_argument("--h-max", type=int, default=None,
                   help=f"size of the host universe (default: {DEFAULTS.h_max})")
    p.add_argument("--r-min", type=int, default=None,
                   help=f"minimum preservation copies (default: {DEFAULTS.r_min})")
    p.add_argument("--r-max", type=int, default=None,
                   help=f"maximum preservation copies (default: {DEFAULTS.r_max})")
    p.add_argument("--capacity", type=int, default=None,
                   help=f"foreign-copy slots per host (default: {DEFAULTS.host_capacity})")
    p.add_argument("--seed", type=int, default=None,
                   help=f"random seed (default: {DEFAULTS.seed})")
    p.add_argument("--bin-size", type=int, default=None,
                   help=f"events per message bin (default: {DEFAULTS.bin_size})")
    p.add_argument("--intro-interval", type=int, default=None,
                   help=f"events between introductions (default: {DEFAULTS.intro_interval})")
    p.add_argument("--link-prob", type=float, default=None,
                   help=f"per-contact link probability (default: {DEFAULTS.link_probability})")
    p.add_argument("--extra-link-frac", type=float, default=None,
                   help="fraction of gleaned candidates befriended after the first link "
                        f"(default: {DEFAULTS.extra_link_fraction})")
    p.add_argument("--max-events", type=int, default=None,
                   help=f"hard stop on event count (default: {DEFAULTS.max_events})")
    p.add_argument("--config", metavar="FILE",
                   help="JSON file of flag values; explicit flags override it")
    p.add_argument("--out-dir", default=None,
                   help="output directory (default: $USWSIM_OUT or current directory)")


def build_parser() -> _Parser:
    parser = _Parser(prog="uswsim",
                     description="Simulate self-preserving digital objects on a "
                                 "small-world friendship graph.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[], help="one simulation run")
    _add_config_flags(p_run)
    p_run.add_argument("--snapshots", default="",
                       help="comma-separated event times to render as SVG snapshots")
    p_run.add_argument("--edge-list", action="store_true",
                       help="also write the final friendship graph as an edge list")

    p_cmp = sub.add_parser("compare", help="run several policies over a seed set")
    _add_config_flags(p_cmp)
    p_cmp.add_argument("--policies", default="least,moderate,most",
                       help="comma-separated policies to compare (default: all three)")
    p_cmp.add_argument("--seeds", type=int, default=20,
                       help="number of seeds, used as 1..N (default: 20)")
    p_cmp.add_argument("--jobs", type=int, default=1,
                       help="parallel worker processes (default: 1)")

    p_swp = sub.add_parser("sweep", help="feast-condition scaling sweep over system sizes")
    _add_config_flags(p_swp)
    p_swp.add_argument("--sizes", default="10,50,100,250,500",
                       help="comma-separated ascending DO counts (default: 10,50,100,250,500)")
    p_swp.add_argument("--jobs", type=int, default=1,
                       help="parallel worker processes (default: 1)")

    p_ana = sub.add_parser("analyze", help="summarize stored summary JSON files")
    p_ana.add_argument("inputs", nargs="+", help="summary JSON paths")
    return parser


def config_from_args(args) -> SimConfig:
    """Build a SimConfig from flags, falling back to --config values then
    package defaults; explicit flags always win."""
    file_vals = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            file_vals = json.load(fh)

    def pick(flag, attr):
        cli_val = getattr(args, attr)
        if cli_val is not None:
            return cli_val
        if flag in file_vals:
            return file_vals[flag]
        return getattr(DEFAULTS, _CONFIG_ATTR[attr])

    policy_name = pick("policy", "policy")
    if isinstance(policy_name, str):
        if policy_name not in POLICY_NAMES:
            raise UsageError(f"unknown policy {policy_name!r}")
        policy_kind = POLICY_NAMES[policy_name]
    else:
        policy_kind = policy_name
    try:
        return SimConfig(
            n_max=int(pick("n_max", "n_max")),
            h_max=int(pick("h_max", "h_max")),
            r_min=int(pick("r_min", "r_min")),
            r_max=int(pick("r_max", "r_max")),
            host_capacity=int(pick("capacity", "capacity")),
            policy=policy_kind,
            seed=int(pick("seed", "seed")),
            bin_size=int(pick("bin_size", "bin_size")),
            intro_interval=int(pick("intro_interval", "intro_interval")),
            link_probability=float(pick("link_prob", "link_prob")),
            extra_link_fraction=float(pick("extra_link_frac", "extra_link_frac")),
            max_events=int(pick("max_events", "max_events")),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


_CONFIG_ATTR = {
    "policy": "policy", "n_max": "n_max", "h_max": "h_max", "r_min": "r_min",
    "r_max": "r_max", "capacity": "host_capacity", "seed": "seed",
    "bin_size": "bin_size", "intro_interval": "intro_interval",
    "link_prob": "link_probability", "extra_link_frac": "extra_link_fraction",
    "max_events": "max_events",
}


class UsageError(Exception):
    pass


def out_dir_of(args) -> str:
    out = args.out_dir or os.environ.get("USWSIM_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def run_name(config: SimConfig) -> str:
    return f"run_{config.policy.value}_n{config.n_max}_seed{config.seed}"


def _run_worker(config: SimConfig) -> dict:
    result = run(config)
    return summary_dict(result)


def cmd_run(args) -> int:
    config = config_from_args(args)
    out = out_dir_of(args)
    result = run(config)
    base = os.path.join(out, run_name(config))
    emit_timeseries_csv(result, base + ".csv")
    emit_summary_json(result, base + ".json")
    if args.edge_list:
        result.graph.write_edge_list(base + ".edges")
    for part in [s for s in args.snapshots.split(",") if s.strip()]:
        t = int(part)
        emit_snapshot_svg(result, t, base + f"_t{t}.svg")
    print(f"{run_name(config)}: steady_state_t={result.steady_state_t} "
          f"messages={result.ledger.total} "
          f"effectiveness={result.final_effectiveness:.4f}")
    return 0


def _median(values):
    return statistics.median(values)


def compare_policies(policies, base_config: SimConfig, seeds, jobs=1):
    """Per-policy medians over a shared seed set, plus the Most/Moderate
    message ratio when both are present."""
    configs = [(pol, replace(base_config, policy=pol, seed=s))
               for pol in policies for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_run_worker, [c for _, c in configs]))
    else:
        summaries = [_run_worker(c) for _, c in configs]
    by_policy = {}
    for (pol, _), summ in zip(configs, summaries):
        by_policy.setdefault(pol, []).append(summ)
    table = {}
    for pol, rows in by_policy.items():
        table[pol.value] = {
            "seeds": len(rows),
            "median_steady_state_t": _median([r["steady_state_t"] or r["final_t"]
                                              for r in rows]),
            "median_total_messages": _median([r["messages"]["total"] for r in rows]),
            "median_final_effectiveness": _median([r["final_effectiveness"] for r in rows]),
            "median_hosts_with_unused_capacity": _median(
                [r["hosts"]["with_unused_capacity"] for r in rows]),
            "median_zero_copy_fraction": _median(
                [r["status_fractions"]["none_made"] for r in rows]),
        }
    report = {"policies": table, "seed_count": len(seeds)}
    if "most" in table and "moderate" in table:
        report["most_over_moderate_messages"] = round(
            table["most"]["median_total_messages"]
            / table["moderate"]["median_total_messages"], 6)
    return report


def cmd_compare(args) -> int:
    names = [p.strip() for p in args.policies.split(",") if p.strip()]
    if len(names) < 2:
        raise UsageError("compare needs at least 2 policies")
    bad = [n for n in names if n not in POLICY_NAMES]
    if bad:
        raise UsageError(f"unknown policies: {', '.join(bad)}")
    config = config_from_args(args)
    seeds = list(range(1, args.seeds + 1))
    report = compare_policies([POLICY_NAMES[n] for n in names], config, seeds,
                              jobs=args.jobs)
    out = out_dir_of(args)
    path = os.path.join(out, f"compare_n{config.n_max}_seeds{args.seeds}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    header = f"{'policy':>10} {'steady_t':>9} {'messages':>9} {'effect.':>8} {'unused_hosts':>13}"
    print(header)
    for name in names:
        row = report["policies"][name]
        print(f"{name:>10} {row['median_steady_state_t']:>9.0f} "
              f"{row['median_total_messages']:>9.0f} "
              f"{row['median_final_effectiveness']:>8.4f} "
              f"{row['median_hosts_with_unused_capacity']:>13.0f}")
    if "most_over_moderate_messages" in report:
        print(f"message ratio most/moderate: {report['most_over_moderate_messages']:.3f}")
    return 0


def sweep_sizes(sizes, base_config: SimConfig, out_dir=None, jobs=1):
    """Feast runs (capacity twice the system size) for every size and
    policy; growth-phase message totals feed the scaling fit."""
    configs = []
    for n in sizes:
        for pol in (PolicyKind.LEAST, PolicyKind.MODERATE, PolicyKind.MOST):
            configs.append(replace(base_config, n_max=n, host_capacity=2 * n,
                                   policy=pol))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, configs))
    else:
        results = [run(c) for c in configs]
    growth = {}
    for cfg, result in zip(configs, results):
        growth.setdefault(cfg.policy, []).append(
            (cfg.n_max, result.ledger.phase_messages[Phase.GROWTH]))
        if out_dir is not None:
            emit_timeseries_csv(result, os.path.join(out_dir, run_name(cfg) + ".csv"))
    fits = {pol.value: fit_growth_exponent(sorted(points))
            for pol, points in growth.items()}
    return fits


def cmd_sweep(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    if sizes != sorted(sizes) or any(n < 2 for n in sizes):
        raise UsageError("sizes must be ascending and each at least 2")
    if len(sizes) < 3:
        raise UsageError("fit needs at least 3 sizes")
    config = config_from_args(args)
    out = out_dir_of(args)
    fits = sweep_sizes(sizes, config, out_dir=out, jobs=args.jobs)
    summary = {
        pol: {"sizes": fit.sizes, "growth_totals": fit.totals,
              "slope": round(fit.slope, 6),
              "marginal_slope": round(fit.marginal_slope, 6)
              if fit.marginal_slope is not None else None}
        for pol, fit in sorted(fits.items())
    }
    path = os.path.join(out, f"sweep_{'-'.join(map(str, sizes))}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for pol, row in summary.items():
        print(f"{pol:>10}: slope={row['slope']:.3f} marginal={row['marginal_slope']}")
    return 0


def cmd_analyze(args) -> int:
    rows = []
    for path in args.inputs:
        with open(path, encoding="utf-8") as fh:
            rows.append((path, json.load(fh)))
    print(f"{'file':>40} {'policy':>10} {'steady_t':>9} {'messages':>9} {'effect.':>8}")
    for path, summ in rows:
        cfg = summ["config"]
        print(f"{os.path.basename(path):>40} {cfg['policy']:>10} "
              f"{summ['steady_state_t'] or summ['final_t']:>9} "
              f"{summ['messages']['total']:>9} {summ['final_effectiveness']:>8.4f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "compare":
            return cmd_compare(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_analyze(args)
    except UsageError as exc:
        print(f"uswsim: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures exit 2
        print(f"uswsim: failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
