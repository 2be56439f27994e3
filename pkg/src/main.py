"""
Entrypoint för DimHunk - kommandoradsverktyg för skattning av inneboende dimension.

    python3 -m src.main <subcommand> [flags]

Subcommands:
  plan-theory     points needed by the reach-based bound
  plan-heuristic  pairs (and points) needed by the binomial model
  scales-search   grid search for the best scales at a volume
  gap-table       Δ for the published (or given) scales
  estimate        two-scale estimate on a CSV cloud
  reach-free      test a hypothesized dimension without knowing the reach
  loglog          plot data: log |pairs within eps| against log eps
  sample          draw a cloud from a synthetic manifold
  experiment      Monte Carlo success rates (single run or named suite)
  compare         correlation vs angle-variance estimator on shared clouds
  tables          regenerate the reference tables and diff them

Manifold specs: sphere:D, clifford:D, flat:D[:PERIOD], rotation, swissroll,
swissroll-raw, schwarz, gaussian:D, product(A,B).

Exit codes: 0 ok, 1 other error, 2 undefined estimate, 3 infeasible plan,
4 I/O, parse or configuration error.
"""
import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from typing import Callable, Dict, List, Optional

import numpy as np

from .assert_env import load_config_from_env
from .config import Config
from .estimator import default_eps_grid, dim_corr, loglog_points, reach_free_test
from .geometry import ScalePair, gap_delta
from .harness import (
    MODE_PAIRS,
    MODE_POINTS,
    SUITES,
    ExperimentRunner,
    SuiteCase,
    build_suite,
    compare_estimators,
)
from .planner import (
    CLT_Z_90,
    InfeasiblePlanError,
    ScaleSearch,
    heuristic_plan,
    n_required_tight,
    pairs_required_clt,
    points_for_pairs,
    published_scales,
    theoretical_plan,
)
from .point_cloud import CloudParseError, read_cloud_csv, write_cloud_csv
from .samplers import Seed, parse_manifold, reference_volume, sample, sample_until_pairs
from .tables import TableReport

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNDEFINED = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


class Output:
    """Formats numbers and writes results to stdout."""

    def __init__(self, full_precision: bool, fmt: str = "text", stream=None):
        self.digits = 17 if full_precision else 6
        self.fmt = fmt
        self.stream = stream if stream is not None else sys.stdout

    def num(self, value) -> str:
        if value is None:
            return "none"
        if isinstance(value, bool):
            return str(value).lower()
        if isinstance(value, int):
            return str(value)
        return f"{value:.{self.digits}g}"

    def line(self, text: str = "") -> None:
        print(text, file=self.stream)

    def record(self, fields: Dict) -> None:
        if self.fmt == "json":
            self.line(json.dumps(fields, indent=2))
        elif self.fmt == "ndjson":
            self.line(json.dumps(fields))
        elif self.fmt == "csv":
            writer = csv.writer(self.stream, lineterminator="\n")
            writer.writerow(list(fields.keys()))
            writer.writerow([self.num(v) if not isinstance(v, str) else v for v in fields.values()])
        else:
            for key, value in fields.items():
                self.line(f"{key}={value if isinstance(value, str) else self.num(value)}")

    def rows(self, header: List[str], rows: List[List]) -> None:
        if self.fmt in ("json", "ndjson"):
            records = [dict(zip(header, r)) for r in rows]
            if self.fmt == "json":
                self.line(json.dumps(records, indent=2))
            else:
                for r in records:
                    self.line(json.dumps(r))
            return
        writer = csv.writer(self.stream, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            writer.writerow([v if isinstance(v, str) else self.num(v) for v in r])


def _scales_from_args(args, d: Optional[int] = None) -> ScalePair:
    if args.eps1 is not None or args.eps2 is not None:
        if args.eps1 is None or args.eps2 is None:
            raise ValueError("--eps1 and --eps2 must be given together.")
        return ScalePair(args.eps1, args.eps2)
    if d is None:
        raise ValueError("--eps1 and --eps2 are required.")
    return published_scales(d)


def _volume_from_args(args) -> Optional[float]:
    if args.vol is not None:
        return args.vol
    if getattr(args, "manifold", None):
        return reference_volume(parse_manifold(args.manifold))
    return None


def _read_cloud(args):
    return read_cloud_csv(args.input, metric=args.metric, skip_header=args.skip_header)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_plan_theory(args, cfg: Config, out: Output) -> int:
    d = args.dim
    scales = _scales_from_args(args, d) if (args.eps1 is not None or args.eps2 is not None) else None
    plan = theoretical_plan(d, scales, args.alpha1, cfg.failure_prob)
    fields = {
        "d": plan.d,
        "eps1": plan.scales.eps1,
        "eps2": plan.scales.eps2,
        "alpha1": plan.alpha1,
        "delta": plan.delta,
        "rho": plan.rho,
        "n_const": plan.n_const,
        "n_coeff": plan.n_coeff,
        "n_const_ceil": math.ceil(plan.n_const),
        "n_coeff_ceil": math.ceil(plan.n_coeff),
    }
    vol = _volume_from_args(args)
    if vol is not None:
        fields["vol"] = vol
        fields["n"] = plan.n_for_volume(vol)
    out.record(fields)
    return EXIT_OK


def cmd_plan_heuristic(args, cfg: Config, out: Output) -> int:
    d = args.dim
    scales = _scales_from_args(args, d)
    plan = heuristic_plan(d, args.confidence, scales)
    fields = {
        "d": d,
        "eps1": scales.eps1,
        "eps2": scales.eps2,
        "confidence": args.confidence,
        "N_pairs": plan.N_pairs,
        "z": args.z,
        "N_pairs_clt": pairs_required_clt(d, scales, args.z),
        "mean_Ed": plan.mean_Ed,
        "sigma_d": plan.sigma_d,
        "gap_d": plan.gap_d,
    }
    vol = _volume_from_args(args)
    if vol is not None:
        fields["vol"] = vol
        fields["n_points"] = points_for_pairs(plan.N_pairs, d, scales.eps1, vol)
    out.record(fields)
    return EXIT_OK


def cmd_scales_search(args, cfg: Config, out: Output) -> int:
    d = args.dim
    vol = args.vol if args.vol is not None else (2.0 * math.pi) ** d
    search = ScaleSearch(d, vol, args.grid_step or cfg.grid_step, args.alpha_step or cfg.alpha_step, cfg.failure_prob)
    plan = search.run()
    out.record(
        {
            "d": d,
            "vol": vol,
            "eps1": plan.scales.eps1,
            "eps2": plan.scales.eps2,
            "alpha1": plan.alpha1,
            "delta": plan.delta,
            "n_const": plan.n_const,
            "n_coeff": plan.n_coeff,
            "n": plan.n_for_volume(vol),
            "n_tight": n_required_tight(d, plan.scales, plan.alpha1, vol, plan.rho),
        }
    )
    return EXIT_OK


def cmd_gap_table(args, cfg: Config, out: Output) -> int:
    dims = [args.dim] if args.dim is not None else list(range(1, 11))
    rows = []
    for d in dims:
        s = _scales_from_args(args, d)
        rows.append([d, s.eps1, s.eps2, gap_delta(d, s)])
    out.rows(["d", "eps1", "eps2", "gap"], rows)
    return EXIT_OK


def cmd_estimate(args, cfg: Config, out: Output) -> int:
    cloud = _read_cloud(args)
    scales = _scales_from_args(args)
    estimate = dim_corr(cloud, scales)
    out.record(
        {
            "n_points": cloud.n,
            "metric": cloud.metric_name,
            "eps1": scales.eps1,
            "eps2": scales.eps2,
            "count_eps1": estimate.count1,
            "count_eps2": estimate.count2,
            "raw_slope": estimate.raw_slope,
            "dimension": estimate.describe(),
            "status": estimate.status,
        }
    )
    return EXIT_OK if estimate.defined else EXIT_UNDEFINED


def cmd_reach_free(args, cfg: Config, out: Output) -> int:
    cloud = _read_cloud(args)
    d = args.dim
    scales = _scales_from_args(args, d)
    plan = heuristic_plan(d, args.confidence, scales)
    result = reach_free_test(cloud, d, plan)
    out.record(
        {
            "d": d,
            "N_pairs": plan.N_pairs,
            "R": result.R,
            "r": result.r,
            "count_R": result.estimate.count1,
            "count_r": result.estimate.count2,
            "raw_slope": result.estimate.raw_slope,
            "dimension": result.estimate.describe(),
            "passed": result.passed,
        }
    )
    return EXIT_OK if result.estimate.defined else EXIT_UNDEFINED


def cmd_loglog(args, cfg: Config, out: Output) -> int:
    cloud = _read_cloud(args)
    if args.grid_size < 2:
        raise ValueError("--grid-size must be at least 2.")
    if args.eps_min is not None or args.eps_max is not None:
        if args.eps_min is None or args.eps_max is None or not 0 < args.eps_min < args.eps_max:
            raise ValueError("--eps-min and --eps-max must satisfy 0 < eps-min < eps-max.")
        grid = np.geomspace(args.eps_min, args.eps_max, args.grid_size)
    else:
        grid = default_eps_grid(cloud, args.grid_size)
    curve = loglog_points(cloud, grid)
    stream = open(args.output, "w", encoding="utf-8") if args.output else out.stream
    try:
        stream.write("# log_eps,log_count\n")
        for x, y in curve.rows():
            stream.write(f"{out.num(x)},{out.num(y)}\n")
    finally:
        if args.output:
            stream.close()
    log.info("Log-log curve: %d points, plateau %.4f", len(curve.log_eps), curve.plateau)
    return EXIT_OK


def cmd_sample(args, cfg: Config, out: Output) -> int:
    manifold = parse_manifold(args.manifold)
    seed = Seed(cfg.master_seed, args.stream)
    if args.pairs is not None:
        if args.eps1 is None:
            raise ValueError("--pairs needs --eps1.")
        cloud = sample_until_pairs(manifold, args.eps1, args.pairs, seed, cfg.sample_cap)
    else:
        cloud = sample(manifold, args.points, seed)
    if args.output:
        write_cloud_csv(cloud, args.output)
    else:
        writer = csv.writer(out.stream, lineterminator="\n")
        for row in cloud.coords:
            writer.writerow([repr(float(v)) for v in row])
    log.info("Sampled %d points on %s (metric %s)", cloud.n, manifold.label, cloud.metric_name)
    return EXIT_OK


def _print_summary(runner: ExperimentRunner, out: Output) -> None:
    header = ["label", "estimator", "value", "valid_trials", "success_rate", "reference_rate", "difference"]
    out.rows(header, [[row[k] if row[k] is not None else "" for k in header] for row in runner.rows])


def cmd_experiment(args, cfg: Config, out: Output) -> int:
    if args.suite:
        scales = _scales_from_args(args) if (args.eps1 is not None or args.eps2 is not None) else None
        runner = ExperimentRunner(cfg, build_suite(args.suite, scales), args.suite)
    else:
        if not args.manifold:
            raise ValueError("experiment needs --suite or --manifold.")
        manifold = parse_manifold(args.manifold)
        d = manifold.intrinsic_dim
        if args.pairs is None and args.points is None:
            raise ValueError("experiment needs --pairs N or --points n.")
        mode, value = (MODE_PAIRS, args.pairs) if args.pairs is not None else (MODE_POINTS, args.points)
        case = SuiteCase(
            label=manifold.label,
            manifold=manifold,
            mode=mode,
            value=value,
            scales=_scales_from_args(args, d),
            estimator=args.estimator,
        )
        runner = ExperimentRunner(cfg, [case], "single")
    ok = runner.run()
    if out.fmt == "ndjson":
        for report in runner.reports.values():
            for line in report.ndjson_lines():
                out.line(line)
    else:
        _print_summary(runner, out)
    return EXIT_OK if ok else EXIT_ERROR


def cmd_compare(args, cfg: Config, out: Output) -> int:
    manifold = parse_manifold(args.manifold)
    if args.points is None:
        raise ValueError("compare needs --points n.")
    scales = _scales_from_args(args, manifold.intrinsic_dim)
    report = compare_estimators(manifold, args.points, scales, cfg.trials, cfg.master_seed, cfg.threads)
    corr_rate, anova_rate = report.rates
    out.record(
        {
            "manifold": manifold.label,
            "n_points": args.points,
            "eps1": scales.eps1,
            "eps2": scales.eps2,
            "trials": cfg.trials,
            "corr_rate": corr_rate,
            "anova_rate": anova_rate,
        }
    )
    return EXIT_OK


def cmd_tables(args, cfg: Config, out: Output) -> int:
    report = TableReport(cfg)
    ok = report.run()
    out.line(report.render())
    return EXIT_OK if ok else EXIT_ERROR


COMMANDS: Dict[str, Callable] = {
    "plan-theory": cmd_plan_theory,
    "plan-heuristic": cmd_plan_heuristic,
    "scales-search": cmd_scales_search,
    "gap-table": cmd_gap_table,
    "estimate": cmd_estimate,
    "reach-free": cmd_reach_free,
    "loglog": cmd_loglog,
    "sample": cmd_sample,
    "experiment": cmd_experiment,
    "compare": cmd_compare,
    "tables": cmd_tables,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="Master seed (overrides DIMHUNK_SEED)")
    p.add_argument("--trials", type=int, help="Trials per experiment (overrides DIMHUNK_TRIALS)")
    p.add_argument("--threads", type=int, help="Worker threads (overrides DIMHUNK_THREADS)")
    p.add_argument("--full-precision", action="store_true", help="Print 17 significant digits")
    p.add_argument("--format", choices=["text", "json", "csv", "ndjson"], default="text")


def _add_scales(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps1", type=float, help="Large scale")
    p.add_argument("--eps2", type=float, help="Small scale")


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="CSV file, one point per line")
    p.add_argument("--metric", default="euclidean", help="euclidean or flat-torus:PERIOD")
    p.add_argument("--skip-header", action="store_true", help="Ignore the first CSV line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python3 -m src.main",
        description="DimHunk - intrinsic dimension estimation and sample-size planning",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan-theory", help="Points needed by the reach-based bound")
    _add_common(p)
    _add_scales(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--vol", type=float, help="Manifold volume")
    p.add_argument("--manifold", help="Take the volume from this manifold spec")
    p.add_argument("--alpha1", type=float, help="Share of the failure budget spent on eps1")

    p = sub.add_parser("plan-heuristic", help="Pairs needed by the binomial model")
    _add_common(p)
    _add_scales(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--confidence", type=float, default=0.9)
    p.add_argument("--vol", type=float, help="Manifold volume (adds the expected point count)")
    p.add_argument("--z", type=float, default=CLT_Z_90, help="Normal quantile for the CLT pair budget")
    p.add_argument("--manifold", help="Take the volume from this manifold spec")

    p = sub.add_parser("scales-search", help="Grid search for the best scales")
    _add_common(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--vol", type=float, help="Manifold volume (default (2π)^d)")
    p.add_argument("--grid-step", type=float)
    p.add_argument("--alpha-step", type=float)

    p = sub.add_parser("gap-table", help="Δ for published or given scales")
    _add_common(p)
    _add_scales(p)
    p.add_argument("--dim", type=int)

    p = sub.add_parser("estimate", help="Two-scale estimate on a CSV cloud")
    _add_common(p)
    _add_scales(p)
    _add_input(p)

    p = sub.add_parser("reach-free", help="Test dim = d without knowing the reach")
    _add_common(p)
    _add_scales(p)
    _add_input(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--confidence", type=float, default=0.9)

    p = sub.add_parser("loglog", help="Plot data for log |pairs| against log eps")
    _add_common(p)
    _add_input(p)
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--eps-min", type=float)
    p.add_argument("--eps-max", type=float)
    p.add_argument("--output", help="Write the curve here instead of stdout")

    p = sub.add_parser("sample", help="Draw a cloud from a synthetic manifold")
    _add_common(p)
    p.add_argument("--manifold", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--points", type=int)
    group.add_argument("--pairs", type=int)
    p.add_argument("--eps1", type=float, help="Pair scale for --pairs")
    p.add_argument("--stream", type=int, default=0, help="Random stream id")
    p.add_argument("--output", help="CSV file (default stdout)")

    p = sub.add_parser("experiment", help="Monte Carlo success rates")
    _add_common(p)
    _add_scales(p)
    p.add_argument("--suite", choices=list(SUITES))
    p.add_argument("--manifold")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--points", type=int)
    group.add_argument("--pairs", type=int)
    p.add_argument("--estimator", choices=["corr", "gp", "anova"], default="corr")
    p.add_argument("--output", help="Data area root (overrides DATA_AREA_ROOT_DIR)")

    p = sub.add_parser("compare", help="Correlation vs angle-variance estimator")
    _add_common(p)
    _add_scales(p)
    p.add_argument("--manifold", required=True)
    p.add_argument("--points", type=int, required=True)

    p = sub.add_parser("tables", help="Regenerate and diff the reference tables")
    _add_common(p)
    p.add_argument("--output", help="Data area root (overrides DATA_AREA_ROOT_DIR)")

    return parser


def _apply_overrides(cfg: Config, args) -> Config:
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ValueError("--trials must be at least 1.")
        changes["trials"] = args.trials
    if args.threads is not None:
        if args.threads < 1:
            raise ValueError("--threads must be at least 1.")
        changes["threads"] = args.threads
    if args.full_precision:
        changes["full_precision"] = True
    if args.command in ("experiment", "tables") and getattr(args, "output", None):
        changes["data_area_root_dir"] = args.output
    return dataclasses.replace(cfg, **changes)


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        cfg = load_config_from_env()
    except EnvironmentError as e:
        print(f"Error validating environment variables: {e}", file=sys.stderr)
        return EXIT_IO

    try:
        cfg = _apply_overrides(cfg, args)
        out = Output(cfg.full_precision, args.format)
        return COMMANDS[args.command](args, cfg, out)
    except InfeasiblePlanError as e:
        print(f"Infeasible plan: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CloudParseError as e:
        print(f"Parse error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
