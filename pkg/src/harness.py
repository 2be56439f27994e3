#!/usr/bin/env python3
"""
ExperimentRunner - Monte Carlo-försök: sampla, skatta, räkna lyckade försök.

One experiment = one manifold, one sampling mode, one estimator and a number
of trials. Trial t draws from random stream t of the master seed, so a report
only depends on the configuration and the seed (never on the worker count).

Sampling modes:
- pairs:  add points until N pairs lie within eps1 (sample_until_pairs)
- points: a fixed number of points (sample)

Estimators:
- corr:  two-scale correlation estimate, rounded
- gp:    single-scale estimate at eps1, rounded
- anova: angle-variance estimate at eps1, d searched in [1, 12]

A trial succeeds when the rounded estimate equals the intrinsic dimension.
Trials that hit the sampling cap are invalid: reported, excluded from the
rate, and more than 5% of them fails the whole experiment.

Results are saved to:
DATA_AREA_ROOT_DIR/output/experiments/<name>/<case>.ndjson
DATA_AREA_ROOT_DIR/output/experiments/<name>/summary.csv
"""
from __future__ import annotations

import csv
import json
import logging
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .baselines import anova_statistic, nearest_reference_dimension
from .config import Config
from .estimator import dim_corr, dim_gp, round_half_up
from .geometry import ScalePair
from .planner import heuristic_points, published_scales
from .point_cloud import PointCloud
from .samplers import (
    DEFAULT_SAMPLE_CAP,
    ManifoldSpec,
    SamplingCapExceeded,
    Seed,
    parse_manifold,
    reference_volume,
    sample,
    sample_until_pairs,
)
from .tables import (
    PUBLISHED_ANOVA_RATES,
    PUBLISHED_PAIR_RATES,
    PUBLISHED_PAIRS,
    PUBLISHED_POINT_RATES,
)

log = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")

MODE_PAIRS = "pairs"
MODE_POINTS = "points"
ESTIMATORS = ("corr", "gp", "anova")
MAX_INVALID_FRACTION = 0.05
CORR_TOLERANCE = 0.06
LOOSE_TOLERANCE = 0.08
BINOMIAL_SE_WINDOW = 3.0


class ExperimentError(RuntimeError):
    """Too many invalid trials."""


@dataclass(frozen=True)
class ExperimentConfig:
    manifold: ManifoldSpec
    mode: str
    value: int
    scales: ScalePair
    estimator: str = "corr"
    trials: int = 100
    master_seed: int = 0
    threads: int = 1
    cap: int = DEFAULT_SAMPLE_CAP

    def __post_init__(self):
        if self.mode not in (MODE_PAIRS, MODE_POINTS):
            raise ValueError(f"mode must be '{MODE_PAIRS}' or '{MODE_POINTS}' (got {self.mode!r}).")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {', '.join(ESTIMATORS)}.")
        if self.trials < 1:
            raise ValueError("trials must be at least 1.")
        if self.threads < 1:
            raise ValueError("threads must be at least 1.")
        if self.mode == MODE_PAIRS and self.value < 1:
            raise ValueError("pairs mode needs N >= 1.")
        if self.mode == MODE_POINTS and self.value < 0:
            raise ValueError("points mode needs n >= 0.")

    def echo(self) -> Dict:
        return {
            "manifold": self.manifold.label,
            "intrinsic_dim": self.manifold.intrinsic_dim,
            "mode": self.mode,
            "value": self.value,
            "eps1": self.scales.eps1,
            "eps2": self.scales.eps2,
            "estimator": self.estimator,
            "trials": self.trials,
            "master_seed": self.master_seed,
        }


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    stream_id: int
    n_points: int
    count1: int
    count2: int
    raw_slope: Optional[float]
    estimate: Optional[int]
    status: str
    success: bool
    valid: bool = True
    angle_statistic: Optional[float] = None
    note: str = ""


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: List[TrialRecord] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def valid_trials(self) -> int:
        return sum(1 for r in self.records if r.valid)

    @property
    def invalid_trials(self) -> int:
        return len(self.records) - self.valid_trials

    @property
    def successes(self) -> int:
        return sum(1 for r in self.records if r.valid and r.success)

    @property
    def success_rate(self) -> float:
        valid = self.valid_trials
        return self.successes / valid if valid else 0.0

    def summary(self) -> Dict:
        out = dict(self.config.echo())
        out.update(
            {
                "type": "summary",
                "valid_trials": self.valid_trials,
                "invalid_trials": self.invalid_trials,
                "successes": self.successes,
                "success_rate": self.success_rate,
                "wall_time": self.wall_time,
            }
        )
        return out

    def ndjson_lines(self) -> List[str]:
        lines = [json.dumps(dict(asdict(r), type="trial")) for r in self.records]
        lines.append(json.dumps(self.summary()))
        return lines


def _evaluate(config: ExperimentConfig, cloud: PointCloud, trial_index: int, estimator: str) -> TrialRecord:
    """Run one estimator on an already sampled cloud."""
    d = config.manifold.intrinsic_dim
    corr = dim_corr(cloud, config.scales)
    common = dict(
        trial=trial_index,
        stream_id=trial_index,
        n_points=cloud.n,
        count1=corr.count1,
        count2=corr.count2,
    )
    if estimator == "corr":
        return TrialRecord(
            raw_slope=corr.raw_slope,
            estimate=corr.rounded,
            status=corr.status,
            success=corr.defined and corr.rounded == d,
            **common,
        )
    if estimator == "gp":
        try:
            value = dim_gp(cloud, config.scales.eps1)
        except ValueError as e:
            return TrialRecord(raw_slope=None, estimate=None, status="undefined", success=False, note=str(e), **common)
        rounded = round_half_up(value)
        return TrialRecord(raw_slope=value, estimate=rounded, status="ok", success=rounded == d, **common)

    try:
        statistic, _sample = anova_statistic(cloud, config.scales.eps1)
        rounded = nearest_reference_dimension(statistic)
    except ValueError as e:
        return TrialRecord(raw_slope=None, estimate=None, status="undefined", success=False, note=str(e), **common)
    return TrialRecord(
        raw_slope=None,
        estimate=rounded,
        status="ok",
        success=rounded == d,
        angle_statistic=statistic,
        **common,
    )


def _draw(config: ExperimentConfig, trial_index: int) -> PointCloud:
    seed = Seed(config.master_seed, trial_index)
    if config.mode == MODE_PAIRS:
        return sample_until_pairs(config.manifold, config.scales.eps1, config.value, seed, config.cap)
    return sample(config.manifold, config.value, seed)


def _invalid_record(trial_index: int, note: str) -> TrialRecord:
    return TrialRecord(
        trial=trial_index,
        stream_id=trial_index,
        n_points=0,
        count1=0,
        count2=0,
        raw_slope=None,
        estimate=None,
        status="invalid",
        success=False,
        valid=False,
        note=note,
    )


def run_trial(config: ExperimentConfig, trial_index: int) -> TrialRecord:
    try:
        cloud = _draw(config, trial_index)
    except SamplingCapExceeded as e:
        log.warning("Trial %d invalid: %s", trial_index, e)
        return _invalid_record(trial_index, str(e))
    return _evaluate(config, cloud, trial_index, config.estimator)


def _check_invalid(label: str, records: List[TrialRecord], trials: int) -> None:
    invalid = sum(1 for r in records if not r.valid)
    if invalid > MAX_INVALID_FRACTION * trials:
        raise ExperimentError(f"{label}: {invalid} of {trials} trials hit the sampling cap.")


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    log.info(
        "Experiment %s: %s=%d scales=(%g, %g) estimator=%s trials=%d",
        config.manifold.label,
        config.mode,
        config.value,
        config.scales.eps1,
        config.scales.eps2,
        config.estimator,
        config.trials,
    )
    start = time.perf_counter()
    indices = range(config.trials)
    if config.threads == 1:
        records = [run_trial(config, t) for t in indices]
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            # map keeps trial order
            records = list(pool.map(lambda t: run_trial(config, t), indices))
    report = ExperimentReport(config=config, records=records, wall_time=time.perf_counter() - start)
    _check_invalid(config.manifold.label, records, config.trials)
    log.info(
        "%s: %d/%d successes (rate %.2f) in %.1fs",
        config.manifold.label,
        report.successes,
        report.valid_trials,
        report.success_rate,
        report.wall_time,
    )
    return report


@dataclass
class ComparisonReport:
    corr: ExperimentReport
    anova: ExperimentReport

    @property
    def rates(self) -> Tuple[float, float]:
        return self.corr.success_rate, self.anova.success_rate


def compare_estimators(
    manifold: ManifoldSpec,
    n_points: int,
    scales: ScalePair,
    trials: int = 100,
    master_seed: int = 0,
    threads: int = 1,
) -> ComparisonReport:
    """Feed the same clouds to the correlation and the angle-variance estimator."""
    corr_config = ExperimentConfig(manifold, MODE_POINTS, n_points, scales, "corr", trials, master_seed, threads)
    anova_config = ExperimentConfig(manifold, MODE_POINTS, n_points, scales, "anova", trials, master_seed, threads)

    def paired(t: int) -> Tuple[TrialRecord, TrialRecord]:
        cloud = _draw(corr_config, t)
        return _evaluate(corr_config, cloud, t, "corr"), _evaluate(anova_config, cloud, t, "anova")

    start = time.perf_counter()
    if threads == 1:
        pairs = [paired(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(paired, range(trials)))
    elapsed = time.perf_counter() - start
    report = ComparisonReport(
        corr=ExperimentReport(corr_config, [p[0] for p in pairs], elapsed),
        anova=ExperimentReport(anova_config, [p[1] for p in pairs], elapsed),
    )
    log.info(
        "Compare %s n=%d: corr %.2f, anova %.2f",
        manifold.label,
        n_points,
        *report.rates,
    )
    return report


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SuiteCase:
    label: str
    manifold: ManifoldSpec
    mode: str
    value: int
    scales: ScalePair
    estimator: str = "corr"
    reference_rate: Optional[float] = None
    tolerance: float = CORR_TOLERANCE
    # only a shortfall against the reference counts as a miss
    one_sided: bool = False

    def window(self, trials: int) -> float:
        """Allowed distance from the reference: the tolerance or three binomial standard errors."""
        if self.reference_rate is None or trials <= 0:
            return self.tolerance
        spread = math.sqrt(self.reference_rate * (1.0 - self.reference_rate) / trials)
        return max(self.tolerance, BINOMIAL_SE_WINDOW * spread)

    def accepts(self, rate: float, trials: int) -> bool:
        if self.reference_rate is None:
            return True
        difference = rate - self.reference_rate
        if self.one_sided:
            return difference >= -self.window(trials) - 1e-12
        return abs(difference) <= self.window(trials) + 1e-12

    def to_config(self, trials: int, master_seed: int, threads: int, cap: int) -> ExperimentConfig:
        return ExperimentConfig(
            self.manifold, self.mode, self.value, self.scales, self.estimator, trials, master_seed, threads, cap
        )


def _pair_cases(column: int, tolerance: float, scales: Optional[ScalePair]) -> List[SuiteCase]:
    cases = []
    for label, text, rate90, rate70 in PUBLISHED_PAIR_RATES:
        manifold = parse_manifold(text)
        d = manifold.intrinsic_dim
        cases.append(
            SuiteCase(
                label=label,
                manifold=manifold,
                mode=MODE_PAIRS,
                value=PUBLISHED_PAIRS[d][column],
                scales=scales or published_scales(d),
                reference_rate=(rate90, rate70)[column],
                tolerance=tolerance,
            )
        )
    return cases


def _point_cases(scales: Optional[ScalePair]) -> List[SuiteCase]:
    cases = []
    for label, text, rate in PUBLISHED_POINT_RATES:
        manifold = parse_manifold(text)
        d = manifold.intrinsic_dim
        cases.append(
            SuiteCase(
                label=label,
                manifold=manifold,
                mode=MODE_POINTS,
                value=heuristic_points(d, reference_volume(manifold)),
                scales=scales or published_scales(d),
                reference_rate=rate,
            )
        )
    return cases


def _anova_cases(scales: Optional[ScalePair]) -> List[SuiteCase]:
    cases = []
    for label, text, points, corr_rate, anova_rate in PUBLISHED_ANOVA_RATES:
        manifold = parse_manifold(text)
        s = scales or published_scales(manifold.intrinsic_dim)
        for estimator, rate in (("corr", corr_rate), ("anova", anova_rate)):
            cases.append(
                SuiteCase(
                    label=f"{label} ({estimator})",
                    manifold=manifold,
                    mode=MODE_POINTS,
                    value=points,
                    scales=s,
                    estimator=estimator,
                    reference_rate=rate,
                    tolerance=LOOSE_TOLERANCE,
                    one_sided=estimator == "anova",
                )
            )
    return cases


SUITES = ("pairs90", "pairs70", "points", "anova")


def build_suite(name: str, scales: Optional[ScalePair] = None) -> List[SuiteCase]:
    """Published experiment list; `scales` replaces the per-dimension scales."""
    if name == "pairs90":
        return _pair_cases(0, CORR_TOLERANCE, scales)
    if name == "pairs70":
        return _pair_cases(1, LOOSE_TOLERANCE, scales)
    if name == "points":
        return _point_cases(scales)
    if name == "anova":
        return _anova_cases(scales)
    raise ValueError(f"Unknown suite {name!r} (available: {', '.join(SUITES)}).")


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", text.lower()).strip("_") or "case"


class ExperimentRunner:
    """Run a list of cases and save NDJSON reports plus a CSV summary."""

    def __init__(self, cfg: Config, cases: List[SuiteCase], name: str = "experiment"):
        self.cfg = cfg
        self.cases = cases
        self.name = name
        self.data_root = Path(cfg.data_area_root_dir)
        self.output_root = self.data_root / "output" / "experiments" / _slug(name)
        self.reports: Dict[str, ExperimentReport] = {}
        self.rows: List[Dict] = []

    def _summary_row(self, case: SuiteCase, report: Optional[ExperimentReport], error: str = "") -> Dict:
        rate = report.success_rate if report is not None else None
        difference = rate - case.reference_rate if rate is not None and case.reference_rate is not None else None
        return {
            "label": case.label,
            "manifold": case.manifold.label,
            "mode": case.mode,
            "value": case.value,
            "eps1": case.scales.eps1,
            "eps2": case.scales.eps2,
            "estimator": case.estimator,
            "trials": self.cfg.trials,
            "valid_trials": report.valid_trials if report is not None else 0,
            "success_rate": rate,
            "reference_rate": case.reference_rate,
            "difference": difference,
            "within_tolerance": None if difference is None else case.accepts(rate, self.cfg.trials),
            "master_seed": self.cfg.master_seed,
            "wall_time": report.wall_time if report is not None else None,
            "error": error,
        }

    def _save_results(self) -> bool:
        fieldnames = [
            "label",
            "manifold",
            "mode",
            "value",
            "eps1",
            "eps2",
            "estimator",
            "trials",
            "valid_trials",
            "success_rate",
            "reference_rate",
            "difference",
            "within_tolerance",
            "master_seed",
            "wall_time",
            "error",
        ]
        try:
            self.output_root.mkdir(parents=True, exist_ok=True)
            for key, report in self.reports.items():
                report_file = self.output_root / f"{key}.ndjson"
                with open(report_file, "w", encoding="utf-8") as f:
                    f.write("\n".join(report.ndjson_lines()) + "\n")
            summary_file = self.output_root / "summary.csv"
            with open(summary_file, "w", newline="", encoding="utf-8") as f:
                writer = csv.DictWriter(f, fieldnames=fieldnames)
                writer.writeheader()
                writer.writerows(self.rows)
            log.info("Experiment results saved: %s", self.output_root)
            return True
        except Exception as e:
            log.error("Error saving experiment results: %s", e)
            return False

    def run(self) -> bool:
        log.info("=== Starting ExperimentRunner (%s, %d cases) ===", self.name, len(self.cases))
        self.reports = {}
        self.rows = []
        failed = 0
        for case in self.cases:
            config = case.to_config(self.cfg.trials, self.cfg.master_seed, self.cfg.threads, self.cfg.sample_cap)
            try:
                report = run_experiment(config)
            except ExperimentError as e:
                log.error("%s failed: %s", case.label, e)
                failed += 1
                self.rows.append(self._summary_row(case, None, str(e)))
                continue
            key = f"{_slug(case.label)}_{case.estimator}"
            self.reports[key] = report
            row = self._summary_row(case, report)
            self.rows.append(row)
            if row["within_tolerance"] is False:
                log.warning(
                    "%s: rate %.2f outside %.2f ± %.2f",
                    case.label,
                    report.success_rate,
                    case.reference_rate,
                    case.window(self.cfg.trials),
                )
        saved = self._save_results()
        return saved and failed == 0


def experiment_main(cfg: Config, suite: str = "pairs90") -> None:
    runner = ExperimentRunner(cfg, build_suite(suite), suite)
    if not runner.run():
        log.error("ExperimentRunner failed")
        raise SystemExit(1)


if __name__ == "__main__":
    from .assert_env import assert_env_and_report

    try:
        config = assert_env_and_report()
    except Exception as exc:
        log.error("Config could not be loaded: %s", exc)
        raise SystemExit(2)

    ok = ExperimentRunner(config, build_suite("pairs90"), "pairs90").run()
    raise SystemExit(0 if ok else 1)
