"""Reproducible benchmark harness: generate, run, aggregate, write.

A benchmark run is a grid of methods over a family of random feasibility
problems, one problem per seed. Each trace records the log10 relative error
against the exact projection computed by Dykstra's scheme, aggregation
reduces the per-seed curves to medians with central percentile ribbons, and
the writers emit CSV and JSON whose bytes depend only on the configuration,
never on timing or worker count.
"""
from __future__ import annotations

import json
import multiprocessing
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._backend import BACKEND
from ._version import __version__
from .core import Polyhedron, Vector, ViProblem, problem_digest
from .solvers import (
    MethodConfig,
    RelaxationSchedule,
    RunTrace,
    StepSchedule,
    dykstra_project,
    solve,
    write_trace_csv,
)

# Geometry of the random problem family. The interior anchor is drawn well
# away from the origin while the constraint slacks stay small, and the
# projection target sits several slack widths outside the feasible set; this
# keeps the start-to-solution distance large relative to the final wobble of
# the slowest method, so distance contraction ratios are meaningful.
ANCHOR_SCALE = 5.0
SLACK_LOW = 0.1
SLACK_HIGH = 0.5
TARGET_OFFSET = 3.0

DEFAULT_LEVELS = (20, 40, 60, 80)


def generate_problem(seed: int, n: int = 20, m: int = 100) -> ViProblem:
    """Random best-approximation problem with a guaranteed interior point.

    Constraint normals are standard normal rows. Offsets are chosen so a
    hidden anchor point satisfies every constraint with a positive slack,
    which makes the intersection nonempty with interior; the projection
    target is that anchor pushed a fixed distance in a random direction,
    which leaves it infeasible for almost every draw.
    """
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    interior = ANCHOR_SCALE * rng.standard_normal(n)
    slack = rng.uniform(SLACK_LOW, SLACK_HIGH, m)
    b = A @ interior + slack
    direction = rng.standard_normal(n)
    norm = float(np.linalg.norm(direction))
    while norm == 0.0:
        direction = rng.standard_normal(n)
        norm = float(np.linalg.norm(direction))
    target = interior + TARGET_OFFSET * (direction / norm)
    return ViProblem.best_approximation(target, Polyhedron(A, b))


def default_method_grid(m: int = 100) -> tuple[MethodConfig, ...]:
    """The four-method comparison grid scaled to ``m`` constraints."""
    return (
        MethodConfig("cyclic"),
        MethodConfig("maxprox", block=min(20, m)),
        MethodConfig("simultaneous", block=m),
        MethodConfig("composition", block=m),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a benchmark run depends on, and nothing else."""

    n: int = 20
    m: int = 100
    sims: int = 100
    iterations: int = 5000
    stride: int = 50
    master_seed: int = 0
    methods: tuple[MethodConfig, ...] = field(
        default_factory=lambda: default_method_grid(100)
    )
    step_schedule: StepSchedule = field(default_factory=StepSchedule.harmonic)
    relaxation_schedule: RelaxationSchedule = field(
        default_factory=RelaxationSchedule.constant
    )
    activity_tol: float = 0.0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("need n >= 1 and m >= 1")
        if self.sims < 0:
            raise ValueError("sims must be nonnegative")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")
        object.__setattr__(self, "methods", tuple(self.methods))
        for mc in self.methods:
            if mc.family != "cyclic" and mc.block > self.m:
                raise ValueError(
                    f"method {mc.label} needs a block within the {self.m} constraints"
                )

    @property
    def seeds(self) -> list[int]:
        return [self.master_seed + j for j in range(self.sims)]

    def describe(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "sims": self.sims,
            "iterations": self.iterations,
            "stride": self.stride,
            "master_seed": self.master_seed,
            "methods": [
                {
                    "family": mc.family,
                    "block": mc.block,
                    "augmented": mc.augmented,
                    "weights": mc.weights,
                    "label": mc.label,
                }
                for mc in self.methods
            ],
            "step_schedule": self.step_schedule.name,
            "relaxation_schedule": self.relaxation_schedule.name,
            "activity_tol": self.activity_tol,
        }


def attach_reference(trace: RunTrace, xstar) -> RunTrace:
    """Fill the trace's error curve against a reference solution.

    The curve is ``log10`` of the error relative to the starting error; a
    run that starts exactly at the solution has no relative scale, so the
    absolute error is stored and flagged via ``err_absolute``. Exact zeros
    are floored at 1e-300 before the logarithm.
    """
    ref = np.asarray(xstar, dtype=np.float64)
    errs = np.array([float(np.linalg.norm(x - ref)) for x in trace.xs])
    denom = float(np.linalg.norm(trace.x0 - ref))
    if denom > 0.0:
        values = errs / denom
        trace.err_absolute = False
    else:
        values = errs
        trace.err_absolute = True
    trace.err_log10 = np.log10(np.maximum(values, 1e-300))
    trace.xstar = ref.copy()
    return trace


def _run_seed(args: tuple[ExperimentConfig, int]) -> list[RunTrace]:
    config, seed = args
    problem = generate_problem(seed, config.n, config.m)
    digest = problem_digest(problem)
    try:
        xstar = dykstra_project(problem.anchor, problem.constraints)
    except Exception as exc:
        raise RuntimeError(f"oracle failed on seed {seed}: {exc}") from exc
    traces = []
    for mc in config.methods:
        try:
            trace = solve(
                problem,
                mc,
                config.iterations,
                stride=config.stride,
                step_schedule=config.step_schedule,
                relaxation_schedule=config.relaxation_schedule,
                activity_tol=config.activity_tol,
            )
        except Exception as exc:
            raise RuntimeError(
                f"seed {seed}, method {mc.label}: {exc}"
            ) from exc
        trace.seed = seed
        trace.problem_digest = digest
        attach_reference(trace, xstar)
        traces.append(trace)
    return traces


def run_experiment(config: ExperimentConfig, workers: int | None = 1) -> list[RunTrace]:
    """Run the whole grid; returns traces ordered by seed, then method.

    Parallelism is over seeds only, and results are reduced in seed order,
    so any worker count produces the same list. ``workers=None`` uses one
    process per CPU.
    """
    jobs = [(config, seed) for seed in config.seeds]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(jobs) <= 1:
        nested = [_run_seed(job) for job in jobs]
    else:
        context = None
        if "fork" in multiprocessing.get_all_start_methods():
            context = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(
            max_workers=min(workers, len(jobs)), mp_context=context
        ) as pool:
            nested = list(pool.map(_run_seed, jobs))
    return [trace for group in nested for trace in group]


def oracle_consistency(
    problem: ViProblem, xstar, samples: int = 100, seed: int = 0
) -> dict:
    """Check a claimed solution against the problem's own structure.

    Returns the worst feasibility residual of ``xstar`` and the smallest
    value of ``<F(xstar), z - xstar>`` over random feasible points ``z``
    obtained by exact projection. For a true solution the first is zero and
    the second is nonnegative.
    """
    P = problem.constraints
    ref = np.asarray(xstar, dtype=np.float64)
    rng = np.random.default_rng(seed)
    fx = np.asarray(problem.operator(ref), dtype=np.float64)
    worst = np.inf
    for _ in range(samples):
        probe = ref + 10.0 * rng.standard_normal(P.n)
        z = dykstra_project(probe, P)
        worst = min(worst, float(fx @ (z - ref)))
    return {
        "max_residual": float(P.residuals(ref).max()),
        "min_vi_inner": worst,
    }


# ---------------------------------------------------------------------------
# aggregation


def _level_quantiles(levels) -> list[float]:
    qs: set[float] = set()
    for level in levels:
        level = float(level)
        if not 0.0 < level < 100.0:
            raise ValueError(f"ribbon level {level} outside (0, 100)")
        lower = (100.0 - level) / 2.0
        qs.add(lower)
        qs.add(100.0 - lower)
    return sorted(qs)


@dataclass
class RibbonTable:
    """Median curves with central percentile ribbons, one group per label."""

    labels: list[str]
    ks: np.ndarray
    levels: tuple[float, ...]
    quantiles: list[float]
    stats: dict[str, dict[str, np.ndarray]]

    @property
    def columns(self) -> list[str]:
        return ["median"] + [f"p{q:g}" for q in self.quantiles]

    @property
    def header(self) -> str:
        return "method,k," + ",".join(self.columns)

    def rows(self):
        for label in self.labels:
            group = self.stats[label]
            for i, k in enumerate(self.ks):
                yield (label, int(k)) + tuple(
                    float(group[c][i]) for c in self.columns
                )


def aggregate(traces, levels=DEFAULT_LEVELS) -> RibbonTable:
    """Reduce traces to per-method percentile curves over seeds.

    Every ribbon level ``L`` becomes the pair of percentiles that enclose
    the central ``L`` percent of the seed curves, computed with linear
    interpolation; the median always rides inside every ribbon.
    """
    quantiles = _level_quantiles(levels)
    groups: dict[str, list[RunTrace]] = {}
    for trace in traces:
        if trace.err_log10 is None:
            raise ValueError(
                f"trace {trace.label!r} has no error curve; attach a reference first"
            )
        groups.setdefault(trace.label, []).append(trace)
    labels = sorted(groups)
    if not labels:
        return RibbonTable(
            labels=[],
            ks=np.array([], dtype=np.int64),
            levels=tuple(float(v) for v in levels),
            quantiles=quantiles,
            stats={},
        )
    ks = groups[labels[0]][0].ks
    stats: dict[str, dict[str, np.ndarray]] = {}
    for label in labels:
        group = sorted(
            groups[label], key=lambda tr: tr.seed if tr.seed is not None else -1
        )
        for trace in group:
            if not np.array_equal(trace.ks, ks):
                raise ValueError("traces disagree on their recorded steps")
        curves = np.stack([trace.err_log10 for trace in group])
        entry = {"median": np.percentile(curves, 50.0, axis=0, method="linear")}
        for q in quantiles:
            entry[f"p{q:g}"] = np.percentile(curves, q, axis=0, method="linear")
        stats[label] = entry
    return RibbonTable(
        labels=labels,
        ks=ks.copy(),
        levels=tuple(float(v) for v in levels),
        quantiles=quantiles,
        stats=stats,
    )


# ---------------------------------------------------------------------------
# writers


def _plot_script(table: RibbonTable) -> str:
    if not table.labels:
        return (
            "# Aggregate table is empty; nothing to plot.\n"
        )
    ncols = 2 + 1 + len(table.quantiles)
    lower_col = 4
    upper_col = ncols
    methods = " ".join(table.labels)
    return (
        "# Median error decay per method, with the widest percentile ribbon.\n"
        "# Run as: gnuplot plot.gp   (expects aggregate.csv in the same directory)\n"
        'set datafile separator ","\n'
        "set terminal pngcairo size 1100,700\n"
        'set output "error_decay.png"\n'
        'set xlabel "iteration k"\n'
        'set ylabel "log10 relative error"\n'
        "set key outside right top\n"
        f'methods = "{methods}"\n'
        "plot \\\n"
        f'  for [i=1:words(methods)] "aggregate.csv" skip 1 \\\n'
        f"    using (stringcolumn(1) eq word(methods, i) ? $2 : NaN):{lower_col}:{upper_col} \\\n"
        "    with filledcurves fs transparent solid 0.15 lc i notitle, \\\n"
        f'  for [i=1:words(methods)] "aggregate.csv" skip 1 \\\n'
        "    using (stringcolumn(1) eq word(methods, i) ? $2 : NaN):3 \\\n"
        "    with lines lw 2 lc i title word(methods, i)\n"
    )


def _metadata(table: RibbonTable, config: ExperimentConfig | None) -> dict:
    try:
        import numba

        numba_version = numba.__version__
    except ImportError:
        numba_version = None
    meta = {
        "aggregate_levels": list(table.levels),
        "backend": BACKEND,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "numba": numba_version,
            "viouter": __version__,
        },
    }
    if config is not None:
        meta["config"] = config.describe()
        meta["seeds"] = config.seeds
    return meta


def write_results(
    table: RibbonTable,
    outdir,
    traces=None,
    config: ExperimentConfig | None = None,
) -> dict:
    """Write aggregate CSV, plot script, metadata, and per-trace CSVs.

    Output bytes are a pure function of the inputs: floats go through
    ``repr``, JSON keys are sorted, and nothing records clocks or host
    names. Returns the written paths.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    aggregate_path = outdir / "aggregate.csv"
    lines = [table.header]
    for row in table.rows():
        label, k = row[0], row[1]
        lines.append(f"{label},{k}," + ",".join(repr(v) for v in row[2:]))
    aggregate_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    plot_path = outdir / "plot.gp"
    plot_path.write_text(_plot_script(table), encoding="utf-8")

    metadata_path = outdir / "metadata.json"
    metadata_path.write_text(
        json.dumps(_metadata(table, config), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )

    written = {
        "aggregate": aggregate_path,
        "plot": plot_path,
        "metadata": metadata_path,
        "traces": [],
    }
    if traces:
        trace_dir = outdir / "traces"
        trace_dir.mkdir(exist_ok=True)
        for trace in traces:
            tag = f"-seed{trace.seed}" if trace.seed is not None else ""
            path = trace_dir / f"{trace.label}{tag}.csv"
            write_trace_csv(trace, path)
            written["traces"].append(path)
    return written
