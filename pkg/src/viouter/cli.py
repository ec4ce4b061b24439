"""Command line front end.

Three subcommands: ``solve`` runs one method on one problem and writes its
trace, ``bench`` runs a method grid over seeded random problems and writes
the aggregate results, ``verify`` runs the built-in property suites.

Parsing resolves every invocation into a :class:`CliConfig`, which the
runner functions consume; anything rejected by its validation is a usage
error. Exit codes: 0 on success, 1 when a run fails at runtime, 2 for
usage errors. The default output directory comes from the ``VIOUTER_OUT``
environment variable when set.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ._version import __version__
from .bench import (
    DEFAULT_LEVELS,
    ExperimentConfig,
    aggregate,
    attach_reference,
    default_method_grid,
    generate_problem,
    run_experiment,
    write_results,
)
from .core import load_problem
from .solvers import (
    FAMILIES,
    WEIGHT_MODES,
    MethodConfig,
    RelaxationSchedule,
    StepSchedule,
    dykstra_project,
    solve,
    write_trace_csv,
)
from .verification import run_checks

OUT_ENV_VAR = "VIOUTER_OUT"
FALLBACK_OUT = "viouter-out"


def default_outdir() -> Path:
    return Path(os.environ.get(OUT_ENV_VAR) or FALLBACK_OUT)


def resolve_method_config(
    family: str, block: int | None, augmented: bool, weights: str, m: int
) -> MethodConfig:
    """Turn raw method flags into a :class:`MethodConfig` for ``m`` constraints.

    A missing block size defaults to 1 for cyclic, 20 for maxprox (capped at
    ``m``), and ``m`` for the other families.
    """
    if family == "cyclic":
        if block not in (None, 1):
            raise ValueError("the cyclic family has no block size")
        return MethodConfig("cyclic", augmented=augmented, weights=weights)
    if block is None:
        block = min(20, m) if family == "maxprox" else m
    if not 1 <= block <= m:
        raise ValueError(f"block size must lie in 1..{m}, got {block}")
    return MethodConfig(family, block=block, augmented=augmented, weights=weights)


@dataclass(frozen=True)
class CliConfig:
    """Fully resolved options for one ``solve`` or ``bench`` invocation.

    ``methods`` drives ``bench``; ``solve`` keeps the raw method flags
    instead, because their validity depends on the constraint count of a
    problem that may still live in a file.
    """

    command: str
    outdir: Path = field(default_factory=default_outdir)
    n: int = 20
    m: int = 100
    sims: int = 100
    iterations: int = 5000
    stride: int = 50
    seed: int = 0
    master_seed: int = 0
    methods: tuple[MethodConfig, ...] = ()
    method_family: str = "cyclic"
    method_block: int | None = None
    method_augmented: bool = False
    method_weights: str = "uniform"
    step_schedule: StepSchedule = StepSchedule.harmonic()
    relaxation_schedule: RelaxationSchedule = RelaxationSchedule.constant(1.0)
    activity_tol: float = 0.0
    levels: tuple[float, ...] = DEFAULT_LEVELS
    workers: int | None = 1
    problem_path: Path | None = None

    def __post_init__(self):
        if self.command not in ("solve", "bench"):
            raise ValueError(f"unknown command {self.command!r}")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be at least 1")
        if self.sims < 0:
            raise ValueError(f"sims must be nonnegative, got {self.sims}")
        if self.iterations < 0:
            raise ValueError(f"iters must be nonnegative, got {self.iterations}")
        if self.stride < 1:
            raise ValueError(f"stride must be at least 1, got {self.stride}")
        if self.activity_tol < 0.0:
            raise ValueError("activity-tol must be nonnegative")
        if self.command == "bench" and not self.methods:
            raise ValueError("at least one method is required")
        if self.method_family not in FAMILIES:
            raise ValueError(f"method family must be one of {FAMILIES}")
        if self.method_block is not None and self.method_block < 1:
            raise ValueError("block size must be positive")
        if self.method_weights not in WEIGHT_MODES:
            raise ValueError(f"weights must be one of {WEIGHT_MODES}")
        if not self.levels:
            raise ValueError("at least one ribbon level is required")
        for level in self.levels:
            if not 0.0 < level < 100.0:
                raise ValueError(f"ribbon level {level} outside (0, 100)")
        if self.workers is not None and self.workers < 1:
            raise ValueError("workers must be at least 1, or None for one per CPU")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viouter",
        description=(
            "Outer approximation methods for variational inequalities over "
            "intersections of half-spaces."
        ),
    )
    parser.add_argument("--version", action="version", version=f"viouter {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    po = sub.add_parser(
        "solve",
        help="run one method on one problem and write its trace CSV",
        formatter_class=fmt,
    )
    po.add_argument(
        "--problem",
        type=Path,
        default=None,
        help="problem JSON file (default: generate from --seed/--n/--m)",
    )
    po.add_argument("--seed", type=int, default=0, help="seed for the generated problem")
    po.add_argument("--n", type=int, default=20, help="dimension of the generated problem")
    po.add_argument("--m", type=int, default=100, help="constraints of the generated problem")
    _add_method_flags(po)
    _add_run_flags(po)
    _add_out_flag(po)

    pb = sub.add_parser(
        "bench",
        help="run a method grid over seeded random problems",
        formatter_class=fmt,
    )
    pb.add_argument("--n", type=int, default=20, help="problem dimension")
    pb.add_argument("--m", type=int, default=100, help="constraints per problem")
    pb.add_argument("--sims", type=int, default=100, help="number of seeded problems")
    pb.add_argument("--master-seed", type=int, default=0, help="seed of the first problem")
    _add_method_flags(pb, optional_family=True)
    _add_run_flags(pb)
    pb.add_argument(
        "--levels",
        default=",".join(str(int(v)) for v in DEFAULT_LEVELS),
        help="comma-separated central percentile ribbon levels",
    )
    pb.add_argument(
        "--workers",
        type=int,
        default=0,
        help="worker processes over seeds; 0 means one per CPU",
    )
    _add_out_flag(pb)

    pv = sub.add_parser(
        "verify",
        help="run the built-in property suites and report pass/fail",
        formatter_class=fmt,
    )
    pv.add_argument(
        "--fast", action="store_true", help="smaller sample counts for a quick pass"
    )
    return parser


def _add_method_flags(sub: argparse.ArgumentParser, optional_family: bool = False) -> None:
    sub.add_argument(
        "--method",
        choices=FAMILIES,
        default=None if optional_family else "cyclic",
        help=(
            "operator family"
            + ("; omit to run the default four-method grid" if optional_family else "")
        ),
    )
    sub.add_argument(
        "--block",
        type=int,
        default=None,
        help="block size (default: 1 for cyclic, 20 for maxprox, m otherwise)",
    )
    sub.add_argument(
        "--augmented",
        action="store_true",
        help=(
            "use the violation-seeking scan instead of fixed tiling; "
            "with '--method maxprox --block 1' this is the greedy single-index variant"
        ),
    )
    sub.add_argument(
        "--weights",
        choices=WEIGHT_MODES,
        default="uniform",
        help="weighting of a simultaneous block",
    )


def _add_run_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--iters", type=int, default=5000, help="iteration count")
    sub.add_argument("--stride", type=int, default=50, help="steps between trace records")
    sub.add_argument(
        "--lambda",
        dest="step_rule",
        default="harmonic",
        help="step size rule: 'harmonic', 'constant:X', or a bare number",
    )
    sub.add_argument(
        "--alpha",
        type=float,
        default=1.0,
        help="constant relaxation parameter, strictly between 0 and 2",
    )
    sub.add_argument(
        "--activity-tol",
        type=float,
        default=0.0,
        help="residual threshold that counts as active in augmented scans",
    )


def _add_out_flag(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--out",
        type=Path,
        default=None,
        help=f"output directory (default: ${OUT_ENV_VAR} or {FALLBACK_OUT})",
    )


# ---------------------------------------------------------------------------
# resolution


def _static_method_checks(
    parser: argparse.ArgumentParser,
    family: str,
    block: int | None,
    augmented: bool,
    weights: str,
) -> None:
    """Reject flag combinations that are wrong regardless of the problem."""
    if family == "cyclic":
        if block not in (None, 1):
            parser.error("--method cyclic has no block size; drop --block")
        if augmented:
            parser.error(
                "--method cyclic has no augmented variant; "
                "use '--method maxprox --block 1 --augmented'"
            )
        if weights != "uniform":
            parser.error("--weights needs '--method simultaneous'")
    else:
        if block is not None and block < 1:
            parser.error(f"--block must be positive, got {block}")
        if weights != "uniform" and family != "simultaneous":
            parser.error("--weights needs '--method simultaneous'")


def _resolve_method(
    parser: argparse.ArgumentParser,
    family: str,
    block: int | None,
    augmented: bool,
    weights: str,
    m: int,
) -> MethodConfig:
    _static_method_checks(parser, family, block, augmented, weights)
    try:
        return resolve_method_config(family, block, augmented, weights, m)
    except ValueError as err:
        parser.error(str(err))


def _resolve_schedules(
    parser: argparse.ArgumentParser, step_rule: str, alpha: float
) -> tuple[StepSchedule, RelaxationSchedule]:
    try:
        steps = StepSchedule.parse(step_rule)
    except ValueError as err:
        parser.error(str(err))
    try:
        relaxations = RelaxationSchedule.constant(alpha)
    except ValueError as err:
        parser.error(str(err))
    return steps, relaxations


def _resolve_solve(parser: argparse.ArgumentParser, args: argparse.Namespace) -> CliConfig:
    steps, relaxations = _resolve_schedules(parser, args.step_rule, args.alpha)
    _static_method_checks(parser, args.method, args.block, args.augmented, args.weights)
    if args.problem is None:
        # The constraint count is known, so the block range can fail fast.
        _resolve_method(
            parser, args.method, args.block, args.augmented, args.weights, args.m
        )
    try:
        return CliConfig(
            command="solve",
            outdir=args.out if args.out is not None else default_outdir(),
            n=args.n,
            m=args.m,
            iterations=args.iters,
            stride=args.stride,
            seed=args.seed,
            method_family=args.method,
            method_block=args.block,
            method_augmented=args.augmented,
            method_weights=args.weights,
            step_schedule=steps,
            relaxation_schedule=relaxations,
            activity_tol=args.activity_tol,
            problem_path=args.problem,
        )
    except ValueError as err:
        parser.error(str(err))


def _resolve_bench(parser: argparse.ArgumentParser, args: argparse.Namespace) -> CliConfig:
    steps, relaxations = _resolve_schedules(parser, args.step_rule, args.alpha)
    if args.method is None:
        if args.block is not None or args.augmented or args.weights != "uniform":
            parser.error("--block/--augmented/--weights need an explicit --method")
        methods = default_method_grid(args.m) if args.m >= 1 else ()
    else:
        methods = (
            _resolve_method(
                parser, args.method, args.block, args.augmented, args.weights, args.m
            ),
        )
    try:
        levels = tuple(float(part) for part in args.levels.split(","))
    except ValueError:
        parser.error(f"--levels must be comma-separated numbers, got {args.levels!r}")
    if args.workers < 0:
        parser.error(f"--workers must be nonnegative, got {args.workers}")
    try:
        return CliConfig(
            command="bench",
            outdir=args.out if args.out is not None else default_outdir(),
            n=args.n,
            m=args.m,
            sims=args.sims,
            iterations=args.iters,
            stride=args.stride,
            master_seed=args.master_seed,
            methods=methods,
            step_schedule=steps,
            relaxation_schedule=relaxations,
            activity_tol=args.activity_tol,
            levels=levels,
            workers=None if args.workers == 0 else args.workers,
        )
    except ValueError as err:
        parser.error(str(err))


# ---------------------------------------------------------------------------
# runners


def run_solve(config: CliConfig) -> int:
    if config.problem_path is not None:
        problem = load_problem(config.problem_path)
        tag = config.problem_path.stem
        seed = None
    else:
        problem = generate_problem(config.seed, config.n, config.m)
        tag = f"seed{config.seed}"
        seed = config.seed
    method = resolve_method_config(
        config.method_family,
        config.method_block,
        config.method_augmented,
        config.method_weights,
        problem.constraints.m,
    )
    trace = solve(
        problem,
        method,
        config.iterations,
        stride=config.stride,
        step_schedule=config.step_schedule,
        relaxation_schedule=config.relaxation_schedule,
        activity_tol=config.activity_tol,
    )
    trace.seed = seed
    xstar = dykstra_project(problem.anchor, problem.constraints)
    attach_reference(trace, xstar)

    config.outdir.mkdir(parents=True, exist_ok=True)
    path = config.outdir / f"trace-{method.label}-{tag}.csv"
    write_trace_csv(trace, path)
    kind = "absolute" if trace.err_absolute else "relative"
    print(f"wrote {path}")
    print(f"final log10 {kind} error: {trace.err_log10[-1]:.4f}")
    return 0


def run_bench(config: CliConfig) -> int:
    experiment = ExperimentConfig(
        n=config.n,
        m=config.m,
        sims=config.sims,
        iterations=config.iterations,
        stride=config.stride,
        master_seed=config.master_seed,
        methods=config.methods,
        step_schedule=config.step_schedule,
        relaxation_schedule=config.relaxation_schedule,
        activity_tol=config.activity_tol,
    )
    traces = run_experiment(experiment, config.workers)
    table = aggregate(traces, config.levels)
    written = write_results(table, config.outdir, traces=traces, config=experiment)
    print(f"wrote {len(written['traces'])} trace files under {config.outdir}")
    print(f"aggregate table: {written['aggregate']}")
    print(f"plot script:     {written['plot']}")
    print(f"metadata:        {written['metadata']}")
    return 0


def run_verify(fast: bool = False) -> int:
    results = run_checks(fast=fast)
    width = max(len(r.name) for r in results)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        failed += 0 if r.passed else 1
        print(f"{status} {r.name:<{width}} {r.detail}")
    print(f"{len(results) - failed}/{len(results)} suites passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return run_solve(_resolve_solve(parser, args))
        if args.command == "bench":
            return run_bench(_resolve_bench(parser, args))
        return run_verify(fast=args.fast)
    except (OSError, ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
