"""Outer approximation methods for variational inequalities over polyhedra.

The package solves problems of the form: find ``x*`` in the intersection
``C`` of finitely many half-spaces with ``<F(x*), z - x*> >= 0`` for all
``z`` in ``C``, where ``F`` is Lipschitz and strongly monotone. Instead of
projecting onto ``C`` exactly, each step projects onto a simple outer set
built from one or a block of the half-spaces, then pulls the forward step
back through the resulting cut. The :mod:`viouter.bench` module packages
the reproducible method comparison on random problem families.
"""
from ._backend import BACKEND
from ._version import __version__
from .bench import (
    DEFAULT_LEVELS,
    ExperimentConfig,
    RibbonTable,
    aggregate,
    attach_reference,
    default_method_grid,
    generate_problem,
    oracle_consistency,
    run_experiment,
    write_results,
)
from .controls import (
    BlockControl,
    cyclic_index,
    next_block,
    next_fixed_block,
    scan_augmented,
)
from .core import (
    AffineDisplacement,
    HalfSpace,
    MonotoneMap,
    Polyhedron,
    ViProblem,
    as_vector,
    dot,
    dumps_problem,
    load_problem,
    loads_problem,
    max_residual,
    problem_digest,
    residual,
    save_problem,
)
from .operators import (
    CompositionHalf,
    ConvexFunction,
    HalfSpaceProjection,
    Identity,
    MaxProximity,
    Operator,
    Relaxation,
    Simultaneous,
    SubgradientProjection,
    adaptive_weights,
    affine_function,
    ball_function,
    composition_half,
    cutter_witness,
    fne_witness,
    max_affine_function,
    max_proximity,
    project_halfspace,
    relax,
    simultaneous,
    sqne_witness,
    subgradient_projection_step,
)
from .solvers import (
    ConvergenceError,
    DivergenceError,
    MethodConfig,
    RelaxationSchedule,
    RunTrace,
    SolverState,
    StepSchedule,
    dykstra_project,
    gradient_projection_step,
    hsd_step,
    outer_step,
    solve,
    write_trace_csv,
)
from .verification import CheckResult, run_checks

__all__ = [
    "AffineDisplacement",
    "BACKEND",
    "BlockControl",
    "CheckResult",
    "CompositionHalf",
    "ConvergenceError",
    "ConvexFunction",
    "DEFAULT_LEVELS",
    "DivergenceError",
    "ExperimentConfig",
    "HalfSpace",
    "HalfSpaceProjection",
    "Identity",
    "MaxProximity",
    "MethodConfig",
    "MonotoneMap",
    "Operator",
    "Polyhedron",
    "Relaxation",
    "RelaxationSchedule",
    "RibbonTable",
    "RunTrace",
    "Simultaneous",
    "SolverState",
    "StepSchedule",
    "SubgradientProjection",
    "ViProblem",
    "__version__",
    "adaptive_weights",
    "affine_function",
    "aggregate",
    "as_vector",
    "attach_reference",
    "ball_function",
    "composition_half",
    "cutter_witness",
    "cyclic_index",
    "default_method_grid",
    "dot",
    "dumps_problem",
    "dykstra_project",
    "fne_witness",
    "generate_problem",
    "gradient_projection_step",
    "hsd_step",
    "load_problem",
    "loads_problem",
    "max_affine_function",
    "max_proximity",
    "max_residual",
    "next_block",
    "next_fixed_block",
    "oracle_consistency",
    "outer_step",
    "problem_digest",
    "project_halfspace",
    "relax",
    "residual",
    "run_checks",
    "run_experiment",
    "save_problem",
    "scan_augmented",
    "simultaneous",
    "solve",
    "sqne_witness",
    "subgradient_projection_step",
    "write_results",
    "write_trace_csv",
]
