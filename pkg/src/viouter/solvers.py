"""Iteration schemes built on the block cutter operators.

The main entry point is :func:`solve`, which runs the outer-approximation
scheme (or its hybrid steepest-descent variant) over a polyhedral problem
with one of four operator families per step:

* ``cyclic``: project onto one constraint, sweeping in index order
* ``maxprox``: project onto the most violated constraint of a block
* ``simultaneous``: weighted average of a block's projections
* ``composition``: half-averaged sequential sweep over a block

Blocks come from :mod:`viouter.controls`, either fixed-size tiling or the
augmented scan that hunts for violated constraints. :func:`dykstra_project`
provides the exact polyhedral projection used as reference oracle.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import kernels
from .controls import BlockControl, next_fixed_block, scan_augmented
from .core import Polyhedron, Vector, ViProblem, as_vector

FAMILIES = ("cyclic", "maxprox", "simultaneous", "composition")
WEIGHT_MODES = ("uniform", "proximity", "displacement")
SCHEMES = ("outer", "hsd")


class DivergenceError(RuntimeError):
    """An iterate went non-finite; carries the iteration where it happened."""

    def __init__(self, iteration: int | None, message: str | None = None):
        self.iteration = iteration
        if message is None:
            where = f" at iteration {iteration}" if iteration is not None else ""
            message = f"divergence detected{where}: non-finite iterate"
        super().__init__(message)


class ConvergenceError(RuntimeError):
    """An iterative oracle ran out of budget; carries its last change."""

    def __init__(self, message: str, last_change: float | None = None):
        self.last_change = last_change
        super().__init__(message)


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``lambda_k``; the default is the harmonic sequence 1/(k+1)."""

    kind: str = "harmonic"
    value: float = 0.0
    fn: Callable[[int], float] | None = None

    def __post_init__(self):
        if self.kind not in ("harmonic", "constant", "custom"):
            raise ValueError(f"unknown step schedule kind {self.kind!r}")
        if self.kind == "constant":
            if not (np.isfinite(self.value) and self.value >= 0.0):
                raise ValueError("constant step size must be finite and nonnegative")
        if self.kind == "custom" and not callable(self.fn):
            raise ValueError("custom step schedule needs a callable")

    @classmethod
    def harmonic(cls) -> "StepSchedule":
        return cls()

    @classmethod
    def constant(cls, value: float) -> "StepSchedule":
        return cls("constant", float(value))

    @classmethod
    def custom(cls, fn: Callable[[int], float]) -> "StepSchedule":
        return cls("custom", fn=fn)

    @classmethod
    def parse(cls, text: str) -> "StepSchedule":
        """Accepts ``harmonic``, ``constant:X``, or a bare number."""
        text = text.strip()
        if text == "harmonic":
            return cls.harmonic()
        if text.startswith("constant:"):
            return cls.constant(float(text.split(":", 1)[1]))
        try:
            return cls.constant(float(text))
        except ValueError:
            raise ValueError(
                f"cannot parse step schedule {text!r}; "
                "use 'harmonic', 'constant:X', or a number"
            ) from None

    @property
    def name(self) -> str:
        if self.kind == "harmonic":
            return "harmonic"
        if self.kind == "constant":
            return f"constant:{self.value:g}"
        return "custom"

    def __call__(self, k: int) -> float:
        if self.kind == "harmonic":
            return 1.0 / (k + 1)
        if self.kind == "constant":
            return self.value
        v = float(self.fn(k))
        if not (np.isfinite(v) and v >= 0.0):
            raise ValueError(f"step schedule produced invalid value {v} at step {k}")
        return v


@dataclass(frozen=True)
class RelaxationSchedule:
    """Relaxation parameters ``alpha_k`` held inside ``[eps, 2 - eps]``.

    The default is the constant value 1, whose band collapses to a point.
    """

    kind: str = "constant"
    value: float = 1.0
    epsilon: float = 1.0
    fn: Callable[[int], float] | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "custom"):
            raise ValueError(f"unknown relaxation schedule kind {self.kind!r}")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.kind == "custom" and not callable(self.fn):
            raise ValueError("custom relaxation schedule needs a callable")

    @classmethod
    def constant(cls, alpha: float = 1.0) -> "RelaxationSchedule":
        alpha = float(alpha)
        if not 0.0 < alpha < 2.0:
            raise ValueError(f"constant relaxation must lie in (0, 2), got {alpha}")
        return cls("constant", alpha, min(alpha, 2.0 - alpha))

    @classmethod
    def custom(cls, fn: Callable[[int], float], epsilon: float) -> "RelaxationSchedule":
        return cls("custom", epsilon=float(epsilon), fn=fn)

    @property
    def name(self) -> str:
        if self.kind == "constant":
            return f"constant:{self.value:g}"
        return f"custom:eps={self.epsilon:g}"

    def __call__(self, k: int) -> float:
        v = self.value if self.kind == "constant" else float(self.fn(k))
        if v < self.epsilon or v > 2.0 - self.epsilon:
            raise ValueError(
                f"relaxation {v} at step {k} leaves "
                f"[{self.epsilon}, {2.0 - self.epsilon}]"
            )
        return v


# ---------------------------------------------------------------------------
# single steps


@dataclass
class SolverState:
    """Mutable cursor for the manual step API."""

    x: Vector
    k: int = 0
    control: BlockControl | None = None
    last_operator_residual: float = float("nan")
    last_block: tuple[int, ...] | None = None

    def __post_init__(self):
        self.x = as_vector(self.x, name="x").copy()


def _resolve_point(point) -> tuple[Vector, SolverState | None]:
    if isinstance(point, SolverState):
        return point.x, point
    return as_vector(point), None


def _check_relaxation(relaxation: float) -> float:
    relaxation = float(relaxation)
    if not 0.0 < relaxation <= 2.0:
        raise ValueError(f"relaxation must lie in (0, 2], got {relaxation}")
    return relaxation


def _commit(state: SolverState | None, x: Vector, t: Vector, xn: Vector) -> Vector:
    if state is not None:
        state.last_operator_residual = float(np.linalg.norm(t - x))
        state.x = xn
        state.k += 1
    return xn


def outer_step(point, operator, vi_map, step_size, relaxation: float = 1.0) -> Vector:
    """One outer-approximation update.

    ``operator`` maps the current point into the current outer set; the
    forward step ``x - step_size * vi_map(x)`` is then pulled back toward the
    half-space cut through the operator image. ``point`` may be a bare vector
    or a :class:`SolverState`, which is advanced in place.
    """
    x, state = _resolve_point(point)
    relaxation = _check_relaxation(relaxation)
    step_size = float(step_size)
    if not (np.isfinite(step_size) and step_size >= 0.0):
        raise ValueError(f"step size must be finite and nonnegative, got {step_size}")
    t = np.asarray(operator(x), dtype=np.float64)
    z = x - step_size * np.asarray(vi_map(x), dtype=np.float64)
    k = state.k if state is not None else None
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(z))):
        raise DivergenceError(k)
    xn = kernels.outer_update(x, t, z, relaxation)
    if not np.all(np.isfinite(xn)):
        raise DivergenceError(k)
    return _commit(state, x, t, xn)


def hsd_step(point, operator, vi_map, step_size, relaxation: float = 1.0) -> Vector:
    """One hybrid steepest-descent update: forward step at the relaxed image."""
    x, state = _resolve_point(point)
    relaxation = _check_relaxation(relaxation)
    step_size = float(step_size)
    if not (np.isfinite(step_size) and step_size >= 0.0):
        raise ValueError(f"step size must be finite and nonnegative, got {step_size}")
    t = np.asarray(operator(x), dtype=np.float64)
    w = x + relaxation * (t - x)
    xn = w - step_size * np.asarray(vi_map(w), dtype=np.float64)
    if not np.all(np.isfinite(xn)):
        raise DivergenceError(state.k if state is not None else None)
    return _commit(state, x, t, xn)


def gradient_projection_step(x, project, vi_map, step_size) -> Vector:
    """Projected forward step ``project(x - step_size * vi_map(x))``.

    With an exact projector this contracts toward the solution at factor
    ``sqrt(1 - 2*step_size*alpha + step_size^2 * L^2)`` whenever that is
    below one.
    """
    xv = as_vector(x)
    z = xv - float(step_size) * np.asarray(vi_map(xv), dtype=np.float64)
    return np.asarray(project(z), dtype=np.float64)


def dykstra_project(
    point,
    polyhedron: Polyhedron,
    max_sweeps: int = 100000,
    tol: float = 1e-10,
) -> Vector:
    """Projection onto a polyhedron by Dykstra's alternating scheme.

    Sweeps stop when the root of the summed squared correction-vector
    changes falls below ``tol``; exhausting ``max_sweeps`` first raises a
    :class:`ConvergenceError` carrying the last change.
    """
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    p = as_vector(point, dim=polyhedron.n, name="point")
    x, sweeps, change = kernels.dykstra(
        polyhedron.A,
        polyhedron.b,
        polyhedron.row_norms_sq,
        p,
        int(max_sweeps),
        float(tol),
    )
    if change >= tol:
        raise ConvergenceError(
            f"projection did not stabilize within {sweeps} sweeps; "
            f"last change {change:.3e} against tolerance {tol:.3e}",
            last_change=float(change),
        )
    return x


# ---------------------------------------------------------------------------
# method configuration and run traces


@dataclass(frozen=True)
class MethodConfig:
    """One operator family plus its block settings.

    ``weights`` only applies to the simultaneous family: ``proximity``
    weights a block's projections by their residuals, ``displacement`` by
    the projection displacements. ``augmented`` switches the control from
    fixed-size tiling to the violation-seeking scan.
    """

    family: str
    block: int = 1
    augmented: bool = False
    weights: str = "uniform"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if int(self.block) != self.block or self.block < 1:
            raise ValueError(f"block size must be a positive integer, got {self.block}")
        object.__setattr__(self, "block", int(self.block))
        if self.weights not in WEIGHT_MODES:
            raise ValueError(f"weights must be one of {WEIGHT_MODES}")
        if self.family != "simultaneous" and self.weights != "uniform":
            raise ValueError("weight modes other than uniform need the simultaneous family")
        if self.family == "cyclic":
            if self.block != 1:
                raise ValueError("the cyclic family has no block size; leave it at 1")
            if self.augmented:
                raise ValueError(
                    "the cyclic family has no augmented variant; "
                    "use maxprox with block 1 instead"
                )

    @property
    def label(self) -> str:
        if self.family == "cyclic":
            return "cyclic"
        parts = [f"{self.family}-b{self.block}"]
        if self.augmented:
            parts.append("aug")
        if self.weights == "proximity":
            parts.append("wprox")
        elif self.weights == "displacement":
            parts.append("wdisp")
        return "-".join(parts)


@dataclass
class RunTrace:
    """Snapshots of one solver run at the recorded steps.

    ``err_log10`` stays ``None`` until a reference solution is attached;
    ``err_absolute`` flags the degenerate start ``x0 = x*``, where the
    relative error is undefined and the absolute one is stored instead.
    """

    label: str
    ks: np.ndarray
    op_residuals: np.ndarray
    dist_estimates: np.ndarray
    xs: list[Vector]
    x0: Vector
    iterations: int
    stride: int
    max_norm: float
    scheme: str = "outer"
    seed: int | None = None
    problem_digest: str | None = None
    xstar: Vector | None = None
    err_log10: np.ndarray | None = None
    err_absolute: bool = False

    @property
    def final_x(self) -> Vector:
        return self.xs[-1]


def write_trace_csv(trace: RunTrace, path) -> None:
    """One row per recorded step: ``k,err_log10,dist_C,op_residual``."""
    lines = ["k,err_log10,dist_C,op_residual"]
    for i, k in enumerate(trace.ks):
        err = "nan" if trace.err_log10 is None else repr(float(trace.err_log10[i]))
        lines.append(
            f"{int(k)},{err},"
            f"{repr(float(trace.dist_estimates[i]))},"
            f"{repr(float(trace.op_residuals[i]))}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# the main loop


def _record_steps(iterations: int, stride: int) -> list[int]:
    if stride < 1:
        raise ValueError("stride must be at least 1")
    return sorted(set(range(0, iterations + 1, stride)) | {iterations})


def solve(
    problem: ViProblem,
    method: Union[MethodConfig, str],
    iterations: int,
    *,
    stride: int = 50,
    x0=None,
    step_schedule: StepSchedule | None = None,
    relaxation_schedule: RelaxationSchedule | None = None,
    activity_tol: float = 0.0,
    scheme: str = "outer",
    label: str | None = None,
) -> RunTrace:
    """Run one method on one problem and trace it at every ``stride`` steps.

    The start defaults to the origin, the step sizes to the harmonic
    sequence, and the relaxation to the constant 1. Step ``k`` is recorded
    before it is taken, and the final point is always recorded, so a run
    with ``iterations=0`` yields exactly the starting snapshot.
    """
    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    mc = MethodConfig(method) if isinstance(method, str) else method

    P = problem.constraints
    A, b = P.A, P.b
    rnsq, rn = P.row_norms_sq, P.row_norms
    m, n = P.m, P.n

    if mc.family != "cyclic" and mc.block > m:
        raise ValueError(f"block size {mc.block} exceeds the {m} constraints")

    steps = step_schedule if step_schedule is not None else StepSchedule.harmonic()
    relaxations = (
        relaxation_schedule
        if relaxation_schedule is not None
        else RelaxationSchedule.constant(1.0)
    )
    affine = problem.is_affine
    anchor = problem.anchor
    vi_map = problem.operator

    control: BlockControl | None = None
    if mc.family != "cyclic":
        control = BlockControl(
            m=m,
            b=mc.block,
            mode="augmented" if mc.augmented else "fixed",
            activity_tol=activity_tol,
        )

    def block_rows(x: Vector, ctl: BlockControl) -> np.ndarray:
        if ctl.mode == "fixed":
            return next_fixed_block(ctl) - 1
        block, _ = scan_augmented(ctl, x, polyhedron=P)
        return block - 1

    def block_weights(x: Vector, rows: np.ndarray) -> np.ndarray:
        if mc.weights == "uniform":
            return np.full(rows.size, 1.0 / rows.size)
        w = kernels.block_residuals(A, b, x, rows)
        if mc.weights == "displacement":
            w = w / rn[rows]
        total = float(w.sum())
        if total <= 0.0:
            return np.full(rows.size, 1.0 / rows.size)
        return w / total

    def block_image(x: Vector, k: int, ctl: BlockControl | None) -> Vector:
        if mc.family == "cyclic":
            return kernels.project_row(A, b, rnsq, x, k % m)
        if mc.family == "maxprox":
            rows = block_rows(x, ctl)
            row, _ = kernels.argmax_residual(A, b, x, rows)
            return kernels.project_row(A, b, rnsq, x, row)
        if mc.family == "simultaneous":
            rows = block_rows(x, ctl)
            return kernels.apply_simultaneous(A, b, rnsq, x, rows, block_weights(x, rows))
        if ctl.mode == "augmented":
            block, composed = scan_augmented(ctl, x, polyhedron=P, path_mode="composition")
            y = composed
            if y is None:
                y = kernels.apply_composition(A, b, rnsq, x, block - 1)
        else:
            y = kernels.apply_composition(A, b, rnsq, x, next_fixed_block(ctl) - 1)
        return 0.5 * (x + y)

    x = np.zeros(n) if x0 is None else as_vector(x0, dim=n, name="x0").copy()
    start = x.copy()
    max_norm = float(np.linalg.norm(x))

    record_at = _record_steps(iterations, stride)
    record_set = frozenset(record_at)
    ks: list[int] = []
    ops: list[float] = []
    dists: list[float] = []
    xs: list[Vector] = []

    def record(k: int) -> None:
        probe = control.clone() if control is not None else None
        t = block_image(x, k, probe)
        ks.append(k)
        ops.append(float(np.linalg.norm(t - x)))
        r = np.maximum(A @ x - b, 0.0)
        dists.append(float((r / rn).max()))
        xs.append(x.copy())

    for k in range(iterations):
        if k in record_set:
            record(k)
        t = block_image(x, k, control)
        lam = steps(k)
        alpha = relaxations(k)
        if scheme == "outer":
            fx = x - anchor if affine else np.asarray(vi_map(x), dtype=np.float64)
            xn = kernels.outer_update(x, t, x - lam * fx, alpha)
        else:
            w = x + alpha * (t - x)
            fw = w - anchor if affine else np.asarray(vi_map(w), dtype=np.float64)
            xn = w - lam * fw
        if not np.all(np.isfinite(xn)):
            raise DivergenceError(k)
        x = xn
        norm = float(np.linalg.norm(x))
        if norm > max_norm:
            max_norm = norm

    record(iterations)

    return RunTrace(
        label=label if label is not None else mc.label,
        ks=np.array(ks, dtype=np.int64),
        op_residuals=np.array(ops),
        dist_estimates=np.array(dists),
        xs=xs,
        x0=start,
        iterations=iterations,
        stride=stride,
        max_norm=max_norm,
        scheme=scheme,
    )
