"""Solver steps, schedules, the main loop, and its structural inequalities."""
import numpy as np
import pytest

from viouter import (
    AffineDisplacement,
    ConvergenceError,
    DivergenceError,
    HalfSpace,
    HalfSpaceProjection,
    Identity,
    MethodConfig,
    Polyhedron,
    RelaxationSchedule,
    SolverState,
    StepSchedule,
    ViProblem,
    dykstra_project,
    generate_problem,
    gradient_projection_step,
    hsd_step,
    outer_step,
    solve,
    write_trace_csv,
)

HALF_LINE = Polyhedron([[1.0]], [0.0])  # the 1-D set {z <= 0}
PULL_TO_ONE = AffineDisplacement([1.0])  # F(z) = z - 1, solution P_C(1) = 0


def line_problem():
    return ViProblem(PULL_TO_ONE, HALF_LINE)


# ---------------------------------------------------------------------------
# schedules


def test_harmonic_schedule_values():
    steps = StepSchedule.harmonic()
    assert [steps(k) for k in (0, 1, 3)] == [1.0, 0.5, 0.25]
    assert steps.name == "harmonic"


def test_constant_schedule():
    steps = StepSchedule.constant(0.5)
    assert steps(0) == steps(100) == 0.5
    assert steps.name == "constant:0.5"
    with pytest.raises(ValueError):
        StepSchedule.constant(-0.1)
    with pytest.raises(ValueError):
        StepSchedule.constant(np.inf)


def test_custom_schedule_guards_values():
    steps = StepSchedule.custom(lambda k: 1.0 / (k + 1) ** 2)
    assert steps(1) == 0.25
    assert steps.name == "custom"
    bad = StepSchedule.custom(lambda k: -1.0)
    with pytest.raises(ValueError):
        bad(0)
    with pytest.raises(ValueError):
        StepSchedule("custom")


def test_step_schedule_parse():
    assert StepSchedule.parse("harmonic").kind == "harmonic"
    assert StepSchedule.parse("constant:0.25").value == 0.25
    assert StepSchedule.parse("0.125").value == 0.125
    with pytest.raises(ValueError):
        StepSchedule.parse("sometimes")


def test_relaxation_schedule_constant_band():
    alphas = RelaxationSchedule.constant(1.5)
    assert alphas(7) == 1.5
    assert alphas.epsilon == 0.5
    assert alphas.name == "constant:1.5"
    with pytest.raises(ValueError):
        RelaxationSchedule.constant(2.0)
    with pytest.raises(ValueError):
        RelaxationSchedule.constant(0.0)


def test_relaxation_schedule_custom_enforces_band():
    alphas = RelaxationSchedule.custom(lambda k: 2.0 - 1.0 / (k + 1), epsilon=0.1)
    assert alphas(0) == 1.0
    with pytest.raises(ValueError):
        alphas(100)  # 2 - 1/101 leaves [0.1, 1.9]
    with pytest.raises(ValueError):
        RelaxationSchedule.custom(lambda k: 1.0, epsilon=0.0)


# ---------------------------------------------------------------------------
# single steps


def test_outer_step_line_example():
    operator = HalfSpaceProjection(HALF_LINE.halfspace(1))
    out = outer_step([2.0], operator, PULL_TO_ONE, step_size=1.0)
    assert np.array_equal(out, [0.0])


def test_outer_step_returns_descent_point_when_inside_cut():
    # choose the step so the descent point already satisfies the cut
    operator = HalfSpaceProjection(HALF_LINE.halfspace(1))
    out = outer_step([2.0], operator, PULL_TO_ONE, step_size=3.0)
    assert np.array_equal(out, [-1.0])


def test_outer_step_at_operator_fixed_point():
    out = outer_step([2.0], Identity(), PULL_TO_ONE, step_size=1.0)
    assert np.array_equal(out, [1.0])


def test_outer_step_advances_solver_state():
    state = SolverState([2.0])
    operator = HalfSpaceProjection(HALF_LINE.halfspace(1))
    out = outer_step(state, operator, PULL_TO_ONE, step_size=1.0)
    assert np.array_equal(out, [0.0])
    assert np.array_equal(state.x, [0.0])
    assert state.k == 1
    assert state.last_operator_residual == 2.0


def test_outer_step_validation():
    operator = HalfSpaceProjection(HALF_LINE.halfspace(1))
    with pytest.raises(ValueError):
        outer_step([2.0], operator, PULL_TO_ONE, step_size=-1.0)
    with pytest.raises(ValueError):
        outer_step([2.0], operator, PULL_TO_ONE, step_size=1.0, relaxation=0.0)
    with pytest.raises(ValueError):
        outer_step([2.0], operator, PULL_TO_ONE, step_size=1.0, relaxation=2.1)


def test_outer_step_detects_divergence():
    operator = HalfSpaceProjection(HALF_LINE.halfspace(1))
    blowup = lambda x: np.array([np.inf])
    state = SolverState([2.0], k=17)
    with pytest.raises(DivergenceError) as info:
        outer_step(state, operator, blowup, step_size=1.0)
    assert info.value.iteration == 17
    assert "iteration 17" in str(info.value)


def test_hsd_step_line_example():
    operator = HalfSpaceProjection(HALF_LINE.halfspace(1))
    out = hsd_step([2.0], operator, PULL_TO_ONE, step_size=0.5)
    assert np.array_equal(out, [0.5])


def test_hsd_step_zero_step_is_relaxed_image():
    operator = HalfSpaceProjection(HALF_LINE.halfspace(1))
    assert np.array_equal(hsd_step([2.0], operator, PULL_TO_ONE, step_size=0.0), [0.0])


def test_hsd_step_identity_operator_is_forward_step():
    out = hsd_step([2.0], Identity(), PULL_TO_ONE, step_size=0.25)
    assert np.array_equal(out, [1.75])


def test_gradient_projection_examples():
    project = lambda z: np.minimum(z, 0.0)
    out = gradient_projection_step([5.0], project, PULL_TO_ONE, step_size=1.0)
    assert np.array_equal(out, [0.0])
    # a feasible stationary point does not move
    anchored = AffineDisplacement([-2.0])
    out = gradient_projection_step([-2.0], project, anchored, step_size=0.7)
    assert np.array_equal(out, [-2.0])


def test_gradient_projection_contracts():
    rng = np.random.default_rng(12)
    h = HalfSpace([1.0, 1.0, 0.0], 1.0)
    project = HalfSpaceProjection(h)
    anchor = AffineDisplacement([2.0, 2.0, 2.0])
    for lam in (0.3, 0.7, 1.0, 1.5):
        q = np.sqrt(1.0 - 2.0 * lam + lam * lam)
        for _ in range(50):
            x = rng.uniform(-5.0, 5.0, 3)
            y = rng.uniform(-5.0, 5.0, 3)
            gx = gradient_projection_step(x, project, anchor, lam)
            gy = gradient_projection_step(y, project, anchor, lam)
            lhs = np.linalg.norm(gx - gy)
            assert lhs <= q * np.linalg.norm(x - y) + 1e-10


# ---------------------------------------------------------------------------
# the Dykstra oracle


def test_dykstra_single_halfspace_is_direct_projection():
    P = Polyhedron([[3.0, 4.0]], [5.0])
    point = np.array([6.0, 8.0])
    direct = point - ((point @ [3.0, 4.0] - 5.0) / 25.0) * np.array([3.0, 4.0])
    assert np.array_equal(dykstra_project(point, P), direct)


def test_dykstra_idempotent_on_feasible_points():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((5, 3))
    interior = rng.standard_normal(3)
    P = Polyhedron(A, A @ interior + 0.3)
    assert np.array_equal(dykstra_project(interior, P), interior)


def test_dykstra_budget_exhaustion_raises():
    # any infeasible point needs at least two sweeps for the corrections to settle
    P = Polyhedron([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0])
    with pytest.raises(ConvergenceError) as info:
        dykstra_project([5.0, 7.0], P, max_sweeps=1, tol=1e-10)
    assert info.value.last_change is not None
    assert info.value.last_change > 0.0


def test_dykstra_validation():
    P = Polyhedron([[1.0]], [0.0])
    with pytest.raises(ValueError):
        dykstra_project([1.0], P, max_sweeps=0)
    with pytest.raises(ValueError):
        dykstra_project([1.0], P, tol=0.0)


# ---------------------------------------------------------------------------
# method configuration


def test_method_labels():
    assert MethodConfig("cyclic").label == "cyclic"
    assert MethodConfig("maxprox", block=20).label == "maxprox-b20"
    assert MethodConfig("simultaneous", block=100, augmented=True).label == (
        "simultaneous-b100-aug"
    )
    assert MethodConfig("simultaneous", block=5, weights="proximity").label == (
        "simultaneous-b5-wprox"
    )
    assert MethodConfig("simultaneous", block=5, weights="displacement").label == (
        "simultaneous-b5-wdisp"
    )
    assert MethodConfig("composition", block=10, augmented=True).label == (
        "composition-b10-aug"
    )


def test_method_config_validation():
    with pytest.raises(ValueError):
        MethodConfig("jacobi")
    with pytest.raises(ValueError):
        MethodConfig("cyclic", block=2)
    with pytest.raises(ValueError):
        MethodConfig("cyclic", augmented=True)
    with pytest.raises(ValueError):
        MethodConfig("maxprox", block=0)
    with pytest.raises(ValueError):
        MethodConfig("maxprox", block=2.5)
    with pytest.raises(ValueError):
        MethodConfig("maxprox", block=2, weights="proximity")
    with pytest.raises(ValueError):
        MethodConfig("simultaneous", block=2, weights="softmax")


# ---------------------------------------------------------------------------
# the main loop


def test_solve_zero_iterations_records_only_the_start():
    trace = solve(line_problem(), "cyclic", 0, x0=[2.0])
    assert list(trace.ks) == [0]
    assert np.array_equal(trace.final_x, [2.0])
    assert np.array_equal(trace.x0, [2.0])
    assert trace.max_norm == 2.0


def test_solve_line_reaches_millimeter_accuracy():
    trace = solve(line_problem(), "cyclic", 2000, x0=[2.0])
    assert abs(trace.final_x[0]) < 1e-3


def test_solve_first_step_matches_manual_outer_step():
    trace = solve(line_problem(), "cyclic", 1, x0=[2.0], stride=1)
    assert np.array_equal(trace.xs[1], [0.0])


def test_solve_stationary_at_feasible_solution():
    # start at the anchor inside C: the map vanishes and nothing ever moves
    P = Polyhedron([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
    problem = ViProblem.best_approximation([-1.0, 0.5], P)
    for family in ("cyclic", "maxprox", "simultaneous", "composition"):
        method = MethodConfig(family) if family == "cyclic" else MethodConfig(family, block=2)
        trace = solve(problem, method, 40, x0=[-1.0, 0.5], stride=10)
        for snapshot in trace.xs:
            assert np.array_equal(snapshot, [-1.0, 0.5])


def test_solve_recording_grid():
    trace = solve(line_problem(), "cyclic", 120, x0=[2.0], stride=50)
    assert list(trace.ks) == [0, 50, 100, 120]
    assert len(trace.xs) == 4
    assert trace.op_residuals.shape == (4,)
    assert trace.dist_estimates.shape == (4,)
    assert trace.dist_estimates[0] == 2.0
    assert trace.iterations == 120
    assert trace.stride == 50


def test_solve_validation():
    problem = line_problem()
    with pytest.raises(ValueError):
        solve(problem, "cyclic", -1)
    with pytest.raises(ValueError):
        solve(problem, "cyclic", 10, stride=0)
    with pytest.raises(ValueError):
        solve(problem, "cyclic", 10, scheme="midpoint")
    with pytest.raises(ValueError):
        solve(problem, MethodConfig("maxprox", block=5), 10)  # only one constraint
    with pytest.raises(ValueError):
        solve(problem, "cyclic", 10, x0=[1.0, 2.0])


def test_solve_label_override():
    trace = solve(line_problem(), "cyclic", 5, label="baseline")
    assert trace.label == "baseline"
    assert solve(line_problem(), "cyclic", 5).label == "cyclic"


@pytest.mark.filterwarnings("ignore:overflow")
def test_solve_detects_divergence():
    schedule = StepSchedule.constant(1e200)
    with pytest.raises(DivergenceError) as info:
        solve(line_problem(), "cyclic", 10, x0=[2.0], step_schedule=schedule)
    assert info.value.iteration is not None


def test_solve_hsd_scheme_converges_on_the_line():
    trace = solve(line_problem(), "cyclic", 2000, x0=[2.0], scheme="hsd")
    assert trace.scheme == "hsd"
    assert abs(trace.final_x[0]) < 1e-3


def test_solve_every_family_converges_on_a_small_problem():
    problem = generate_problem(3, n=4, m=10)
    xstar = dykstra_project(problem.anchor, problem.constraints)
    d0 = np.linalg.norm(xstar)  # x0 is the origin
    methods = [
        MethodConfig("cyclic"),
        MethodConfig("maxprox", block=4),
        MethodConfig("maxprox", block=4, augmented=True),
        MethodConfig("simultaneous", block=10),
        MethodConfig("simultaneous", block=4, augmented=True, weights="proximity"),
        MethodConfig("simultaneous", block=4, weights="displacement"),
        MethodConfig("composition", block=10),
        MethodConfig("composition", block=4, augmented=True),
    ]
    for method in methods:
        trace = solve(problem, method, 3000)
        gap = np.linalg.norm(trace.final_x - xstar)
        assert gap < 0.05 * d0, method.label


def test_solve_runs_are_reproducible():
    problem = generate_problem(5, n=4, m=8)
    method = MethodConfig("composition", block=3, augmented=True)
    one = solve(problem, method, 200, stride=20)
    two = solve(problem, method, 200, stride=20)
    assert all(np.array_equal(a, b) for a, b in zip(one.xs, two.xs))
    assert np.array_equal(one.op_residuals, two.op_residuals)


# ---------------------------------------------------------------------------
# structural inequalities along runs


def manual_cyclic_run(problem, x0, steps):
    """Step-by-step cyclic outer run yielding (k, x, t, z, x_next)."""
    P = problem.constraints
    schedule = StepSchedule.harmonic()
    x = np.array(x0, dtype=float)
    for k in range(steps):
        operator = HalfSpaceProjection(P.halfspace(k % P.m + 1))
        t = operator(x)
        z = x - schedule(k) * problem.operator(x)
        xn = outer_step(x, operator, problem.operator, schedule(k))
        yield k, x, t, z, xn
        x = xn


def feasible_samples(problem, count, seed):
    rng = np.random.default_rng(seed)
    P = problem.constraints
    points = []
    for _ in range(count):
        probe = rng.uniform(-5.0, 5.0, P.n)
        points.append(dykstra_project(probe, P))
    return points


def test_outer_run_is_fejer_monotone_toward_the_feasible_set():
    problem = generate_problem(7, n=4, m=8)
    anchors = feasible_samples(problem, 5, seed=0)
    for _, _, _, z, xn in manual_cyclic_run(problem, np.zeros(4), 200):
        for zbar in anchors:
            assert np.linalg.norm(xn - zbar) <= np.linalg.norm(z - zbar) + 1e-10


def test_outer_run_cuts_never_separate_feasible_points():
    problem = generate_problem(8, n=4, m=8)
    anchors = feasible_samples(problem, 5, seed=1)
    for _, x, t, _, _ in manual_cyclic_run(problem, np.zeros(4), 200):
        for zbar in anchors:
            assert (zbar - t) @ (x - t) <= 1e-10


def test_cyclic_outer_step_matches_direct_projection_conditionally():
    # whenever the current iterate violates the active constraint, the
    # update equals the direct projection of the descent point onto that
    # constraint; when the iterate already satisfies it, the update is the
    # descent point itself and the direct projection may differ
    problem = generate_problem(9, n=4, m=8)
    P = problem.constraints
    for k, x, _, z, xn in manual_cyclic_run(problem, np.zeros(4), 400):
        h = P.halfspace(k % P.m + 1)
        r = float(h.normal @ x) - h.offset
        direct = z - (max(float(h.normal @ z) - h.offset, 0.0) / h.norm_sq) * h.normal
        if r > 1e-14 * (1.0 + np.linalg.norm(x)):
            assert np.linalg.norm(xn - direct) <= 1e-12
        else:
            assert np.array_equal(xn, z)


def test_long_runs_stay_bounded():
    problem = generate_problem(0)
    xstar = dykstra_project(problem.anchor, problem.constraints)
    bound = 10.0 * (0.0 + np.linalg.norm(xstar) + 1.0)
    for method in (MethodConfig("cyclic"), MethodConfig("composition", block=100)):
        trace = solve(problem, method, 5000)
        assert np.isfinite(trace.max_norm)
        assert trace.max_norm < bound


# ---------------------------------------------------------------------------
# trace export


def test_write_trace_csv_without_reference(tmp_path):
    trace = solve(line_problem(), "cyclic", 10, x0=[2.0], stride=5)
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,err_log10,dist_C,op_residual"
    assert len(lines) == 4
    first = lines[1].split(",")
    assert first[0] == "0"
    assert first[1] == "nan"
    assert float(first[2]) == 2.0
    assert path.read_text().endswith("\n")


def test_write_trace_csv_round_trips_floats(tmp_path):
    trace = solve(generate_problem(2, n=3, m=5), "cyclic", 30, stride=10)
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    rows = [line.split(",") for line in path.read_text().splitlines()[1:]]
    for i, row in enumerate(rows):
        assert float(row[2]) == trace.dist_estimates[i]
        assert float(row[3]) == trace.op_residuals[i]
