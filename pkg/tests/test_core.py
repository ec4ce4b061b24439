"""Problem data layer: vectors, half-spaces, polyhedra, serialization."""
import numpy as np
import pytest

from viouter import (
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
from viouter.core import spot_check_moduli


def test_as_vector_copies_and_freezes():
    raw = np.array([1.0, 2.0])
    vec = as_vector(raw)
    raw[0] = 99.0
    assert vec[0] == 1.0
    assert not vec.flags.writeable


def test_as_vector_rejects_bad_input():
    with pytest.raises(ValueError):
        as_vector([[1.0, 2.0]])
    with pytest.raises(ValueError):
        as_vector([])
    with pytest.raises(ValueError):
        as_vector([1.0, np.nan])
    with pytest.raises(ValueError):
        as_vector([1.0, np.inf])
    with pytest.raises(ValueError):
        as_vector([1.0, 2.0], dim=3)


def test_dot_example():
    assert dot([1.0, 2.0], [3.0, 4.0]) == 11.0


def test_dot_dimension_mismatch():
    with pytest.raises(ValueError):
        dot([1.0, 2.0], [1.0, 2.0, 3.0])


def test_halfspace_residual_examples():
    h = HalfSpace([1.0, 0.0], 1.0)
    assert residual(h, [2.0, 0.0]) == 1.0
    assert residual(h, [0.0, 0.0]) == 0.0
    assert residual(h, [-5.0, 3.0]) == 0.0


def test_halfspace_contains_and_norm():
    h = HalfSpace([3.0, 4.0], 10.0)
    assert h.norm_sq == 25.0
    assert h.dim == 2
    assert h.contains([0.0, 0.0])
    assert h.contains([2.0, 1.0])
    assert not h.contains([3.0, 1.0])


def test_halfspace_rejects_degenerate_data():
    with pytest.raises(ValueError):
        HalfSpace([0.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        HalfSpace([1.0, 0.0], np.inf)


def test_polyhedron_shapes_and_validation():
    P = Polyhedron([[1.0, 0.0], [0.0, 1.0]], [1.0, 2.0])
    assert (P.m, P.n) == (2, 2)
    assert np.array_equal(P.row_norms_sq, [1.0, 1.0])
    with pytest.raises(ValueError):
        Polyhedron([[1.0, 0.0]], [1.0, 2.0])
    with pytest.raises(ValueError):
        Polyhedron([[1.0, 0.0], [0.0, 0.0]], [1.0, 2.0])
    with pytest.raises(ValueError):
        Polyhedron([[1.0, np.nan]], [1.0])


def test_polyhedron_from_halfspaces_round_trip():
    halves = [HalfSpace([1.0, 0.0], 1.0), HalfSpace([0.0, -1.0], 0.0)]
    P = Polyhedron.from_halfspaces(halves)
    assert np.array_equal(P.A, [[1.0, 0.0], [0.0, -1.0]])
    assert np.array_equal(P.b, [1.0, 0.0])
    h = P.halfspace(2)
    assert np.array_equal(h.normal, [0.0, -1.0])
    assert h.offset == 0.0
    with pytest.raises(IndexError):
        P.halfspace(0)
    with pytest.raises(IndexError):
        P.halfspace(3)


def test_polyhedron_residuals_clip_at_zero():
    P = Polyhedron([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
    assert np.array_equal(P.residuals([2.0, 4.0]), [1.0, 3.0])
    assert np.array_equal(P.residuals([0.0, 0.0]), [0.0, 0.0])
    assert P.contains([1.0, 1.0])
    assert not P.contains([1.0 + 1e-6, 1.0])


def test_max_residual_picks_largest_then_lowest_index():
    P = Polyhedron([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
    assert max_residual(P, [2.0, 4.0]) == (2, 3.0)
    assert max_residual(P, [0.0, 0.0]) == (1, 0.0)
    ties = Polyhedron([[1.0, 0.0], [1.0, 0.0]], [0.0, 0.0])
    assert max_residual(ties, [2.0, 0.0]) == (1, 2.0)


def test_affine_displacement_call_and_moduli():
    F = AffineDisplacement([1.0, -1.0])
    assert np.array_equal(F([3.0, 0.0]), [2.0, 1.0])
    assert F.lipschitz == 1.0
    assert F.strong_monotonicity == 1.0
    assert F.dim == 2


def test_monotone_map_validates_moduli():
    fn = lambda x: 2.0 * np.asarray(x)
    MonotoneMap(fn, lipschitz=2.0, strong_monotonicity=2.0)
    with pytest.raises(ValueError):
        MonotoneMap(fn, lipschitz=1.0, strong_monotonicity=2.0)
    with pytest.raises(ValueError):
        MonotoneMap(fn, lipschitz=0.0, strong_monotonicity=0.0)
    with pytest.raises(ValueError):
        MonotoneMap(fn, lipschitz=np.inf, strong_monotonicity=1.0)


def test_spot_check_accepts_honest_declaration():
    honest = MonotoneMap(
        lambda x: 2.0 * np.asarray(x), lipschitz=2.0, strong_monotonicity=2.0
    )
    assert spot_check_moduli(honest, dim=3) == []


def test_spot_check_flags_violated_lipschitz():
    liar = MonotoneMap(
        lambda x: 3.0 * np.asarray(x), lipschitz=1.0, strong_monotonicity=1.0
    )
    with pytest.warns(UserWarning, match="Lipschitz"):
        messages = spot_check_moduli(liar, dim=3)
    assert len(messages) == 1


def test_spot_check_flags_violated_monotonicity():
    # 0.5x is 1-Lipschitz but only 0.5-strongly monotone
    liar = MonotoneMap(
        lambda x: 0.5 * np.asarray(x), lipschitz=1.0, strong_monotonicity=1.0
    )
    with pytest.warns(UserWarning, match="monotonicity"):
        spot_check_moduli(liar, dim=3)


def test_vi_problem_best_approximation():
    P = Polyhedron([[1.0, 0.0]], [0.0])
    problem = ViProblem.best_approximation([2.0, 1.0], P)
    assert problem.is_affine
    assert problem.dim == 2
    assert np.array_equal(problem.anchor, [2.0, 1.0])


def test_vi_problem_rejects_mismatched_operator():
    P = Polyhedron([[1.0, 0.0]], [0.0])
    with pytest.raises(ValueError):
        ViProblem(AffineDisplacement([1.0, 2.0, 3.0]), P)
    with pytest.raises(TypeError):
        ViProblem(lambda x: x, P)
    with pytest.raises(TypeError):
        ViProblem(AffineDisplacement([1.0, 0.0]), "not a polyhedron")


def test_vi_problem_spot_checks_monotone_map_on_attach():
    P = Polyhedron([[1.0, 0.0]], [0.0])
    liar = MonotoneMap(
        lambda x: 3.0 * np.asarray(x), lipschitz=1.0, strong_monotonicity=1.0
    )
    with pytest.warns(UserWarning):
        problem = ViProblem(liar, P)
    assert not problem.is_affine
    assert problem.anchor is None


def test_serialization_round_trip_is_exact():
    rng = np.random.default_rng(7)
    P = Polyhedron(rng.standard_normal((4, 3)), rng.standard_normal(4))
    problem = ViProblem.best_approximation(rng.standard_normal(3), P)
    text = dumps_problem(problem)
    assert text.endswith("}\n")
    loaded = loads_problem(text)
    assert np.array_equal(loaded.constraints.A, P.A)
    assert np.array_equal(loaded.constraints.b, P.b)
    assert np.array_equal(loaded.anchor, problem.anchor)
    assert dumps_problem(loaded) == text


def test_serialization_file_round_trip(tmp_path):
    P = Polyhedron([[1.0, 0.5], [0.25, -1.0]], [0.1, 0.2])
    problem = ViProblem.best_approximation([0.3, 0.7], P)
    path = tmp_path / "problem.json"
    save_problem(problem, path)
    loaded = load_problem(path)
    assert problem_digest(loaded) == problem_digest(problem)


def test_serialization_rejects_general_operator():
    P = Polyhedron([[1.0]], [0.0])
    fn = MonotoneMap(lambda x: np.asarray(x), lipschitz=1.0, strong_monotonicity=1.0)
    problem = ViProblem(fn, P)
    with pytest.raises(ValueError):
        dumps_problem(problem)


def test_loads_problem_validates_payload():
    P = Polyhedron([[1.0, 0.0]], [0.0])
    text = dumps_problem(ViProblem.best_approximation([1.0, 1.0], P))
    with pytest.raises(ValueError):
        loads_problem(text.replace('"a"', '"q"'))
    with pytest.raises(ValueError):
        loads_problem(text.replace('"m": 1', '"m": 2'))


def test_problem_digest_is_stable_and_distinct():
    P = Polyhedron([[1.0, 0.0]], [0.0])
    one = ViProblem.best_approximation([2.0, 1.0], P)
    two = ViProblem.best_approximation([2.0, 1.0 + 1e-12], P)
    assert problem_digest(one) == problem_digest(one)
    assert problem_digest(one) != problem_digest(two)
    assert len(problem_digest(one)) == 64
