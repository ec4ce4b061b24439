"""Self-contained property suites behind the ``verify`` subcommand.

Each check builds its own randomized instances from fixed seeds, tests one
structural property of the operators, controls, or schedules, and reports a
single pass or fail with a short detail line. The suites are intentionally
independent of the test harness so a fresh install can be checked from the
command line alone.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .controls import BlockControl, cyclic_index, next_fixed_block, scan_augmented
from .core import HalfSpace, Polyhedron
from .operators import (
    CompositionHalf,
    ConvexFunction,
    HalfSpaceProjection,
    MaxProximity,
    Operator,
    Relaxation,
    Simultaneous,
    SubgradientProjection,
    adaptive_weights,
    affine_function,
    ball_function,
    cutter_witness,
    fne_witness,
    max_affine_function,
    max_proximity,
    project_halfspace,
    sqne_witness,
    subgradient_projection_step,
)
from .solvers import RelaxationSchedule, StepSchedule

DIM = 5
WITNESS_TOL = 1e-10


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _sample_points(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.uniform(-10.0, 10.0, (count, DIM))


def _random_normal_vector(rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal(DIM)
    while float(g @ g) == 0.0:
        g = rng.standard_normal(DIM)
    return g


def _random_halfspace(rng: np.random.Generator, z0: np.ndarray) -> HalfSpace:
    g = _random_normal_vector(rng)
    return HalfSpace(g, float(g @ z0) + rng.uniform(0.0, 2.0))


def _random_ball(rng: np.random.Generator, z0: np.ndarray):
    shift = rng.uniform(-2.0, 2.0, DIM)
    radius = float(np.linalg.norm(shift)) + rng.uniform(0.5, 2.0)
    return ball_function(z0 + shift, radius)


def _random_max_affine(rng: np.random.Generator, z0: np.ndarray):
    C = rng.standard_normal((4, DIM))
    d = C @ z0 + rng.uniform(0.0, 2.0, 4)
    return max_affine_function(C, d)


def _atom_pool(rng: np.random.Generator, z0: np.ndarray) -> list[Operator]:
    return [
        HalfSpaceProjection(_random_halfspace(rng, z0)),
        SubgradientProjection(affine_function(*_affine_parts(rng, z0))),
        SubgradientProjection(_random_ball(rng, z0)),
        SubgradientProjection(_random_max_affine(rng, z0)),
    ]


def _affine_parts(rng: np.random.Generator, z0: np.ndarray):
    g = _random_normal_vector(rng)
    return g, float(g @ z0) + rng.uniform(0.0, 2.0)


def _cutter_family(rng: np.random.Generator, z0: np.ndarray) -> list[Operator]:
    atoms = _atom_pool(rng, z0)
    return atoms + [
        Relaxation(atoms[0], rng.uniform(0.1, 1.0)),
        Simultaneous(_atom_pool(rng, z0)),
        CompositionHalf(_atom_pool(rng, z0)),
        MaxProximity(_atom_pool(rng, z0)),
    ]


# ---------------------------------------------------------------------------
# individual checks


def check_cyclic_index(samples: int) -> tuple[bool, str]:
    expected = [(0, 3, 1), (3, 3, 1), (5, 3, 3)]
    for k, m, want in expected:
        if cyclic_index(k, m) != want:
            return False, f"cyclic_index({k}, {m}) = {cyclic_index(k, m)}, want {want}"
    rng = np.random.default_rng(11)
    for _ in range(samples):
        m = int(rng.integers(1, 30))
        k = int(rng.integers(0, 1000))
        if cyclic_index(k + m, m) != cyclic_index(k, m):
            return False, f"period broken at k={k}, m={m}"
        if not 1 <= cyclic_index(k, m) <= m:
            return False, f"index out of range at k={k}, m={m}"
    return True, "examples, range, and periodicity hold"


def check_fixed_block_tiling(samples: int) -> tuple[bool, str]:
    control = BlockControl(m=6, b=2)
    got = [tuple(next_fixed_block(control)) for _ in range(4)]
    if got != [(1, 2), (3, 4), (5, 6), (1, 2)]:
        return False, f"m=6 b=2 tiling was {got}"
    control = BlockControl(m=5, b=2)
    got = [tuple(next_fixed_block(control)) for _ in range(4)]
    if got != [(1, 2), (3, 4), (5, 1), (2, 3)]:
        return False, f"m=5 b=2 tiling was {got}"
    rng = np.random.default_rng(12)
    for _ in range(samples):
        m = int(rng.integers(1, 25))
        b = int(rng.integers(1, m + 1))
        control = BlockControl(m=m, b=b)
        per_cycle = -(-m // b)
        for _ in range(3):
            seen: set[int] = set()
            for _ in range(per_cycle):
                block = next_fixed_block(control)
                if block.size != b:
                    return False, f"fixed block size {block.size}, want {b}"
                seen.update(int(i) for i in block)
            if seen != set(range(1, m + 1)):
                return False, f"cycle missed indices {set(range(1, m + 1)) - seen}"
    return True, "tiling examples and cycle coverage hold"


def check_augmented_scan(samples: int) -> tuple[bool, str]:
    rng = np.random.default_rng(13)
    for _ in range(samples):
        m = int(rng.integers(2, 20))
        n = int(rng.integers(2, 6))
        A = rng.standard_normal((m, n))
        z0 = rng.standard_normal(n)
        P = Polyhedron(A, A @ z0 + rng.uniform(0.1, 1.0, m))
        far = z0 + 50.0 * np.sign(rng.standard_normal(n))
        b = int(rng.integers(1, m + 1))

        control = BlockControl(m=m, b=b, mode="augmented")
        violated = P.residuals(far) > 0
        block, _ = scan_augmented(control, far, polyhedron=P)
        twin = BlockControl(m=m, b=b, mode="augmented")
        block2, _ = scan_augmented(twin, far, polyhedron=P)
        if not np.array_equal(block, block2):
            return False, "same state and point gave different blocks"
        if not b <= block.size <= m:
            return False, f"block size {block.size} outside [{b}, {m}]"
        if int(np.count_nonzero(violated)) >= b:
            if int(violated[block - 1].sum()) != b or not violated[block[-1] - 1]:
                return False, "successful scan has the wrong active structure"
        elif not np.array_equal(block, np.arange(1, m + 1)):
            return False, "scan without enough active indices must return the full range"

        inside = BlockControl(m=m, b=b, mode="augmented", last_index=int(rng.integers(0, m + 1)))
        block, _ = scan_augmented(inside, z0, polyhedron=P)
        if not np.array_equal(block, np.arange(1, m + 1)):
            return False, "feasible point did not fall back to the full range"

        cover = BlockControl(m=m, b=1, mode="augmented")
        seen: set[int] = set()
        for _ in range(m):
            blk, _ = scan_augmented(cover, far, polyhedron=P)
            seen.update(int(i) for i in blk)
        if seen != set(range(1, m + 1)):
            return False, "m consecutive scans did not cover every index"
    pinned = BlockControl(m=4, b=1, mode="augmented")
    P = Polyhedron(
        np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.0, 1.0]]),
        np.array([5.0, 5.0, 1.0, 5.0]),
    )
    block, _ = scan_augmented(pinned, np.array([1.0, 1.0]), polyhedron=P)
    if tuple(block) != (1, 2, 3):
        return False, f"directed scan example gave {tuple(block)}"
    return True, "determinism, bounds, fallback, and coverage hold"


def check_halfspace_projection(samples: int) -> tuple[bool, str]:
    one = project_halfspace(HalfSpace(np.array([1.0, 0.0]), 1.0), np.array([3.0, 0.0]))
    two = project_halfspace(HalfSpace(np.array([1.0, 1.0]), 0.0), np.array([1.0, 1.0]))
    if not (np.allclose(one, [1.0, 0.0]) and np.allclose(two, [0.0, 0.0])):
        return False, f"projection examples gave {one} and {two}"
    rng = np.random.default_rng(14)
    z0 = rng.uniform(-3.0, 3.0, DIM)
    for x in _sample_points(rng, samples):
        H = _random_halfspace(rng, z0)
        y = project_halfspace(H, x)
        again = project_halfspace(H, y)
        if float(np.linalg.norm(again - y)) > 1e-12:
            return False, "projection is not idempotent"
        U = HalfSpaceProjection(H)
        w = fne_witness(U, x, rng.uniform(-10.0, 10.0, DIM))
        if w < -WITNESS_TOL:
            return False, f"firm nonexpansivity violated by {w:.3e}"
        if H.contains(x) and not np.array_equal(project_halfspace(H, x), x):
            return False, "feasible point moved"
    return True, "examples, idempotence, and firm nonexpansivity hold"


def check_subgradient_projection(samples: int) -> tuple[bool, str]:
    f = max_affine_function(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.0, 1.0]))
    got = subgradient_projection_step(f, np.array([2.0, 0.0]))
    if not np.allclose(got, [1.0, 0.0]):
        return False, f"max-affine example gave {got}"
    g = ball_function(np.array([0.0, 0.0]), 1.0)
    got = subgradient_projection_step(g, np.array([2.0, 0.0]))
    if not np.allclose(got, [1.25, 0.0]):
        return False, f"ball example gave {got}"
    rng = np.random.default_rng(15)
    z0 = rng.uniform(-3.0, 3.0, DIM)
    for x in _sample_points(rng, samples):
        normal, offset = _affine_parts(rng, z0)
        fa = affine_function(normal, offset)
        y = subgradient_projection_step(fa, x)
        step = float(np.linalg.norm(y - x))
        value = max(fa.value(x), 0.0)
        grad_norm = float(np.linalg.norm(fa.subgradient(x)))
        if abs(step - value / grad_norm) > 1e-10:
            return False, "step length disagrees with value over subgradient norm"
        H = HalfSpace(normal, offset)
        true_dist = float(np.linalg.norm(project_halfspace(H, x) - x))
        if step > true_dist + 1e-10:
            return False, "step length exceeds the distance to the sublevel set"

        fb = _random_ball(rng, z0)
        yb = subgradient_projection_step(fb, x)
        vb = max(fb.value(x), 0.0)
        gb = float(np.linalg.norm(fb.subgradient(x)))
        if vb > 0.0:
            step_b = float(np.linalg.norm(yb - x))
            if abs(step_b - vb / gb) > 1e-10:
                return False, "ball step length disagrees with its bound"
    broken = ConvexFunction(lambda x: 1.0, lambda x: np.zeros_like(x))
    try:
        subgradient_projection_step(broken, np.zeros(DIM))
    except ValueError as err:
        if "inconsistent subgradient" not in str(err):
            return False, f"wrong error message: {err}"
    else:
        return False, "zero subgradient with positive value did not raise"
    return True, "examples, step identities, and the error path hold"


def check_cutter_inequality(samples: int) -> tuple[bool, str]:
    rng = np.random.default_rng(16)
    z0 = rng.uniform(-3.0, 3.0, DIM)
    family = _cutter_family(rng, z0)
    worst = -np.inf
    for x in _sample_points(rng, samples):
        for U in family:
            w = cutter_witness(U, x, z0)
            worst = max(worst, w)
            if w > WITNESS_TOL:
                return False, f"{U.kind} violated the cut inequality by {w:.3e}"
    return True, f"all kinds cut for a common fixed point (worst slack {worst:.2e})"


def check_relaxation_sqne(samples: int) -> tuple[bool, str]:
    rng = np.random.default_rng(17)
    z0 = rng.uniform(-3.0, 3.0, DIM)
    worst = np.inf
    for alpha in (0.5, 1.0, 1.5, 2.0):
        rho = (2.0 - alpha) / alpha
        for x in _sample_points(rng, samples):
            for atom in _atom_pool(rng, z0):
                w = sqne_witness(Relaxation(atom, alpha), rho, x, z0)
                worst = min(worst, w)
                if w < -WITNESS_TOL:
                    return (
                        False,
                        f"alpha={alpha} relaxation broke modulus {rho:g} by {w:.3e}",
                    )
    return True, f"relaxations match modulus (2-a)/a (worst slack {worst:.2e})"


def check_composition_sqne(samples: int) -> tuple[bool, str]:
    rng = np.random.default_rng(18)
    z0 = rng.uniform(-3.0, 3.0, DIM)
    worst = np.inf
    for m in (2, 3, 5):
        for x in _sample_points(rng, samples):
            children = [
                HalfSpaceProjection(_random_halfspace(rng, z0)) for _ in range(m)
            ]
            bare = CompositionHalf(children).compose
            w = sqne_witness(bare, 1.0 / m, x, z0)
            worst = min(worst, w)
            if w < -WITNESS_TOL:
                return False, f"composition of {m} projections broke 1/{m} by {w:.3e}"
    return True, f"compositions meet modulus 1/m (worst slack {worst:.2e})"


def check_fixed_point_preservation(samples: int) -> tuple[bool, str]:
    rng = np.random.default_rng(19)
    for _ in range(samples):
        z0 = rng.uniform(-3.0, 3.0, DIM)
        for U in _cutter_family(rng, z0):
            if not np.array_equal(U(z0), z0):
                return False, f"{U.kind} moved a common fixed point"
    return True, "fixed points are preserved bit for bit"


def check_block_operator_examples(samples: int) -> tuple[bool, str]:
    left = HalfSpaceProjection(HalfSpace(np.array([1.0, 0.0]), 0.0))
    down = HalfSpaceProjection(HalfSpace(np.array([0.0, 1.0]), 0.0))
    x = np.array([2.0, 2.0])
    sim = Simultaneous([left, down])(x)
    if not np.allclose(sim, [1.0, 1.0]):
        return False, f"simultaneous example gave {sim}"
    comp = CompositionHalf([left, down])(x)
    if not np.allclose(comp, [1.0, 1.0]):
        return False, f"composition example gave {comp}"
    single = CompositionHalf([left])(np.array([2.0, 0.0]))
    if not np.allclose(single, [1.0, 0.0]):
        return False, f"single-child composition gave {single}"

    rows = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    kids = [HalfSpaceProjection(HalfSpace(rows[i], 0.0)) for i in range(3)]
    _, index = max_proximity(kids, np.array([0.0, 3.0, 1.0]))
    if index != 2:
        return False, f"max_proximity picked child {index}, want 2"
    _, index = max_proximity(kids, np.zeros(3))
    if index != 1:
        return False, f"tie did not resolve to the lowest index (got {index})"

    rng = np.random.default_rng(20)
    z0 = rng.uniform(-3.0, 3.0, DIM)
    for x in _sample_points(rng, samples):
        kids5 = _atom_pool(rng, z0)
        picked, index = max_proximity(kids5, x)
        prox = [k.proximity(x) for k in kids5]
        want = int(np.argmax(prox)) + 1
        if index != want:
            return False, f"selection {index} disagrees with argmax {want}"
        if picked is not kids5[index - 1]:
            return False, "selected operator does not match its index"
    return True, "block operator examples and greedy selection hold"


def check_adaptive_weights(samples: int) -> tuple[bool, str]:
    left = HalfSpaceProjection(HalfSpace(np.array([1.0, 0.0]), 0.0))
    down = HalfSpaceProjection(HalfSpace(np.array([0.0, 1.0]), 0.0))
    got = adaptive_weights([left, down], np.array([1.0, 3.0]))
    if not np.allclose(got, [0.25, 0.75]):
        return False, f"weights at a violated point were {got}"
    got = adaptive_weights([left, down], np.array([0.0, 0.0]))
    if not np.allclose(got, [0.5, 0.5]):
        return False, f"fallback weights were {got}"
    rng = np.random.default_rng(21)
    z0 = rng.uniform(-3.0, 3.0, DIM)
    for x in _sample_points(rng, samples):
        kids = _atom_pool(rng, z0)
        for mode in ("proximity", "displacement"):
            w = adaptive_weights(kids, x, mode=mode)
            if w.min() < 0.0 or abs(float(w.sum()) - 1.0) > 1e-12:
                return False, f"{mode} weights are not a distribution: {w}"
    return True, "adaptive weights normalize and fall back correctly"


def check_schedules(samples: int) -> tuple[bool, str]:
    steps = StepSchedule.harmonic()
    if steps(0) != 1.0 or abs(steps(9) - 0.1) > 1e-15:
        return False, "harmonic schedule values are off"
    relax = RelaxationSchedule.constant(1.0)
    if relax(0) != 1.0:
        return False, "default relaxation is not 1"
    try:
        RelaxationSchedule.custom(lambda k: 2.5, epsilon=0.1)(0)
    except ValueError:
        pass
    else:
        return False, "out-of-band relaxation was accepted"
    try:
        RelaxationSchedule.constant(2.0)
    except ValueError:
        pass
    else:
        return False, "relaxation constant 2 should be rejected (empty band)"
    rng = np.random.default_rng(22)
    for _ in range(samples):
        alpha = float(rng.uniform(0.05, 1.95))
        sched = RelaxationSchedule.constant(alpha)
        k = int(rng.integers(0, 100))
        if sched(k) != alpha:
            return False, "constant relaxation is not constant"
    return True, "schedule defaults and band enforcement hold"


_CHECKS: list[tuple[str, Callable[[int], tuple[bool, str]]]] = [
    ("cyclic-index", check_cyclic_index),
    ("fixed-block-tiling", check_fixed_block_tiling),
    ("augmented-scan", check_augmented_scan),
    ("halfspace-projection", check_halfspace_projection),
    ("subgradient-projection", check_subgradient_projection),
    ("cutter-inequality", check_cutter_inequality),
    ("relaxation-sqne", check_relaxation_sqne),
    ("composition-sqne", check_composition_sqne),
    ("fixed-point-preservation", check_fixed_point_preservation),
    ("block-operator-examples", check_block_operator_examples),
    ("adaptive-weights", check_adaptive_weights),
    ("schedules", check_schedules),
]


def run_checks(fast: bool = False) -> list[CheckResult]:
    """Run every suite; ``fast`` shrinks the sample counts."""
    samples = 40 if fast else 200
    results = []
    for name, fn in _CHECKS:
        try:
            passed, detail = fn(samples)
        except Exception as err:  # a crashed suite is a failed suite
            passed, detail = False, f"raised {type(err).__name__}: {err}"
        results.append(CheckResult(name, passed, detail))
    return results
