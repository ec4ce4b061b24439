"""Problem data: half-spaces, polyhedra, monotone maps, serialization.

Everything here is a small immutable value object over float64 arrays.
Indices exposed to users are 1-based (constraint ``i`` of a polyhedron with
``m`` rows satisfies ``1 <= i <= m``); the 0-based translation happens at
the array layer.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from numpy.typing import NDArray

Vector = NDArray[np.float64]

DEFAULT_FEASIBILITY_TOL = 1e-12


def as_vector(x, dim: int | None = None, name: str = "x") -> Vector:
    """Coerce to a finite 1-D float64 array, copying and freezing it."""
    arr = np.array(x, dtype=np.float64, copy=True)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must have finite entries")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    arr.setflags(write=False)
    return arr


def dot(x, y) -> float:
    """Euclidean inner product of two vectors of equal dimension."""
    xv = as_vector(x, name="x")
    yv = as_vector(y, dim=xv.shape[0], name="y")
    return float(xv @ yv)


@dataclass(frozen=True)
class HalfSpace:
    """The set ``{z : <normal, z> <= offset}`` with a nonzero normal."""

    normal: Vector
    offset: float

    def __post_init__(self):
        normal = as_vector(self.normal, name="normal")
        norm_sq = float(normal @ normal)
        if norm_sq == 0.0:
            raise ValueError("half-space normal must be nonzero")
        offset = float(self.offset)
        if not np.isfinite(offset):
            raise ValueError("half-space offset must be finite")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "_norm_sq", norm_sq)

    @property
    def dim(self) -> int:
        return self.normal.shape[0]

    @property
    def norm_sq(self) -> float:
        return self._norm_sq

    def contains(self, x, tol: float = DEFAULT_FEASIBILITY_TOL) -> bool:
        return residual(self, x) <= tol

    def __repr__(self) -> str:
        return f"HalfSpace(normal={self.normal.tolist()}, offset={self.offset})"


def residual(halfspace: HalfSpace, x) -> float:
    """Clipped constraint violation ``max(<normal, x> - offset, 0)``."""
    xv = as_vector(x, dim=halfspace.dim)
    return max(float(halfspace.normal @ xv) - halfspace.offset, 0.0)


class Polyhedron:
    """Intersection of finitely many half-spaces, stored as ``A x <= b``."""

    __slots__ = ("A", "b", "row_norms_sq", "row_norms")

    def __init__(self, A, b):
        A = np.array(A, dtype=np.float64, copy=True)
        b = np.array(b, dtype=np.float64, copy=True)
        if A.ndim != 2:
            raise ValueError(f"A must be two-dimensional, got shape {A.shape}")
        m, n = A.shape
        if m == 0 or n == 0:
            raise ValueError("polyhedron needs at least one row and one column")
        if b.shape != (m,):
            raise ValueError(f"b has shape {b.shape}, expected ({m},)")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("polyhedron data must be finite")
        row_norms_sq = np.einsum("ij,ij->i", A, A)
        if np.any(row_norms_sq == 0.0):
            bad = int(np.flatnonzero(row_norms_sq == 0.0)[0]) + 1
            raise ValueError(f"constraint {bad} has a zero normal")
        for arr in (A, b, row_norms_sq):
            arr.setflags(write=False)
        row_norms = np.sqrt(row_norms_sq)
        row_norms.setflags(write=False)
        self.A = A
        self.b = b
        self.row_norms_sq = row_norms_sq
        self.row_norms = row_norms

    @classmethod
    def from_halfspaces(cls, halfspaces: Sequence[HalfSpace]) -> "Polyhedron":
        if not halfspaces:
            raise ValueError("need at least one half-space")
        dim = halfspaces[0].dim
        for h in halfspaces[1:]:
            if h.dim != dim:
                raise ValueError("half-spaces must share one dimension")
        A = np.stack([h.normal for h in halfspaces])
        b = np.array([h.offset for h in halfspaces])
        return cls(A, b)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def halfspace(self, index: int) -> HalfSpace:
        """The ``index``-th constraint, 1-based."""
        if not 1 <= index <= self.m:
            raise IndexError(f"constraint index {index} outside 1..{self.m}")
        return HalfSpace(self.A[index - 1], float(self.b[index - 1]))

    def residuals(self, x) -> Vector:
        xv = as_vector(x, dim=self.n)
        return np.maximum(self.A @ xv - self.b, 0.0)

    def contains(self, x, tol: float = DEFAULT_FEASIBILITY_TOL) -> bool:
        return float(self.residuals(x).max()) <= tol

    def __repr__(self) -> str:
        return f"Polyhedron(m={self.m}, n={self.n})"


def max_residual(polyhedron: Polyhedron, x) -> tuple[int, float]:
    """Most violated constraint: 1-based index and its clipped residual.

    Ties resolve to the smallest index, so a feasible point yields
    ``(1, 0.0)``.
    """
    r = polyhedron.residuals(x)
    i = int(np.argmax(r))
    return i + 1, float(r[i])


# ---------------------------------------------------------------------------
# monotone maps


@dataclass(frozen=True)
class AffineDisplacement:
    """The map ``F(x) = x - anchor``.

    Its variational inequality over a closed convex set is solved exactly by
    the metric projection of ``anchor`` onto the set, which makes this the
    canonical test operator. It is 1-Lipschitz and 1-strongly monotone.
    """

    anchor: Vector

    def __post_init__(self):
        object.__setattr__(self, "anchor", as_vector(self.anchor, name="anchor"))

    @property
    def dim(self) -> int:
        return self.anchor.shape[0]

    @property
    def lipschitz(self) -> float:
        return 1.0

    @property
    def strong_monotonicity(self) -> float:
        return 1.0

    def __call__(self, x) -> Vector:
        return np.asarray(x, dtype=np.float64) - self.anchor


@dataclass(frozen=True)
class MonotoneMap:
    """A user-supplied map with declared Lipschitz and monotonicity moduli.

    The declared constants are spot-checked on random pairs when the map is
    attached to a problem; a violation raises a warning rather than an error
    because sampling can only ever refute the declaration, not confirm it.
    """

    fn: Callable[[Vector], Vector]
    lipschitz: float
    strong_monotonicity: float

    def __post_init__(self):
        L = float(self.lipschitz)
        alpha = float(self.strong_monotonicity)
        if not (np.isfinite(L) and L > 0.0):
            raise ValueError("lipschitz modulus must be positive and finite")
        if not (np.isfinite(alpha) and alpha > 0.0):
            raise ValueError("strong monotonicity modulus must be positive and finite")
        if alpha > L:
            raise ValueError(
                "strong monotonicity modulus cannot exceed the Lipschitz modulus"
            )
        object.__setattr__(self, "lipschitz", L)
        object.__setattr__(self, "strong_monotonicity", alpha)

    def __call__(self, x) -> Vector:
        return np.asarray(self.fn(x), dtype=np.float64)


OperatorLike = Union[AffineDisplacement, MonotoneMap]


def spot_check_moduli(
    operator: MonotoneMap,
    dim: int,
    pairs: int = 32,
    seed: int = 0,
    tol: float = 1e-9,
) -> list[str]:
    """Sample random pairs and test the declared moduli, returning messages.

    Each violated declaration also emits a ``UserWarning``.
    """
    rng = np.random.default_rng(seed)
    messages: list[str] = []
    L = operator.lipschitz
    alpha = operator.strong_monotonicity
    for _ in range(pairs):
        x = rng.uniform(-10.0, 10.0, dim)
        y = rng.uniform(-10.0, 10.0, dim)
        dxy = x - y
        gap = float(np.linalg.norm(dxy))
        if gap == 0.0:
            continue
        df = operator(x) - operator(y)
        lip = float(np.linalg.norm(df))
        if lip > L * gap + tol:
            messages.append(
                f"Lipschitz declaration {L} violated: |F(x)-F(y)| = {lip:.6g} "
                f"on points {gap:.6g} apart"
            )
            break
    for _ in range(pairs):
        x = rng.uniform(-10.0, 10.0, dim)
        y = rng.uniform(-10.0, 10.0, dim)
        dxy = x - y
        gap_sq = float(dxy @ dxy)
        if gap_sq == 0.0:
            continue
        df = operator(x) - operator(y)
        inner = float(df @ dxy)
        if inner < alpha * gap_sq - tol:
            messages.append(
                f"strong monotonicity declaration {alpha} violated: "
                f"<F(x)-F(y), x-y> = {inner:.6g} against {alpha * gap_sq:.6g}"
            )
            break
    for message in messages:
        warnings.warn(message, UserWarning, stacklevel=2)
    return messages


class ViProblem:
    """A variational inequality ``<F(x*), z - x*> >= 0`` over a polyhedron."""

    __slots__ = ("operator", "constraints")

    def __init__(self, operator: OperatorLike, constraints: Polyhedron):
        if not isinstance(constraints, Polyhedron):
            raise TypeError("constraints must be a Polyhedron")
        if isinstance(operator, AffineDisplacement):
            if operator.dim != constraints.n:
                raise ValueError(
                    f"operator dimension {operator.dim} does not match "
                    f"constraint dimension {constraints.n}"
                )
        elif isinstance(operator, MonotoneMap):
            spot_check_moduli(operator, constraints.n)
        else:
            raise TypeError(
                "operator must be an AffineDisplacement or a MonotoneMap"
            )
        self.operator = operator
        self.constraints = constraints

    @classmethod
    def best_approximation(cls, anchor, constraints: Polyhedron) -> "ViProblem":
        """Problem whose solution is the projection of ``anchor``."""
        return cls(AffineDisplacement(anchor), constraints)

    @property
    def dim(self) -> int:
        return self.constraints.n

    @property
    def is_affine(self) -> bool:
        return isinstance(self.operator, AffineDisplacement)

    @property
    def anchor(self) -> Vector | None:
        return self.operator.anchor if self.is_affine else None

    def __repr__(self) -> str:
        kind = "best-approximation" if self.is_affine else "general"
        return f"ViProblem({kind}, n={self.dim}, m={self.constraints.m})"


# ---------------------------------------------------------------------------
# serialization

_SIG = ".17g"


def _fmt(value: float) -> str:
    return format(float(value), _SIG)


def _fmt_vector(vec: Vector) -> str:
    return "[" + ", ".join(_fmt(v) for v in vec) + "]"


def dumps_problem(problem: ViProblem) -> str:
    """Serialize a best-approximation problem to canonical JSON text.

    Floats are written with 17 significant digits so loading reproduces them
    bit for bit; two equal problems serialize to identical text.
    """
    if not problem.is_affine:
        raise ValueError(
            "only best-approximation problems (F(x) = x - anchor) serialize"
        )
    P = problem.constraints
    rows = ",\n    ".join(_fmt_vector(row) for row in P.A)
    return (
        "{\n"
        f'  "n": {P.n},\n'
        f'  "m": {P.m},\n'
        '  "A": [\n'
        f"    {rows}\n"
        "  ],\n"
        f'  "b": {_fmt_vector(P.b)},\n'
        f'  "a": {_fmt_vector(problem.anchor)}\n'
        "}\n"
    )


def loads_problem(text: str) -> ViProblem:
    """Inverse of :func:`dumps_problem`."""
    data = json.loads(text)
    for key in ("n", "m", "A", "b", "a"):
        if key not in data:
            raise ValueError(f"problem JSON is missing key {key!r}")
    n = int(data["n"])
    m = int(data["m"])
    A = np.array(data["A"], dtype=np.float64)
    if A.shape != (m, n):
        raise ValueError(f"A has shape {A.shape}, expected ({m}, {n})")
    b = as_vector(data["b"], dim=m, name="b")
    a = as_vector(data["a"], dim=n, name="a")
    return ViProblem.best_approximation(a, Polyhedron(A, b))


def save_problem(problem: ViProblem, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(dumps_problem(problem))


def load_problem(path) -> ViProblem:
    with open(path, "r", encoding="utf-8") as handle:
        return loads_problem(handle.read())


def problem_digest(problem: ViProblem) -> str:
    """Stable hex digest of the serialized problem data."""
    return hashlib.sha256(dumps_problem(problem).encode("utf-8")).hexdigest()
