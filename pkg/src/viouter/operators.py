"""Cutter operators and the algebra that combines them.

The operators here share one structural property: for every point ``x`` and
every ``z`` in the operator's fixed-point set, ``<z - Ux, x - Ux> <= 0``,
i.e. the hyperplane through ``Ux`` orthogonal to the displacement separates
``x`` from the fixed points. Projections onto half-spaces and subgradient
projections are the atoms; relaxation, convex combination, composition and
greedy selection build blocks out of them while preserving enough of that
structure for the solvers in :mod:`viouter.solvers`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (
    DEFAULT_FEASIBILITY_TOL,
    HalfSpace,
    Vector,
    as_vector,
    residual,
)

# ---------------------------------------------------------------------------
# convex function oracles


@dataclass(frozen=True)
class ConvexFunction:
    """Value and subgradient oracles for a convex function."""

    value_fn: Callable[[Vector], float]
    subgradient_fn: Callable[[Vector], Vector]

    def value(self, x) -> float:
        return float(self.value_fn(np.asarray(x, dtype=np.float64)))

    def subgradient(self, x) -> Vector:
        g = np.asarray(self.subgradient_fn(np.asarray(x, dtype=np.float64)))
        return g.astype(np.float64, copy=False)


def affine_function(normal, offset: float) -> ConvexFunction:
    """``f(x) = <normal, x> - offset``; its zero sublevel set is a half-space."""
    a = as_vector(normal, name="normal")
    beta = float(offset)
    return ConvexFunction(lambda x: float(a @ x) - beta, lambda x: a)


def ball_function(center, radius: float) -> ConvexFunction:
    """``f(x) = |x - center|^2 - radius^2``, a smooth ball indicator."""
    c = as_vector(center, name="center")
    r = float(radius)
    if r <= 0.0:
        raise ValueError("radius must be positive")

    def value(x):
        d = x - c
        return float(d @ d) - r * r

    return ConvexFunction(value, lambda x: 2.0 * (x - c))


def max_affine_function(normals, offsets) -> ConvexFunction:
    """Pointwise maximum of affine pieces ``<c_j, x> - d_j``.

    The subgradient oracle returns the gradient of an attaining piece,
    taking the lowest row on ties.
    """
    C = np.array(normals, dtype=np.float64)
    d = np.array(offsets, dtype=np.float64)
    if C.ndim != 2 or d.shape != (C.shape[0],):
        raise ValueError("normals must be (p, n) and offsets must be (p,)")

    def value(x):
        return float(np.max(C @ x - d))

    def subgradient(x):
        return C[int(np.argmax(C @ x - d))]

    return ConvexFunction(value, subgradient)


def subgradient_projection_step(f: ConvexFunction, x) -> Vector:
    """One subgradient projection step toward the zero sublevel set of ``f``.

    Points already in the sublevel set are returned unchanged. A positive
    value with a zero subgradient contradicts convexity of a function whose
    sublevel set is claimed nonempty, so that raises.
    """
    xv = as_vector(x)
    v = f.value(xv)
    if v <= 0.0:
        return xv.copy()
    g = f.subgradient(xv)
    gsq = float(g @ g)
    if gsq == 0.0:
        raise ValueError(
            "inconsistent subgradient: value is positive but the subgradient is zero"
        )
    return xv - (v / gsq) * g


def project_halfspace(halfspace: HalfSpace, x) -> Vector:
    """Metric projection onto a half-space."""
    xv = as_vector(x, dim=halfspace.dim)
    r = float(halfspace.normal @ xv) - halfspace.offset
    if r <= 0.0:
        return xv.copy()
    return xv - (r / halfspace.norm_sq) * halfspace.normal


# ---------------------------------------------------------------------------
# operator classes


class Operator:
    """Base class: a callable on vectors with a proximity measure.

    ``proximity`` is a nonnegative score that vanishes exactly on the
    operator's declared fixed-point set; greedy controls rank operators by
    it. The default uses the displacement norm, which is a diagnostic rather
    than a distance for the composite kinds.
    """

    kind: str = "operator"

    def __call__(self, x) -> Vector:
        raise NotImplementedError

    def proximity(self, x) -> float:
        xv = as_vector(x)
        return float(np.linalg.norm(self(xv) - xv))

    def is_fixed(self, x, tol: float = DEFAULT_FEASIBILITY_TOL) -> bool:
        return self.proximity(x) <= tol


class Identity(Operator):
    kind = "identity"

    def __call__(self, x) -> Vector:
        return as_vector(x).copy()

    def proximity(self, x) -> float:
        return 0.0

    def is_fixed(self, x, tol: float = DEFAULT_FEASIBILITY_TOL) -> bool:
        return True


class HalfSpaceProjection(Operator):
    """Projection onto one half-space; proximity is the clipped residual."""

    kind = "halfspace_projection"

    def __init__(self, halfspace: HalfSpace):
        self.halfspace = halfspace

    def __call__(self, x) -> Vector:
        return project_halfspace(self.halfspace, x)

    def proximity(self, x) -> float:
        return residual(self.halfspace, x)

    def is_fixed(self, x, tol: float = DEFAULT_FEASIBILITY_TOL) -> bool:
        return residual(self.halfspace, x) <= tol


class SubgradientProjection(Operator):
    """Subgradient projection onto a zero sublevel set.

    Proximity is the clipped function value, which by convexity bounds the
    projection displacement from above once divided by the subgradient norm.
    """

    kind = "subgradient_projection"

    def __init__(self, function: ConvexFunction):
        self.function = function

    def __call__(self, x) -> Vector:
        return subgradient_projection_step(self.function, x)

    def proximity(self, x) -> float:
        return max(self.function.value(as_vector(x)), 0.0)

    def is_fixed(self, x, tol: float = DEFAULT_FEASIBILITY_TOL) -> bool:
        return self.function.value(as_vector(x)) <= tol


class Relaxation(Operator):
    """``x + alpha (Ux - x)`` for a child operator ``U`` and ``alpha`` in (0, 2]."""

    kind = "relaxation"

    def __init__(self, child: Operator, alpha: float):
        alpha = float(alpha)
        if not 0.0 < alpha <= 2.0:
            raise ValueError(f"relaxation parameter must be in (0, 2], got {alpha}")
        self.child = child
        self.alpha = alpha

    def __call__(self, x) -> Vector:
        xv = as_vector(x)
        return xv + self.alpha * (self.child(xv) - xv)

    def proximity(self, x) -> float:
        return self.child.proximity(x)

    def is_fixed(self, x, tol: float = DEFAULT_FEASIBILITY_TOL) -> bool:
        return self.child.is_fixed(x, tol)


def _check_children(children: Sequence[Operator]) -> tuple[Operator, ...]:
    kids = tuple(children)
    if not kids:
        raise ValueError("need at least one child operator")
    return kids


class Simultaneous(Operator):
    """Convex combination ``sum_i w_i U_i x`` of the children's images."""

    kind = "simultaneous"

    def __init__(self, children: Sequence[Operator], weights=None):
        self.children = _check_children(children)
        m = len(self.children)
        if weights is None:
            w = np.full(m, 1.0 / m)
        else:
            w = as_vector(weights, dim=m, name="weights").copy()
            if np.any(w <= 0.0):
                raise ValueError("weights must be positive")
            if abs(float(w.sum()) - 1.0) > 1e-12:
                raise ValueError("weights must sum to one")
        w.setflags(write=False)
        self.weights = w

    def __call__(self, x) -> Vector:
        # Accumulating weighted displacements instead of weighted images keeps
        # common fixed points exactly fixed, whatever the weights are.
        xv = as_vector(x)
        out = xv.copy()
        for w, child in zip(self.weights, self.children):
            out += w * (child(xv) - xv)
        return out

    def is_fixed(self, x, tol: float = DEFAULT_FEASIBILITY_TOL) -> bool:
        return all(child.is_fixed(x, tol) for child in self.children)


class CompositionHalf(Operator):
    """Half-averaged composition ``(x + U_m ... U_1 x) / 2``.

    The first listed child acts first. Averaging with the identity turns the
    bare composition, which is only strongly quasi-nonexpansive, back into a
    cutter for the intersection of the children's fixed-point sets.
    """

    kind = "composition_half"

    def __init__(self, children: Sequence[Operator]):
        self.children = _check_children(children)

    def compose(self, x) -> Vector:
        """The bare composition ``U_m ... U_1 x`` without the averaging."""
        y = as_vector(x).copy()
        for child in self.children:
            y = child(y)
        return y

    def __call__(self, x) -> Vector:
        xv = as_vector(x)
        return 0.5 * (xv + self.compose(xv))

    def is_fixed(self, x, tol: float = DEFAULT_FEASIBILITY_TOL) -> bool:
        return all(child.is_fixed(x, tol) for child in self.children)


class MaxProximity(Operator):
    """Apply the child with the largest proximity at the current point.

    ``block`` restricts the choice to a subset of 1-based child positions;
    ties resolve to the lowest position, so a point fixed for every eligible
    child is routed to the first one (and stays put).
    """

    kind = "max_proximity"

    def __init__(self, children: Sequence[Operator], block: Sequence[int] | None = None):
        self.children = _check_children(children)
        if block is None:
            block = range(1, len(self.children) + 1)
        self.block = _check_block(block, len(self.children))

    def select(self, x) -> tuple[Operator, int]:
        return max_proximity(self.children, x, self.block)

    def __call__(self, x) -> Vector:
        child, _ = self.select(x)
        return child(as_vector(x))

    def is_fixed(self, x, tol: float = DEFAULT_FEASIBILITY_TOL) -> bool:
        return all(self.children[i - 1].is_fixed(x, tol) for i in self.block)


def _check_block(block, m: int) -> tuple[int, ...]:
    idx = tuple(int(i) for i in block)
    if not idx:
        raise ValueError("block must name at least one child")
    for i in idx:
        if not 1 <= i <= m:
            raise ValueError(f"block index {i} outside 1..{m}")
    return idx


def max_proximity(
    children: Sequence[Operator], x, block: Sequence[int] | None = None
) -> tuple[Operator, int]:
    """Child with the largest proximity at ``x`` and its 1-based position.

    Ties resolve to the lowest position among the eligible ones.
    """
    kids = _check_children(children)
    idx = _check_block(block if block is not None else range(1, len(kids) + 1), len(kids))
    xv = as_vector(x)
    best_i = idx[0]
    best_p = kids[best_i - 1].proximity(xv)
    for i in idx[1:]:
        p = kids[i - 1].proximity(xv)
        if p > best_p or (p == best_p and i < best_i):
            best_p = p
            best_i = i
    return kids[best_i - 1], best_i


def adaptive_weights(
    children: Sequence[Operator],
    x,
    block: Sequence[int] | None = None,
    mode: str = "proximity",
) -> Vector:
    """Weights over a block, proportional to each child's current score.

    ``mode`` picks the score: ``proximity`` uses the children's proximity
    measures, ``displacement`` uses ``|U_i x - x|``. When every score is
    zero the weights fall back to uniform; individual zero weights are fine
    otherwise.
    """
    kids = _check_children(children)
    idx = _check_block(block if block is not None else range(1, len(kids) + 1), len(kids))
    xv = as_vector(x)
    if mode == "proximity":
        scores = np.array([kids[i - 1].proximity(xv) for i in idx])
    elif mode == "displacement":
        scores = np.array(
            [float(np.linalg.norm(kids[i - 1](xv) - xv)) for i in idx]
        )
    else:
        raise ValueError(f"unknown weight mode {mode!r}")
    total = float(scores.sum())
    if total <= 0.0:
        return np.full(len(idx), 1.0 / len(idx))
    return scores / total


def relax(child: Operator, alpha: float) -> Relaxation:
    return Relaxation(child, alpha)


def simultaneous(children: Sequence[Operator], weights=None) -> Simultaneous:
    return Simultaneous(children, weights)


def composition_half(children: Sequence[Operator]) -> CompositionHalf:
    return CompositionHalf(children)


# ---------------------------------------------------------------------------
# witnesses for the structural inequalities


def cutter_witness(U: Operator, x, z) -> float:
    """``<z - Ux, x - Ux>``; nonpositive whenever ``U`` cuts for ``z``."""
    xv = as_vector(x)
    zv = as_vector(z, dim=xv.shape[0], name="z")
    ux = U(xv)
    return float((zv - ux) @ (xv - ux))


def sqne_witness(U: Operator, rho: float, x, z) -> float:
    """Slack of the strong quasi-nonexpansivity inequality at modulus ``rho``.

    Nonnegative means ``|Ux - z|^2 + rho |Ux - x|^2 <= |x - z|^2`` holds for
    this pair.
    """
    xv = as_vector(x)
    zv = as_vector(z, dim=xv.shape[0], name="z")
    ux = U(xv)
    dxz = xv - zv
    duz = ux - zv
    dux = ux - xv
    return float(dxz @ dxz) - float(rho) * float(dux @ dux) - float(duz @ duz)


def fne_witness(U: Operator, x, y) -> float:
    """Slack of firm nonexpansivity: ``<Ux - Uy, x - y> - |Ux - Uy|^2``."""
    xv = as_vector(x)
    yv = as_vector(y, dim=xv.shape[0], name="y")
    du = U(xv) - U(yv)
    return float(du @ (xv - yv)) - float(du @ du)
