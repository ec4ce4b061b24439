"""Index selection rules that drive the block methods.

All indices are 1-based on this level. A :class:`BlockControl` is a small
mutable cursor over the constraint list; each call to one of the ``next_*``
functions consumes state and returns the block of indices the solver should
hand to its operator for the current step.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import kernels
from .core import Polyhedron, Vector, as_vector

MODES = ("fixed", "augmented")


def cyclic_index(k: int, m: int) -> int:
    """The classic single-index sweep: step ``k`` uses constraint ``(k mod m) + 1``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if k < 0:
        raise ValueError("step counter must be nonnegative")
    return k % m + 1


@dataclass
class BlockControl:
    """Cursor state for block selection over ``m`` constraints.

    ``last_index`` is the most recently consumed 1-based index, with 0
    meaning nothing has been consumed yet. ``b`` is the block size target:
    exact for fixed mode, the number of active indices to collect for
    augmented mode. ``activity_tol`` is the residual threshold above which
    an index counts as active during an augmented scan.
    """

    m: int
    b: int
    mode: str = "fixed"
    last_index: int = 0
    activity_tol: float = 0.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if not 1 <= self.b <= self.m:
            raise ValueError(f"block size {self.b} outside 1..{self.m}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 <= self.last_index <= self.m:
            raise ValueError(f"last_index {self.last_index} outside 0..{self.m}")
        if self.activity_tol < 0.0:
            raise ValueError("activity_tol must be nonnegative")

    def clone(self) -> "BlockControl":
        return replace(self)


def next_fixed_block(control: BlockControl) -> np.ndarray:
    """The next ``b`` indices in circular order, advancing the cursor.

    Successive calls tile the index range: with ``m = 5`` and ``b = 2`` the
    blocks run (1,2), (3,4), (5,1), (2,3), (4,5), back to (1,2).
    """
    rows = np.arange(control.last_index, control.last_index + control.b, dtype=np.int64)
    block = rows % control.m + 1
    control.last_index = int(block[-1])
    return block


def scan_augmented(
    control: BlockControl,
    x,
    polyhedron: Polyhedron | None = None,
    children: Sequence | None = None,
    path_mode: str = "pointwise",
) -> tuple[np.ndarray, Vector | None]:
    """Scan forward from the cursor until ``b`` active indices are found.

    Every scanned index joins the block, active or not. Activity means a
    residual (or child proximity) above ``activity_tol``; with
    ``path_mode="composition"`` activity is judged at the partially composed
    point, which is advanced by every scanned index before moving on. If a
    full pass finds fewer than ``b`` active indices, the block falls back to
    all of ``1..m`` in natural order and the cursor stays put.

    Returns the block and, in composition mode with a successful scan, the
    composed point over the scanned indices (``None`` otherwise).
    """
    if control.mode != "augmented":
        raise ValueError("scan_augmented needs a control in augmented mode")
    if path_mode not in ("pointwise", "composition"):
        raise ValueError(f"unknown path_mode {path_mode!r}")
    if (polyhedron is None) == (children is None):
        raise ValueError("pass exactly one of polyhedron or children")

    composition = path_mode == "composition"
    if polyhedron is not None:
        xv = as_vector(x, dim=polyhedron.n)
        buf, count, enough, y = kernels.augmented_scan(
            polyhedron.A,
            polyhedron.b,
            polyhedron.row_norms_sq,
            xv,
            control.last_index % control.m,
            control.b,
            control.activity_tol,
            composition,
        )
        scanned = buf[:count] + 1
        composed = y if composition else None
    else:
        if len(children) != control.m:
            raise ValueError(
                f"control expects {control.m} children, got {len(children)}"
            )
        xv = as_vector(x)
        y = xv.copy()
        scanned_list: list[int] = []
        active = 0
        enough = False
        for j in range(control.m):
            index = (control.last_index + j) % control.m + 1
            scanned_list.append(index)
            child = children[index - 1]
            point = y if composition else xv
            if child.proximity(point) > control.activity_tol:
                active += 1
            if composition:
                y = child(y)
            if active >= control.b:
                enough = True
                break
        scanned = np.array(scanned_list, dtype=np.int64)
        composed = y if composition else None

    if enough:
        control.last_index = int(scanned[-1])
        return scanned, composed
    return np.arange(1, control.m + 1, dtype=np.int64), None


def next_block(
    control: BlockControl,
    x=None,
    polyhedron: Polyhedron | None = None,
    children: Sequence | None = None,
    path_mode: str = "pointwise",
) -> np.ndarray:
    """Dispatch on the control's mode; augmented mode needs a point."""
    if control.mode == "fixed":
        return next_fixed_block(control)
    if x is None:
        raise ValueError("augmented mode needs the current point")
    block, _ = scan_augmented(control, x, polyhedron, children, path_mode)
    return block
