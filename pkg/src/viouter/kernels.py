"""Array kernels for the polyhedral fast path.

Every kernel takes the constraint system as plain arrays: ``A`` of shape
``(m, n)``, offsets ``b`` of shape ``(m,)`` and, where projections happen,
the precomputed squared row norms ``rnsq``. Row indices are 0-based here;
the 1-based indexing of the public API is translated by the callers.

Each kernel has two interchangeable implementations: a vectorized numpy one
(``*_numpy``) and a loop twin written so numba can compile it. The module
level names (``residuals``, ``dykstra``, ...) are bound to whichever backend
:mod:`viouter._backend` selected.
"""
from __future__ import annotations

import math

import numpy as np

from . import _backend
from ._backend import BACKEND

# ---------------------------------------------------------------------------
# numpy implementations


def residuals_numpy(A, b, x):
    """Clipped residuals max(<a_i, x> - b_i, 0) for all rows."""
    return np.maximum(A @ x - b, 0.0)


def block_residuals_numpy(A, b, x, rows):
    """Clipped residuals for the given rows, in the given order."""
    return np.maximum(A[rows] @ x - b[rows], 0.0)


def argmax_residual_numpy(A, b, x, rows):
    """Row with the largest clipped residual among ``rows``.

    Ties go to the smallest row index. Returns ``(row, value)``.
    """
    r = np.maximum(A[rows] @ x - b[rows], 0.0)
    best = float(r.max())
    row = int(rows[r == best].min())
    return row, best


def project_row_numpy(A, b, rnsq, x, row):
    """Metric projection of ``x`` onto the half-space of one row."""
    r = float(A[row] @ x) - b[row]
    if r <= 0.0:
        return x.copy()
    return x - (r / rnsq[row]) * A[row]


def apply_simultaneous_numpy(A, b, rnsq, x, rows, weights):
    """Convex combination of the row projections: x - sum_i w_i d_i(x) a_i."""
    sub = A[rows]
    r = np.maximum(sub @ x - b[rows], 0.0)
    return x - sub.T @ (weights * r / rnsq[rows])


def apply_composition_numpy(A, b, rnsq, x, rows):
    """Sequential row projections, first listed row applied first."""
    y = x.copy()
    for row in rows:
        r = float(A[row] @ y) - b[row]
        if r > 0.0:
            y -= (r / rnsq[row]) * A[row]
    return y


def outer_update_numpy(x, t, z, alpha):
    """One outer-approximation update from the current point.

    ``t`` is the operator image of ``x`` and ``z`` the forward step. When
    ``x`` is numerically a fixed point, or ``z`` already lies in the cut
    half-space through ``t``, the forward step is returned unchanged;
    otherwise ``z`` is relaxed-projected onto that half-space.
    """
    d = x - t
    nt2 = float(d @ d)
    if math.sqrt(nt2) <= 1e-14 * (1.0 + math.sqrt(float(x @ x))):
        return z.copy()
    c = float((z - t) @ d)
    if c <= 0.0:
        return z.copy()
    return z - (alpha * c / nt2) * d


def augmented_scan_numpy(A, b, rnsq, x, start, need, tol, composition):
    """Scan rows from ``start`` until ``need`` active ones are collected.

    Activity of a row means clipped residual above ``tol``, evaluated at
    ``x`` or, when ``composition`` is set, at the partially composed point
    (which is advanced by every scanned row's projection). All scanned rows
    are collected, active or not.

    Returns ``(buf, count, enough, y)`` where ``buf[:count]`` are the
    scanned 0-based rows in scan order, ``enough`` says whether ``need``
    active rows were found within one pass, and ``y`` is the composed point
    over the scanned rows (equal to ``x`` in pointwise mode).
    """
    m = A.shape[0]
    buf = np.zeros(m, dtype=np.int64)
    y = x.copy()
    active = 0
    count = 0
    for j in range(m):
        row = (start + j) % m
        buf[count] = row
        count += 1
        point = y if composition else x
        r = float(A[row] @ point) - b[row]
        if r > tol:
            active += 1
        if composition and r > 0.0:
            y -= (r / rnsq[row]) * A[row]
        if active >= need:
            return buf, count, True, y
    return buf, count, False, y


def dykstra_numpy(A, b, rnsq, p, max_sweeps, tol):
    """Dykstra's cyclic projection scheme onto the row intersection.

    Keeps one correction vector per row and sweeps until the root of the
    summed squared correction changes drops below ``tol``. Returns
    ``(x, sweeps, last_change)``; the caller decides whether hitting
    ``max_sweeps`` without meeting ``tol`` is an error.
    """
    m, n = A.shape
    x = p.copy()
    e = np.zeros((m, n))
    change = 0.0
    for sweep in range(max_sweeps):
        change = 0.0
        for i in range(m):
            y = x + e[i]
            r = float(A[i] @ y) - b[i]
            if r > 0.0:
                x = y - (r / rnsq[i]) * A[i]
                fresh = y - x
            else:
                x = y
                fresh = np.zeros(n)
            diff = fresh - e[i]
            change += float(diff @ diff)
            e[i] = fresh
        change = math.sqrt(change)
        if change < tol:
            return x, sweep + 1, change
    return x, max_sweeps, change


# ---------------------------------------------------------------------------
# loop twins, written to compile under numba


def _residuals_loop(A, b, x):
    m, n = A.shape
    out = np.empty(m)
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += A[i, j] * x[j]
        r = s - b[i]
        out[i] = r if r > 0.0 else 0.0
    return out


def _block_residuals_loop(A, b, x, rows):
    n = A.shape[1]
    out = np.empty(rows.shape[0])
    for k in range(rows.shape[0]):
        i = rows[k]
        s = 0.0
        for j in range(n):
            s += A[i, j] * x[j]
        r = s - b[i]
        out[k] = r if r > 0.0 else 0.0
    return out


def _argmax_residual_loop(A, b, x, rows):
    n = A.shape[1]
    best = -1.0
    best_row = -1
    for k in range(rows.shape[0]):
        i = rows[k]
        s = 0.0
        for j in range(n):
            s += A[i, j] * x[j]
        r = s - b[i]
        if r < 0.0:
            r = 0.0
        if r > best or (r == best and i < best_row):
            best = r
            best_row = i
    return best_row, best


def _project_row_loop(A, b, rnsq, x, row):
    n = A.shape[1]
    s = 0.0
    for j in range(n):
        s += A[row, j] * x[j]
    r = s - b[row]
    y = x.copy()
    if r > 0.0:
        c = r / rnsq[row]
        for j in range(n):
            y[j] -= c * A[row, j]
    return y


def _apply_simultaneous_loop(A, b, rnsq, x, rows, weights):
    n = A.shape[1]
    t = x.copy()
    for k in range(rows.shape[0]):
        i = rows[k]
        s = 0.0
        for j in range(n):
            s += A[i, j] * x[j]
        r = s - b[i]
        if r > 0.0:
            c = weights[k] * r / rnsq[i]
            for j in range(n):
                t[j] -= c * A[i, j]
    return t


def _apply_composition_loop(A, b, rnsq, x, rows):
    n = A.shape[1]
    y = x.copy()
    for k in range(rows.shape[0]):
        i = rows[k]
        s = 0.0
        for j in range(n):
            s += A[i, j] * y[j]
        r = s - b[i]
        if r > 0.0:
            c = r / rnsq[i]
            for j in range(n):
                y[j] -= c * A[i, j]
    return y


def _outer_update_loop(x, t, z, alpha):
    n = x.shape[0]
    nt2 = 0.0
    nx2 = 0.0
    for j in range(n):
        d = x[j] - t[j]
        nt2 += d * d
        nx2 += x[j] * x[j]
    if math.sqrt(nt2) <= 1e-14 * (1.0 + math.sqrt(nx2)):
        return z.copy()
    c = 0.0
    for j in range(n):
        c += (z[j] - t[j]) * (x[j] - t[j])
    if c <= 0.0:
        return z.copy()
    g = alpha * c / nt2
    out = np.empty(n)
    for j in range(n):
        out[j] = z[j] - g * (x[j] - t[j])
    return out


def _augmented_scan_loop(A, b, rnsq, x, start, need, tol, composition):
    m, n = A.shape
    buf = np.zeros(m, dtype=np.int64)
    y = x.copy()
    active = 0
    count = 0
    for j in range(m):
        row = (start + j) % m
        buf[count] = row
        count += 1
        s = 0.0
        if composition:
            for q in range(n):
                s += A[row, q] * y[q]
        else:
            for q in range(n):
                s += A[row, q] * x[q]
        r = s - b[row]
        if r > tol:
            active += 1
        if composition and r > 0.0:
            c = r / rnsq[row]
            for q in range(n):
                y[q] -= c * A[row, q]
        if active >= need:
            return buf, count, True, y
    return buf, count, False, y


def _dykstra_loop(A, b, rnsq, p, max_sweeps, tol):
    m, n = A.shape
    x = p.copy()
    e = np.zeros((m, n))
    change = 0.0
    for sweep in range(max_sweeps):
        change = 0.0
        for i in range(m):
            s = 0.0
            for j in range(n):
                s += A[i, j] * (x[j] + e[i, j])
            r = s - b[i]
            if r > 0.0:
                c = r / rnsq[i]
                for j in range(n):
                    y = x[j] + e[i, j]
                    xn = y - c * A[i, j]
                    fresh = y - xn
                    d = fresh - e[i, j]
                    change += d * d
                    e[i, j] = fresh
                    x[j] = xn
            else:
                for j in range(n):
                    change += e[i, j] * e[i, j]
                    x[j] = x[j] + e[i, j]
                    e[i, j] = 0.0
        change = math.sqrt(change)
        if change < tol:
            return x, sweep + 1, change
    return x, max_sweeps, change


_LOOP_IMPLS = {
    "residuals": _residuals_loop,
    "block_residuals": _block_residuals_loop,
    "argmax_residual": _argmax_residual_loop,
    "project_row": _project_row_loop,
    "apply_simultaneous": _apply_simultaneous_loop,
    "apply_composition": _apply_composition_loop,
    "outer_update": _outer_update_loop,
    "augmented_scan": _augmented_scan_loop,
    "dykstra": _dykstra_loop,
}

NUMPY_IMPLS = {
    "residuals": residuals_numpy,
    "block_residuals": block_residuals_numpy,
    "argmax_residual": argmax_residual_numpy,
    "project_row": project_row_numpy,
    "apply_simultaneous": apply_simultaneous_numpy,
    "apply_composition": apply_composition_numpy,
    "outer_update": outer_update_numpy,
    "augmented_scan": augmented_scan_numpy,
    "dykstra": dykstra_numpy,
}

_jit_impls: dict | None = None


def jit_kernels() -> dict:
    """Compile (once) and return the numba versions of all kernels."""
    global _jit_impls
    if _jit_impls is None:
        from numba import njit

        _jit_impls = {
            name: njit(cache=True)(fn) for name, fn in _LOOP_IMPLS.items()
        }
    return _jit_impls


def active_kernels() -> dict:
    """The kernel set matching the selected backend."""
    if BACKEND == "numba":
        return jit_kernels()
    return NUMPY_IMPLS


def set_backend(name: str | None) -> str:
    """Rebind the module-level kernels to the named backend.

    Intended for benchmarks and tests; regular code should set the
    environment variable before import instead.  ``None`` restores the
    backend chosen at import time.  Returns the backend now in effect.
    """
    global BACKEND
    if name is None:
        name = _backend.BACKEND
    if name == "numba":
        impls = jit_kernels()
    elif name == "numpy":
        impls = NUMPY_IMPLS
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name
    for key, fn in impls.items():
        globals()[key] = fn
    return BACKEND


_active = active_kernels()
residuals = _active["residuals"]
block_residuals = _active["block_residuals"]
argmax_residual = _active["argmax_residual"]
project_row = _active["project_row"]
apply_simultaneous = _active["apply_simultaneous"]
apply_composition = _active["apply_composition"]
outer_update = _active["outer_update"]
augmented_scan = _active["augmented_scan"]
dykstra = _active["dykstra"]
