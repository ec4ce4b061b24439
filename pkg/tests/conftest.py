"""Shared fixtures and the brute-force projection oracle."""
from __future__ import annotations

import itertools

import numpy as np
import pytest

from viouter import BACKEND, Polyhedron, kernels


def kkt_projection(point, polyhedron: Polyhedron, tol: float = 1e-9):
    """Best approximation onto {x : Ax <= b} by active-set enumeration.

    Solves the equality-constrained projection for every subset of at most
    n rows and keeps the closest candidate that is feasible. Exponential in
    m, so this is only for small reference problems; it exists to check the
    iterative oracle against something with no iteration in it.
    """
    A = polyhedron.A
    b = polyhedron.b
    m, n = A.shape
    p = np.asarray(point, dtype=float)
    best = None
    best_dist = np.inf
    for size in range(min(m, n) + 1):
        for rows in itertools.combinations(range(m), size):
            if size == 0:
                x = p.copy()
            else:
                sub = A[list(rows)]
                x = p - np.linalg.pinv(sub) @ (sub @ p - b[list(rows)])
            if np.all(A @ x <= b + tol):
                dist = float(np.linalg.norm(x - p))
                if dist < best_dist:
                    best_dist = dist
                    best = x
    if best is None:
        raise ValueError("no feasible candidate found; is the polyhedron empty?")
    return best


def random_feasibility_data(rng, n, m):
    """A small consistent system (A, b) plus a strictly interior point."""
    A = rng.standard_normal((m, n))
    interior = rng.standard_normal(n)
    b = A @ interior + rng.uniform(0.1, 0.5, m)
    return A, b, interior


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the jit kernels once so timed tests measure work, not compilation."""
    if BACKEND != "numba":
        return
    rng = np.random.default_rng(0)
    A, b, interior = random_feasibility_data(rng, 4, 6)
    rnsq = np.einsum("ij,ij->i", A, A)
    x = interior + rng.standard_normal(4)
    rows = np.arange(6, dtype=np.int64)
    weights = np.full(6, 1.0 / 6.0)
    jit = kernels.jit_kernels()
    jit["residuals"](A, b, x)
    jit["block_residuals"](A, b, x, rows)
    jit["argmax_residual"](A, b, x, rows)
    jit["project_row"](A, b, rnsq, x, 0)
    jit["apply_simultaneous"](A, b, rnsq, x, rows, weights)
    jit["apply_composition"](A, b, rnsq, x, rows)
    jit["outer_update"](x, interior, x, 1.0)
    jit["augmented_scan"](A, b, rnsq, x, 0, 2, 0.0, True)
    jit["dykstra"](A, b, rnsq, x, 1000, 1e-10)


_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance():
    """Recorder used by the acceptance suite; one PASS/FAIL line per criterion."""

    def record(criterion: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((criterion, passed, detail))
        line = f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'}"
        if detail:
            line += f"  [{detail}]"
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _ACCEPTANCE:
        line = f"{criterion}: {'PASS' if passed else 'FAIL'}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
