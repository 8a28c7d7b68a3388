"""Dirichlet and torsion solves with dense preconditioned conjugate gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import (
    ConfigurationError,
    FarField,
    GridFunction,
    Mesh1D,
    StiffnessSystem,
    assemble_load,
    assemble_stiffness,
)
from .kernels import KernelField


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SolveOptions:
    cg_tolerance: float = 1e-10
    max_iterations: int = 10_000
    preconditioner: str = "diagonal"

    def __post_init__(self):
        if not 0 < self.cg_tolerance < 1:
            raise ValueError(f"cg_tolerance must lie in (0, 1), got {self.cg_tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.preconditioner not in ("none", "diagonal"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


def conjugate_gradient(A: np.ndarray, b: np.ndarray, options: SolveOptions = SolveOptions()):
    """Solve A x = b for symmetric positive definite A.

    Returns (x, relative residual, iterations). The residual is recomputed
    from scratch at exit so the reported value is the true one.
    """
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, 0.0, 0
    inv_diag = 1.0 / np.diag(A) if options.preconditioner == "diagonal" else np.ones_like(b)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    tol = options.cg_tolerance
    for it in range(1, options.max_iterations + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= 0.5 * tol * bnorm:
            true_res = np.linalg.norm(b - A @ x) / bnorm
            if true_res <= tol:
                return x, true_res, it
            r = b - A @ x
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(b - A @ x) / bnorm
    if res <= tol:
        return x, res, options.max_iterations
    raise SolverError("conjugate gradients did not converge", res, options.max_iterations)


def solve_dirichlet(system: StiffnessSystem, load: np.ndarray,
                    datum: GridFunction | None = None,
                    options: SolveOptions = SolveOptions()) -> GridFunction:
    """Interior values from A u = load; exterior values copied from ``datum``."""
    mesh = system.mesh
    if datum is not None and datum.mesh is not mesh:
        raise ConfigurationError("datum lives on a different mesh")
    if load.shape != (mesh.n_interior - 1,):
        raise ConfigurationError("load does not match the interior dofs")
    ui, res, its = conjugate_gradient(system.operator, load, options)
    values = np.zeros(mesh.n_nodes) if datum is None else datum.values.copy()
    values[mesh.interior_idx] = ui
    far = FarField() if datum is None else datum.far
    return GridFunction(mesh, values, far, residual=res, iterations=its)


def solve_problem(system: StiffnessSystem, f=0.0, g: GridFunction | None = None,
                  options: SolveOptions = SolveOptions()) -> GridFunction:
    """K u = f in B_r, u = g outside, on an assembled system."""
    load = assemble_load(system.mesh, system.kernel, system.s, f, g, system=system)
    return solve_dirichlet(system, load, g, options)


def solve_torsion(mesh: Mesh1D, kernel: KernelField, s: float,
                  options: SolveOptions = SolveOptions(),
                  system: StiffnessSystem | None = None) -> GridFunction:
    """K u = 1 in B_r, u = 0 outside."""
    if system is None:
        system = assemble_stiffness(mesh, kernel, s)
    return solve_problem(system, 1.0, None, options)


@dataclass(frozen=True)
class OrderingReport:
    max_gap: float
    argmax: float
    violated: bool
    tolerance: float


def comparison_check(system: StiffnessSystem | None, u: GridFunction, v: GridFunction,
                     tolerance: float = 1e-8) -> OrderingReport:
    """Largest positive part of u - v over all nodes."""
    if u.mesh is not v.mesh or (system is not None and system.mesh is not u.mesh):
        raise ConfigurationError("comparison needs functions on one mesh")
    diff = u.values - v.values
    i = int(np.argmax(diff))
    gap = max(float(diff[i]), 0.0)
    return OrderingReport(gap, float(u.mesh.nodes[i]), gap > tolerance, tolerance)


def monotonicity_margins(system: StiffnessSystem) -> dict:
    """Smallest entries of the discrete solution maps.

    The scheme is not guaranteed to be an M-matrix; nonnegative maps from
    source and exterior data are what the comparison principle needs.
    """
    mesh = system.mesh
    h = mesh.h
    n = mesh.n_interior - 1
    A = system.operator
    M = (np.diag(np.full(n, 4 * h / 6)) + np.diag(np.full(n - 1, h / 6), 1)
         + np.diag(np.full(n - 1, h / 6), -1))
    source = np.linalg.solve(A, M)
    exterior = -np.linalg.solve(A, system.coupling[:, ~mesh.is_interior])
    off = A - np.diag(np.diag(A))
    return {
        "max_offdiagonal": float(off.max()),
        "min_source_response": float(source.min()),
        "min_exterior_response": float(exterior.min()),
    }
