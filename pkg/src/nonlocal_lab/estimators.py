"""Measured counterparts of the regularity quantities: infima, oscillations,
tails, weak Harnack ratios, Caccioppoli gaps and Hölder exponents.

Ball infima and suprema are nodal; balls are closed so that nodal radii
are included.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_legendre

from .discretization import (
    DomainError,
    FarField,
    GridFunction,
    Mesh1D,
    StiffnessSystem,
    UnsupportedInputError,
    assemble_stiffness,
    gagliardo_seminorm,
)
from .kernels import KernelField, construct_kernel
from .solver import SolveOptions, SolverError, solve_problem, solve_torsion


class ResolutionError(ValueError):
    """The mesh is too coarse for the requested ball or annulus."""


class PreconditionError(ValueError):
    """Input violates a sign or ordering precondition."""


class InsufficientDataError(ValueError):
    pass


_GL_X, _GL_W = roots_legendre(8)


@dataclass(frozen=True)
class BallStats:
    inf: float
    sup: float
    osc: float


@dataclass(frozen=True)
class HarnackRecord:
    inf_half: float
    annulus_mean: float
    ratio: float
    sigma: float


@dataclass(frozen=True)
class DeficitRecord:
    inf_half: float
    annulus_mean: float
    tail_negative: float
    residual: float


@dataclass(frozen=True)
class CaccioppoliRecord:
    lhs: float
    rhs: float
    slack: float


@dataclass
class RegularityReport:
    """Sweep output: one row per sweep point plus fitted summary constants."""

    rows: list[dict] = field(default_factory=list)
    radius_records: list[dict] = field(default_factory=list)
    tail_values: list[dict] = field(default_factory=list)
    harnack: list[HarnackRecord] = field(default_factory=list)
    alpha: float | None = None
    fit_residual: float | None = None
    constants: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    complete: bool = True
    errors: list[str] = field(default_factory=list)


# ----------------------------------------------------------------------------
# balls, tails, annuli
# ----------------------------------------------------------------------------


def _ball_mask(mesh: Mesh1D, r: float) -> np.ndarray:
    return np.abs(mesh.nodes) <= r * (1 + 1e-12) + 1e-14


def ball_stats(u: GridFunction, r: float) -> BallStats:
    mesh = u.mesh
    if r > mesh.X:
        raise ResolutionError(f"B_{r} is not inside the box (-{mesh.X}, {mesh.X})")
    mask = _ball_mask(mesh, r)
    if mask.sum() < 4:
        raise ResolutionError(f"fewer than 4 nodes in B_{r} at h={mesh.h}")
    vals = u.values[mask]
    lo, hi = float(vals.min()), float(vals.max())
    return BallStats(lo, hi, hi - lo)


def _integrate_nodal(x: np.ndarray, f: np.ndarray, a: float, b: float) -> float:
    """Integral over [a, b] of the piecewise-linear interpolant of (x, f)."""
    inner = (x > a) & (x < b)
    xs = np.concatenate([[a], x[inner], [b]])
    fs = np.interp(xs, x, f)
    return float(np.sum(0.5 * (fs[1:] + fs[:-1]) * np.diff(xs)))


def _weighted_abs_integral(x: np.ndarray, f: np.ndarray, a: float, b: float,
                           p: float) -> float:
    """int_a^b |f(y)| y^(-p) dy for the piecewise-linear f, 0 < a < b."""
    inner = (x > a) & (x < b)
    pts = np.concatenate([[a], x[inner], [b]])
    fv = np.interp(pts, x, f)
    # split cells at sign changes so |f| is linear on every piece
    cross = fv[:-1] * fv[1:] < 0
    roots = pts[:-1][cross] - fv[:-1][cross] * np.diff(pts)[cross] / np.diff(fv)[cross]
    pts = np.sort(np.concatenate([pts, roots]))
    lo, hi = pts[:-1], pts[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    y = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = np.abs(np.interp(y, x, f)) * y ** (-p)
    return float(np.sum(half * (vals @ _GL_W)))


def tail(u: GridFunction, R: float, s: float) -> float:
    """Tail(u, R) = R^(2s) int_{|y|>R} |u(y)| |y|^(-1-2s) dy."""
    mesh = u.mesh
    X = mesh.X
    if not 0 < R < X:
        raise DomainError(f"tail radius must lie in (0, X={X}), got {R}")
    p = 1.0 + 2.0 * s
    x = mesh.nodes
    right = x >= 0
    box = _weighted_abs_integral(x[right], u.values[right], R, X, p)
    box += _weighted_abs_integral(-x[~right][::-1], u.values[~right][::-1], R, X, p)
    far = u.far
    if far.kind == "zero":
        outer = 0.0
    elif far.kind == "constant":
        outer = abs(far.value) * X ** (-2.0 * s) / s
    elif far.kind == "function":
        outer = (quad(lambda y: abs(far.func(y)) * y ** (-p), X, np.inf)[0]
                 + quad(lambda y: abs(far.func(-y)) * y ** (-p), X, np.inf)[0])
    else:  # pragma: no cover
        raise UnsupportedInputError(f"far field {far.kind!r}")
    return R ** (2.0 * s) * (box + outer)


def negative_part(u: GridFunction) -> GridFunction:
    """u_- = min(u, 0)."""
    far = u.far
    if far.kind == "constant":
        far = FarField.constant(min(far.value, 0.0))
    elif far.kind == "function":
        f = far.func
        far = FarField("function", func=lambda y: np.minimum(f(y), 0.0), bound=far.bound)
    return u.with_values(np.minimum(u.values, 0.0), far)


def annulus_mean(u: GridFunction, inner: float, outer: float) -> float:
    """Average of u over inner <= |x| <= outer, trapezoidal on nodes."""
    mesh = u.mesh
    if outer > mesh.X:
        raise ResolutionError("annulus leaves the box")
    x = mesh.nodes
    sel = (np.abs(x) >= inner * (1 - 1e-12)) & (np.abs(x) <= outer * (1 + 1e-12))
    if sel.sum() < 8:
        raise ResolutionError(f"fewer than 8 nodes in the annulus {inner} <= |x| <= {outer}")
    total, length = 0.0, 0.0
    for side in (x > 0, x < 0):
        m = sel & side
        xs, vs = x[m], u.values[m]
        total += float(np.sum(0.5 * (vs[1:] + vs[:-1]) * np.diff(xs)))
        length += float(xs[-1] - xs[0])
    return total / length


def _check_nonnegative(u: GridFunction, radius: float, tol: float = 1e-8):
    x = u.mesh.nodes
    inside = np.abs(x) < radius * (1 - 1e-12)
    worst = float(u.values[inside].min())
    if worst < -tol:
        raise PreconditionError(
            f"u must be nonnegative on B_{radius}; found {worst:.3e}. "
            "Use tail_localized_deficit for sign-changing exterior data."
        )


def weak_harnack_ratio(u: GridFunction, R: float, L: float, delta: float) -> HarnackRecord:
    """inf over B_{R/2} against the mean over B_{2R} minus B_{3R/2}."""
    if 2 * R > u.mesh.X:
        raise ResolutionError("B_2R must lie inside the box")
    _check_nonnegative(u, 2 * R)
    inf_half = ball_stats(u, R / 2).inf
    mean = annulus_mean(u, 1.5 * R, 2 * R)
    ratio = inf_half / mean if mean > 0 else math.inf
    return HarnackRecord(inf_half, mean, ratio, ratio * L ** (1 + delta))


def tail_localized_deficit(u: GridFunction, R: float, L: float, delta: float, s: float,
                           sigma: float, C: float) -> DeficitRecord:
    """inf_{B_R/2} u - (sigma/L^(1+delta) mean - C/L^delta Tail(u_-, 2R))."""
    if 2 * R > u.mesh.X:
        raise ResolutionError("B_2R must lie inside the box")
    _check_nonnegative(u, 2 * R)
    inf_half = ball_stats(u, R / 2).inf
    mean = annulus_mean(u, 1.5 * R, 2 * R)
    tneg = tail(negative_part(u), 2 * R, s)
    bound = sigma / L ** (1 + delta) * mean - C / L**delta * tneg
    return DeficitRecord(inf_half, mean, tneg, inf_half - bound)


def fit_tail_constant(records: Sequence[tuple[DeficitRecord, float]], sigma: float,
                      delta: float) -> float:
    """Smallest C >= 0 making every (record, L) deficit nonnegative at the given sigma."""
    C = 0.0
    for rec, L in records:
        gap = sigma / L ** (1 + delta) * rec.annulus_mean - rec.inf_half
        if gap > 0:
            if rec.tail_negative <= 0:
                return math.inf
            C = max(C, gap * L**delta / rec.tail_negative)
    return C


# ----------------------------------------------------------------------------
# Caccioppoli
# ----------------------------------------------------------------------------


def plateau_cutoff(x, rho1: float, rho2: float) -> np.ndarray:
    """1 on B_rho2, 0 outside B_rho1, linear in between."""
    x = np.abs(np.asarray(x, dtype=float))
    return np.clip((rho1 - x) / (rho1 - rho2), 0.0, 1.0)


def _cutoff_energy_density(x: float, rho1: float, rho2: float, s: float) -> float:
    """int_R (eta(x) - eta(y))^2 |x - y|^(-1-2s) dy for |x| < rho1."""
    ex = float(plateau_cutoff(x, rho1, rho2))
    p = 1.0 + 2.0 * s

    def f(y):
        return (ex - plateau_cutoff(y, rho1, rho2)) ** 2 * abs(x - y) ** (-p)

    pieces = sorted({-rho1, -rho2, rho2, rho1, x})
    inner = sum(quad(f, a, b, limit=200)[0] for a, b in zip(pieces[:-1], pieces[1:]))
    # eta vanishes beyond rho1
    outer = ex**2 * ((rho1 - x) ** (-2 * s) + (rho1 + x) ** (-2 * s)) / (2 * s)
    return inner + outer


def caccioppoli_gap(u: GridFunction, beta: float, rho1: float, rho2: float,
                    eps: float | None, kernel: KernelField | None, s: float,
                    L: float) -> CaccioppoliRecord:
    """Both sides of the Caccioppoli inequality for negative powers of u.

    lhs = int_{B_rho2} u_e^-beta + (1/beta) [u_e^((1-beta)/2)]^2_{s, B_rho2}
    rhs = 8 beta L int (eta/u_e)^(beta-1)(x) int (eta(x)-eta(y))^2 |x-y|^(-1-2s) dy dx

    with u_e = u + eps and eta the plateau cutoff. The constants are the
    explicit ones before the Sobolev step, so slack >= 0 is a checkable claim.
    """
    if not 0 < rho2 < rho1 <= 1:
        raise DomainError(f"need 0 < rho2 < rho1 <= 1, got rho1={rho1}, rho2={rho2}")
    if not beta > 1:
        raise DomainError(f"beta must exceed 1, got {beta}")
    mesh = u.mesh
    if eps is None:
        eps = 1e-3 * mesh.h ** (2 * s)
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if kernel is not None and kernel.L > L:
        raise DomainError("L must bound the kernel")
    x = mesh.nodes
    ue = u.values + eps
    if np.any(ue[np.abs(x) < rho1] <= 0):
        raise PreconditionError("u + eps must be positive on B_rho1")

    first = _integrate_nodal(x, ue ** (-beta), -rho2, rho2)
    # seminorm over the node-aligned part of B_rho2
    k2 = int(math.floor(rho2 / mesh.h + 1e-9))
    w = u.with_values(np.where(np.abs(x) < rho1, ue, 1.0) ** ((1 - beta) / 2))
    semi = gagliardo_seminorm(w, (-k2 * mesh.h, k2 * mesh.h), s) ** 2 if k2 > 0 else 0.0
    lhs = first + semi / beta

    sel = np.abs(x) <= rho1
    xs = x[sel]
    q = (plateau_cutoff(xs, rho1, rho2) / ue[sel]) ** (beta - 1)
    dens = np.array([_cutoff_energy_density(xi, rho1, rho2, s) if qi > 0 else 0.0
                     for xi, qi in zip(xs, q)])
    integral = _integrate_nodal(xs, q * dens, -rho1, rho1)
    rhs = 8.0 * beta * L * integral
    return CaccioppoliRecord(lhs, rhs, rhs - lhs)


def inverse_integral(u: GridFunction, eps: float, radius: float = 5 / 6) -> float:
    """int_{B_radius} (u + eps)^-1 dx."""
    return _integrate_nodal(u.mesh.nodes, 1.0 / (u.values + eps), -radius, radius)


def cutoff_test_bound(u: GridFunction, system: StiffnessSystem, eps: float,
                      rho1: float = 1.0, rho2: float = 5 / 6) -> tuple[float, float]:
    """(int eta^2/u_e, <K eta, eta>) for the torsion function u.

    Testing the torsion equation with eta^2/u_e bounds the first by the second.
    """
    mesh = u.mesh
    x = mesh.nodes
    if rho1 > mesh.r * (1 + 1e-12):
        raise DomainError("cutoff must be supported in the solve ball")
    eta = plateau_cutoff(x, rho1, rho2)
    lhs = _integrate_nodal(x, eta**2 / (u.values + eps), -rho1, rho1)
    rhs = system.quadratic_form(eta[mesh.interior_idx])
    return lhs, rhs


# ----------------------------------------------------------------------------
# exponents
# ----------------------------------------------------------------------------


def dyadic_radii(count: int, base: float = 4.0, r0: float = 1.0) -> np.ndarray:
    return r0 * base ** (-np.arange(count, dtype=float))


def holder_exponent_fit(radii: Sequence[float], osc: Sequence[float],
                        solver_tolerance: float = 1e-10) -> tuple[float, float]:
    """Least-squares slope of log osc against log r, and the fit residual norm."""
    r = np.asarray(radii, dtype=float)
    o = np.asarray(osc, dtype=float)
    keep = o > 10 * solver_tolerance
    if keep.sum() < 3:
        raise InsufficientDataError(f"need 3 usable radii, got {int(keep.sum())}")
    lr, lo = np.log(r[keep]), np.log(o[keep])
    A = np.stack([lr, np.ones_like(lr)], axis=1)
    coef, *_ = np.linalg.lstsq(A, lo, rcond=None)
    resid = lo - A @ coef
    return float(coef[0]), float(np.sqrt(resid @ resid))


def oscillation_contraction(u: GridFunction, levels: Iterable[int], base: float = 2.0,
                            tolerance: float = 1e-9) -> list[dict]:
    """osc(u, base^-(n+1)) / osc(u, base^-n) per level and the implied Harnack constant."""
    out = []
    for n in levels:
        r_big, r_small = base ** (-n), base ** (-(n + 1))
        try:
            big = ball_stats(u, r_big).osc
            small = ball_stats(u, r_small).osc
        except ResolutionError:
            continue
        if big < tolerance:
            continue
        q = small / big
        c_h = (1 + q) / (1 - q) if q < 1 else math.inf
        out.append({"level": n, "radius": r_big, "factor": q, "c_H": c_h})
    return out


def classical_harnack_example(L: float, r: float = 1.0, grid_resolution: int = 64):
    """sup, inf and their ratio for exp(sqrt(L) x) cos(y) sampled on the disc B_r.

    The sample is polar and includes the points (r, 0) and (-r, 0).
    """
    if r > 1:
        raise DomainError("r must be at most 1 so that cos(y) stays positive on B_r")
    if grid_resolution < 64:
        raise DomainError("grid_resolution must be at least 64")
    m = grid_resolution + grid_resolution % 2
    rho = np.linspace(0.0, r, m)
    theta = np.linspace(0.0, 2 * np.pi, m, endpoint=False)
    P, T = np.meshgrid(rho, theta, indexing="ij")
    u = np.exp(math.sqrt(L) * P * np.cos(T)) * np.cos(P * np.sin(T))
    sup, inf = float(u.max()), float(u.min())
    return sup, inf, sup / inf


# ----------------------------------------------------------------------------
# sweeps
# ----------------------------------------------------------------------------


def _loglog_slope(L: np.ndarray, v: np.ndarray) -> float:
    A = np.stack([np.log(L), np.ones_like(L)], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(v), rcond=None)
    return float(coef[0])


def _run_points(fn, points, threads: int):
    if threads <= 1:
        return [fn(p) for p in points]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, points))


def torsion_lower_bound_sweep(L_values: Sequence[float], s: float, delta: float,
                              kernel_family: str, seeds: Sequence[int], mesh: Mesh1D,
                              cell_size: float = 0.25,
                              options: SolveOptions = SolveOptions(),
                              threads: int = 1) -> RegularityReport:
    """Torsion infimum on B_{r/2} across (L, seed); c_delta is the sweep minimum of inf L^(1+delta)."""
    if not L_values or not seeds:
        raise ValueError("sweep needs at least one L and one seed")
    points = [(L, seed) for L in L_values for seed in seeds]

    def run(point):
        L, seed = point
        kernel = construct_kernel(kernel_family, L, cell_size, seed, s)
        try:
            u = solve_torsion(mesh, kernel, s, options)
        except SolverError as err:
            return {"L": L, "seed": seed, "error": str(err)}
        inf_half = ball_stats(u, mesh.r / 2).inf
        return {
            "L": float(L), "seed": int(seed), "s": s, "delta": delta,
            "family": kernel_family, "n_interior": mesh.n_interior, "X": mesh.X,
            "inf_half": inf_half,
            "inf_half_scaled": inf_half * L ** (1 + delta),
            "u_center": float(u.values[mesh.node_index(0.0)]),
            "residual": u.residual, "iterations": u.iterations,
        }

    report = RegularityReport(metadata={
        "experiment": "torsion-sweep", "s": s, "delta": delta, "family": kernel_family,
        "seeds": list(seeds), "n_interior": mesh.n_interior, "X": mesh.X, "r": mesh.r,
    })
    for row in _run_points(run, points, threads):
        if "error" in row:
            report.complete = False
            report.errors.append(f"L={row['L']} seed={row['seed']}: {row['error']}")
        else:
            report.rows.append(row)
    if report.rows:
        Ls = np.array([r["L"] for r in report.rows])
        infs = np.array([r["inf_half"] for r in report.rows])
        report.constants["c_delta"] = float(min(r["inf_half_scaled"] for r in report.rows))
        report.constants["slope"] = _loglog_slope(Ls, infs) if np.ptp(Ls) > 0 else 0.0
    return report


def annulus_datum(mesh: Mesh1D, R: float | None = None) -> GridFunction:
    """Indicator of B_2R minus B_3R/2 on the nodes, zero far field."""
    R = mesh.r if R is None else R
    ax = np.abs(mesh.nodes)
    vals = ((ax >= 1.5 * R * (1 - 1e-12)) & (ax <= 2 * R * (1 + 1e-12))).astype(float)
    return GridFunction(mesh, vals)


def sign_datum(mesh: Mesh1D) -> GridFunction:
    """sign(x) outside the ball, continued by sign(y) beyond the box."""
    return GridFunction(mesh, np.sign(mesh.nodes),
                        FarField("function", func=np.sign, bound=1.0))


def oscillation_sweep(L_values: Sequence[float], s: float, delta: float,
                      kernel_family: str, seeds: Sequence[int], mesh: Mesh1D,
                      cell_size: float = 0.25, n_radii: int = 3, base: float = 4.0,
                      options: SolveOptions = SolveOptions(),
                      threads: int = 1) -> RegularityReport:
    """Hölder fit on K u = 0 with sign data and weak Harnack ratio with annulus data."""
    points = [(L, seed) for L in L_values for seed in seeds]
    radii = dyadic_radii(n_radii, base, mesh.r)

    def run(point):
        L, seed = point
        kernel = construct_kernel(kernel_family, L, cell_size, seed, s)
        try:
            system = assemble_stiffness(mesh, kernel, s)
            u = solve_problem(system, 0.0, sign_datum(mesh), options)
            v = solve_problem(system, 0.0, annulus_datum(mesh), options)
        except SolverError as err:
            return {"L": L, "seed": seed, "error": str(err)}
        osc = [ball_stats(u, r).osc for r in radii]
        alpha, res = holder_exponent_fit(radii, osc, options.cg_tolerance)
        hr = weak_harnack_ratio(v, mesh.r, L, delta)
        row = {"L": float(L), "seed": int(seed), "s": s, "delta": delta,
               "family": kernel_family, "n_interior": mesh.n_interior, "X": mesh.X}
        for i, (r, o) in enumerate(zip(radii, osc)):
            row[f"osc_{i}"] = o
        row.update({
            "alpha": alpha, "fit_residual": res, "alpha_scaled": alpha * L ** (1 + delta),
            "harnack_inf": hr.inf_half, "harnack_mean": hr.annulus_mean,
            "harnack_ratio": hr.ratio, "sigma": hr.sigma,
        })
        return row

    report = RegularityReport(metadata={
        "experiment": "osc-sweep", "s": s, "delta": delta, "family": kernel_family,
        "radii": list(map(float, radii)), "n_interior": mesh.n_interior, "X": mesh.X,
    })
    for row in _run_points(run, points, threads):
        if "error" in row:
            report.complete = False
            report.errors.append(f"L={row['L']} seed={row['seed']}: {row['error']}")
        else:
            report.rows.append(row)
            report.harnack.append(HarnackRecord(row["harnack_inf"], row["harnack_mean"],
                                                row["harnack_ratio"], row["sigma"]))
    if report.rows:
        report.constants["sigma_min"] = float(min(r["sigma"] for r in report.rows))
        report.constants["alpha_scaled_min"] = float(min(r["alpha_scaled"] for r in report.rows))
        report.constants["alpha_min"] = float(min(r["alpha"] for r in report.rows))
    return report


def s_limit_trend(s_values: Sequence[float], kernel: KernelField, mesh: Mesh1D,
                  options: SolveOptions = SolveOptions()) -> RegularityReport:
    """Torsion infimum on B_{r/2} and center value across s, normalized by (1 - s).

    The infimum scales like (1 - s) as s -> 1, so inf/(1 - s) is the
    quantity expected to stay bounded and away from zero; (1 - s) inf is
    recorded as well.
    """
    report = RegularityReport(metadata={"experiment": "s-limit", "family": kernel.family,
                                        "L": kernel.L, "n_interior": mesh.n_interior})
    for s in s_values:
        if not 0.5 < s < 0.99:
            raise DomainError(f"s values must lie in (0.5, 0.99), got {s}")
        try:
            u = solve_torsion(mesh, kernel, s, options)
        except SolverError as err:
            report.complete = False
            report.errors.append(f"s={s}: {err}")
            continue
        inf_half = ball_stats(u, mesh.r / 2).inf
        u0 = float(u.values[mesh.node_index(0.0)])
        report.rows.append({
            "s": float(s), "u_center": u0, "inf_half": inf_half,
            "inf_over_1ms": inf_half / (1 - s), "u_center_over_1ms": u0 / (1 - s),
            "one_minus_s_times_inf": (1 - s) * inf_half,
            "one_minus_s_times_u_center": (1 - s) * u0,
            "residual": u.residual, "iterations": u.iterations,
        })
    if report.rows:
        def variation(key):
            v = np.array([r[key] for r in report.rows])
            return float(v.max() / v.min() - 1.0)

        report.constants["variation_normalized"] = variation("u_center_over_1ms")
        report.constants["variation_product"] = variation("one_minus_s_times_u_center")
        report.constants["variation_raw"] = variation("u_center")
    return report
