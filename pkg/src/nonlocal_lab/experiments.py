"""Experiment runner: one CSV per experiment, rows in sweep order."""

from __future__ import annotations

import datetime as _dt
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .discretization import GridFunction, build_mesh
from .estimators import (
    classical_harnack_example,
    oscillation_sweep,
    s_limit_trend,
    tail,
    torsion_lower_bound_sweep,
)
from .kernels import construct_kernel
from .solver import SolveOptions, SolverError, solve_torsion

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2


@dataclass
class ExperimentResult:
    status: int
    path: Path | None
    rows: list[dict] = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def write_csv(path: Path, rows: list[dict], columns: list[str], metadata: dict) -> None:
    """Comment block of ``# key: value`` lines, header, then rows."""
    lines = []
    for k, v in metadata.items():
        if k == "error":
            lines += [f"# error: {e}" for e in v]
        elif isinstance(v, (list, tuple)):
            lines.append(f"# {k}: {' '.join(map(_fmt, v))}")
        else:
            lines.append(f"# {k}: {_fmt(v)}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    path.write_text("\n".join(lines) + "\n")


def read_csv_body(path: Path) -> str:
    """CSV text without the metadata comment block."""
    return "".join(l for l in Path(path).read_text().splitlines(keepends=True)
                   if not l.startswith("#"))


def _options(cfg: ExperimentConfig) -> SolveOptions:
    return SolveOptions(cfg.cg_tolerance, cfg.max_iter, cfg.precond)


def _mesh(cfg: ExperimentConfig):
    return build_mesh(cfg.r, cfg.truncation, cfg.n_interior)


def _torsion_sweep(cfg, threads):
    mesh = _mesh(cfg)
    rows, constants, errors = [], {}, []
    for s in cfg.s:
        rep = torsion_lower_bound_sweep(cfg.L, s, cfg.delta, cfg.family, cfg.seed, mesh,
                                        cfg.cell_size, _options(cfg), threads)
        rows += rep.rows
        errors += rep.errors
        for k, v in rep.constants.items():
            constants[f"{k}[s={s!r}]"] = v
    cols = ["s", "L", "seed", "family", "delta", "n_interior", "X", "inf_half",
            "inf_half_scaled", "u_center", "residual", "iterations"]
    return rows, cols, constants, errors


def _osc_sweep(cfg, threads):
    mesh = _mesh(cfg)
    rows, constants, errors = [], {}, []
    for s in cfg.s:
        rep = oscillation_sweep(cfg.L, s, cfg.delta, cfg.family, cfg.seed, mesh,
                                cfg.cell_size, cfg.n_radii, cfg.dyadic_base,
                                _options(cfg), threads)
        rows += rep.rows
        errors += rep.errors
        for k, v in rep.constants.items():
            constants[f"{k}[s={s!r}]"] = v
    cols = (["s", "L", "seed", "family", "delta", "n_interior", "X"]
            + [f"osc_{i}" for i in range(cfg.n_radii)]
            + ["alpha", "fit_residual", "alpha_scaled", "harnack_inf", "harnack_mean",
               "harnack_ratio", "sigma"])
    return rows, cols, constants, errors


def _harnack_classical(cfg, threads):
    rows = []
    for L in cfg.L:
        sup, inf, c_h = classical_harnack_example(L, cfg.R, cfg.grid_resolution)
        rows.append({
            "L": float(L), "r": cfg.R, "grid_resolution": cfg.grid_resolution,
            "sup": sup, "inf": inf, "c_H": c_h,
            "sup_exact": math.exp(math.sqrt(L) * cfg.R),
            "c_H_lower": math.exp(2 * math.sqrt(L) * cfg.R),
        })
    cols = ["L", "r", "grid_resolution", "sup", "inf", "c_H", "sup_exact", "c_H_lower"]
    return rows, cols, {}, []


def _tail_check(cfg, threads):
    mesh = _mesh(cfg)
    one = GridFunction.constant(mesh, 1.0)
    rows = []
    for s in cfg.s:
        value = tail(one, cfg.R, s)
        exact = 1.0 / s  # R^{2s} * 2 * R^{-2s} / (2s)
        rows.append({"s": s, "R": cfg.R, "X": mesh.X, "tail": value, "exact": exact,
                     "abs_error": abs(value - exact)})
    return rows, ["s", "R", "X", "tail", "exact", "abs_error"], {}, []


def _s_limit(cfg, threads):
    mesh = _mesh(cfg)
    kernel = construct_kernel(cfg.family, cfg.L[0], cfg.cell_size, cfg.seed[0])
    rep = s_limit_trend(cfg.s, kernel, mesh, _options(cfg))
    for row in rep.rows:
        row.update(family=cfg.family, L=cfg.L[0], seed=cfg.seed[0])
    cols = ["s", "family", "L", "seed", "u_center", "inf_half", "inf_over_1ms",
            "u_center_over_1ms", "one_minus_s_times_inf", "one_minus_s_times_u_center",
            "residual", "iterations"]
    return rep.rows, cols, rep.constants, rep.errors


def _convergence_study(cfg, threads):
    kernel = construct_kernel(cfg.family, cfg.L[0], cfg.cell_size, cfg.seed[0])
    s = cfg.s[0]
    values: dict[tuple[int, float], list[float]] = {}
    errors = []
    for X in cfg.X_list:
        for n in cfg.n_list:
            mesh = build_mesh(cfg.r, X, n)
            try:
                u = solve_torsion(mesh, kernel, s, _options(cfg))
            except SolverError as err:
                errors.append(f"n={n} X={X}: {err}")
                continue
            values[(n, X)] = [float(u(p)) for p in cfg.probes]
    rows = []
    n_sorted, X_sorted = sorted(cfg.n_list), sorted(cfg.X_list)
    for X in cfg.X_list:
        for n in cfg.n_list:
            if (n, X) not in values:
                continue
            i_n, i_X = n_sorted.index(n), X_sorted.index(X)
            prev_n = values.get((n_sorted[i_n - 1], X)) if i_n else None
            prev_X = values.get((n, X_sorted[i_X - 1])) if i_X else None
            for k, p in enumerate(cfg.probes):
                v = values[(n, X)][k]
                rows.append({
                    "n_interior": n, "X": float(X), "probe": p, "s": s,
                    "family": cfg.family, "L": cfg.L[0], "value": v,
                    "rel_change_n": None if prev_n is None else abs(v - prev_n[k]) / abs(v),
                    "rel_change_X": None if prev_X is None else abs(v - prev_X[k]) / abs(v),
                })
    constants = {}
    for key in ("rel_change_n", "rel_change_X"):
        vals = [r[key] for r in rows if r[key] is not None]
        if vals:
            constants[f"max_{key}"] = max(vals)
    cols = ["n_interior", "X", "probe", "s", "family", "L", "value",
            "rel_change_n", "rel_change_X"]
    return rows, cols, constants, errors


_RUNNERS = {
    "torsion-sweep": _torsion_sweep,
    "osc-sweep": _osc_sweep,
    "harnack-classical": _harnack_classical,
    "tail-check": _tail_check,
    "s-limit": _s_limit,
    "convergence-study": _convergence_study,
}


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("LAB_THREADS", "").strip()
        threads = int(env) if env else 1
    if threads < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    return threads


def run_experiment(cfg: ExperimentConfig, output_dir: str | os.PathLike | None = None,
                   threads: int | None = None) -> ExperimentResult:
    """Run the configured experiment and write ``<output>/<experiment>.csv``.

    Status 0 on success, 1 if any solve failed (completed rows are still
    written and the metadata carries ``complete: false``).
    """
    threads = resolve_threads(threads)
    out = Path(cfg.output if output_dir is None else output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, cols, constants, errors = _RUNNERS[cfg.experiment](cfg, threads)
    complete = not errors
    metadata = {
        "experiment": cfg.experiment,
        "version": __version__,
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "complete": complete,
    }
    metadata.update(constants)
    if errors:
        metadata["error"] = [e.replace("\n", " ") for e in errors]
    path = out / f"{cfg.experiment}.csv"
    write_csv(path, rows, cols, metadata)
    return ExperimentResult(EXIT_OK if complete else EXIT_SOLVER, path, rows, constants, errors)
