"""Flat ``key = value`` experiment configuration.

One pair per line, ``#`` starts a comment, list values are comma
separated. A repeated key keeps its last value and produces a warning.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .kernels import FAMILIES

EXPERIMENTS = ("torsion-sweep", "osc-sweep", "harnack-classical", "tail-check",
               "s-limit", "convergence-study")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))
        self.errors = errors


@dataclass
class ExperimentConfig:
    experiment: str
    output: str = "results"
    r: float = 1.0
    X: float | None = None
    n_interior: int = 256
    family: str = "seeded_random_cells"
    L: list[float] = field(default_factory=lambda: [1.0])
    cell_size: float = 0.25
    seed: list[int] = field(default_factory=lambda: [0])
    s: list[float] = field(default_factory=lambda: [0.5])
    delta: float = 0.1
    cg_tolerance: float = 1e-10
    max_iter: int = 10_000
    precond: str = "diagonal"
    R: float = 1.0
    grid_resolution: int = 64
    dyadic_base: float = 4.0
    n_radii: int = 3
    n_list: list[int] = field(default_factory=lambda: [256, 512])
    X_list: list[float] = field(default_factory=lambda: [4.0, 8.0])
    probes: list[float] = field(default_factory=lambda: [0.0, 0.5])
    warnings: list[str] = field(default_factory=list, compare=False)

    @property
    def truncation(self) -> float:
        return 4.0 * self.r if self.X is None else self.X

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("warnings")
        d["X"] = self.truncation
        return d

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _float(v: str) -> float:
    return float(v)


def _int(v: str) -> int:
    f = float(v)
    if f != int(f):
        raise ValueError(f"{v!r} is not an integer")
    return int(f)


def _floats(v: str) -> list[float]:
    return [float(p) for p in v.split(",") if p.strip()]


def _ints(v: str) -> list[int]:
    return [_int(p) for p in v.split(",") if p.strip()]


_CONVERTERS = {
    "experiment": str, "output": str, "r": _float, "X": _float, "n_interior": _int,
    "family": str, "L": _floats, "cell_size": _float, "seed": _ints, "s": _floats,
    "delta": _float, "cg_tolerance": _float, "max_iter": _int, "precond": str,
    "R": _float, "grid_resolution": _int, "dyadic_base": _float, "n_radii": _int,
    "n_list": _ints, "X_list": _floats, "probes": _floats,
}


def _check(cfg: ExperimentConfig, line_of: dict[str, int]) -> list[str]:
    errs = []

    def bad(key, msg):
        errs.append(f"line {line_of.get(key, 0)}: {key}: {msg}")

    if cfg.experiment not in EXPERIMENTS:
        bad("experiment", f"{cfg.experiment!r} is not one of {', '.join(EXPERIMENTS)}")
    if not cfg.r > 0:
        bad("r", "must be positive")
    if cfg.X is not None and cfg.X < 2 * cfg.r:
        bad("X", f"must be at least 2r = {2 * cfg.r}")
    if cfg.n_interior < 8 or cfg.n_interior % 2:
        bad("n_interior", "must be an even integer >= 8")
    if cfg.family not in FAMILIES:
        bad("family", f"{cfg.family!r} is not one of {', '.join(FAMILIES)}")
    if not cfg.L or any(not L >= 1 for L in cfg.L):
        bad("L", "every value must be >= 1")
    if not cfg.cell_size > 0:
        bad("cell_size", "must be positive")
    if not cfg.seed or any(x < 0 for x in cfg.seed):
        bad("seed", "seeds must be nonnegative integers")
    if not cfg.s or any(not 0 < s < 1 for s in cfg.s):
        bad("s", "every value must lie in the open interval (0, 1)")
    elif cfg.experiment == "s-limit" and any(not 0.5 < s < 0.99 for s in cfg.s):
        bad("s", "s-limit values must lie in (0.5, 0.99)")
    if not cfg.delta >= 0:
        bad("delta", "must be >= 0")
    if not 0 < cfg.cg_tolerance < 1:
        bad("cg_tolerance", "must lie in (0, 1)")
    if cfg.max_iter < 1:
        bad("max_iter", "must be >= 1")
    if cfg.precond not in ("none", "diagonal"):
        bad("precond", "must be 'none' or 'diagonal'")
    if not cfg.R > 0:
        bad("R", "must be positive")
    if cfg.experiment == "harnack-classical" and cfg.R > 1:
        bad("R", "the classical example needs R <= 1")
    if cfg.experiment == "tail-check" and not cfg.R < cfg.truncation:
        bad("R", "tail radius must be smaller than X")
    if cfg.grid_resolution < 64:
        bad("grid_resolution", "must be >= 64")
    if cfg.dyadic_base not in (2.0, 4.0):
        bad("dyadic_base", "must be 2 or 4")
    if cfg.n_radii < 3:
        bad("n_radii", "need at least 3 radii for an exponent fit")
    if not cfg.n_list or any(n < 8 or n % 2 for n in cfg.n_list):
        bad("n_list", "entries must be even integers >= 8")
    if not cfg.X_list or any(x < 2 * cfg.r for x in cfg.X_list):
        bad("X_list", f"entries must be at least 2r = {2 * cfg.r}")
    if any(abs(p) >= cfg.r for p in cfg.probes):
        bad("probes", "probe points must lie inside the ball")
    return errs


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; raises ConfigError listing every problem found."""
    errors: list[str] = []
    warnings: list[str] = []
    values: dict[str, object] = {}
    line_of: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in _CONVERTERS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        try:
            parsed = _CONVERTERS[key](val)
        except ValueError as err:
            errors.append(f"line {lineno}: {key}: cannot parse {val!r} ({err})")
            continue
        if key in values:
            warnings.append(f"line {lineno}: duplicate key {key!r}; "
                            f"overriding the value from line {line_of[key]}")
        values[key] = parsed
        line_of[key] = lineno
    missing = "experiment" not in values
    if missing:
        errors.append("line 0: missing required key 'experiment'")
        values["experiment"] = EXPERIMENTS[0]
    cfg = ExperimentConfig(**values)
    # range checks run even after syntax errors so every problem is reported
    errors += [e for e in _check(cfg, line_of)
               if not (missing and ": experiment:" in e)]
    if errors:
        errors.sort(key=lambda e: int(e.split()[1].rstrip(":")))
        raise ConfigError(errors)
    cfg.warnings = warnings
    return cfg
