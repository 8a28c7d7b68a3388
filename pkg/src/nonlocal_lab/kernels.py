"""Symmetric measurable coefficients k(x, y) with 1 <= k <= L.

All families except ``constant`` are piecewise constant on the square
lattice of side ``cell_size`` anchored at the origin, so a mesh whose
spacing divides ``cell_size`` resolves them exactly at cell-pair midpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

FAMILIES = ("constant", "two_phase_checkerboard", "radial_layers", "seeded_random_cells")

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


class KernelDomainError(ValueError):
    """Kernel parameters outside the admissible range."""


def _splitmix64(z: np.ndarray) -> np.ndarray:
    # z is uint64; numpy wraps on overflow for arrays
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _zigzag(i: np.ndarray) -> np.ndarray:
    i = i.astype(np.int64)
    return ((i << 1) ^ (i >> 63)).astype(np.uint64)


def _pair_uniform(seed: int, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) value attached to the unordered lattice pair {i, j}."""
    lo = _zigzag(np.minimum(i, j))
    hi = _zigzag(np.maximum(i, j))
    with np.errstate(over="ignore"):
        base = _splitmix64(np.full(lo.shape, np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
        z = _splitmix64(base ^ lo)
        z = _splitmix64(z ^ (hi * np.uint64(0xD1B54A32D192ED03) & _MASK64))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True)
class KernelField:
    """Coefficient field k(x, y) with values in [1, L].

    ``scale`` multiplies coordinates before evaluation, which is how the
    rescaled kernel k_r(x, y) = k(r x, r y) is represented without
    touching the lattice. ``far_value`` is the value used outside the
    computational box.
    """

    family: str
    L: float
    cell_size: float = 1.0
    seed: int = 0
    s: float | None = None
    scale: float = 1.0
    raw: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(
        default=None, compare=False, repr=False
    )

    @property
    def is_constant(self) -> bool:
        return self.family == "constant"

    @property
    def far_value(self) -> float:
        """Value used where the kernel is not resolved cell by cell.

        Constant kernels keep their value, so A_L = L * A_1 holds exactly.
        The lattice families alternate or average between 1 and L, so their
        large-scale mean is (1 + L) / 2.
        """
        return float(self.L) if self.is_constant else 0.5 * (1.0 + self.L)

    @property
    def lattice(self) -> float | None:
        """Lattice spacing in mesh coordinates, or None if not lattice based."""
        if self.family in ("constant", "symmetrized"):
            return None
        return self.cell_size / self.scale

    def __call__(self, x, y) -> np.ndarray:
        return eval_kernel(self, x, y)


def construct_kernel(
    family: str, L: float, cell_size: float = 0.25, seed: int = 0, s: float | None = None
) -> KernelField:
    if family not in FAMILIES:
        raise KernelDomainError(f"unknown kernel family {family!r}; expected one of {FAMILIES}")
    if not L >= 1:
        raise KernelDomainError(f"ellipticity ratio must satisfy L >= 1, got {L}")
    if not cell_size > 0:
        raise KernelDomainError(f"cell_size must be positive, got {cell_size}")
    if s is not None and not 0 < s < 1:
        raise KernelDomainError(f"s must lie in (0, 1), got {s}")
    return KernelField(family=family, L=float(L), cell_size=float(cell_size), seed=int(seed), s=s)


def rescale(kernel: KernelField, r: float) -> KernelField:
    """Return k_r(x, y) = k(r x, r y)."""
    if not r > 0:
        raise KernelDomainError(f"rescaling factor must be positive, got {r}")
    return KernelField(
        family=kernel.family,
        L=kernel.L,
        cell_size=kernel.cell_size,
        seed=kernel.seed,
        s=kernel.s,
        scale=kernel.scale * r,
        raw=kernel.raw,
    )


def symmetrize(a_eval: Callable, L: float, check: bool = True) -> KernelField:
    """Kernel (a(x, y) + a(y, x)) / 2 built from a raw evaluator bounded in [1, L].

    ``a_eval`` must accept broadcastable arrays.
    """
    if not L >= 1:
        raise KernelDomainError(f"ellipticity ratio must satisfy L >= 1, got {L}")

    def raw(x, y):
        axy = np.asarray(a_eval(x, y), dtype=float)
        ayx = np.asarray(a_eval(y, x), dtype=float)
        if check and (np.any(axy < 1) or np.any(axy > L)):
            raise KernelDomainError("raw coefficient leaves [1, L]")
        # both orders are summed in the same order so the result is bit-symmetric
        return 0.5 * (np.minimum(axy, ayx) + np.maximum(axy, ayx))

    return KernelField(family="symmetrized", L=float(L), raw=raw)


def eval_kernel(k: KernelField, x, y) -> np.ndarray | float:
    """Evaluate k at (x, y); arrays broadcast. Scalars in, scalar out."""
    scalar = np.ndim(x) == 0 and np.ndim(y) == 0
    x = np.asarray(x, dtype=float) * k.scale
    y = np.asarray(y, dtype=float) * k.scale
    x, y = np.broadcast_arrays(x, y)

    if k.family == "constant":
        out = np.full(x.shape, k.L)
    elif k.family == "symmetrized":
        out = np.broadcast_to(k.raw(x, y), x.shape).astype(float)
    else:
        i = np.floor(x / k.cell_size).astype(np.int64)
        j = np.floor(y / k.cell_size).astype(np.int64)
        if k.family == "two_phase_checkerboard":
            out = np.where((i + j) % 2 == 0, k.L, 1.0)
        elif k.family == "radial_layers":
            ia = np.floor(np.abs(x) / k.cell_size).astype(np.int64)
            ja = np.floor(np.abs(y) / k.cell_size).astype(np.int64)
            out = np.where(np.maximum(ia, ja) % 2 == 0, k.L, 1.0)
        elif k.family == "seeded_random_cells":
            out = 1.0 + (k.L - 1.0) * _pair_uniform(k.seed, i, j)
        else:  # pragma: no cover - guarded in construct_kernel
            raise KernelDomainError(f"unknown kernel family {k.family!r}")
    out = np.asarray(out, dtype=float)
    return float(out) if scalar else out
