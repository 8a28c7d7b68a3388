"""Reference values computed without the package's quadrature or solver."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_legendre


def exact_torsion(x, s: float) -> np.ndarray:
    """Torsion of the unit-kernel form on (-1, 1): sin(pi s)/(2 pi) (1 - x^2)_+^s."""
    x = np.asarray(x, dtype=float)
    return np.sin(np.pi * s) / (2 * np.pi) * np.clip(1 - x * x, 0.0, None) ** s


def hat(center: float, h: float):
    def phi(x):
        return np.clip(1.0 - np.abs(np.asarray(x, dtype=float) - center) / h, 0.0, None)
    return phi


def seminorm_sq_oracle(f, kinks, a: float, b: float, s: float) -> float:
    """int_a^b int_a^b (f(x) - f(y))^2 |x - y|^(-1-2s) dx dy for piecewise-linear f.

    Substituting z = x - y gives 2 int_0^(b-a) z^(-1-2s) G(z) dz with
    G(z) = int_a^(b-z) (f(y+z) - f(y))^2 dy. G is integrated exactly per
    polynomial piece; the z integral uses adaptive quadrature with the
    algebraic endpoint weight on the first piece.
    """
    kinks = np.asarray(sorted(k for k in kinks if a < k < b))
    g3, w3 = roots_legendre(3)

    def G(z):
        bps = np.concatenate([[a, b - z], kinks, kinks - z])
        bps = np.unique(np.clip(bps, a, b - z))
        lo, hi = bps[:-1], bps[1:]
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        y = mid[:, None] + half[:, None] * g3[None, :]
        vals = (f(y + z) - f(y)) ** 2
        return float(np.sum(half * (vals @ w3)))

    length = b - a
    diffs = np.unique(np.abs(np.subtract.outer(np.r_[a, kinks, b], np.r_[a, kinks, b])))
    diffs = diffs[(diffs > 0) & (diffs < length)]
    z0 = diffs.min() if diffs.size else length
    # near z = 0, G(z) = z^2 * (smooth), so weight z^(1-2s) is exact
    def G_over_z2(z):
        z = max(z, 1e-9 * z0)  # QAWS may sample the endpoint itself
        return G(z) / z**2

    total = quad(G_over_z2, 0.0, z0, weight="alg", wvar=(1 - 2 * s, 0.0),
                 epsabs=1e-13, epsrel=1e-10, limit=200)[0]
    edges = np.r_[z0, diffs[diffs > z0], length]
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += quad(lambda z: G(z) * z ** (-1 - 2 * s), lo, hi,
                      epsabs=1e-13, epsrel=1e-10, limit=200)[0]
    return 2.0 * total


def richardson(values, ratio: float = 2.0, order: float | None = None) -> float:
    """Extrapolate a sequence at h, h/ratio, h/ratio^2 (order estimated if None)."""
    v0, v1, v2 = values
    if order is None:
        order = math.log(abs((v1 - v0) / (v2 - v1))) / math.log(ratio)
    return v2 + (v2 - v1) / (ratio**order - 1)
