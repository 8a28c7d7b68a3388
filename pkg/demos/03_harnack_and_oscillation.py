"""Weak Harnack ratio and oscillation decay for rough kernels.

Annulus data: the solution is nonnegative, and inf over B_1/2 divided by the
mean over the annulus B_2 minus B_3/2 stays bounded below after the
L^(1 + delta) rescaling.  Sign data: the oscillation over B_r shrinks like
r^alpha and the fitted alpha stays away from zero.
"""
from nonlocal_lab import build_mesh, oscillation_sweep

mesh = build_mesh(1.0, 4.0, 256)
L_values = [1.0, 4.0, 16.0, 64.0]

rep = oscillation_sweep(L_values, 0.5, 0.1, "seeded_random_cells", [0, 1], mesh,
                        n_radii=3, base=4.0)
print(f"radii {rep.metadata['radii']}")
print(f"{'L':>5} {'seed':>4} {'osc':>26} {'alpha':>7} {'ratio':>8} {'sigma':>7}")
for row in rep.rows:
    osc = " ".join(f"{row[f'osc_{i}']:.4f}" for i in range(3))
    print(f"{row['L']:5.0f} {row['seed']:>4} {osc:>26} {row['alpha']:7.3f} "
          f"{row['harnack_ratio']:8.4f} {row['sigma']:7.4f}")
print({k: round(v, 4) for k, v in rep.constants.items()})
