"""Torsion function of the constant kernel against its closed form.

For k = 1 the solution of K u = 1 on (-1, 1) with u = 0 outside is
sin(pi s) / (2 pi) * (1 - x^2)^s.  We solve on a few meshes and watch the
nodal error shrink.
"""
import numpy as np

from nonlocal_lab import build_mesh, construct_kernel, solve_torsion

s = 0.5
kernel = construct_kernel("constant", 1.0)
probes = np.array([0.0, 0.25, 0.5, 0.75])


def exact(x):
    return np.sin(np.pi * s) / (2 * np.pi) * (1 - x**2) ** s


print(f"s = {s}, probes = {probes}")
print(f"{'n':>6} {'max error':>12} {'iterations':>11}")
previous = None
for n in (64, 128, 256, 512):
    u = solve_torsion(build_mesh(1.0, 8.0, n), kernel, s)
    err = np.max(np.abs(u(probes) - exact(probes)))
    rate = "" if previous is None else f"  rate {np.log2(previous / err):.2f}"
    print(f"{n:>6} {err:12.3e} {u.iterations:>11}{rate}")
    previous = err

# the profile shape is already right on a coarse mesh
u = solve_torsion(build_mesh(1.0, 8.0, 128), kernel, s)
x = np.linspace(-0.9, 0.9, 7).round(12) + 0.0
print("\nx        u_h(x)     exact")
for xi, a, b in zip(x, u(x), exact(x)):
    print(f"{xi:+.2f}  {a:.6f}  {b:.6f}")
