"""Torsion as s approaches 1.

With the kernel normalised as |x - y|^(-1 - 2s) and no (1 - s) prefactor,
the torsion function itself vanishes like (1 - s).  Dividing by (1 - s)
gives a quantity that settles; multiplying by it does not.
"""
from nonlocal_lab import build_mesh, construct_kernel, s_limit_trend

mesh = build_mesh(1.0, 4.0, 256)
for family, L in (("constant", 1.0), ("two_phase_checkerboard", 8.0)):
    rep = s_limit_trend([0.6, 0.7, 0.8, 0.9, 0.95], construct_kernel(family, L, 0.25), mesh)
    print(f"\n{family}, L = {L}")
    print(f"{'s':>5} {'u(0)':>10} {'u(0)/(1-s)':>11} {'(1-s)u(0)':>10}")
    for row in rep.rows:
        print(f"{row['s']:5.2f} {row['u_center']:10.5f} {row['u_center_over_1ms']:11.5f} "
              f"{row['one_minus_s_times_u_center']:10.5f}")
    print("variation:", {k: round(v, 3) for k, v in rep.constants.items()})
