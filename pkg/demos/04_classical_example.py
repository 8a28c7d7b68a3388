"""The classical 2-D example e^(sqrt(L) x) cos y.

It solves a diagonal elliptic equation with ellipticity ratio L, and its
sup/inf ratio on the unit ball grows like e^(2 sqrt(L)).  This is the
reason Harnack constants cannot be uniform in L.
"""
import numpy as np

from nonlocal_lab import classical_harnack_example

print(f"{'L':>5} {'sup':>12} {'inf':>10} {'c_H':>14} {'e^(2 sqrt L)':>14}")
for L in (1.0, 4.0, 16.0, 64.0):
    sup, inf, c_H = classical_harnack_example(L, 1.0, 128)
    print(f"{L:5.0f} {sup:12.4f} {inf:10.2e} {c_H:14.4e} {np.exp(2 * np.sqrt(L)):14.4e}")
