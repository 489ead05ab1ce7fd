"""Probe the standing conditions of the orthant example before solving it.

Monotonicity, convexity in the second argument and the coercivity of the
regularized bifunction are checked by sampling. The checkers report, they
do not certify: a passing probe is evidence, a failing one is a concrete
counterexample that can be re-evaluated.
"""

import numpy as np

from bregprox import check_c6, check_level_set_bounded, check_monotone, make_bregman
from bregprox.equilibrium import (check_upper_lower_semicontinuity, make_distance_squared,
                                  make_example1)
from bregprox.manifolds import PositiveOrthant

f = make_example1()
x0 = np.array([20.0, 5.0, 3.0])

mono = check_monotone(f, 500)
# F(x, y) + F(y, x) = -3 (s(x) - s(y))^2 with s = ln(x1 x2 / x3)
print(f"monotone: {mono.holds}, max F(x,y)+F(y,x) = {mono.max_sum:.3e}")

control = check_monotone(make_distance_squared(PositiveOrthant(3)), 50)
print(f"negative control d(x,y)^2: monotone {control.holds} ({control.violations} violations)")

semi = check_upper_lower_semicontinuity(f, 100)
print(f"continuous {semi.continuity_holds}, convex in y {semi.convexity_holds}\n")

for key in ("org", "breg1", "breg2"):
    phi = make_bregman(key)
    level = check_level_set_bounded(phi, x0, 10.0, np.geomspace(0.1, 30, 15), 16)
    c6 = check_c6(f, phi, x0, 0.3)
    print(f"{key}: level set bounded {level.bounded}; regularized bifunction at the largest "
          f"probe radius min {c6.min_at_largest_radius:.3e}, first positive radius "
          f"{c6.first_positive_radius}")

# Breg2 grows only like r ln r along rays, so along y = x0 exp(r e3) the
# linear decrease of F wins and the regularized value stays negative.
phi = make_bregman("breg2")
for r in (1.0, 10.0, 50.0):
    y = x0 * np.exp([0.0, 0.0, r])
    print(f"breg2 along e3, r = {r:>4g}: {f(x0, y) + 0.3 * (phi.distance(x0, y) + phi.distance(y, x0)):.2f}")
