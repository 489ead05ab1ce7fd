"""Convexity of the negative level set K_x on 2x2 SPD matrices.

With F(x, y) = ln det y - ln det x, regularizing with the determinant keeps
K_x = {y : F~(x, y) < 0} geodesically convex, because det interpolates
geometrically along affine-invariant geodesics. Regularizing with the trace
instead can break convexity. This script evaluates the reference data, then
searches for pairs in K_x whose connecting geodesic leaves the set.
"""

import numpy as np

from bregprox.convexity import (REF_X, REF_Y1, REF_Y2, reproduce_reference_values,
                                spd_regularized, test_kx_convexity, verify_det_identities)
from bregprox.manifolds import SPDManifold

m = SPDManifold(2)

# determinant along a geodesic: det gamma(t) = det(y1)^(1-t) det(y2)^t
mid = m.geodesic(REF_Y1, REF_Y2)(0.5)
print("det y1, det y2, det of midpoint:", np.linalg.det(REF_Y1), np.linalg.det(REF_Y2),
      round(np.linalg.det(mid), 12))

ident = verify_det_identities(pairs=200)
print(f"det interpolation rel err {ident.det_identity_max_rel_err:.1e}, "
      f"closed form err {ident.closed_form_max_err:.1e}\n")

print("trace-Bregman reference values (lambda = 1):")
for line in reproduce_reference_values().lines():
    print("  " + line)
# The first two values agree with the reference to 1e-5. At the midpoint
# the computed value is -0.56105 against a published +0.56105, so this
# particular pair stays inside K_x.

for name in ("det", "trace"):
    g = spd_regularized(1.0, name)
    rep = test_kx_convexity(g, REF_X, pairs=100, seed=0)
    print(f"\n{name}-Bregman K_x probe: {rep.verdict} over {rep.pairs_tested} pairs")
    for v in rep.violations[:3]:
        print(f"  F~ at y1 {v.value_y1:.4f}, at y2 {v.value_y2:.4f}, at t={v.t:g} {v.value_t:.4f}"
              f"  (recomputed {v.recheck(g, REF_X):.4f})")
