"""In four dimensions a geodesic can leave the optimal set and come back.

The load F(A) = <diag(0, 0, 1, 1), A> is maximized by every rotation that
fixes the last two coordinates.  Rotating at two incommensurable speeds in
the two coordinate planes leaves that set at once, yet returns to an
optimal rotation different from the identity after a full turn in the
second plane.  Run: ``python demos/four_dim_geodesic.py``.
"""

import math

import numpy as np

from optrot.geometry import block_diagonal, exp_skew
from optrot.harness import appendix_demo

rep = appendix_demo()
for key in ("max_err_W0", "max_err_W1", "R1_minus_I_norm", "R1_is_optimal", "membership_matches_lattice"):
    print(f"{key:28s} {rep[key]}")

lam, mu = 1.0, math.sqrt(2.0)
w0 = block_diagonal([lam, mu], 4)
s = np.diag([0.0, 0.0, 1.0, 1.0])
print("\n  t        F(exp(t W0))")
for t in np.linspace(0, 2 * math.pi / mu, 9):
    print(f"  {t:6.3f}   {np.sum(s * exp_skew(t * w0)):+.6f}")
