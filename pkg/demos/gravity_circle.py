"""A ball under gravity with a tilted density.

Gravity pulls on a body whose density grows along x.  The total force
vanishes (the mean density is subtracted), but the barycenter of the load
sits off the center, so a whole circle of rotations about one axis is
optimal.  We find the circle, pick the best member for the linearized
problem and follow a recovery sequence that leaves the circle in a normal
direction.  Pass ``--minimize`` to also run the nonlinear sweep (about 20 s).
"""

import sys

import numpy as np

from optrot.elasticity import TractionProblem, limit_energy, minimize_over_R, solve_linear
from optrot.forces import gravity
from optrot.harness import sweep_minimizers, sweep_recovery
from optrot.mesh import unit_ball
from optrot.rotations import tangent_normal

np.set_printoptions(precision=4, suppress=True)

ball = unit_ball(2)
problem = TractionProblem(ball, gravity(ball, density_gradient=(0.3, 0.0, 0.0)))
rs = problem.rotation_set
print(f"{ball.n_vertices} vertices, optimal set: {rs.kind.value}, axis {rs.force.rotation_to_frame @ rs.axis}")

best = minimize_over_R(problem)
print(f"best linearized energy {best.value:.6e}")

member = rs.circle_member(0.7)
r0 = rs.force.to_original(member)
normal = tangent_normal(rs, member).normal
w0 = 0.8 * normal[0] + 0.3 * normal[1]
u0 = solve_linear(problem, r0).u
target = limit_energy(problem, u0, r0, w0)

print(f"\nrecovery sequence, limit {target:.7f}, |W0| = {np.linalg.norm(w0):.4f}")
for r in sweep_recovery(problem, u0, r0, w0):
    print(f"  eps {r.epsilon:<6g} J/eps^2 {r.J_over_eps2:.7f}  dist/sqrt(eps) {r.dist_R_to_set_over_sqrt_eps:.4f}")

if "--minimize" in sys.argv:
    print("\nnonlinear minimizers")
    for r in sweep_minimizers(problem):
        print(f"  eps {r.epsilon:<6g} J/eps^2 {r.J_over_eps2:.7f}  dist {r.dist_R_to_set:.2e}  iters {r.solver_iters}")
