"""Small loads on a unit square under uniform tension.

For loads of size eps the minimal energy behaves like eps^2 times the
linearized minimum -1 / (2 (mu + lambda)), the minimizers settle at the
identity rotation, and their rescaled displacements approach
(x - x_bar) / (2 (mu + lambda)).  A recovery sequence that wobbles off the
optimal rotation at rate sqrt(eps) pays a positive price instead.
Run: ``python demos/tension_gamma_limit.py``.
"""

import numpy as np

from optrot.elasticity import DensityParams, TractionProblem, limit_energy, solve_linear
from optrot.forces import uniform_tension
from optrot.geometry import block
from optrot.harness import fit_rate, sweep_minimizers, sweep_recovery
from optrot.mesh import unit_square

mesh = unit_square(32)
problem = TractionProblem(mesh, uniform_tension(mesh), DensityParams(mu=1.0, lam=1.0))

lin = solve_linear(problem)
print(f"linearized minimum {lin.value:.6f} (closed form -0.25)")


def table(title, records):
    print(f"\n{title}")
    print(" eps      J/eps^2     dist/sqrt(eps)   u error   iters")
    for r in records:
        print(f" {r.epsilon:<7g}  {r.J_over_eps2:+.6f}  {r.dist_R_to_set_over_sqrt_eps:12.3e}  "
              f"{r.u_error_L2:9.2e}  {r.solver_iters:5d}")


minimizers = sweep_minimizers(problem)
table("nonlinear minimizers", minimizers)
dev = [abs(r.J_over_eps2 - lin.value) * r.epsilon**2 for r in minimizers]
print("slope of |J - eps^2 J_lin| in eps:", round(fit_rate(x=[r.epsilon for r in minimizers], y=dev).slope, 3))

w0 = block(1.0)
recovery = sweep_recovery(problem, None, np.eye(2), w0)
table("recovery sequence with W0 = A(1)", recovery)
print("limit energy", limit_energy(problem, None, np.eye(2), w0))
print("slope of the rotation distance:", round(fit_rate(recovery, "epsilon", "dist_R_to_set").slope, 4))
