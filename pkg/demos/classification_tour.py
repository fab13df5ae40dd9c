"""Which rigid rotations does a load prefer?

Builds the force matrix of each built-in load, rotates it so that the
identity becomes a maximizer, and reads the shape of the maximizing set off
the eigenvalue pair sums.  Run: ``python demos/classification_tour.py``.
"""

import warnings

import numpy as np

from optrot.forces import (
    assemble_force_matrix,
    gravity,
    radial_ball,
    tangential_2d,
    uniform_compression,
    uniform_tension,
)
from optrot.mesh import unit_ball, unit_square
from optrot.rotations import classify, normalize, pair_sums

np.set_printoptions(precision=4, suppress=True)

square = unit_square(16)
ball = unit_ball(2)

loads = [
    ("tension, square", square, uniform_tension(square)),
    ("compression, square", square, uniform_compression(square)),
    ("tangential, square", square, tangential_2d(square)),
    ("compression, ball", ball, uniform_compression(ball)),
    ("radial density, ball", ball, radial_ball(ball)),
    ("gravity, tilted density", ball, gravity(ball, density_gradient=(0.3, 0.0, 0.0))),
]

for name, mesh, field in loads:
    with warnings.catch_warnings():
        # the radial density integrates to zero only up to O(h^2)
        warnings.simplefilter("ignore")
        m = assemble_force_matrix(mesh, field)
    nf = normalize(m)
    rs = classify(nf)
    print(f"{name:26s} -> {rs.kind.value:15s} dim {rs.dim}")
    print(f"    eigenvalues {nf.eigenvalues}   pair sums {pair_sums(nf.eigenvalues)}")
    if rs.axis is not None:
        print(f"    circle axis (normalized frame) {rs.axis}")

# A compressed body may turn itself inside out: for n = 2 the half turn is the
# single maximizer, for n = 3 every half turn about an axis in a plane is.
nf = normalize(assemble_force_matrix(square, uniform_compression(square)))
print("\ncompression, square: best rotation\n", nf.rotation_to_frame)
