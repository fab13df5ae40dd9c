import math

import numpy as np
import pytest

from optrot.elasticity import (
    DensityParams,
    ReferenceConfiguration,
    SolverOptions,
    TractionProblem,
    density,
    density_gradient,
    dist_to_rotations,
    energy_and_gradient,
    gauge_align,
    limit_energy,
    linear_energy,
    minimize_nonlinear,
    minimize_over_R,
    quadratic_form,
    recovery_sequence,
    reference_configuration,
    rescaled_displacement,
    solve_linear,
    total_energy,
)
from optrot.errors import IllPosedLoadError, InvalidArgumentError, IterationLimitError
from optrot.forces import ForceField, gravity, uniform_tension
from optrot.geometry import block, exp_skew, random_rotation
from optrot.rotations import tangent_normal

EPSILONS = (0.1, 0.05, 0.02, 0.01, 0.005)


def rot2(t):
    return exp_skew(block(t))


def random_positive(n, rng, dist_range):
    """Random ``A`` with ``det A > 0`` at a prescribed distance from SO(n)."""
    r = random_rotation(n, rng)
    s = rng.standard_normal((n, n))
    s = s + s.T
    s *= rng.uniform(*dist_range) / np.linalg.norm(s)
    return r @ (np.eye(n) + s)


# --------------------------------------------------------------------------
# density


def test_density_examples():
    p = DensityParams(1.0, 0.0)
    assert density(p, np.eye(2)) == 0.0
    np.testing.assert_array_equal(density_gradient(p, np.eye(2)), np.zeros((2, 2)))
    assert density(p, 2 * np.eye(2)) == pytest.approx(4.5)


def test_density_params_validation():
    with pytest.raises(InvalidArgumentError):
        DensityParams(0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        DensityParams(1.0, -0.1)


@pytest.mark.parametrize("n", [2, 3])
def test_density_gradient_matches_central_differences(n, rng):
    p = DensityParams(rng.uniform(0.5, 2), rng.uniform(0, 2))
    h = 1e-6
    for _ in range(20):
        a = rng.standard_normal((n, n))
        g = density_gradient(p, a)
        fd = np.zeros_like(a)
        for i in range(n):
            for j in range(n):
                e = np.zeros_like(a)
                e[i, j] = h
                fd[i, j] = (density(p, a + e) - density(p, a - e)) / (2 * h)
        assert np.linalg.norm(fd - g) <= 1e-6 * max(1.0, np.linalg.norm(g))


@pytest.mark.parametrize("n", [2, 3])
def test_frame_indifference(n, rng):
    p = DensityParams(1.3, 0.7)
    for _ in range(1000):
        a = rng.standard_normal((n, n))
        r = random_rotation(n, rng)
        w = density(p, a)
        assert density(p, r @ a) == pytest.approx(w, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("n", [2, 3])
def test_zero_set_and_positivity(n, rng):
    p = DensityParams(1.0, 1.0)
    for _ in range(100):
        assert density(p, random_rotation(n, rng)) <= 1e-28
        a = random_positive(n, rng, (0.1, 1.0))
        if np.linalg.det(a) > 0 and 0.1 <= dist_to_rotations(a) <= 1.0:
            assert density(p, a) > 0


@pytest.mark.parametrize("n", [2, 3])
def test_coercivity_sample(n, rng):
    p = DensityParams(rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0))
    checked = 0
    while checked < 1000:
        a = random_positive(n, rng, (0.0, 0.5))
        d = dist_to_rotations(a)
        if np.linalg.det(a) <= 0 or d > 0.5:
            continue
        assert density(p, a) >= 0.2 * p.mu * d * d - 1e-15
        checked += 1


@pytest.mark.parametrize("n", [2, 3])
def test_hessian_at_identity_is_twice_q(n, rng):
    p = DensityParams(rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0))
    h = 1e-4
    for _ in range(50):
        b = rng.standard_normal((n, n))
        second = (density(p, np.eye(n) + h * b) - 2 * density(p, np.eye(n)) + density(p, np.eye(n) - h * b)) / h**2
        q = quadratic_form(p, b)
        assert abs(second - 2 * q) <= 1e-5 * max(1.0, abs(q))


def test_density_expansion_ratio():
    p = DensityParams(1.0, 1.0)
    b = np.array([[0.3, -1.0], [0.4, 0.2]])
    errs = [abs(density(p, np.eye(2) + t * b) / (t * t * quadratic_form(p, b)) - 1) for t in (1e-1, 1e-2, 1e-3)]
    assert errs[1] < 0.2 * errs[0] and errs[2] < 0.2 * errs[1]


@pytest.mark.parametrize("n", [2, 3])
def test_quadratic_form_properties(n, rng):
    p = DensityParams(rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0))
    for _ in range(100):
        b = rng.standard_normal((n, n))
        sym = 0.5 * (b + b.T)
        assert quadratic_form(p, b) == quadratic_form(p, sym)
        assert quadratic_form(p, b) >= p.mu * np.sum(sym * sym) - 1e-14


# --------------------------------------------------------------------------
# finite energy


def test_total_energy_identity_is_zero(tension8):
    e = total_energy(tension8, tension8.mesh.vertices, 0.1)
    assert e.J == 0.0 and e.elastic == 0.0


def test_total_energy_rigid_rotation(tension8):
    x = tension8.mesh.vertices
    eps = 0.01
    e = total_energy(tension8, x @ rot2(0.1).T, eps)
    assert e.elastic <= 1e-28
    assert e.J == pytest.approx(-eps * 2 * (math.cos(0.1) - 1), rel=1e-10)
    assert e.J == pytest.approx(9.99167e-5, rel=1e-5)
    assert e.J == pytest.approx(e.elastic - e.traction_work - e.body_work)


def test_total_energy_vanishes_on_optimal_rotations(ball2):
    problem = TractionProblem(ball2, gravity(ball2, density_gradient=(0.3, 0.0, 0.0)))
    rs = problem.rotation_set
    x = ball2.vertices
    for t in (0.0, 1.0, 2.5):
        r = rs.force.to_original(rs.circle_member(t))
        assert abs(total_energy(problem, x @ r.T, 0.1).J) <= 1e-14
    rng = np.random.default_rng(0)
    r = random_rotation(3, rng)
    assert total_energy(problem, x @ r.T, 0.1).J >= 0


def test_total_energy_rejects_bad_input(tension8):
    with pytest.raises(InvalidArgumentError):
        total_energy(tension8, np.zeros((3, 2)), 0.1)


def test_energy_gradient_matches_finite_differences(tension8):
    rng = np.random.default_rng(3)
    x = tension8.mesh.vertices
    y = x + 0.05 * rng.standard_normal(x.shape)
    v = rng.standard_normal(x.shape)
    f, g = energy_and_gradient(tension8, y, 0.1)
    h = 1e-6
    fd = (energy_and_gradient(tension8, y + h * v, 0.1)[0] - energy_and_gradient(tension8, y - h * v, 0.1)[0]) / (2 * h)
    assert fd == pytest.approx(np.sum(g * v), rel=1e-6)
    assert f == pytest.approx(total_energy(tension8, y, 0.1).J, abs=1e-14)


def test_minimize_zero_forces_returns_identity(square8):
    problem = TractionProblem(square8, ForceField.zeros(square8))
    res = minimize_nonlinear(problem, 0.1)
    np.testing.assert_array_equal(res.y, square8.vertices)
    assert res.iterations == 0 and res.converged


def test_minimize_tension_in_bracket(tension8):
    eps = 0.05
    res = minimize_nonlinear(tension8, eps)
    assert res.converged
    assert -0.25 - 0.01 <= res.energy.J / eps**2 <= 0
    assert res.grad_norm <= SolverOptions().gtol * max(1.0, eps)


def test_minimize_descends_from_a_non_optimal_rotation(tension8):
    x = tension8.mesh.vertices
    init = x @ rot2(0.4).T
    eps = 0.05
    res = minimize_nonlinear(tension8, eps, init=init)
    assert res.energy.J < total_energy(tension8, init, eps).J
    hist = np.array(res.history)
    assert np.all(np.diff(hist) <= 0)


def test_minimize_iteration_limit_carries_best(tension8):
    with pytest.raises(IterationLimitError) as info:
        minimize_nonlinear(tension8, 0.05, opts=SolverOptions(max_iters=1))
    assert info.value.best.shape == tension8.mesh.vertices.shape
    assert info.value.value <= 0


# --------------------------------------------------------------------------
# reference configuration and rescaled displacement


def test_reference_configuration_exact_rigid(square8):
    q = rot2(0.7)
    d = np.array([0.3, -1.2])
    ref = reference_configuration(square8, square8.vertices @ q.T + d)
    np.testing.assert_allclose(ref.rotation, q, atol=1e-12)
    np.testing.assert_allclose(ref.translation, d, atol=1e-12)
    assert ref.residual <= 1e-20


def test_reference_configuration_identity(square8):
    ref = reference_configuration(square8, square8.vertices)
    np.testing.assert_allclose(ref.rotation, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(ref.translation, 0, atol=1e-14)


def _fit_residual(mesh, y, theta):
    q = rot2(theta)
    d = mesh.mean(y) - q @ mesh.mean(mesh.vertices)
    diff = y - (mesh.vertices @ q.T + d)
    gd = mesh.gradient(y) - q
    return mesh.l2_inner(diff, diff) + float(mesh.cell_measures @ np.sum(gd * gd, axis=(1, 2)))


def test_reference_configuration_of_perturbed_rotation(square8):
    mesh = square8
    x = mesh.vertices
    q = rot2(1.1)
    v = np.column_stack([np.sin(3 * x[:, 1]), x[:, 0] ** 2])
    y = (x + 1e-3 * v) @ q.T
    ref = reference_configuration(mesh, y)
    assert np.linalg.norm(ref.rotation - q) <= 5e-3
    grid = np.linspace(-math.pi, math.pi, 20001)
    best = grid[np.argmin([_fit_residual(mesh, y, t) for t in grid])]
    np.testing.assert_allclose(ref.rotation, rot2(best), atol=1e-3)
    # global minimum against perturbed rotations
    theta = math.atan2(ref.rotation[0, 1], ref.rotation[0, 0])
    base = _fit_residual(mesh, y, theta)
    assert base == pytest.approx(ref.residual, rel=1e-8, abs=1e-16)
    assert all(_fit_residual(mesh, y, theta + dt) >= base for dt in (-1e-3, 1e-3, -0.1, 0.1, 2.0))


def test_rescaled_displacement_identities(square8):
    x = square8.vertices
    r, c = rot2(0.3), np.array([1.0, 2.0])
    ref = ReferenceConfiguration(r, c)
    np.testing.assert_allclose(rescaled_displacement(square8, x @ r.T + c, ref, 0.1), 0, atol=1e-14)
    v = np.column_stack([x[:, 0] * x[:, 1], -x[:, 0]])
    eps = 0.01
    u = rescaled_displacement(square8, (x + eps * v) @ r.T, ReferenceConfiguration(r, np.zeros(2)), eps)
    np.testing.assert_allclose(u, v, atol=1e-12)
    with pytest.raises(InvalidArgumentError):
        rescaled_displacement(square8, x, ref, 0.0)


# --------------------------------------------------------------------------
# linearized problem


def test_solve_linear_zero_forces(square8):
    sol = solve_linear(TractionProblem(square8, ForceField.zeros(square8)))
    np.testing.assert_array_equal(sol.u, np.zeros_like(square8.vertices))
    assert sol.value == 0.0


@pytest.mark.parametrize("mu, lam", [(1.0, 1.0), (2.0, 0.0), (0.7, 2.3)])
def test_solve_linear_homogeneous_tension(square8, mu, lam):
    problem = TractionProblem(square8, uniform_tension(square8), DensityParams(mu, lam))
    sol = solve_linear(problem)
    s = 1.0 / (2 * (mu + lam))
    x = square8.vertices
    np.testing.assert_allclose(sol.u, s * (x - x.mean(axis=0)), atol=1e-12)
    assert sol.value == pytest.approx(-1.0 / (2 * (mu + lam)), rel=1e-12)
    assert sol.residual <= 1e-10


def test_solve_linear_rejects_non_optimal_rotation(tension8):
    with pytest.raises(IllPosedLoadError):
        solve_linear(tension8, rot2(0.2))


def test_gauge_invariance_of_linear_energy(rng, tangential8, tension8):
    for problem, r0 in ((tension8, np.eye(2)), (tangential8, random_rotation(2, rng))):
        x = problem.mesh.vertices
        u = rng.standard_normal(x.shape)
        a = rng.standard_normal() * block(1.0)
        b = rng.standard_normal(2)
        j0 = linear_energy(problem, u, r0)
        assert abs(linear_energy(problem, u + x @ a.T + b, r0) - j0) <= 1e-10 * max(1, abs(j0))


def test_gauge_align_removes_rigid_motions(square8, rng):
    x = square8.vertices
    u = np.column_stack([x[:, 0] ** 2, np.sin(x[:, 1])])
    moved = u + x @ (0.7 * block(1.0)).T + np.array([0.2, -0.5])
    np.testing.assert_allclose(gauge_align(square8, moved), gauge_align(square8, u), atol=1e-12)


def test_minimize_over_r_singleton_matches_solve_linear(tension8):
    a = minimize_over_R(tension8)
    b = solve_linear(tension8)
    np.testing.assert_allclose(a.u, b.u)
    assert a.value == b.value


def test_minimize_over_r_zero_forces(square8):
    res = minimize_over_R(TractionProblem(square8, ForceField.zeros(square8)))
    assert res.value == 0.0


def test_minimize_over_r_tangential_matches_exhaustive_grid(tangential8):
    res = minimize_over_R(tangential8)
    grid = np.linspace(-math.pi, math.pi, 4096, endpoint=False)
    best = min(solve_linear(tangential8, rot2(t)).value for t in grid[::64])
    dense = min(tangential8.reduced_value(rot2(t)) for t in grid)
    assert abs(res.value - dense) <= 1e-4
    assert res.value <= best + 1e-12
    assert res.value == pytest.approx(solve_linear(tangential8, res.rotation).value, abs=1e-12)


def test_minimize_over_r_circle_beats_every_seed(ball2):
    problem = TractionProblem(ball2, gravity(ball2, density_gradient=(0.3, 0.0, 0.0)))
    rs = problem.rotation_set
    res = minimize_over_R(problem)
    for t in np.linspace(-math.pi, math.pi, 32, endpoint=False):
        assert res.value <= problem.reduced_value(rs.force.to_original(rs.circle_member(t))) + 1e-14


# --------------------------------------------------------------------------
# recovery sequences and the limit energy


def test_recovery_trivial(square8):
    r0 = rot2(0.4)
    y = recovery_sequence(square8, None, r0, np.zeros((2, 2)), 0.1)
    np.testing.assert_allclose(y, square8.vertices @ r0.T, atol=1e-15)


def test_recovery_tension_closed_form(tension8):
    for eps in EPSILONS:
        y = recovery_sequence(tension8.mesh, None, np.eye(2), block(1.0), eps, tension8)
        j = total_energy(tension8, y, eps).J
        assert j == pytest.approx(-2 * eps * (math.cos(math.sqrt(eps)) - 1), rel=1e-10)
        ref = reference_configuration(tension8.mesh, y)
        np.testing.assert_allclose(ref.rotation, exp_skew(math.sqrt(eps) * block(1.0)), atol=1e-12)


def test_recovery_rejects_tangential_w0(tangential8):
    # every skew matrix is tangent when the optimal set is all of SO(2)
    with pytest.raises(InvalidArgumentError):
        recovery_sequence(tangential8.mesh, None, np.eye(2), block(1.0), 0.1, tangential8)


def test_limit_energy_examples(tension8):
    zero = np.zeros((2, 2))
    assert limit_energy(tension8, None, np.eye(2), zero) == 0.0
    x = tension8.mesh.vertices
    assert limit_energy(tension8, (x - x.mean(axis=0)) / 4, np.eye(2), zero) == pytest.approx(-0.25, rel=1e-12)
    assert limit_energy(tension8, None, np.eye(2), block(1.0)) == pytest.approx(1.0, rel=1e-14)


def _recovery_examples(tension8, ball2):
    lin = solve_linear(tension8)
    yield tension8, None, np.eye(2), block(1.0)
    yield tension8, lin.u, np.eye(2), np.zeros((2, 2))
    grav = TractionProblem(ball2, gravity(ball2, density_gradient=(0.3, 0.0, 0.0)))
    rs = grav.rotation_set
    member = rs.circle_member(0.7)
    normal = tangent_normal(rs, member).normal
    r0 = rs.force.to_original(member)
    yield grav, solve_linear(grav, r0).u, r0, 0.8 * normal[0] + 0.3 * normal[1]


def test_recovery_energy_converges_at_sqrt_eps(tension8, ball2):
    for problem, u0, r0, w0 in _recovery_examples(tension8, ball2):
        limit = limit_energy(problem, u0, r0, w0)
        devs = []
        for eps in EPSILONS:
            y = recovery_sequence(problem.mesh, u0, r0, w0, eps, problem)
            devs.append(abs(total_energy(problem, y, eps).J / eps**2 - limit))
        c = max(devs[0] / math.sqrt(EPSILONS[0]), devs[1] / math.sqrt(EPSILONS[1]))
        for eps, d in zip(EPSILONS[2:], devs[2:]):
            assert d <= c * math.sqrt(eps) + 1e-12


def test_limit_energy_normal_term_is_nonnegative(ball2, rng):
    problem = TractionProblem(ball2, gravity(ball2, density_gradient=(0.3, 0.0, 0.0)))
    rs = problem.rotation_set
    member = rs.circle_member(rng.uniform(-3, 3))
    r0 = rs.force.to_original(member)
    for w in tangent_normal(rs, member).normal:
        assert -0.5 * problem.F(r0 @ w @ w) >= 0
