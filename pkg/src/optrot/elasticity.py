"""Finite and linearized elasticity for pure traction problems on P1 meshes.

The stored energy is the quartic

    W(A) = mu/4 |A^T A - I|^2 + lam/8 (tr(A^T A - I))^2,

frame indifferent, zero on SO(n), with second-order expansion ``Q(B) =
mu |sym B|^2 + lam/2 (tr B)^2`` at the identity.  It also vanishes on
orientation-reversing isometries; every computation here stays in the
``det > 0`` basin around the identity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.optimize
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    IllPosedLoadError,
    InvalidArgumentError,
    IterationLimitError,
)
from .forces import ForceField, ForceMatrix, assemble_force_matrix, load_vectors
from .geometry import exp_skew, max_trace_rotation
from .lbfgs import lbfgs
from .mesh import Mesh
from .rotations import (
    Kind,
    NormalizedForce,
    OptimalRotationSet,
    classify,
    default_tau,
    normalize,
    quaternion_chart,
    tangent_normal,
)


@dataclass(frozen=True)
class DensityParams:
    mu: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidArgumentError("mu must be positive")
        if not self.lam >= 0:
            raise InvalidArgumentError("lambda must be nonnegative")


def density(params: DensityParams, a) -> np.ndarray:
    """Stored energy ``W(A)``; vectorized over leading axes."""
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    e = np.swapaxes(a, -1, -2) @ a - np.eye(n)
    tr = np.trace(e, axis1=-2, axis2=-1)
    return 0.25 * params.mu * np.sum(e * e, axis=(-2, -1)) + 0.125 * params.lam * tr**2


def density_gradient(params: DensityParams, a) -> np.ndarray:
    """``dW/dA = mu A E + lam/2 tr(E) A`` with ``E = A^T A - I``."""
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    e = np.swapaxes(a, -1, -2) @ a - np.eye(n)
    tr = np.trace(e, axis1=-2, axis2=-1)
    return params.mu * (a @ e) + 0.5 * params.lam * tr[..., None, None] * a


def quadratic_form(params: DensityParams, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    s = 0.5 * (b + np.swapaxes(b, -1, -2))
    tr = np.trace(s, axis1=-2, axis2=-1)
    return params.mu * np.sum(s * s, axis=(-2, -1)) + 0.5 * params.lam * tr**2


def dist_to_rotations(a) -> float:
    """Frobenius distance from ``A`` (with ``det A > 0``) to SO(n)."""
    u, s, vt = np.linalg.svd(np.asarray(a, dtype=float))
    d = np.ones_like(s)
    d[-1] = np.sign(np.linalg.det(u @ vt))
    return float(np.linalg.norm(s - d))


# --------------------------------------------------------------------------
# problem setup


class TractionProblem:
    """A mesh, equilibrated forces and a density, with cached assembly.

    Holds the nodal load vectors, the force matrix, the linear elastic
    stiffness and the factorized gauge-constrained saddle-point system.
    """

    def __init__(self, mesh: Mesh, field: ForceField, params: DensityParams | None = None):
        field.check_shape(mesh)
        self.mesh = mesh
        self.field = field
        self.params = params or DensityParams()

    @cached_property
    def loads(self) -> tuple[np.ndarray, np.ndarray]:
        return load_vectors(self.mesh, self.field)

    @property
    def load(self) -> np.ndarray:
        lt, lb = self.loads
        return lt + lb

    @cached_property
    def force_matrix(self) -> ForceMatrix:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return assemble_force_matrix(self.mesh, self.field)

    @cached_property
    def normalized(self) -> NormalizedForce:
        return normalize(self.force_matrix)

    @cached_property
    def rotation_set(self) -> OptimalRotationSet:
        return classify(self.normalized)

    @property
    def tau(self) -> float:
        return default_tau(self.force_matrix)

    def F(self, a) -> float:
        return self.force_matrix(a)

    @cached_property
    def optimal_placement(self) -> np.ndarray:
        """Nodes of ``R_bar x`` for an optimal rotation ``R_bar`` (``x`` itself when I is optimal)."""
        r_bar = self.normalized.rotation_to_frame
        if np.allclose(r_bar, np.eye(self.mesh.n), atol=0, rtol=0):
            return self.mesh.vertices
        return self.mesh.vertices @ r_bar.T

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """Stiffness of ``u -> int Q(e(u))``, node-major dofs ``a * n + i``."""
        mesh, p = self.mesh, self.params
        n = mesh.n
        g = mesh.shape_gradients
        vol = mesh.cell_measures
        gg = np.einsum("cak,cbk->cab", g, g)
        # K[(a,i),(b,j)] = |T| (mu (d_ij Ga.Gb + Ga_j Gb_i) + lam Ga_i Gb_j)
        loc = (
            p.mu * np.einsum("cab,ij->caibj", gg, np.eye(n))
            + p.mu * np.einsum("caj,cbi->caibj", g, g)
            + p.lam * np.einsum("cai,cbj->caibj", g, g)
        ) * vol[:, None, None, None, None]
        dofs = (mesh.cells[:, :, None] * n + np.arange(n)[None, None, :]).reshape(len(vol), -1)
        m = dofs.shape[1]
        rows = np.repeat(dofs, m, axis=1).ravel()
        cols = np.tile(dofs, (1, m)).ravel()
        size = mesh.n_vertices * n
        return sp.csr_matrix((loc.reshape(len(vol), m, m).ravel(), (rows, cols)), shape=(size, size))

    @cached_property
    def gauge_constraints(self) -> np.ndarray:
        """Rows: ``int u_i`` and ``int (d_j u_i - d_i u_j)``, i < j."""
        mesh = self.mesh
        n = mesh.n
        size = mesh.n_vertices * n
        rows = []
        for i in range(n):
            r = np.zeros((mesh.n_vertices, n))
            r[:, i] = mesh.lumped_mass
            rows.append(r.ravel())
        wg = mesh.shape_gradients * mesh.cell_measures[:, None, None]
        for i in range(n):
            for j in range(i + 1, n):
                r = np.zeros((mesh.n_vertices, n))
                np.add.at(r[:, i], mesh.cells.ravel(), wg[:, :, j].ravel())
                np.add.at(r[:, j], mesh.cells.ravel(), -wg[:, :, i].ravel())
                rows.append(r.ravel())
        out = np.array(rows)
        assert out.shape[1] == size
        return out

    @cached_property
    def _saddle(self):
        k = self.stiffness
        c = sp.csr_matrix(self.gauge_constraints)
        system = sp.bmat([[k, c.T], [c, None]], format="csc")
        return spla.splu(system)

    def solve_gauged(self, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Solve ``K u + C^T lam = rhs``, ``C u = 0``; ``rhs`` may have several columns."""
        rhs = np.asarray(rhs, dtype=float)
        m = self.gauge_constraints.shape[0]
        flat = rhs.reshape(rhs.shape[0], -1)
        full = np.vstack([flat, np.zeros((m, flat.shape[1]))])
        sol = self._saddle.solve(full)
        u = sol[: rhs.shape[0]].reshape(rhs.shape)
        lagrange = sol[rhs.shape[0]:].reshape((m,) + rhs.shape[1:])
        return u, lagrange

    @cached_property
    def _reduced_gram(self) -> np.ndarray:
        """``G`` with ``min_u J(u, R) = -1/2 vec(R)^T G vec(R)`` for optimal ``R``."""
        n = self.mesh.n
        load = self.load
        cols = []
        for i in range(n):
            for k in range(n):
                e = np.zeros_like(load)
                e[:, k] = load[:, i]
                cols.append(e.ravel())
        basis = np.column_stack(cols)
        u, _ = self.solve_gauged(basis)
        return basis.T @ u

    def reduced_value(self, r) -> float:
        """``min_u J(u, R)`` over the gauge space, via the cached Gram matrix."""
        v = np.asarray(r, dtype=float).ravel()
        return float(-0.5 * v @ self._reduced_gram @ v)


# --------------------------------------------------------------------------
# finite elasticity


@dataclass(frozen=True)
class EnergyBreakdown:
    """``J = elastic - traction_work - body_work``.

    The work terms are measured from an optimal rigid placement ``R_bar x``,
    so ``J`` vanishes on optimal rotations; when the identity is optimal
    this is the work relative to ``x``.
    """

    elastic: float
    traction_work: float
    body_work: float
    J: float
    epsilon: float


def _elastic(problem: TractionProblem, y: np.ndarray):
    mesh = problem.mesh
    grad = mesh.gradient(y)
    vol = mesh.cell_measures
    return float(vol @ density(problem.params, grad)), grad


def total_energy(problem: TractionProblem, y, eps: float) -> EnergyBreakdown:
    mesh = problem.mesh
    y = np.asarray(y, dtype=float)
    if y.shape != mesh.vertices.shape or not np.all(np.isfinite(y)):
        raise InvalidArgumentError("deformation must be a finite (V, n) array")
    elastic, _ = _elastic(problem, y)
    lt, lb = problem.loads
    disp = y - problem.optimal_placement
    tw = eps * float(np.sum(lt * disp))
    bw = eps * float(np.sum(lb * disp))
    return EnergyBreakdown(elastic, tw, bw, elastic - tw - bw, eps)


def energy_and_gradient(problem: TractionProblem, y: np.ndarray, eps: float):
    mesh = problem.mesh
    elastic, grad = _elastic(problem, y)
    stress = density_gradient(problem.params, grad) * mesh.cell_measures[:, None, None]
    per_node = np.einsum("cij,caj->cai", stress, mesh.shape_gradients)
    g = np.zeros_like(y)
    np.add.at(g, mesh.cells.ravel(), per_node.reshape(-1, mesh.n))
    load = problem.load
    value = elastic - eps * float(np.sum(load * (y - problem.optimal_placement)))
    return value, g - eps * load


@dataclass
class SolverOptions:
    gtol: float = 1e-9
    max_iters: int = 5000
    memory: int = 20
    seed: int = 0


@dataclass
class NonlinearResult:
    y: np.ndarray
    energy: EnergyBreakdown
    iterations: int
    converged: bool
    grad_norm: float
    history: list = field(repr=False, default_factory=list)


def minimize_nonlinear(problem: TractionProblem, eps: float, init=None,
                       opts: SolverOptions | None = None) -> NonlinearResult:
    """Minimize ``J_eps`` by preconditioned L-BFGS.

    The preconditioner is ``(K + eps M)^-1`` with ``K`` the linear elastic
    stiffness and ``M`` the lumped mass; translations are removed after
    every step.  The rotational gauge is left free.  Raises
    :class:`IterationLimitError` (carrying the best iterate) when the
    gradient tolerance ``gtol * max(1, eps)`` is not reached.
    """
    opts = opts or SolverOptions()
    mesh = problem.mesh
    n = mesh.n
    x = mesh.vertices
    y0 = x.copy() if init is None else np.array(init, dtype=float)
    shape = y0.shape

    delta = max(eps, 1e-8) * problem.params.mu
    pre = (problem.stiffness + sp.diags(np.repeat(mesh.lumped_mass, n) * delta)).tocsc()
    lu = spla.splu(pre)
    weights = mesh.lumped_mass / mesh.volume

    def fg(v):
        val, g = energy_and_gradient(problem, v.reshape(shape), eps)
        return val, g.ravel()

    def recenter(v):
        y = v.reshape(shape)
        shift = weights @ (y - x)
        return (y - shift).ravel()

    try:
        res = lbfgs(fg, y0.ravel(), gtol=opts.gtol * max(1.0, eps), max_iters=opts.max_iters,
                    memory=opts.memory, precondition=lu.solve, recenter=recenter)
    except IterationLimitError as exc:
        exc.best = exc.best.reshape(shape)
        raise
    y = res.x.reshape(shape)
    return NonlinearResult(y, total_energy(problem, y, eps), res.iterations, res.converged,
                           res.grad_norm, res.history)


@dataclass(frozen=True)
class ReferenceConfiguration:
    rotation: np.ndarray
    translation: np.ndarray
    residual: float = 0.0
    unique: bool = True


def reference_configuration(mesh: Mesh, y) -> ReferenceConfiguration:
    """Rigid motion ``Qx + d`` closest to ``y`` in the W^{1,2} norm.

    With L2-weighted means ``y_bar, x_bar`` the translation is
    ``d = y_bar - Q x_bar`` and ``Q`` maximizes ``<Q, K>`` for
    ``K = int (y - y_bar)(x - x_bar)^T + int grad y``.
    """
    y = np.asarray(y, dtype=float)
    x = mesh.vertices
    y_bar = mesh.mean(y)
    x_bar = mesh.mean(x)
    yc, xc = y - y_bar, x - x_bar
    k = yc.T @ (mesh.mass_matrix @ xc) + np.einsum("c,cij->ij", mesh.cell_measures, mesh.gradient(y))
    best = max_trace_rotation(k)
    q = best.rotation
    d = y_bar - q @ x_bar
    diff = y - (x @ q.T + d)
    residual = mesh.l2_inner(diff, diff) + float(
        mesh.cell_measures @ np.sum((mesh.gradient(y) - q) ** 2, axis=(1, 2))
    )
    return ReferenceConfiguration(q, d, residual, best.unique)


def rescaled_displacement(mesh: Mesh, y, ref: ReferenceConfiguration, eps: float) -> np.ndarray:
    """``u = R^T (y - (R x + c)) / eps`` at the nodes."""
    if not eps > 0:
        raise InvalidArgumentError("epsilon must be positive")
    r = ref.rotation
    return (np.asarray(y, dtype=float) - mesh.vertices @ r.T - ref.translation) @ r / eps


def rigid_part(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """L2-orthogonal projection of ``u`` onto infinitesimal rigid motions ``Ax + b``."""
    n = mesh.n
    x = mesh.vertices - mesh.mean(mesh.vertices)
    basis = [np.tile(np.eye(n)[i], (mesh.n_vertices, 1)) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            a = np.zeros((n, n))
            a[i, j], a[j, i] = 1.0, -1.0
            basis.append(x @ a.T)
    gram = np.array([[mesh.l2_inner(p, q) for q in basis] for p in basis])
    rhs = np.array([mesh.l2_inner(p, u) for p in basis])
    coef = np.linalg.solve(gram, rhs)
    return sum(c * p for c, p in zip(coef, basis))


def gauge_align(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    return u - rigid_part(mesh, u)


# --------------------------------------------------------------------------
# linearized problem


@dataclass(frozen=True)
class LinearSolution:
    u: np.ndarray
    rotation: np.ndarray
    value: float
    residual: float


def _check_optimal(problem: TractionProblem, r0: np.ndarray) -> None:
    best = max_trace_rotation(problem.force_matrix.entries).value
    if problem.F(r0) < best - problem.tau:
        raise IllPosedLoadError(
            f"rotation is not optimal: F(R0) = {problem.F(r0):.6e} < max F = {best:.6e}"
        )


def linear_energy(problem: TractionProblem, u, r0) -> float:
    """``J(u, R0) = int Q(e(u)) - int f.R0 u - int g.R0 u``."""
    u = np.asarray(u, dtype=float)
    flat = u.ravel()
    quad = 0.5 * float(flat @ (problem.stiffness @ flat))
    return quad - float(np.sum(problem.load * (u @ np.asarray(r0).T)))


def solve_linear(problem: TractionProblem, r0=None) -> LinearSolution:
    """Minimize ``J(u, R0)`` over displacements with zero mean and zero mean rotation."""
    n = problem.mesh.n
    r0 = np.eye(n) if r0 is None else np.asarray(r0, dtype=float)
    _check_optimal(problem, r0)
    b = problem.load @ r0
    u, lagrange = problem.solve_gauged(b.ravel())
    res = problem.stiffness @ u + problem.gauge_constraints.T @ lagrange - b.ravel()
    scale = max(float(np.linalg.norm(b)), 1e-300)
    u = u.reshape(-1, n)
    return LinearSolution(u, r0, linear_energy(problem, u, r0), float(np.linalg.norm(res) / scale))


def _golden_section(f, a, b, tol=1e-10, max_iters=200):
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iters):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _angle_search(f, seeds=32):
    """Grid of ``seeds`` angles, then golden section around the best one."""
    grid = np.linspace(-np.pi, np.pi, seeds, endpoint=False)
    vals = np.array([f(t) for t in grid])
    i = int(np.argmin(vals))
    h = grid[1] - grid[0]
    t, v = _golden_section(f, grid[i] - h, grid[i] + h)
    if v <= vals[i]:
        return float(t), float(v)
    return float(grid[i]), float(vals[i])


def _simplex_search(f, seeds):
    vals = [f(s) for s in seeds]
    order = np.argsort(vals)
    best_x, best_v = np.asarray(seeds[order[0]]), vals[order[0]]
    for i in order[:3]:
        res = scipy.optimize.minimize(f, seeds[i], method="Nelder-Mead",
                                      options={"xatol": 1e-9, "fatol": 1e-14, "maxiter": 4000})
        if res.fun < best_v:
            best_x, best_v = res.x, float(res.fun)
    return best_x, float(best_v)


def minimize_over_R(problem: TractionProblem, rs: OptimalRotationSet | None = None) -> LinearSolution:
    """Minimize ``J(u, R)`` jointly over displacements and optimal rotations."""
    rs = rs or problem.rotation_set
    nf = rs.force
    value = problem.reduced_value

    if rs.kind is Kind.SINGLETON:
        return solve_linear(problem, nf.to_original(rs.base))

    if rs.kind is Kind.CIRCLE or (rs.kind is Kind.FULL_GROUP and rs.n == 2):
        if rs.n == 2:
            def member(t):
                c, s = np.cos(t), np.sin(t)
                return np.array([[c, -s], [s, c]])
        else:
            member = rs.circle_member
        t, _ = _angle_search(lambda t: value(nf.to_original(member(t))))
        return solve_linear(problem, nf.to_original(member(t)))

    if rs.kind is Kind.PROJECTIVE_PLANE:
        def member(p):
            a, b = p
            return rs.plane_member((np.cos(a), np.sin(a) * np.cos(b), np.sin(a) * np.sin(b)))

        seeds = [np.array([a, b]) for a in np.linspace(0, np.pi / 2, 9)
                 for b in np.linspace(0, 2 * np.pi, 16, endpoint=False)]
        p, _ = _simplex_search(lambda p: value(nf.to_original(member(p))), seeds)
        return solve_linear(problem, nf.to_original(member(p)))

    # full SO(3): quaternion hemisphere chart
    axis = np.linspace(-0.9, 0.9, 5)
    seeds = [np.array([a, b, c]) for a in axis for b in axis for c in axis if a * a + b * b + c * c < 1]
    p, _ = _simplex_search(lambda p: value(nf.to_original(quaternion_chart(p))), seeds)
    return solve_linear(problem, nf.to_original(quaternion_chart(p)))


# --------------------------------------------------------------------------
# recovery sequences and the limit energy


def check_normal(problem: TractionProblem, r0, w0, tol: float = 1e-8) -> None:
    """Raise unless ``w0`` is normal to the optimal rotations at ``r0``."""
    rs = problem.rotation_set
    nf = rs.force
    basis = tangent_normal(rs, nf.to_normalized(np.asarray(r0, dtype=float)))
    w0 = np.asarray(w0, dtype=float)
    off = np.linalg.norm(w0 - basis.normal_component(w0))
    if off > tol * max(1.0, np.linalg.norm(w0)):
        raise InvalidArgumentError(f"W0 has a tangential component of size {off:.3e}")


def recovery_sequence(mesh: Mesh, u0, r0, w0, eps: float, problem: TractionProblem | None = None) -> np.ndarray:
    """``y = R0 exp(sqrt(eps) W0) (x + eps u0)`` at the nodes.

    When ``problem`` is given, ``W0`` is checked to lie in the normal space
    of the optimal rotations at ``R0``.
    """
    if not eps > 0:
        raise InvalidArgumentError("epsilon must be positive")
    r0 = np.asarray(r0, dtype=float)
    w0 = np.asarray(w0, dtype=float)
    if problem is not None:
        check_normal(problem, r0, w0)
    rot = r0 @ exp_skew(np.sqrt(eps) * w0)
    u0 = np.zeros_like(mesh.vertices) if u0 is None else np.asarray(u0, dtype=float)
    return (mesh.vertices + eps * u0) @ rot.T


def limit_energy(problem: TractionProblem, u0, r0, w0) -> float:
    """``int Q(e(u0)) - load(R0 u0) - F(R0 W0^2) / 2``."""
    r0 = np.asarray(r0, dtype=float)
    w0 = np.asarray(w0, dtype=float)
    u0 = np.zeros_like(problem.mesh.vertices) if u0 is None else np.asarray(u0, dtype=float)
    return linear_energy(problem, u0, r0) - 0.5 * problem.F(r0 @ w0 @ w0)
