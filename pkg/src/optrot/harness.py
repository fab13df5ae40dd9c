"""Epsilon sweeps, scaling-law fits and the four-dimensional geodesic example."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .elasticity import (
    NonlinearResult,
    ReferenceConfiguration,
    SolverOptions,
    TractionProblem,
    gauge_align,
    minimize_nonlinear,
    recovery_sequence,
    reference_configuration,
    rescaled_displacement,
    solve_linear,
    total_energy,
)
from .errors import InsufficientDataError, IterationLimitError, OptrotError
from .forces import ForceMatrix
from .geometry import block_diagonal, exp_skew, geodesic_distance
from .mesh import Mesh
from .rotations import is_optimal, normalize, project

DEFAULT_EPSILONS = (0.1, 0.05, 0.02, 0.01, 0.005)

CSV_COLUMNS = (
    "epsilon",
    "J_over_eps2",
    "I_eps",
    "dist_R",
    "dist_R_over_sqrt_eps",
    "u_err_L2",
    "u_err_H1semi",
    "solver_iters",
    "converged",
)


@dataclass
class SweepRecord:
    """One epsilon of a sweep.  ``I_eps`` is the raw elastic energy."""

    epsilon: float
    J_over_eps2: float
    I_eps: float
    dist_R_to_set: float
    dist_R_to_set_over_sqrt_eps: float
    u_error_L2: float
    u_error_H1semi: float
    rotation: np.ndarray
    projected: np.ndarray
    reference: ReferenceConfiguration
    solver_iters: int = 0
    converged: bool = True
    error: str | None = None
    y: np.ndarray | None = field(default=None, repr=False)

    def row(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "J_over_eps2": self.J_over_eps2,
            "I_eps": self.I_eps,
            "dist_R": self.dist_R_to_set,
            "dist_R_over_sqrt_eps": self.dist_R_to_set_over_sqrt_eps,
            "u_err_L2": self.u_error_L2,
            "u_err_H1semi": self.u_error_H1semi,
            "solver_iters": self.solver_iters,
            "converged": self.converged,
        }


def project_original(problem: TractionProblem, q: np.ndarray) -> np.ndarray:
    """Nearest optimal rotation to ``q``, both in the original frame."""
    rs = problem.rotation_set
    nf = rs.force
    return nf.to_original(project(rs, nf.to_normalized(q)))


def _relative(num: float, den: float) -> float:
    return num / den if den > 1e-300 else num


def displacement_errors(mesh: Mesh, u: np.ndarray, u0: np.ndarray) -> tuple[float, float]:
    """Relative L2 and H1-seminorm errors after removing infinitesimal rigid motions."""
    a = gauge_align(mesh, u)
    b = gauge_align(mesh, u0)
    d = a - b
    l2 = math.sqrt(max(mesh.l2_inner(d, d), 0.0))
    l2_ref = math.sqrt(max(mesh.l2_inner(b, b), 0.0))
    gd = mesh.gradient(d)
    gb = mesh.gradient(b)
    h1 = math.sqrt(float(mesh.cell_measures @ np.sum(gd * gd, axis=(1, 2))))
    h1_ref = math.sqrt(float(mesh.cell_measures @ np.sum(gb * gb, axis=(1, 2))))
    return _relative(l2, l2_ref), _relative(h1, h1_ref)


def _record(problem: TractionProblem, y: np.ndarray, eps: float, u_target,
            iters: int, converged: bool, error: str | None) -> SweepRecord:
    mesh = problem.mesh
    energy = total_energy(problem, y, eps)
    ref = reference_configuration(mesh, y)
    proj = project_original(problem, ref.rotation)
    dist = geodesic_distance(ref.rotation, proj)
    u = rescaled_displacement(mesh, y, ref, eps)
    target = u_target(proj) if callable(u_target) else u_target
    l2, h1 = displacement_errors(mesh, u, target)
    return SweepRecord(
        epsilon=eps,
        J_over_eps2=energy.J / eps**2,
        I_eps=energy.elastic,
        dist_R_to_set=dist,
        dist_R_to_set_over_sqrt_eps=dist / math.sqrt(eps),
        u_error_L2=l2,
        u_error_H1semi=h1,
        rotation=ref.rotation,
        projected=proj,
        reference=ref,
        solver_iters=iters,
        converged=converged,
        error=error,
        y=y,
    )


def sweep_minimizers(problem: TractionProblem, epsilons=DEFAULT_EPSILONS,
                     opts: SolverOptions | None = None, warm_start: bool = True) -> list[SweepRecord]:
    """Minimize ``J_eps`` along ``epsilons`` and measure the distance to the limit.

    Each epsilon starts from the previous minimizer (or from the identity
    when ``warm_start`` is off).  The rescaled displacement is compared with
    the linearized minimizer at the projection of the reference rotation.
    Solver failures are recorded on the record with the best iterate kept.
    """
    x = problem.mesh.vertices
    cache: dict[bytes, np.ndarray] = {}

    def u_target(r):
        key = np.round(r, 12).tobytes()
        if key not in cache:
            cache[key] = solve_linear(problem, r).u
        return cache[key]

    records = []
    init = x.copy()
    for eps in sorted(epsilons, reverse=True):
        try:
            res: NonlinearResult = minimize_nonlinear(problem, eps, init=init, opts=opts)
            y, iters, ok, err = res.y, res.iterations, res.converged, None
        except IterationLimitError as exc:
            y, iters, ok, err = exc.best, exc.iterations, False, str(exc)
        try:
            records.append(_record(problem, y, eps, u_target, iters, ok, err))
        except OptrotError as exc:
            # projection or linear solve failed; keep the energy only
            energy = total_energy(problem, y, eps)
            ref = reference_configuration(problem.mesh, y)
            nan = float("nan")
            records.append(SweepRecord(eps, energy.J / eps**2, energy.elastic, nan, nan, nan, nan,
                                       ref.rotation, ref.rotation, ref, iters, False, str(exc), y))
        if warm_start:
            init = y
    return records


def sweep_recovery(problem: TractionProblem, u0, r0, w0, epsilons=DEFAULT_EPSILONS) -> list[SweepRecord]:
    """Evaluate ``J_eps`` on the recovery sequence of ``(u0, R0, W0)``."""
    mesh = problem.mesh
    u0 = np.zeros_like(mesh.vertices) if u0 is None else np.asarray(u0, dtype=float)
    records = []
    for eps in sorted(epsilons, reverse=True):
        y = recovery_sequence(mesh, u0, r0, w0, eps, problem)
        records.append(_record(problem, y, eps, u0, 0, True, None))
    return records


def records_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        row = rec.row()
        writer.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


# --------------------------------------------------------------------------
# rate fits


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    n_excluded: int = 0


def _column(records, name):
    out = []
    for rec in records:
        if isinstance(rec, dict):
            out.append(rec[name])
        else:
            out.append(getattr(rec, name))
    return np.asarray(out, dtype=float)


def fit_rate(records=None, x_field: str = "epsilon", y_field: str = "J_over_eps2", *, x=None, y=None) -> RateFit:
    """Least squares fit of ``log y = slope log x + intercept``.

    Pass records (objects or dicts) with field names, or raw ``x``/``y``
    arrays.  Nonpositive or non-finite samples are dropped and counted.
    """
    if x is None or y is None:
        x = _column(records, x_field)
        y = _column(records, y_field)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if keep.sum() < 3:
        raise InsufficientDataError(f"need at least 3 positive samples, have {int(keep.sum())}")
    lx, ly = np.log(x[keep]), np.log(y[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    total = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 if total == 0 else max(0.0, 1.0 - float(np.sum(resid**2)) / float(total))
    return RateFit(float(slope), float(intercept), min(r2, 1.0), int((~keep).sum()))


# --------------------------------------------------------------------------
# four-dimensional example: a geodesic between optimal rotations leaving the set


def appendix_demo(lam: float = 1.0, mu: float = math.sqrt(2.0), samples: int = 1000) -> dict:
    """Check the non-totally-geodesic behavior of the optimal set in SO(4).

    With ``F(A) = <diag(0, 0, 1, 1), A>`` and ``W0 = A(lam) + A(mu)``
    (block diagonal), ``F(exp(t W0)) = 2 cos(mu t)``; ``exp(2 pi / mu W0)``
    is optimal but not the identity, and ``exp(t W1)`` with
    ``W1 = A(lam) + 0`` stays optimal for every ``t``.
    """
    if float(lam / mu).is_integer():
        raise ValueError("lam / mu must not be an integer")
    s = np.diag([0.0, 0.0, 1.0, 1.0])
    fm = ForceMatrix(s, np.zeros(4), 0.0)
    nf = normalize(fm)
    tau = 1e-10
    w0 = block_diagonal([lam, mu], 4)
    w1 = block_diagonal([lam, 0.0], 4)
    period = 2 * math.pi / mu

    ts = np.linspace(0.0, 2 * period, samples)
    f0 = np.array([fm(exp_skew(t * w0)) for t in ts])
    f1 = np.array([fm(exp_skew(t * w1)) for t in ts])
    err0 = float(np.max(np.abs(f0 - 2 * np.cos(mu * ts))))
    err1 = float(np.max(np.abs(f1 - 2.0)))

    r1 = exp_skew(period * w0)
    dist_r1 = float(np.linalg.norm(r1 - np.eye(4)))
    lattice = np.isclose(np.mod(ts + 0.5 * period, period), 0.5 * period, atol=1e-9)
    member = np.array([is_optimal(nf, nf.to_normalized(exp_skew(t * w0)), tau) for t in ts])
    membership_ok = bool(np.all(member == lattice))
    checks = {
        "t=0": fm(exp_skew(0 * w0)),
        "t=pi/mu": fm(exp_skew(math.pi / mu * w0)),
        "t=2pi/mu": fm(r1),
    }
    return {
        "lambda": lam,
        "mu": mu,
        "samples": samples,
        "max_value": nf.max_value,
        "max_err_W0": err0,
        "max_err_W1": err1,
        "R1_minus_I_norm": dist_r1,
        "R1_is_optimal": bool(is_optimal(nf, nf.to_normalized(r1), tau)),
        "R1_on_W1_geodesic": float(np.linalg.norm(exp_skew(period * w1) - r1)),
        "membership_matches_lattice": membership_ok,
        "spot_values": checks,
        "passed": bool(err0 <= 1e-10 and err1 <= 1e-10 and dist_r1 > 1 and membership_ok),
    }

