"""The set of rotations maximizing the force functional, and its geometry.

Everything here works in the *normalized frame*: the forces are rotated by
``R_bar^T`` for a maximizer ``R_bar`` so that the identity is optimal and the
force matrix ``M_tilde = R_bar^T M`` is symmetric.  Map a normalized
rotation ``R`` back to the original problem with ``R_bar @ R``.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import (
    AmbiguousProjectionError,
    InvalidArgumentError,
    NearDegenerateWarning,
    NumericalInconsistencyError,
    UnsupportedDimensionError,
)
from .geometry import exp_skew, frob, max_trace_rotation, random_rotation, skew_basis


class Kind(str, enum.Enum):
    SINGLETON = "Singleton"
    CIRCLE = "Circle"
    PROJECTIVE_PLANE = "ProjectivePlane"
    FULL_GROUP = "FullGroup"


DIMENSION = {Kind.SINGLETON: 0, Kind.CIRCLE: 1, Kind.PROJECTIVE_PLANE: 2}


def default_tau(m) -> float:
    return 1e-8 * max(1.0, float(np.linalg.norm(np.asarray(getattr(m, "entries", m)))))


@dataclass(frozen=True, eq=False)
class NormalizedForce:
    rotation_to_frame: np.ndarray
    m_tilde: np.ndarray
    max_value: float
    eigenvalues: np.ndarray  # descending
    m_original: np.ndarray

    @property
    def n(self) -> int:
        return self.m_tilde.shape[0]

    def value(self, r) -> float:
        """``F`` of a normalized-frame rotation."""
        return frob(self.m_tilde, r)

    def to_original(self, r: np.ndarray) -> np.ndarray:
        return self.rotation_to_frame @ r

    def to_normalized(self, r: np.ndarray) -> np.ndarray:
        return self.rotation_to_frame.T @ r


def normalize(m) -> NormalizedForce:
    """Rotate the force matrix so that the identity is a maximizer."""
    m = np.asarray(getattr(m, "entries", m), dtype=float)
    r_bar = max_trace_rotation(m).rotation
    mt = r_bar.T @ m
    scale = max(1.0, float(np.linalg.norm(m)))
    if np.linalg.norm(mt - mt.T) > 1e-9 * scale:
        raise NumericalInconsistencyError(
            "normalized force matrix is not symmetric; the rotation is not a maximizer"
        )
    mt = 0.5 * (mt + mt.T)
    ev = np.sort(np.linalg.eigvalsh(mt))[::-1]
    return NormalizedForce(r_bar, mt, float(np.trace(mt)), ev, m)


def pair_sums(eigenvalues) -> np.ndarray:
    ev = np.asarray(eigenvalues)
    n = len(ev)
    return np.array([ev[i] + ev[j] for i in range(n) for j in range(i + 1, n)])


def _frame(mt: np.ndarray) -> np.ndarray:
    """Rotation ``Q`` with ``mt = Q^T diag(descending eigenvalues) Q``."""
    ev, vec = np.linalg.eigh(mt)
    vec = vec[:, ::-1]
    if np.linalg.det(vec) < 0:
        vec[:, -1] = -vec[:, -1]
    return vec.T


@dataclass(frozen=True, eq=False)
class OptimalRotationSet:
    """Classified set of optimal rotations in the normalized frame.

    Members are ``frame^T S frame`` where ``S`` runs over rotations about e1
    (Circle) or over quaternions with vanishing k-component
    (ProjectivePlane).  ``axis`` is the rotation axis of a Circle.
    """

    kind: Kind
    force: NormalizedForce
    tau: float
    frame: np.ndarray
    spectral_gap: float
    warnings: tuple = field(default=())

    @property
    def n(self) -> int:
        return self.force.n

    @property
    def base(self) -> np.ndarray:
        return np.eye(self.n)

    @property
    def dim(self) -> int:
        if self.kind is Kind.FULL_GROUP:
            return self.n * (self.n - 1) // 2
        return DIMENSION[self.kind]

    @property
    def axis(self) -> np.ndarray | None:
        if self.kind is Kind.CIRCLE and self.n == 3:
            return self.frame[0].copy()
        return None

    def contains(self, r, tau: float | None = None) -> bool:
        return is_optimal(self.force, r, self.tau if tau is None else tau)

    def circle_member(self, theta: float) -> np.ndarray:
        return self.frame.T @ _rot_x(theta) @ self.frame

    def plane_member(self, quat) -> np.ndarray:
        """Member for a quaternion ``(w, x, y)``; the k-component is zero."""
        w, x, y = quat
        s = Rotation.from_quat([x, y, 0.0, w]).as_matrix()
        return self.frame.T @ s @ self.frame

    def sample(self, count: int, rng: np.random.Generator) -> list[np.ndarray]:
        """Members on a grid (Circle, ProjectivePlane) or Haar samples (FullGroup)."""
        if self.kind is Kind.SINGLETON:
            return [self.base]
        if self.kind is Kind.CIRCLE:
            return [self.circle_member(t) for t in np.linspace(-np.pi, np.pi, count)]
        if self.kind is Kind.PROJECTIVE_PLANE:
            side = max(2, int(np.sqrt(count)))
            out = []
            for a in np.linspace(0.0, np.pi / 2, side):
                for b in np.linspace(0.0, 2 * np.pi, side, endpoint=False):
                    out.append(self.plane_member((np.cos(a), np.sin(a) * np.cos(b), np.sin(a) * np.sin(b))))
            return out
        return [random_rotation(self.n, rng) for _ in range(count)]

    def report(self) -> dict:
        return {
            "kind": self.kind.value,
            "eigenvalues": self.force.eigenvalues.tolist(),
            "frame": self.frame.tolist(),
            "rotation_to_frame": self.force.rotation_to_frame.tolist(),
            "max_value": self.force.max_value,
            "spectral_gap": self.spectral_gap,
            "warnings": list(self.warnings),
        }


def _rot_x(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def classify(nf: NormalizedForce, tau: float | None = None) -> OptimalRotationSet:
    """Classify the optimal rotations from the spectrum of ``M_tilde``.

    The dimension of the set equals the number of vanishing eigenvalue pair
    sums.  In 2D: FullGroup iff the trace vanishes.  In 3D with eigenvalues
    ``e1 >= e2 >= e3``: FullGroup iff ``M_tilde = 0``; ProjectivePlane iff
    they read ``(a, a, -a)``, ``a > 0``; Circle iff ``(b, a, -a)`` with
    ``b > a >= 0``; Singleton otherwise.  Pair sums inside ``(tau, 10 tau]``
    count as nonzero and attach a :class:`NearDegenerateWarning`.
    """
    n = nf.n
    if n not in (2, 3):
        raise UnsupportedDimensionError("classification is available for n = 2 and 3")
    if tau is None:
        tau = default_tau(nf.m_original)
    ps = pair_sums(nf.eigenvalues)
    if ps.min() < -tau:
        raise NumericalInconsistencyError(
            f"eigenvalue pair sum {ps.min():.3e} is negative; identity is not a maximizer"
        )
    zero = ps <= tau
    nonzero = ps[~zero]
    gap = float(nonzero.min()) if nonzero.size else float("inf")
    notes = []
    if nonzero.size and gap <= 10 * tau:
        msg = f"near-degenerate spectrum: pair sum {gap:.3e} within 10*tau of zero"
        notes.append(msg)
        warnings.warn(msg, NearDegenerateWarning, stacklevel=2)

    e = nf.eigenvalues
    k = int(zero.sum())
    if n == 2:
        kind = Kind.FULL_GROUP if k == 1 else Kind.SINGLETON
    elif k == 3:
        kind = Kind.FULL_GROUP
    elif k == 2:
        if not (abs(e[0] - e[1]) <= tau and abs(e[1] + e[2]) <= tau):
            raise NumericalInconsistencyError(f"eigenvalues {e} do not match (a, a, -a)")
        kind = Kind.PROJECTIVE_PLANE
    elif k == 1:
        if not abs(e[1] + e[2]) <= tau:
            raise NumericalInconsistencyError(f"eigenvalues {e} do not match (b, a, -a)")
        kind = Kind.CIRCLE
    else:
        kind = Kind.SINGLETON

    frame = _frame(nf.m_tilde)
    return OptimalRotationSet(kind, nf, float(tau), frame, gap, tuple(notes))


def is_optimal(nf: NormalizedForce, r, tau: float) -> bool:
    """Whether ``F(R) >= max F - tau`` for a normalized-frame rotation ``R``."""
    return nf.value(r) >= nf.max_value - tau


def project(rs: OptimalRotationSet, q) -> np.ndarray:
    """Nearest optimal rotation to ``q`` in the geodesic distance.

    Raises :class:`AmbiguousProjectionError` on the cut locus, where the
    nearest point is not unique.
    """
    q = np.asarray(q, dtype=float)
    if rs.kind is Kind.SINGLETON:
        return rs.base
    if rs.kind is Kind.FULL_GROUP:
        return q.copy()
    p = rs.frame @ q @ rs.frame.T
    scale = 1e-10
    if rs.kind is Kind.CIRCLE:
        # <R_x(theta), P> = P11 + cos(theta) (P22 + P33) + sin(theta) (P32 - P23)
        a = p[1, 1] + p[2, 2]
        b = p[2, 1] - p[1, 2]
        if np.hypot(a, b) <= scale:
            raise AmbiguousProjectionError("every point of the circle is equidistant")
        return rs.circle_member(np.arctan2(b, a))
    x, y, z, w = Rotation.from_matrix(p).as_quat()
    norm = np.sqrt(w * w + x * x + y * y)
    if norm <= scale:
        raise AmbiguousProjectionError("rotation is equidistant from the projective plane")
    quat = np.array([w, x, y]) / norm
    if quat[0] < 0:
        quat = -quat
    return rs.plane_member(quat)


@dataclass(frozen=True, eq=False)
class TangentNormalBasis:
    tangent: list
    normal: list
    spectral_gap: float

    def normal_component(self, w) -> np.ndarray:
        """Part of a skew matrix orthogonal to the tangent space."""
        w = np.asarray(w, dtype=float)
        return w - sum(frob(w, t) * t for t in self.tangent)


def second_form_matrix(s: np.ndarray) -> np.ndarray:
    """Matrix of ``W -> <W^2 / 2, s>`` on the orthonormal skew basis."""
    basis = skew_basis(s.shape[0])
    k = len(basis)
    g = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            g[i, j] = 0.25 * frob(basis[i] @ basis[j] + basis[j] @ basis[i], s)
    return g


def tangent_normal(rs: OptimalRotationSet, r0=None) -> TangentNormalBasis:
    """Tangent space ``{W : F(R0 W^2) = 0}`` at ``r0`` and its complement.

    Computed as the kernel of the negative semi-definite form
    ``W -> <W^2/2, R0^T M_tilde>``; eigenvalues within ``tau`` of zero
    span the tangent part.
    """
    n = rs.n
    r0 = rs.base if r0 is None else np.asarray(r0, dtype=float)
    if not rs.contains(r0):
        raise InvalidArgumentError("base rotation is not optimal")
    s = r0.T @ rs.force.m_tilde
    s = 0.5 * (s + s.T)
    g = second_form_matrix(s)
    vals, vecs = np.linalg.eigh(g)
    basis = np.array(skew_basis(n))
    # F(R0 W^2) = 2 q(W), so |2 lambda| <= tau marks the kernel
    kernel = np.abs(2.0 * vals) <= rs.tau
    others = np.abs(2.0 * vals[~kernel])
    gap = float(others.min()) if others.size else float("inf")
    if others.size and gap <= 10 * rs.tau:
        warnings.warn(f"tangent rank decided with spectral gap {gap:.3e}", NearDegenerateWarning, stacklevel=2)
    mats = np.einsum("kb,bij->kij", vecs.T, basis)
    tangent = [mats[i] for i in np.flatnonzero(kernel)]
    normal = [mats[i] for i in np.flatnonzero(~kernel)]
    if len(tangent) != rs.dim:
        warnings.warn(
            f"tangent dimension {len(tangent)} differs from set dimension {rs.dim}",
            NearDegenerateWarning,
            stacklevel=2,
        )
    return TangentNormalBasis(tangent, normal, gap)


def geodesic(r0: np.ndarray, w: np.ndarray, t: float) -> np.ndarray:
    return r0 @ exp_skew(t * np.asarray(w))


def quaternion_chart(params) -> np.ndarray:
    """Rotation from three chart parameters ``(x, y, z)`` of the upper hemisphere.

    The point is mapped into the unit ball and completed by ``w >= 0``.
    """
    v = np.asarray(params, dtype=float)
    r = np.linalg.norm(v)
    if r > 1.0:
        v = v / r
    w = np.sqrt(max(0.0, 1.0 - float(v @ v)))
    return Rotation.from_quat([v[0], v[1], v[2], w]).as_matrix()
