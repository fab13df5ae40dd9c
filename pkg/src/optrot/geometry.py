"""Rotation-group toolkit for SO(n), n in {2, 3, 4}.

Skew matrices are brought to the block form ``R^T diag(A(l1), ..., A(lk), 0) R``
with ``A(l) = [[0, l], [-l, 0]]`` through the real Schur decomposition; the
exponential, principal logarithm and geodesic distance are all read off that
block structure.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateLogarithmWarning,
    InvalidArgumentError,
    UnsupportedDimensionError,
)

SUPPORTED_DIMS = (2, 3, 4)
SKEW_TOL = 1e-12
ROTATION_TOL = 1e-10


def frob(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius inner product <a, b> = tr(a^T b)."""
    return float(np.sum(np.asarray(a) * np.asarray(b)))


def block(angle: float) -> np.ndarray:
    """The 2x2 generator ``A(angle) = [[0, angle], [-angle, 0]]``."""
    return np.array([[0.0, angle], [-angle, 0.0]])


def _check_dim(n: int) -> None:
    if n not in SUPPORTED_DIMS:
        raise UnsupportedDimensionError(f"dimension {n} not in {SUPPORTED_DIMS}")


def _square(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgumentError(f"{name} must be a square matrix, got shape {a.shape}")
    _check_dim(a.shape[0])
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return a


def as_skew(w, tol: float = SKEW_TOL) -> np.ndarray:
    """Validate a skew-symmetric matrix and return it exactly antisymmetrized."""
    w = _square(w, "skew matrix")
    if np.max(np.abs(w + w.T)) > tol * max(1.0, np.max(np.abs(w))):
        raise InvalidArgumentError("matrix is not skew-symmetric")
    return 0.5 * (w - w.T)


def as_rotation(r, tol: float = ROTATION_TOL) -> np.ndarray:
    r = _square(r, "rotation")
    n = r.shape[0]
    if np.max(np.abs(r.T @ r - np.eye(n))) > tol or abs(np.linalg.det(r) - 1.0) > tol:
        raise InvalidArgumentError("matrix is not in SO(n)")
    return r


def as_symmetric(s, tol: float = SKEW_TOL) -> np.ndarray:
    s = _square(s, "symmetric matrix")
    if np.max(np.abs(s - s.T)) > tol * max(1.0, np.max(np.abs(s))):
        raise InvalidArgumentError("matrix is not symmetric")
    return 0.5 * (s + s.T)


def skew_basis(n: int) -> list[np.ndarray]:
    """Frobenius-orthonormal basis ``(e_ij - e_ji)/sqrt(2)``, i < j, of skew matrices."""
    basis = []
    for i in range(n):
        for j in range(i + 1, n):
            w = np.zeros((n, n))
            w[i, j] = 1.0 / np.sqrt(2.0)
            w[j, i] = -1.0 / np.sqrt(2.0)
            basis.append(w)
    return basis


def random_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed element of SO(n)."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_skew(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((n, n)) * scale
    return 0.5 * (a - a.T)


# --------------------------------------------------------------------------
# canonical form


@dataclass(frozen=True)
class SkewCanonicalForm:
    """``W = frame^T @ sigma @ frame`` with ``sigma`` block diagonal.

    ``angles`` are ordered by decreasing magnitude and positive, except that
    the smallest one may be negative when every block is nonzero and the
    orientation of the frame demands it (the sign of the Pfaffian).
    """

    frame: np.ndarray
    angles: np.ndarray

    @property
    def k(self) -> int:
        return len(self.angles)

    @property
    def n(self) -> int:
        return self.frame.shape[0]

    def sigma(self) -> np.ndarray:
        return block_diagonal(self.angles, self.n)

    def reconstruct(self) -> np.ndarray:
        return self.frame.T @ self.sigma() @ self.frame


def block_diagonal(angles, n: int) -> np.ndarray:
    sigma = np.zeros((n, n))
    for i, lam in enumerate(angles):
        sigma[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = block(lam)
    return sigma


def _invariant_planes(t: np.ndarray, z: np.ndarray, paired_value: float | None = None):
    """Split a real Schur form of a normal matrix into 2D planes and 1D lines.

    Returns ``(planes, lines)`` where ``planes`` holds pairs of orthonormal
    column vectors of ``z`` spanning 2x2 blocks, and ``lines`` the columns of
    1x1 blocks.  When ``paired_value`` is given, 1x1 blocks close to it are
    grouped two by two into planes (used for the eigenvalue -1 of a rotation).
    """
    n = t.shape[0]
    planes, lines, singles = [], [], []
    i = 0
    while i < n:
        if i + 1 < n and abs(t[i + 1, i]) > 0.0:
            planes.append((z[:, i], z[:, i + 1]))
            i += 2
        else:
            if paired_value is not None and abs(t[i, i] - paired_value) < 0.5:
                singles.append(z[:, i])
            else:
                lines.append(z[:, i])
            i += 1
    for a, b in zip(singles[0::2], singles[1::2]):
        planes.append((a, b))
    if len(singles) % 2:
        lines.append(singles[-1])
    return planes, lines


def _skew_planes(w: np.ndarray):
    """Invariant planes of a skew matrix with signed angles (untruncated)."""
    t, z = scipy.linalg.schur(w, output="real")
    planes, lines = _invariant_planes(t, z)
    out = []
    for a, b in planes:
        lam = 0.5 * (a @ w @ b - b @ w @ a)
        out.append((a, b, lam))
    return out, lines


def _assemble_frame(planes, lines, n: int):
    """Rows of the frame and the ordered angles; forces det(frame) = +1."""
    planes = sorted(planes, key=lambda p: -abs(p[2]))
    rows, angles = [], []
    for a, b, lam in planes:
        if lam < 0:
            a, b, lam = b, a, -lam
        rows.extend([a, b])
        angles.append(lam)
    rows.extend(lines)
    frame = np.array(rows).reshape(n, n)
    if np.linalg.det(frame) < 0:
        if lines:
            frame[-1] = -frame[-1]
        else:
            k = len(angles) - 1
            frame[[2 * k, 2 * k + 1]] = frame[[2 * k + 1, 2 * k]]
            angles[k] = -angles[k]
    return frame, np.array(angles, dtype=float)


def zero_angle_tol(w: np.ndarray) -> float:
    return 1e-9 * max(1.0, float(np.linalg.norm(w)))


def skew_canonical_form(w) -> SkewCanonicalForm:
    """Canonical block form of a skew-symmetric matrix.

    Angles below ``1e-9 * max(1, |W|)`` are treated as zero blocks and
    folded into the kernel part of the frame.
    """
    w = as_skew(w)
    n = w.shape[0]
    tau = zero_angle_tol(w)
    planes, lines = _skew_planes(w)
    kept = []
    for a, b, lam in planes:
        if abs(lam) > tau:
            kept.append((a, b, lam))
        else:
            lines.extend([a, b])
    frame, angles = _assemble_frame(kept, lines, n)
    return SkewCanonicalForm(frame=frame, angles=angles)


# --------------------------------------------------------------------------
# exponential / logarithm / distance


def exp_skew(w) -> np.ndarray:
    """Matrix exponential of a skew matrix, block by block.

    Each invariant plane with angle ``l`` contributes ``cos(l) - 1`` on its
    diagonal projector and ``sin(l)`` on its generator, i.e.
    ``exp(W) = I + sum (cos l_i - 1) D_i + sin l_i E_i`` in the rotated frame.
    """
    w = as_skew(w)
    n = w.shape[0]
    out = np.eye(n)
    for a, b, lam in _skew_planes(w)[0]:
        d = np.outer(a, a) + np.outer(b, b)
        e = np.outer(a, b) - np.outer(b, a)
        out += (np.cos(lam) - 1.0) * d + np.sin(lam) * e
    return out


def rodrigues(w, t: float) -> np.ndarray:
    """``exp(tW) = I + sin(t) W + (1 - cos t) W^2`` for n in {2, 3} and |W| = sqrt(2)."""
    w = as_skew(w)
    if w.shape[0] not in (2, 3):
        raise UnsupportedDimensionError("Rodrigues formula needs n = 2 or 3")
    if abs(np.linalg.norm(w) - np.sqrt(2.0)) > 1e-10:
        raise InvalidArgumentError("Rodrigues formula needs |W| = sqrt(2)")
    return np.eye(w.shape[0]) + np.sin(t) * w + (1.0 - np.cos(t)) * (w @ w)


def log_principal(start, end) -> np.ndarray:
    """Skew ``W`` with ``end = start @ exp(W)`` and every angle in (-pi, pi].

    Rotations by exactly pi in some plane have two principal logarithms; the
    plane orientation giving ``+pi`` is returned and a
    :class:`DegenerateLogarithmWarning` is emitted.
    """
    start = as_rotation(start)
    end = as_rotation(end)
    if start.shape != end.shape:
        raise InvalidArgumentError("rotations of different dimension")
    q = start.T @ end
    n = q.shape[0]
    t, z = scipy.linalg.schur(q, output="real")
    planes, _ = _invariant_planes(t, z, paired_value=-1.0)
    tau = zero_angle_tol(q)
    w = np.zeros((n, n))
    degenerate = False
    for a, b in planes:
        c = 0.5 * (a @ q @ a + b @ q @ b)
        s = 0.5 * (a @ q @ b - b @ q @ a)
        theta = np.arctan2(s, c)
        if theta <= -np.pi:
            theta = np.pi
        if np.pi - abs(theta) <= tau:
            degenerate = True
            if theta < 0 and abs(s) <= tau:
                theta = np.pi
        w += theta * (np.outer(a, b) - np.outer(b, a))
    if degenerate:
        warnings.warn(
            "rotation angle at pi: principal logarithm is not unique",
            DegenerateLogarithmWarning,
            stacklevel=2,
        )
    return 0.5 * (w - w.T)


def geodesic_distance(q, r) -> float:
    """Intrinsic distance ``min |W|`` over ``q = r exp(W)``."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateLogarithmWarning)
        return float(np.linalg.norm(log_principal(r, q)))


# --------------------------------------------------------------------------
# extrinsic curvature


def second_form_curvatures(s) -> np.ndarray:
    """Principal curvatures of SO(n) at I in the normal direction ``s``.

    These are ``-(s_i + s_j)/4`` for the eigenvalues ``s_i`` of ``s``, sorted
    ascending; there are n(n-1)/2 of them.
    """
    s = as_symmetric(s, tol=1e-10)
    ev = np.linalg.eigvalsh(s)
    n = len(ev)
    vals = [-(ev[i] + ev[j]) / 4.0 for i in range(n) for j in range(i + 1, n)]
    return np.sort(np.array(vals))


# --------------------------------------------------------------------------
# maximizing a linear functional over SO(n)


class TraceMaximizer(NamedTuple):
    rotation: np.ndarray
    value: float
    unique: bool


def max_trace_rotation(m, tol: float | None = None) -> TraceMaximizer:
    """Maximize ``R -> <M, R>`` over SO(n).

    Uses ``M = U diag(s) V^T`` and ``R = U diag(1, ..., 1, d) V^T`` with
    ``d = det(U V^T)``.  The maximizer is reported non-unique when the two
    smallest signed singular values can trade places (rank deficiency, or a
    reflection correction with a repeated smallest singular value).
    """
    m = _square(m, "force matrix")
    n = m.shape[0]
    if tol is None:
        tol = 1e-8 * max(1.0, float(np.linalg.norm(m)))
    u, s, vt = np.linalg.svd(m)
    d = np.sign(np.linalg.det(u @ vt)) or 1.0
    corr = np.ones(n)
    corr[-1] = d
    r = (u * corr) @ vt
    value = float(np.sum(s * corr))
    if d > 0:
        unique = s[-2] + s[-1] > tol
    else:
        unique = s[-2] - s[-1] > tol
    return TraceMaximizer(r, value, bool(unique))
