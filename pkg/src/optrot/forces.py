"""Traction and body forces, and the matrix of the force functional.

Forces are piecewise linear: body forces are continuous nodal fields,
tractions are stored per boundary facet and local facet node so that they
may jump across facet corners (``f = nu`` on a square, for instance).
With the consistent P1 mass matrices every integral below is exact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EquilibrationWarning, InvalidArgumentError, UnsupportedDimensionError
from .mesh import Mesh


@dataclass(frozen=True, eq=False)
class ForceField:
    """``traction``: (F, n, n) values per facet and facet node; ``body``: (V, n)."""

    traction: np.ndarray
    body: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.traction)) and np.all(np.isfinite(self.body))):
            raise InvalidArgumentError("force field has non-finite entries")

    @classmethod
    def zeros(cls, mesh: Mesh) -> "ForceField":
        n = mesh.n
        return cls(np.zeros((len(mesh.boundary_facets), n, n)), np.zeros((mesh.n_vertices, n)))

    @classmethod
    def from_nodal(cls, mesh: Mesh, traction=None, body=None) -> "ForceField":
        """Build a field from continuous nodal tractions (V, n) and body forces (V, n)."""
        n = mesh.n
        t = np.zeros((mesh.n_vertices, n)) if traction is None else np.asarray(traction, float)
        g = np.zeros((mesh.n_vertices, n)) if body is None else np.asarray(body, float)
        if t.shape != (mesh.n_vertices, n) or g.shape != (mesh.n_vertices, n):
            raise InvalidArgumentError("nodal forces must have shape (V, n)")
        return cls(t[mesh.boundary_facets], g)

    def check_shape(self, mesh: Mesh) -> None:
        n = mesh.n
        if self.traction.shape != (len(mesh.boundary_facets), n, n):
            raise InvalidArgumentError(
                f"traction shape {self.traction.shape} does not match mesh "
                f"({len(mesh.boundary_facets)}, {n}, {n})"
            )
        if self.body.shape != (mesh.n_vertices, n):
            raise InvalidArgumentError(f"body force shape {self.body.shape} does not match mesh")

    def __add__(self, other: "ForceField") -> "ForceField":
        return ForceField(self.traction + other.traction, self.body + other.body)

    def scaled(self, c: float) -> "ForceField":
        return ForceField(c * self.traction, c * self.body)

    def rotated(self, r: np.ndarray) -> "ForceField":
        """Forces ``R f``, ``R g``; rotating by ``R^T`` moves a maximizer ``R`` to I."""
        return ForceField(self.traction @ r.T, self.body @ r.T)


def load_vectors(mesh: Mesh, field: ForceField) -> tuple[np.ndarray, np.ndarray]:
    """Nodal load vectors ``(L_traction, L_body)``, each (V, n).

    ``L[a] . v`` is the work of the forces on the hat function ``phi_a v``,
    so ``int f.w + int g.w = sum_a L[a] . w_a`` for any nodal P1 field ``w``.
    """
    field.check_shape(mesh)
    k = mesh.n
    local = (np.ones((k, k)) + np.eye(k)) / (k * (k + 1))
    per_node = np.einsum("f,ab,fbi->fai", mesh.facet_measures, local, field.traction)
    lt = np.zeros((mesh.n_vertices, k))
    np.add.at(lt, mesh.boundary_facets.ravel(), per_node.reshape(-1, k))
    lb = mesh.mass_matrix @ field.body
    return lt, lb


def check_equilibrated(mesh: Mesh, field: ForceField) -> np.ndarray:
    """Total force ``int_dOmega f + int_Omega g``."""
    lt, lb = load_vectors(mesh, field)
    return lt.sum(axis=0) + lb.sum(axis=0)


def equilibration_tol(mesh: Mesh, field: ForceField) -> float:
    scale = np.abs(field.traction).max(initial=0.0) + np.abs(field.body).max(initial=0.0)
    # absolute floor so that roundoff of an all-but-zero field is not reported
    return max(1e-8 * scale, 1e-13) * max(1.0, mesh.volume + mesh.facet_measures.sum())


@dataclass(frozen=True, eq=False)
class ForceMatrix:
    """The matrix ``M`` with ``F(A) = <M, A>``."""

    entries: np.ndarray
    equilibration_residual: np.ndarray
    torque_residual: float

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __call__(self, a) -> float:
        return float(np.sum(self.entries * np.asarray(a)))


def balance_residuals(m) -> float:
    """Relative size of the skew part of ``M``: ``|M - M^T| / max(1, |M|)``.

    It vanishes iff ``F(W) = 0`` for every skew ``W``, the torque balance of
    linear elasticity about the identity.
    """
    m = np.asarray(getattr(m, "entries", m), dtype=float)
    return float(np.linalg.norm(m - m.T) / max(1.0, np.linalg.norm(m)))


def assemble_force_matrix(mesh: Mesh, field: ForceField) -> ForceMatrix:
    """``M_ij = int f_i x_j + int g_i x_j``.

    Warns with :class:`EquilibrationWarning` when the total force exceeds
    the equilibration tolerance; assembly proceeds regardless.
    """
    lt, lb = load_vectors(mesh, field)
    load = lt + lb
    residual = load.sum(axis=0)
    if np.linalg.norm(residual) > equilibration_tol(mesh, field):
        warnings.warn(
            f"forces are not equilibrated (total force {residual})",
            EquilibrationWarning,
            stacklevel=2,
        )
    m = load.T @ mesh.vertices
    return ForceMatrix(m, residual, balance_residuals(m))


# --------------------------------------------------------------------------
# analytic fields


def _facet_nodes(mesh: Mesh) -> np.ndarray:
    return mesh.vertices[mesh.boundary_facets]  # (F, n, n)


def uniform_tension(mesh: Mesh, magnitude: float = 1.0) -> ForceField:
    """``f = magnitude * nu`` on the boundary, no body force."""
    t = np.repeat(mesh.normals[:, None, :], mesh.n, axis=1) * magnitude
    return ForceField(t, np.zeros((mesh.n_vertices, mesh.n)))


def uniform_compression(mesh: Mesh, magnitude: float = 1.0) -> ForceField:
    return uniform_tension(mesh, -magnitude)


def tangential_2d(mesh: Mesh, magnitude: float = 1.0) -> ForceField:
    """``f = Z tau`` with ``Z`` the reflection ``(x1, x2) -> (-x1, x2)``."""
    if mesh.n != 2:
        raise UnsupportedDimensionError("tangential-2d requires a 2D mesh")
    zt = mesh.tangents * np.array([-1.0, 1.0]) * magnitude
    t = np.repeat(zt[:, None, :], 2, axis=1)
    return ForceField(t, np.zeros((mesh.n_vertices, 2)))


RADIAL_PROFILES = {
    "linear": lambda r: 1.0 - 4.0 * r / 3.0,
    "inverse-square": lambda r: 1.0 / r**2 - 2.0 / r,
}


def radial_ball(mesh: Mesh, profile: str = "linear", direction=(1.0, 0.0, 0.0),
                r_min: float | None = None, equilibrate: bool = False) -> ForceField:
    """Body force ``g(x) = rho(|x|) e`` with no traction.

    For the singular profile the density is sampled at ``max(|x|, r_min)``;
    ``r_min`` defaults to half the smallest nonzero nodal radius.  With
    ``equilibrate`` the discrete mean of ``rho`` is subtracted.
    """
    if mesh.n != 3:
        raise UnsupportedDimensionError("radial-ball requires a 3D mesh")
    try:
        rho_fn = RADIAL_PROFILES[profile]
    except KeyError:
        raise InvalidArgumentError(f"unknown radial profile {profile!r}") from None
    r = np.linalg.norm(mesh.vertices, axis=1)
    if r_min is None:
        r_min = 0.5 * r[r > 0].min()
    rho = rho_fn(np.maximum(r, r_min))
    if equilibrate:
        rho = rho - mesh.mean(rho)
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    return ForceField(np.zeros((len(mesh.boundary_facets), 3, 3)), rho[:, None] * e[None, :])


def gravity(mesh: Mesh, g_bar: float = 1.0, density_offset: float = 1.0,
            density_gradient=(0.0, 0.0, 0.0), density=None) -> ForceField:
    """``g = -g_bar * (rho - mean rho) e_3`` with an affine (or given) density.

    ``density`` may be a callable of the (V, 3) vertex array; otherwise
    ``rho(x) = density_offset + density_gradient . x``.
    """
    if mesh.n != 3:
        raise UnsupportedDimensionError("gravity requires a 3D mesh")
    if density is None:
        rho = density_offset + mesh.vertices @ np.asarray(density_gradient, dtype=float)
    else:
        rho = np.asarray(density(mesh.vertices), dtype=float)
    rho_bar = rho - mesh.mean(rho)
    body = np.zeros((mesh.n_vertices, 3))
    body[:, 2] = -g_bar * rho_bar
    return ForceField(np.zeros((len(mesh.boundary_facets), 3, 3)), body)


def zero(mesh: Mesh) -> ForceField:
    return ForceField.zeros(mesh)


BUILTIN_FIELDS = {
    "uniform-tension": uniform_tension,
    "uniform-compression": uniform_compression,
    "tangential-2d": tangential_2d,
    "radial-ball": radial_ball,
    "gravity": gravity,
    "zero": zero,
}


def builtin_field(name: str, mesh: Mesh, **params) -> ForceField:
    """Sample one of the named analytic force fields on ``mesh``."""
    try:
        fn = BUILTIN_FIELDS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown built-in field {name!r}; choose from {sorted(BUILTIN_FIELDS)}") from None
    try:
        return fn(mesh, **params)
    except TypeError as exc:
        raise InvalidArgumentError(f"bad parameters for {name}: {exc}") from None


def field_from_dict(mesh: Mesh, data: dict) -> ForceField:
    """Parse a field description.

    Either ``{"builtin": name, "params": {...}}`` or node-keyed
    ``{"traction": {node: vector}, "body": {node: vector}}``.  Facet-wise
    tractions may be given as ``"facet_traction"``: an (F, n, n) nested list.
    """
    if "builtin" in data:
        return builtin_field(data["builtin"], mesh, **data.get("params", {}))
    n = mesh.n

    def nodal(key):
        out = np.zeros((mesh.n_vertices, n))
        for node, vec in data.get(key, {}).items():
            i = int(node)
            if not 0 <= i < mesh.n_vertices:
                raise InvalidArgumentError(f"{key}: node {node} out of range")
            out[i] = np.asarray(vec, dtype=float)
        return out

    field = ForceField.from_nodal(mesh, nodal("traction"), nodal("body"))
    if "facet_traction" in data:
        extra = np.asarray(data["facet_traction"], dtype=float)
        field = ForceField(field.traction + extra, field.body)
    field.check_shape(mesh)
    return field
