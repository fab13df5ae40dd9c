"""Simplicial meshes with boundary facet data, and a few built-in generators."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from math import factorial

import numpy as np
import scipy.sparse as sp
from scipy.spatial import Delaunay

from .errors import InvalidMeshError, UnsupportedDimensionError


def _simplex_measure(pts: np.ndarray) -> np.ndarray:
    """Signed measure of simplices; ``pts`` has shape (m, n+1, n)."""
    n = pts.shape[-1]
    edges = pts[:, 1:, :] - pts[:, :1, :]
    return np.linalg.det(edges) / factorial(n)


def _facet_geometry(pts: np.ndarray):
    """Measure and unit normal (unoriented) of facets, ``pts`` shape (m, n, n)."""
    n = pts.shape[-1]
    if n == 2:
        t = pts[:, 1] - pts[:, 0]
        meas = np.linalg.norm(t, axis=1)
        nrm = np.stack([t[:, 1], -t[:, 0]], axis=1)
    elif n == 3:
        nrm = np.cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0])
        meas = 0.5 * np.linalg.norm(nrm, axis=1)
    else:
        raise UnsupportedDimensionError(f"meshes are 2D or 3D, got {n}")
    nrm = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
    return meas, nrm


@dataclass(frozen=True, eq=False)
class Mesh:
    """A conforming simplicial mesh of a domain in R^n, n in {2, 3}.

    Cells are positively oriented.  Boundary facets carry the outward unit
    normal and (in 2D) the counter-clockwise unit tangent.
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_facets: np.ndarray
    normals: np.ndarray
    facet_measures: np.ndarray
    cell_measures: np.ndarray
    name: str = field(default="mesh")

    @property
    def n(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def volume(self) -> float:
        return float(self.cell_measures.sum())

    @property
    def tangents(self) -> np.ndarray | None:
        if self.n != 2:
            return None
        return np.stack([-self.normals[:, 1], self.normals[:, 0]], axis=1)

    @classmethod
    def from_arrays(cls, vertices, cells, boundary=None, normals=None, name="mesh") -> "Mesh":
        """Build a mesh, orienting cells and deriving the boundary.

        ``boundary`` (facet vertex lists) and ``normals`` are optional; when
        given they must agree with the facets and outward normals derived
        from the cells.
        """
        vertices = np.asarray(vertices, dtype=float)
        cells = np.array(cells, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
            raise InvalidMeshError("vertices must have shape (V, 2) or (V, 3)")
        n = vertices.shape[1]
        if cells.ndim != 2 or cells.shape[1] != n + 1:
            raise InvalidMeshError(f"cells must have {n + 1} vertices each")
        if cells.min() < 0 or cells.max() >= len(vertices):
            raise InvalidMeshError("cell references a missing vertex")
        vol = _simplex_measure(vertices[cells])
        neg = vol < 0
        cells[neg, 0], cells[neg, 1] = cells[neg, 1].copy(), cells[neg, 0].copy()
        vol = np.abs(vol)
        scale = np.max(np.ptp(vertices, axis=0)) ** n
        if np.any(vol <= 1e-14 * scale):
            raise InvalidMeshError("degenerate cell with zero measure")

        # a facet lies on the boundary iff exactly one cell owns it
        owner = {}
        for c, cell in enumerate(cells):
            for k in range(n + 1):
                face = tuple(sorted(np.delete(cell, k)))
                if face in owner:
                    owner[face] = None
                else:
                    owner[face] = (c, cell[k])
        bfaces = [(f, o) for f, o in owner.items() if o is not None]
        bfaces.sort()
        facets = np.array([f for f, _ in bfaces], dtype=np.int64).reshape(-1, n)
        opposite = np.array([o[1] for _, o in bfaces], dtype=np.int64)
        meas, nrm = _facet_geometry(vertices[facets])
        inward = vertices[opposite] - vertices[facets[:, 0]]
        flip = np.einsum("ij,ij->i", nrm, inward) > 0
        nrm[flip] = -nrm[flip]
        # orient facet node order so that 2D tangents run counter-clockwise
        if n == 2:
            tang = np.stack([-nrm[:, 1], nrm[:, 0]], axis=1)
            backwards = np.einsum("ij,ij->i", vertices[facets[:, 1]] - vertices[facets[:, 0]], tang) < 0
            facets[backwards] = facets[backwards][:, ::-1]

        if boundary is not None:
            given = {tuple(sorted(b)) for b in boundary}
            if len(given) != len(boundary) or given != {tuple(sorted(f)) for f in facets}:
                raise InvalidMeshError("boundary facets do not tile the boundary exactly once")
            if normals is not None:
                lookup = {tuple(sorted(f)): i for i, f in enumerate(facets)}
                for b, nv in zip(boundary, normals):
                    nv = np.asarray(nv, dtype=float)
                    if np.linalg.norm(nv / np.linalg.norm(nv) - nrm[lookup[tuple(sorted(b))]]) > 1e-8:
                        raise InvalidMeshError(f"boundary normal of facet {list(b)} is not the outward normal")

        mesh = cls(vertices, cells, facets, nrm, meas, vol, name)
        closure = np.linalg.norm(mesh.facet_measures @ mesh.normals)
        if closure > 1e-10 * max(1.0, mesh.facet_measures.sum()):
            raise InvalidMeshError(f"boundary is not closed (sum of area-weighted normals = {closure:.3e})")
        return mesh

    # ---- finite element data -------------------------------------------

    @cached_property
    def shape_gradients(self) -> np.ndarray:
        """Gradients of the P1 hat functions, shape (C, n+1, n)."""
        pts = self.vertices[self.cells]
        edges = pts[:, 1:, :] - pts[:, :1, :]  # (C, n, n), rows are edges
        inv = np.linalg.inv(edges)  # columns: gradients of barycentric 1..n
        g = np.empty((len(self.cells), self.n + 1, self.n))
        g[:, 1:, :] = np.transpose(inv, (0, 2, 1))
        g[:, 0, :] = -g[:, 1:, :].sum(axis=1)
        return g

    def gradient(self, y: np.ndarray) -> np.ndarray:
        """Cellwise gradient of a nodal P1 field ``y`` (V, n): shape (C, n, n)."""
        return np.einsum("cai,caj->cij", y[self.cells], self.shape_gradients)

    @cached_property
    def mass_matrix(self) -> sp.csr_matrix:
        """Consistent P1 mass matrix (scalar)."""
        return _p1_mass(self.cells, self.cell_measures, self.n_vertices)

    @cached_property
    def boundary_mass_matrix(self) -> sp.csr_matrix:
        return _p1_mass(self.boundary_facets, self.facet_measures, self.n_vertices)

    @cached_property
    def lumped_mass(self) -> np.ndarray:
        return np.asarray(self.mass_matrix.sum(axis=1)).ravel()

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_facets)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Integral of a nodal P1 field (scalar or vector valued)."""
        return self.lumped_mass @ values

    def l2_inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """L2 inner product of two nodal vector fields of shape (V, n)."""
        return float(np.sum(a * (self.mass_matrix @ b)))

    def mean(self, values: np.ndarray) -> np.ndarray:
        return self.integrate(values) / self.volume

    # ---- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "vertices": self.vertices.tolist(),
            "cells": self.cells.tolist(),
            "boundary": [
                {"nodes": f.tolist(), "normal": nv.tolist()}
                for f, nv in zip(self.boundary_facets, self.normals)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, name="mesh") -> "Mesh":
        try:
            n = int(data["n"])
            vertices = np.asarray(data["vertices"], dtype=float)
            cells = data["cells"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidMeshError(f"malformed mesh description: {exc!r}") from exc
        if vertices.ndim != 2 or vertices.shape[1] != n:
            raise InvalidMeshError("mesh 'vertices' do not match 'n'")
        boundary = normals = None
        if "boundary" in data:
            boundary = [b["nodes"] for b in data["boundary"]]
            if all("normal" in b for b in data["boundary"]):
                normals = [b["normal"] for b in data["boundary"]]
        return cls.from_arrays(vertices, cells, boundary, normals, name=name)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _p1_mass(simplices: np.ndarray, measures: np.ndarray, n_nodes: int) -> sp.csr_matrix:
    k = simplices.shape[1]  # nodes per simplex; dimension k - 1
    local = (np.ones((k, k)) + np.eye(k)) / (k * (k + 1))
    rows = np.repeat(simplices, k, axis=1).ravel()
    cols = np.tile(simplices, (1, k)).ravel()
    vals = (measures[:, None, None] * local[None]).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes))


# --------------------------------------------------------------------------
# generators


def unit_square(subdivisions: int = 8) -> Mesh:
    """Structured triangulation of [0, 1]^2 with ``subdivisions`` squares per side."""
    m = int(subdivisions)
    if m < 1:
        raise InvalidMeshError("subdivisions must be >= 1")
    s = np.linspace(0.0, 1.0, m + 1)
    xx, yy = np.meshgrid(s, s, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    idx = np.arange((m + 1) ** 2).reshape(m + 1, m + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    cells = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return Mesh.from_arrays(vertices, cells, name=f"unit-square-{m}")


def unit_disk(segments: int = 32) -> Mesh:
    """Polygonal approximation of the unit disk with ``segments`` boundary edges."""
    segments = int(segments)
    if segments < 6:
        raise InvalidMeshError("need at least 6 boundary segments")
    rings = max(1, int(round(segments / (2 * np.pi))))
    pts = [np.zeros(2)]
    for k in range(1, rings + 1):
        r = k / rings
        count = segments if k == rings else max(6, int(round(segments * r)))
        phase = 0.0 if k == rings else 0.5 * (k % 2) * 2 * np.pi / count
        th = phase + 2 * np.pi * np.arange(count) / count
        pts.extend(np.column_stack([r * np.cos(th), r * np.sin(th)]))
    vertices = np.array(pts)
    tri = Delaunay(vertices)
    return Mesh.from_arrays(vertices, tri.simplices, name=f"unit-disk-{segments}")


def icosphere(level: int):
    """Vertices (on the unit sphere) and triangles of a subdivided icosahedron."""
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(level):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return np.array(verts), np.array(faces, dtype=np.int64)


def unit_ball(level: int = 2, layers: int | None = None) -> Mesh:
    """Unit ball built from ``layers`` concentric copies of an icosphere.

    Each spherical shell is split into prisms over the icosphere triangles
    and every prism into three tetrahedra, with diagonals chosen by vertex
    index so neighbouring prisms agree on shared faces.
    """
    level = int(level)
    if level < 0:
        raise InvalidMeshError("refinement level must be >= 0")
    if layers is None:
        layers = 2 ** level
    sphere, faces = icosphere(level)
    nv = len(sphere)
    vertices = [np.zeros((1, 3))]
    for k in range(layers):
        vertices.append(sphere * (k + 1) / layers)
    vertices = np.concatenate(vertices)

    def node(k, i):
        return 1 + k * nv + i

    faces = np.sort(faces, axis=1)
    cells = [np.column_stack([np.zeros(len(faces), dtype=np.int64), node(0, faces)])]
    for k in range(layers - 1):
        a, b, c = (faces[:, j] for j in range(3))
        a0, b0, c0 = node(k, a), node(k, b), node(k, c)
        a1, b1, c1 = node(k + 1, a), node(k + 1, b), node(k + 1, c)
        cells.append(np.column_stack([a0, b0, c0, c1]))
        cells.append(np.column_stack([a0, b0, b1, c1]))
        cells.append(np.column_stack([a0, a1, b1, c1]))
    cells = np.concatenate(cells)
    return Mesh.from_arrays(vertices, cells, name=f"unit-ball-{level}")


GENERATORS = {
    "unit-square": (unit_square, {"subdivisions"}),
    "unit-disk": (unit_disk, {"segments"}),
    "unit-ball": (unit_ball, {"level", "layers"}),
}


def builtin_mesh(name: str, **params) -> Mesh:
    try:
        gen, allowed = GENERATORS[name]
    except KeyError:
        raise InvalidMeshError(f"unknown built-in mesh {name!r}; choose from {sorted(GENERATORS)}") from None
    extra = set(params) - allowed
    if extra:
        raise InvalidMeshError(f"unknown parameters for {name}: {sorted(extra)}")
    return gen(**params)
