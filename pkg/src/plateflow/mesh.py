"""Uniform triangulations of rectangles with the incidence data Morley needs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPLITS = ("diagonal", "crisscross")


@dataclass(frozen=True)
class Segment:
    """Axis-aligned boundary segment, e.g. ``Segment("x", 0.0)`` is the line x=0."""

    axis: str
    value: float
    lo: float = -np.inf
    hi: float = np.inf


@dataclass(eq=False)
class Mesh:
    """Triangulation of a rectangle.

    Attributes
    ----------
    vertices : (nV, 2) float array
    elements : (nT, 3) int array, counterclockwise
    edges : (nE, 2) int array with ``edges[:, 0] < edges[:, 1]``
    normals : (nE, 2) unit normals, the CCW rotation of the edge direction
    elem_edges : (nT, 3) local edge ``i`` is opposite local vertex ``i``
    """

    vertices: np.ndarray
    elements: np.ndarray
    edges: np.ndarray
    normals: np.ndarray
    elem_edges: np.ndarray
    bounds: tuple[float, float, float, float]
    dirichlet_edges: np.ndarray = field(default=None)
    dirichlet_vertices: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.dirichlet_edges is None:
            self.dirichlet_edges = np.zeros(len(self.edges), dtype=bool)
        if self.dirichlet_vertices is None:
            self.dirichlet_vertices = np.zeros(len(self.vertices), dtype=bool)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    @property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_element_count(self) -> np.ndarray:
        return np.bincount(self.elem_edges.ravel(), minlength=self.n_edges)

    def boundary_edges(self) -> np.ndarray:
        return self.edge_element_count() == 1

    def write_vtk(self, path, points3d=None, title="plateflow mesh"):
        """Dump as a legacy ASCII VTK unstructured grid of triangles."""
        pts = self.vertices if points3d is None else points3d
        if pts.shape[1] == 2:
            pts = np.column_stack([pts, np.zeros(len(pts))])
        lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
        lines.append(f"POINTS {len(pts)} double")
        lines.extend(f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in pts)
        nT = self.n_elements
        lines.append(f"CELLS {nT} {4 * nT}")
        lines.extend(f"3 {a} {b} {c}" for a, b, c in self.elements)
        lines.append(f"CELL_TYPES {nT}")
        lines.extend("5" for _ in range(nT))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _edges_from_elements(elements):
    local = ((1, 2), (2, 0), (0, 1))
    pairs = np.concatenate([elements[:, list(p)] for p in local])
    pairs.sort(axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    nT = len(elements)
    elem_edges = inverse.reshape(3, nT).T.copy()
    return edges, elem_edges


def mesh_from_triangles(vertices, elements) -> Mesh:
    """Mesh from explicit triangles; clockwise elements are reoriented."""
    vertices = np.asarray(vertices, dtype=float)
    elements = np.array(elements, dtype=np.int64)
    p = vertices[elements]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(cross == 0):
        raise ValueError("degenerate triangle")
    flip = cross < 0
    elements[flip] = elements[flip][:, [0, 2, 1]]
    return _finish(vertices, elements)


def _finish(vertices, elements):
    edges, elem_edges = _edges_from_elements(elements)
    d = vertices[edges[:, 1]] - vertices[edges[:, 0]]
    d /= np.linalg.norm(d, axis=1)[:, None]
    normals = np.column_stack([-d[:, 1], d[:, 0]])
    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    return Mesh(vertices, elements, edges, normals, elem_edges, (lo[0], hi[0], lo[1], hi[1]))


def build_rect_mesh(xmin, xmax, ymin, ymax, nx, ny, split="diagonal") -> Mesh:
    """Uniform triangulation of ``(xmin, xmax) x (ymin, ymax)``.

    ``diagonal`` cuts every cell along its lower-left to upper-right diagonal
    (``2 nx ny`` elements); ``crisscross`` adds a cell-centre vertex
    (``4 nx ny`` elements).
    """
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"empty rectangle ({xmin}, {xmax}) x ({ymin}, {ymax})")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"subdivision counts must be positive integers, got nx={nx}, ny={ny}")
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}; expected one of {SPLITS}")
    nx, ny = int(nx), int(ny)

    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    i, j = i.ravel(), j.ravel()
    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1

    if split == "diagonal":
        lower = np.column_stack([v00, v10, v11])
        upper = np.column_stack([v00, v11, v01])
        elements = np.stack([lower, upper], axis=1).reshape(-1, 3)
    else:
        centres = np.column_stack([xs[i] + 0.5 * (xs[1] - xs[0]), ys[j] + 0.5 * (ys[1] - ys[0])])
        c = len(vertices) + np.arange(len(i))
        vertices = np.vstack([vertices, centres])
        tris = [
            np.column_stack([v00, v10, c]),
            np.column_stack([v10, v11, c]),
            np.column_stack([v11, v01, c]),
            np.column_stack([v01, v00, c]),
        ]
        elements = np.stack(tris, axis=1).reshape(-1, 3)

    mesh = _finish(vertices, elements)
    mesh.bounds = (xmin, xmax, ymin, ymax)
    return mesh


def _on_segment(points, seg: Segment, tol):
    if seg.axis == "x":
        along, across = points[:, 1], points[:, 0]
    else:
        along, across = points[:, 0], points[:, 1]
    return (np.abs(across - seg.value) <= tol) & (along >= seg.lo - tol) & (along <= seg.hi + tol)


def mark_dirichlet(mesh: Mesh, segments) -> Mesh:
    """Mark the clamped part of the boundary; returns a new mesh sharing the arrays."""
    xmin, xmax, ymin, ymax = mesh.bounds
    tol = 1e-10 * max(xmax - xmin, ymax - ymin)
    bnd = mesh.boundary_edges()
    d_edges = np.zeros(mesh.n_edges, dtype=bool)
    for seg in segments:
        if seg.axis not in ("x", "y"):
            raise ValueError(f"segment axis must be 'x' or 'y', got {seg.axis!r}")
        sides = (xmin, xmax) if seg.axis == "x" else (ymin, ymax)
        if min(abs(seg.value - s) for s in sides) > tol:
            raise ValueError(f"segment {seg} does not lie on the boundary of {mesh.bounds}")
        on = _on_segment(mesh.vertices, seg, tol)
        d_edges |= bnd & on[mesh.edges[:, 0]] & on[mesh.edges[:, 1]]
    d_verts = np.zeros(mesh.n_vertices, dtype=bool)
    d_verts[mesh.edges[d_edges].ravel()] = True
    return Mesh(
        mesh.vertices, mesh.elements, mesh.edges, mesh.normals, mesh.elem_edges,
        mesh.bounds, d_edges, d_verts,
    )
