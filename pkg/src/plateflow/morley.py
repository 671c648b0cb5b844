"""Morley element: DOF layout, local basis, quadrature and assembly.

Per scalar component the DOFs are the vertex values followed by the normal
derivatives at edge midpoints (signed by the mesh's fixed edge normal).  A
deformation stacks three scalar blocks, so a field is a flat array of length
``3 * (n_vertices + n_edges)``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


class ModelError(ValueError):
    """Invalid problem data, e.g. a metric sample that is not SPD."""


# weights turning (h11, h12, h22) into the Frobenius product of symmetric 2x2 matrices
_FROB = np.array([1.0, 2.0, 1.0])


def _monomials(xi):
    x, y = xi[..., 0], xi[..., 1]
    one = np.ones_like(x)
    return np.stack([one, x, y, x * x, x * y, y * y], axis=-1)


def _monomial_grads(xi):
    x, y = xi[..., 0], xi[..., 1]
    z, one = np.zeros_like(x), np.ones_like(x)
    dx = np.stack([z, one, z, 2 * x, y, z], axis=-1)
    dy = np.stack([z, z, one, z, x, 2 * y], axis=-1)
    return np.stack([dx, dy], axis=-2)


class MorleySpace:
    """Three-component Morley space on a mesh, with precomputed element kernels.

    Kernel arrays (``nT`` elements, local DOFs ordered v0 v1 v2 e0 e1 e2 with
    edge ``i`` opposite vertex ``i``; quadrature point ``q`` is the midpoint of
    local edge ``q``):

    ``hess``   (nT, 3, 6)     local DOFs -> (d11, d12, d22), constant on T
    ``grad``   (nT, 3, 2, 6)  local DOFs -> gradient at each midpoint
    ``value``  (nT, 3, 6)     local DOFs -> value at each midpoint
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.n_scalar = mesh.n_vertices + mesh.n_edges
        self.ndof = 3 * self.n_scalar
        self.ldofs = np.hstack([mesh.elements, mesh.n_vertices + mesh.elem_edges])
        comp = np.arange(3)[None, :, None] * self.n_scalar
        self.gdofs = np.ascontiguousarray(comp + self.ldofs[:, None, :])
        self.area = mesh.areas
        self.qpoints = mesh.midpoints[mesh.elem_edges]
        self._build_kernels()

        mask = np.concatenate([mesh.dirichlet_vertices, mesh.dirichlet_edges])
        self.dirichlet = np.tile(mask, 3)
        self.free = np.flatnonzero(~self.dirichlet)

    def _build_kernels(self):
        mesh = self.mesh
        p = mesh.vertices[mesh.elements]
        centre = p.mean(axis=1)
        h = np.sqrt(2.0 * self.area)
        s = lambda x: (x - centre[:, None, :]) / h[:, None, None]

        nu = mesh.normals[mesh.elem_edges]
        V = np.empty((len(p), 6, 6))
        V[:, :3, :] = _monomials(s(p))
        dm = _monomial_grads(s(self.qpoints))
        V[:, 3:, :] = np.einsum("tqak,tqa->tqk", dm, nu) / h[:, None, None]
        C = np.linalg.inv(V)

        inv_h = 1.0 / h
        self.hess = np.ascontiguousarray(
            np.stack([2 * C[:, 3, :], C[:, 4, :], 2 * C[:, 5, :]], axis=1) * (inv_h**2)[:, None, None]
        )
        self.grad = np.ascontiguousarray(np.einsum("tqak,tkd->tqad", dm, C) * inv_h[:, None, None, None])
        self.value = np.ascontiguousarray(np.einsum("tqk,tkd->tqd", _monomials(s(self.qpoints)), C))
        self._dofmatrix = V

    # field helpers -------------------------------------------------------

    def zeros(self):
        return np.zeros(self.ndof)

    def components(self, y):
        return y.reshape(3, self.n_scalar)

    def local(self, y):
        """Gather to (nT, 3 components, 6 local DOFs)."""
        return y[self.gdofs]

    def hessians(self, y):
        """Element Hessians as (nT, component, [d11, d12, d22])."""
        return np.einsum("tjk,tmk->tmj", self.hess, self.local(y))

    def gradients(self, y):
        """Gradients at midpoints as (nT, q, component, direction)."""
        return np.einsum("tqak,tmk->tqma", self.grad, self.local(y))

    def vertex_values(self, y):
        return self.components(y)[:, : self.mesh.n_vertices].T

    def scatter(self, local):
        """Sum (nT, 3, 6) element contributions into a global vector."""
        return np.bincount(self.gdofs.ravel(), weights=local.ravel(), minlength=self.ndof)

    def assemble_matrix(self, ke):
        """Assemble a per-component element matrix (nT, 6, 6) into the 3-block system."""
        ke = 0.5 * (ke + ke.transpose(0, 2, 1))
        rows = np.broadcast_to(self.gdofs[:, :, :, None], self.gdofs.shape + (6,))
        cols = np.broadcast_to(self.gdofs[:, :, None, :], self.gdofs.shape + (6,))
        vals = np.broadcast_to(ke[:, None, :, :], rows.shape)
        M = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(self.ndof, self.ndof))
        return M.tocsr()


def quadrature(area, samples):
    """Edge-midpoint rule ``|T|/3 * sum(samples)``; exact for quadratics.

    ``samples`` has the three midpoint values on its axis 1 (or is a length-3
    vector for a single triangle).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        return area / 3.0 * samples.sum()
    a = np.reshape(area, (-1,) + (1,) * (samples.ndim - 2))
    return a / 3.0 * samples.sum(axis=1)


def interpolate(space: MorleySpace, f, grad_f):
    """Morley interpolant of ``f: (n, 2) -> (n, 3)`` with Jacobian ``grad_f: (n, 2) -> (n, 3, 2)``."""
    mesh = space.mesh
    vals = np.asarray(f(mesh.vertices), dtype=float)
    jac = np.asarray(grad_f(mesh.midpoints), dtype=float)
    nder = np.einsum("emi,ei->em", jac, mesh.normals)
    return np.concatenate([vals, nder]).T.ravel().copy()


def sample_tensor(space: MorleySpace, fn):
    """Evaluate a 2x2 tensor field at every element's midpoints: (nT, 3, 2, 2)."""
    pts = space.qpoints.reshape(-1, 2)
    out = np.asarray(fn(pts), dtype=float)
    return out.reshape(space.mesh.n_elements, 3, 2, 2)


def _sym_basis_products(G):
    """W[..., i, j] = tr(G E_i G E_j) for the symmetric basis E of (d11, d12, d22)."""
    E = np.array([[[1.0, 0], [0, 0]], [[0, 1.0], [1.0, 0]], [[0, 0], [0, 1.0]]])
    GE = np.einsum("...ab,ibc->...iac", G, E)
    return np.einsum("...iab,...jba->...ij", GE, GE)


def assemble_h2_product(space: MorleySpace):
    """Broken H2 product: ``v^T M w = sum_T |T| D2v : D2w`` over all components."""
    H = space.hess
    ke = space.area[:, None, None] * np.einsum("tik,i,til->tkl", H, _FROB, H)
    return space.assemble_matrix(ke)


def assemble_bilayer_a(space: MorleySpace):
    return assemble_h2_product(space)


def metric_inverse(g):
    """Closed-form inverse of SPD 2x2 samples; raises on non-SPD input."""
    a, b, c = g[..., 0, 0], g[..., 0, 1], g[..., 1, 1]
    det = a * c - b * b
    bad = ~((a > 0) & (det > 0) & np.isclose(g[..., 0, 1], g[..., 1, 0]))
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise ModelError(f"metric sample is not SPD on element {idx[0]} (midpoint {idx[1]})")
    inv = np.empty_like(g)
    inv[..., 0, 0] = c / det
    inv[..., 1, 1] = a / det
    inv[..., 0, 1] = inv[..., 1, 0] = -b / det
    return inv


def prestrain_weights(space, g_samples, mu, lam):
    """Per-element 3x3 quadratic forms on (d11, d12, d22) such that
    ``E_pre^h = sum_T h^T W_T h`` summed over components."""
    Ginv = metric_inverse(g_samples)
    frob = _sym_basis_products(Ginv)
    tr = np.stack([Ginv[..., 0, 0], 2 * Ginv[..., 0, 1], Ginv[..., 1, 1]], axis=-1)
    dens = frob + (lam / (2 * mu + lam)) * tr[..., :, None] * tr[..., None, :]
    return mu / 12.0 * quadrature(space.area, dens)


def assemble_ag(space: MorleySpace, g_samples, mu, lam):
    """Matrix of ``a_g(y, v) = dE_pre[y](v)``, so ``v^T A_g v = 2 E_pre^h[v]``."""
    W = prestrain_weights(space, g_samples, mu, lam)
    H = space.hess
    ke = 2.0 * np.einsum("tik,tij,tjl->tkl", H, W, H)
    return space.assemble_matrix(ke)


def assemble_load(space: MorleySpace, f):
    """``v^T F = sum_T Q_T(f . v)`` for a constant load vector ``f``."""
    f = np.asarray(f, dtype=float)
    local = (space.area / 3.0)[:, None, None] * space.value.sum(axis=1)[:, None, :] * f[None, :, None]
    return space.scatter(local)
