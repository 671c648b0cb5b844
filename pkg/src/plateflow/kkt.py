"""Saddle-point solve for increments restricted to the discrete tangent space.

Each step solves

    [ S   B^T ] [dy    ]   [r]
    [ B   0   ] [lambda] = [0]

on the free (non-Dirichlet) DOFs, with ``S = M / tau^2 + c_A * A`` fixed for a
run and ``B`` rebuilt from the current base point.  The factorization is a
sparse LDL^T of the quasi-definite matrix obtained by putting ``-eps I`` in the
multiplier block; iterative refinement against the unregularized system
removes the perturbation.  The sparsity pattern depends on mesh topology only,
so the symbolic analysis is done once.
"""

from __future__ import annotations

import logging

import numpy as np
import qdldl
import scipy.sparse as sp

from .constraint import ConstraintMatrix
from .morley import MorleySpace

log = logging.getLogger(__name__)


class KktError(RuntimeError):
    pass


class KktSolver:
    """Factor-and-solve helper for one run (fixed ``S``, changing ``B``)."""

    def __init__(self, space: MorleySpace, S, reg=1e-8, rtol=1e-12, max_refine=20):
        self.space = space
        self.reg = reg
        self.rtol = rtol
        self.max_refine = max_refine
        free = space.free
        self.n_free = len(free)
        self.n_mult = 3 * space.mesh.n_elements
        S = sp.csr_matrix(S)[free][:, free]
        self.S = S.tocsr()
        self.S_max = float(np.abs(self.S.data).max())

        # column positions of B entries that survive Dirichlet elimination
        free_index = np.full(space.ndof, -1)
        free_index[free] = np.arange(self.n_free)
        nT = space.mesh.n_elements
        shape = (nT, 3, 3, 6)
        cols = free_index[np.broadcast_to(space.gdofs[:, None, :, :], shape)].ravel()
        rows = np.broadcast_to(np.arange(3 * nT).reshape(nT, 3, 1, 1), shape).ravel()
        self._bkeep = cols >= 0
        bcols, brows = cols[self._bkeep], rows[self._bkeep]

        # upper triangle of the KKT matrix in CSC: triu(S), B^T block, multiplier diagonal
        Su = sp.triu(self.S).tocoo()
        n = self.n_free + self.n_mult
        R = np.concatenate([Su.row, bcols, self.n_free + np.arange(self.n_mult)])
        C = np.concatenate([Su.col, self.n_free + brows, self.n_free + np.arange(self.n_mult)])
        self._order = np.lexsort((R, C))
        self._indices = R[self._order].astype(np.int64)
        self._indptr = np.concatenate([[0], np.cumsum(np.bincount(C, minlength=n))]).astype(np.int64)
        self._svals = Su.data
        self._sdiag = self.S.diagonal()
        self._n = n
        self._solver = None
        self._U = None
        self.eps = 0.0
        self.last_refinements = 0

    def _upper(self, bvals, eps):
        data = np.concatenate([self._svals, bvals, np.full(self.n_mult, -eps)])[self._order]
        return sp.csc_matrix((data, self._indices, self._indptr), shape=(self._n, self._n))

    def factor(self, constraints: ConstraintMatrix):
        bvals = constraints.values.ravel()[self._bkeep]
        bmax = float(np.abs(bvals).max()) if len(bvals) else 0.0
        # regularization relative to the Schur-complement scale |B|^2 / |S|
        self.eps = self.reg * max(bmax * bmax / self.S_max, 1e-300)
        self._bvals = bvals
        U = self._upper(bvals, self.eps)
        try:
            self._factor(U)
        except Exception as exc:  # zero pivot
            eps = 1e-10 * self.S_max
            log.warning("KKT factorization failed (%s); retrying with multiplier regularization %.3e", exc, eps)
            self.eps = eps
            U = self._upper(bvals, eps)
            try:
                self._factor(U)
            except Exception as exc2:
                raise KktError(f"KKT factorization failed after regularization: {exc2}") from exc2
        self._U = U

    def _factor(self, U):
        if self._solver is None:
            self._solver = qdldl.Solver(U, upper=True)
        else:
            self._solver.update(U, upper=True)

    def _apply(self, x):
        """Unregularized KKT matrix times x."""
        U = self._U
        y = U @ x + U.T @ x
        y[: self.n_free] -= self._sdiag * x[: self.n_free]
        # U carries -eps on the multiplier diagonal twice (U and U^T); the true block is 0
        y[self.n_free :] += 2.0 * self.eps * x[self.n_free :]
        return y

    def solve(self, rhs):
        """Solve with a full-length right-hand side; returns (dy, multipliers)."""
        rhs = np.asarray(rhs, dtype=float)
        if not np.all(np.isfinite(rhs)):
            raise ValueError("right-hand side contains NaN or inf")
        b = np.zeros(self._n)
        b[: self.n_free] = rhs[self.space.free]
        scale = float(np.abs(b).max())
        dy = np.zeros(self.space.ndof)
        if scale == 0.0:
            return dy, np.zeros(self.n_mult)
        x = self._solver.solve(b)
        tol = self.rtol * scale
        k = 0
        prev = np.inf
        for k in range(self.max_refine + 1):
            res = b - self._apply(x)
            rnorm = float(np.abs(res).max())
            if rnorm <= tol:
                break
            # roundoff floor reached: further sweeps cannot help
            if rnorm > 0.5 * prev or k == self.max_refine:
                if rnorm > 1e3 * tol:
                    log.warning("KKT refinement stalled: residual %.3e (target %.3e)", rnorm, tol)
                break
            prev = rnorm
            x += self._solver.solve(res)
        self.last_refinements = k
        dy[self.space.free] = x[: self.n_free]
        return dy, x[self.n_free :]

    def residuals(self, dy, lam, rhs):
        """(stationarity, feasibility) residuals in the max norm."""
        x = np.concatenate([dy[self.space.free], lam])
        b = np.zeros(self._n)
        b[: self.n_free] = rhs[self.space.free]
        res = b - self._apply(x)
        return float(np.abs(res[: self.n_free]).max()), float(np.abs(res[self.n_free :]).max())


def step_matrix(M, A, tau, c_A=1.0):
    """S = M / tau^2 + c_A A."""
    return (M * (1.0 / tau**2) + A * c_A).tocsr()


def solve_step(space, M, A, tau, c_A, constraints, rhs):
    """One-off constrained solve; runs create a :class:`KktSolver` once instead."""
    solver = KktSolver(space, step_matrix(M, A, tau, c_A))
    solver.factor(constraints)
    return solver.solve(rhs)


def build_rhs_bdf1(A, M, tau, w, y, explicit=None):
    """-A w + (w - y) M / tau^2, plus explicit forces (cubic term, load)."""
    r = -(A @ w) + (M @ (w - y)) / tau**2
    if explicit is not None:
        r += explicit
    return r


def build_rhs_bdf1_pre(A_g, M, tau, w, y):
    return build_rhs_bdf1(A_g, M, tau, w, y)


def build_rhs_bdf1_bi(A, M, tau, w, y, ell_w):
    return build_rhs_bdf1(A, M, tau, w, y, ell_w)


def build_rhs_bdf2(A, M, tau, w, w_prev, y, explicit=None):
    """A(-4/3 w + 1/3 w_prev) + (w - y) M / tau^2 (+ explicit); pairs with c_A = 2/3."""
    r = A @ (-(4.0 / 3.0) * w + (1.0 / 3.0) * w_prev) + (M @ (w - y)) / tau**2
    if explicit is not None:
        r += explicit
    return r
