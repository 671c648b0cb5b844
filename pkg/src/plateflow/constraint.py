"""Linearized metric constraint L_T(y; v) = Q_T(grad v^T grad y + grad y^T grad v)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .morley import MorleySpace


@dataclass
class ConstraintMatrix:
    """Three rows per element: the (1,1), (1,2) and (2,2) entries of L_T.

    ``values`` keeps the raw (nT, 3, 3, 6) coefficient blocks so the KKT
    assembly can refill a fixed sparsity pattern without rebuilding ``B``.
    """

    space: MorleySpace
    values: np.ndarray
    base: np.ndarray
    row_scale: np.ndarray | None = None

    @property
    def n_rows(self) -> int:
        return 3 * self.space.mesh.n_elements

    @property
    def B(self):
        nT = self.space.mesh.n_elements
        rows = np.broadcast_to(np.arange(3 * nT).reshape(nT, 3, 1, 1), self.values.shape)
        cols = np.broadcast_to(self.space.gdofs[:, None, :, :], self.values.shape)
        return sp.csr_matrix(
            (self.values.ravel(), (rows.ravel(), cols.ravel())), shape=(self.n_rows, self.space.ndof)
        )

    def apply(self, v):
        """Per-element L_T entries as (nT, 3), with any row scaling undone."""
        vals = np.einsum("trmk,tmk->tr", self.values, self.space.local(v))
        if self.row_scale is not None:
            vals = vals * self.row_scale[:, None]
        return vals


def build_constraints(space: MorleySpace, y_base, scale_rows=False) -> ConstraintMatrix:
    """Constraint rows at ``y_base``; ``scale_rows`` divides each element's rows by |T|."""
    yloc = np.ascontiguousarray(space.local(y_base))
    values = kernels.constraint_rows(space.grad, space.area, yloc)
    row_scale = None
    if scale_rows:
        row_scale = space.area.copy()
        values = values / row_scale[:, None, None, None]
    return ConstraintMatrix(space, values, np.asarray(y_base), row_scale)


def extrapolated_base(y_n, y_nm1):
    """2 y^n - y^{n-1}, the base point of the second-order scheme."""
    return 2.0 * y_n - y_nm1
