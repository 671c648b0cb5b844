"""NumPy implementations of the per-element kernels (fallback for the Cython core).

All functions take the element kernel arrays of :class:`~plateflow.morley.MorleySpace`
and a gathered field ``yloc`` of shape (nT, 3 components, 6 local DOFs).
"""

import numpy as np


def _zcontract(Z):
    # Z_ij d_ij summed over i,j with d symmetric, in (d11, d12, d22) coordinates
    return np.stack([Z[..., 0, 0], Z[..., 0, 1] + Z[..., 1, 0], Z[..., 1, 1]], axis=-1)


def _pieces(hess, grad, Z, yloc):
    Hy = np.einsum("tjk,tmk->tmj", hess, yloc)
    zc = _zcontract(Z)
    k = np.einsum("tqj,tmj->tqm", zc, Hy)
    gy = np.einsum("tqak,tmk->tqam", grad, yloc)
    return zc, k, gy


def cubic_energy(hess, grad, area, Z, yloc):
    """sum_T Q_T( sum_ij Z_ij d_ij y . (d1 y x d2 y) )."""
    _, k, gy = _pieces(hess, grad, Z, yloc)
    n = np.cross(gy[:, :, 0], gy[:, :, 1])
    return float(np.sum(area / 3.0 * np.einsum("tqm,tqm->t", k, n)))


def cubic_gradient(hess, grad, area, Z, yloc):
    """Element contributions (nT, 3, 6) of the first variation of :func:`cubic_energy`."""
    zc, k, gy = _pieces(hess, grad, Z, yloc)
    g1, g2 = gy[:, :, 0], gy[:, :, 1]
    n = np.cross(g1, g2)
    a = np.cross(g2, k)
    b = np.cross(k, g1)
    zH = np.einsum("tqj,tjk->tqk", zc, hess)
    out = np.einsum("tqk,tqm->tmk", zH, n)
    out += np.einsum("tqk,tqm->tmk", grad[:, :, 0], a)
    out += np.einsum("tqk,tqm->tmk", grad[:, :, 1], b)
    return out * (area / 3.0)[:, None, None]


def constraint_rows(grad, area, yloc):
    """Coefficients (nT, 3 rows, 3 components, 6) of Q_T(grad v^T grad y + grad y^T grad v).

    Rows are the (1,1), (1,2) and (2,2) entries.
    """
    gy = np.einsum("tqak,tmk->tqam", grad, yloc)
    w = (area / 3.0)[:, None, None]
    r0 = 2.0 * np.einsum("tqk,tqm->tmk", grad[:, :, 0], gy[:, :, 0])
    r1 = np.einsum("tqk,tqm->tmk", grad[:, :, 0], gy[:, :, 1]) + np.einsum(
        "tqk,tqm->tmk", grad[:, :, 1], gy[:, :, 0]
    )
    r2 = 2.0 * np.einsum("tqk,tqm->tmk", grad[:, :, 1], gy[:, :, 1])
    return np.stack([r0 * w, r1 * w, r2 * w], axis=1)


def metric_defect(grad, area, g, yloc):
    """Per-element Q_T(grad y^T grad y - g) as (nT, 2, 2)."""
    gy = np.einsum("tqak,tmk->tqam", grad, yloc)
    first = np.einsum("tqam,tqbm->tqab", gy, gy)
    return (area / 3.0)[:, None, None] * (first - g).sum(axis=1)
