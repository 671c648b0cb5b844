import numpy as np

from plateflow.constraint import build_constraints, extrapolated_base
from plateflow.mesh import mesh_from_triangles
from plateflow.model import PlateProblem, make_benchmark
from plateflow.morley import MorleySpace, interpolate

from conftest import random_field


def two_triangles():
    return MorleySpace(mesh_from_triangles([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]]))


def rotated_plate(space, R, b):
    return interpolate(
        space,
        lambda p: (R[:, :2] @ p.T).T + b,
        lambda p: np.broadcast_to(R[:, :2], (len(p), 3, 2)),
    )


def rotation(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    return Q * np.sign(np.linalg.det(Q))


def test_infinitesimal_rotations_in_kernel(rng):
    sp = two_triangles()
    R = rotation(rng)
    y = rotated_plate(sp, R, rng.standard_normal(3))
    C = build_constraints(sp, y)
    for _ in range(3):
        W = rng.standard_normal((3, 3))
        W = W - W.T
        # v = W y is tangent to the rigid motion group
        v = interpolate(sp, lambda p: (W @ ((R[:, :2] @ p.T))).T, lambda p: np.broadcast_to(W @ R[:, :2], (len(p), 3, 2)))
        assert np.abs(C.apply(v)).max() < 1e-13
        assert np.abs(C.B @ v).max() < 1e-13


def test_rows_are_derivative_of_defect(small_problems, rng):
    # the defect is quadratic in y, so the central difference is exact
    P = small_problems["prestrained"]
    y = P.y0 + random_field(P, rng, 0.1)
    v = random_field(P, rng)
    h = 0.5
    dd = (P.metric_defect(y + h * v) - P.metric_defect(y - h * v)) / (2 * h)
    L = build_constraints(P.space, y).apply(v)
    assert np.allclose(L[:, 0], dd[:, 0, 0], atol=1e-11)
    assert np.allclose(L[:, 1], dd[:, 0, 1], atol=1e-11)
    assert np.allclose(L[:, 2], dd[:, 1, 1], atol=1e-11)


def test_row_scaling_preserves_kernel(small_problems, rng):
    P = small_problems["bilayer"]
    y = P.y0 + random_field(P, rng, 0.1)
    v = random_field(P, rng)
    a = build_constraints(P.space, y)
    b = build_constraints(P.space, y, scale_rows=True)
    assert np.allclose(a.apply(v), b.apply(v), atol=1e-13)
    assert np.allclose((b.B @ v).reshape(-1, 3) * P.space.area[:, None], (a.B @ v).reshape(-1, 3))


def test_extrapolated_base():
    assert np.allclose(extrapolated_base(np.array([2.0, 3.0]), np.array([1.0, 5.0])), [3.0, 1.0])


def test_matrix_shape():
    P = PlateProblem(make_benchmark("kirchhoff"), 2, 2)
    C = build_constraints(P.space, P.y0)
    assert C.B.shape == (3 * 8, P.space.ndof)
