"""Plate models, discrete energies, metric defect and the benchmark problems."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .mesh import Segment, build_rect_mesh, mark_dirichlet
from .morley import (
    ModelError,
    MorleySpace,
    assemble_ag,
    assemble_bilayer_a,
    assemble_h2_product,
    assemble_load,
    interpolate,
    metric_inverse,
    sample_tensor,
)

TensorField = Callable[[np.ndarray], np.ndarray]


def constant_tensor(mat) -> TensorField:
    mat = np.asarray(mat, dtype=float)
    return lambda pts: np.broadcast_to(mat, (len(pts), 2, 2)).copy()


def flat_map(pts):
    return np.column_stack([pts[:, 0], pts[:, 1], np.zeros(len(pts))])


def flat_jacobian(pts):
    jac = np.zeros((len(pts), 3, 2))
    jac[:, 0, 0] = jac[:, 1, 1] = 1.0
    return jac


@dataclass
class PrestrainedModel:
    g: TensorField
    mu: float
    lam: float
    phi: Callable = flat_map
    grad_phi: Callable = flat_jacobian
    load: np.ndarray | None = None

    def __post_init__(self):
        if self.mu <= 0 or self.lam < 0:
            raise ModelError(f"Lame parameters need mu > 0 and lambda >= 0, got mu={self.mu}, lambda={self.lam}")


@dataclass
class BilayerModel:
    Z: TensorField
    phi: Callable = flat_map
    grad_phi: Callable = flat_jacobian


@dataclass
class Benchmark:
    tag: str
    model: PrestrainedModel | BilayerModel
    bounds: tuple[float, float, float, float]
    dirichlet: list[Segment]
    y0: Callable
    grad_y0: Callable
    params: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)

    @property
    def is_bilayer(self) -> bool:
        return isinstance(self.model, BilayerModel)


# -- benchmarks --------------------------------------------------------------

TAGS = ("kirchhoff-load", "bilayer-iso", "prestrained-aniso")
ALIASES = {
    "kirchhoff": "kirchhoff-load",
    "example1": "kirchhoff-load",
    "bilayer": "bilayer-iso",
    "example2": "bilayer-iso",
    "prestrained": "prestrained-aniso",
    "example3": "prestrained-aniso",
}


def _ex3_slope(x1, c):
    return c * (2 * (x1 + 5) * (x1 - 2) + (x1 + 5) ** 2)


def ex3_metric(c) -> TensorField:
    def g(pts):
        out = np.zeros((len(pts), 2, 2))
        out[:, 0, 0] = 1.0 + _ex3_slope(pts[:, 0], c) ** 2
        out[:, 1, 1] = 1.0
        return out

    return g


def ex3_initial(c):
    def f(pts):
        x1 = pts[:, 0]
        return np.column_stack([x1, pts[:, 1], c * (x1 + 5) ** 2 * (x1 - 2)])

    def grad_f(pts):
        jac = flat_jacobian(pts)
        jac[:, 2, 0] = _ex3_slope(pts[:, 0], c)
        return jac

    return f, grad_f


def make_benchmark(tag, **params) -> Benchmark:
    """Build one of the three benchmark problems.

    Parameters are ``gamma`` (bilayer-iso), ``c``/``mu``/``lam`` (prestrained-aniso)
    and ``mu``/``lam``/``load`` (kirchhoff-load).
    """
    tag = ALIASES.get(tag, tag)
    if tag == "kirchhoff-load":
        mu = params.get("mu", 6.0)
        lam = params.get("lam", 0.0)
        load = np.asarray(params.get("load", (0.0, 0.0, 0.025)), dtype=float)
        model = PrestrainedModel(constant_tensor(np.eye(2)), mu, lam, load=load)
        return Benchmark(
            tag, model, (0.0, 4.0, 0.0, 4.0), [Segment("x", 0.0), Segment("y", 0.0)],
            flat_map, flat_jacobian, {"mu": mu, "lam": lam, "load": load.tolist()},
        )
    if tag == "bilayer-iso":
        gamma = params.get("gamma", 1.0)
        if gamma <= 0:
            raise ModelError(f"gamma must be positive, got {gamma}")
        model = BilayerModel(constant_tensor(gamma * np.eye(2)))
        return Benchmark(
            tag, model, (-5.0, 5.0, -2.0, 2.0), [Segment("x", -5.0)], flat_map, flat_jacobian,
            {"gamma": gamma}, {"cylinder_energy": 20.0 * gamma**2, "radius": 1.0 / gamma},
        )
    if tag == "prestrained-aniso":
        c = params.get("c", 0.01)
        mu = params.get("mu", 12.0)
        lam = params.get("lam", 0.0)
        f, grad_f = ex3_initial(c)
        model = PrestrainedModel(ex3_metric(c), mu, lam, phi=f, grad_phi=grad_f)
        return Benchmark(
            tag, model, (-5.0, 5.0, -2.0, 2.0), [Segment("x", -5.0)], f, grad_f,
            {"c": c, "mu": mu, "lam": lam},
        )
    raise ValueError(f"unknown benchmark {tag!r}; expected one of {TAGS} or {sorted(ALIASES)}")


# -- discrete problem --------------------------------------------------------


class PlateProblem:
    """A benchmark discretized on a uniform mesh: matrices, data samples, energies."""

    def __init__(self, benchmark: Benchmark, nx=16, ny=16, split="diagonal"):
        self.benchmark = benchmark
        mesh = build_rect_mesh(*benchmark.bounds, nx, ny, split)
        self.mesh = mark_dirichlet(mesh, benchmark.dirichlet)
        self.space = MorleySpace(self.mesh)
        self.M = assemble_h2_product(self.space)
        model = benchmark.model
        nT = self.mesh.n_elements
        if benchmark.is_bilayer:
            self.A = assemble_bilayer_a(self.space)
            self.g = np.ascontiguousarray(np.broadcast_to(np.eye(2), (nT, 3, 2, 2)))
            self.Z = np.ascontiguousarray(sample_tensor(self.space, model.Z))
            self.F = None
            # 1/2 int |Z|^2: makes the reported energy 1/2 int |II - Z|^2 on isometries
            self.energy_shift = 0.5 * float(np.sum(self.space.area[:, None] / 3.0 * np.einsum("tqab,tqab->tq", self.Z, self.Z)))
        else:
            self.energy_shift = 0.0
            self.g = np.ascontiguousarray(sample_tensor(self.space, model.g))
            metric_inverse(self.g)
            self.A = assemble_ag(self.space, self.g, model.mu, model.lam)
            self.Z = None
            self.F = None if model.load is None else assemble_load(self.space, model.load)
        self.y0 = interpolate(self.space, benchmark.y0, benchmark.grad_y0)
        self._check_boundary()

    def _check_boundary(self):
        # boundary data must be compatible with the metric on the clamped part
        mesh = self.mesh
        mids = mesh.midpoints[mesh.dirichlet_edges]
        if len(mids) == 0:
            return
        model = self.benchmark.model
        Phi = np.asarray(model.grad_phi(mids))
        target = np.broadcast_to(np.eye(2), (len(mids), 2, 2)) if self.benchmark.is_bilayer else model.g(mids)
        err = np.abs(np.einsum("nma,nmb->nab", Phi, Phi) - target).max()
        if err > 1e-10:
            raise ModelError(f"boundary data incompatible with the metric on the clamped edges (defect {err:.3e})")

    @property
    def is_bilayer(self) -> bool:
        return self.benchmark.is_bilayer

    def local(self, y):
        return np.ascontiguousarray(self.space.local(y))

    # energies

    def quadratic_energy(self, y):
        return 0.5 * float(y @ (self.A @ y))

    def cubic(self, y):
        """sum_T Q_T(sum_ij Z_ij d_ij y . (d1 y x d2 y)); the bilayer energy subtracts it."""
        return kernels.cubic_energy(self.space.hess, self.space.grad, self.space.area, self.Z, self.local(y))

    def ell(self, y):
        """Explicit force of the cubic term: v^T ell = first variation of :meth:`cubic` at y."""
        return self.space.scatter(
            kernels.cubic_gradient(self.space.hess, self.space.grad, self.space.area, self.Z, self.local(y))
        )

    def energy(self, y):
        """Potential energy: E_bi^h (plus the constant :attr:`energy_shift`), or E_pre^h minus the load work."""
        if self.is_bilayer:
            return self.quadratic_energy(y) - self.cubic(y) + self.energy_shift
        e = self.quadratic_energy(y)
        if self.F is not None:
            e -= float(self.F @ y)
        return e

    def explicit_force(self, y):
        """Terms of the negative energy gradient that are treated explicitly (load, cubic)."""
        f = np.zeros(self.space.ndof)
        if self.is_bilayer:
            f += self.ell(y)
        if self.F is not None:
            f += self.F
        return f

    def h2_seminorm_sq(self, v):
        return float(v @ (self.M @ v))

    # constraint defect

    def metric_defect(self, y):
        return kernels.metric_defect(self.space.grad, self.space.area, self.g, self.local(y))

    def violation(self, y, p=1):
        return violation_from_defect(self.metric_defect(y), p, self.space.area)


def energy_pre(problem: PlateProblem, y):
    return problem.quadratic_energy(y)


def energy_bi(problem: PlateProblem, y):
    return problem.quadratic_energy(y) - problem.cubic(y) + problem.energy_shift


def kinetic_energy(dy, tau, M):
    return float(dy @ (M @ dy)) / (2.0 * tau * tau)


def energy_total(E_pot, dy, tau, M):
    if tau <= 0:
        raise ValueError("tau must be positive")
    return E_pot + kinetic_energy(dy, tau, M)


def first_fundamental_form(space: MorleySpace, y):
    """grad y^T grad y at every element midpoint: (nT, 3, 2, 2)."""
    gy = space.gradients(y)
    return np.einsum("tqma,tqmb->tqab", gy, gy)


def violation_from_defect(defect, p=1, area=None):
    """Discrete metric defect from per-element ``Q_T(grad y^T grad y - g)``.

    With ``area`` this is the L^p norm of the piecewise-constant element mean
    ``Q_T(.)/|T|`` (Frobenius norm pointwise), i.e.
    ``(sum_T |T|^(1-p) |Q_T(.)|^p)^(1/p)``; for p = 1 it is the plain sum of
    ``|Q_T(.)|``.  Without ``area`` the plain l^p sum is returned.
    """
    norms = np.sqrt(np.einsum("tab,tab->t", defect, defect))
    if p in (np.inf, "inf"):
        return float(norms.max() if area is None else (norms / area).max())
    if area is None or p == 1:
        return float(np.sum(norms**p) ** (1.0 / p))
    return float(np.sum(area ** (1.0 - p) * norms**p) ** (1.0 / p))


def violation(space: MorleySpace, y, g_eval, p=1):
    g = np.ascontiguousarray(sample_tensor(space, g_eval))
    yl = np.ascontiguousarray(space.local(y))
    return violation_from_defect(kernels.metric_defect(space.grad, space.area, g, yl), p, space.area)
