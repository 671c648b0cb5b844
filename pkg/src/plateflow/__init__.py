"""Projection-free accelerated gradient flows for bilayer and prestrained plates (Morley FEM)."""

from .constraint import ConstraintMatrix, build_constraints, extrapolated_base
from .flow import (
    FlowConfig,
    FlowDivergence,
    FlowState,
    Record,
    run,
    run_accelerated,
    run_accelerated_backtracking,
    run_accelerated_bdf2,
    run_gradient_flow,
    select_parameter,
    stopping_check,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .kkt import KktError, KktSolver
from .mesh import Mesh, Segment, build_rect_mesh, mark_dirichlet
from .model import (
    Benchmark,
    BilayerModel,
    PlateProblem,
    PrestrainedModel,
    energy_total,
    kinetic_energy,
    make_benchmark,
    violation,
)
from .morley import ModelError, MorleySpace, interpolate, quadrature

__version__ = "0.1.0"
