"""Iteration drivers: gradient flow and the accelerated flows with tangent-space updates.

Every driver works on a :class:`~plateflow.model.PlateProblem` and returns a
:class:`FlowState` whose ``history`` holds one :class:`Record` per iterate,
starting with the initial state (so ``len(history) == n + 1``).

Notation follows the schemes: ``y`` is the current iterate, ``dy`` the last
computed increment, ``w`` the extrapolated point, ``eta`` the damping
coefficient used to build ``w`` and ``k`` the restart counter of the
backtracking variants.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .constraint import build_constraints, extrapolated_base
from .kkt import KktSolver, build_rhs_bdf1, build_rhs_bdf2, step_matrix
from .model import PlateProblem, kinetic_energy, violation_from_defect

log = logging.getLogger(__name__)

ALGORITHMS = ("gf", "acc", "acc-bt", "acc-bdf2")
DAMPINGS = ("nesterov", "heavyball")
STOP_MODES = ("total-energy", "potential-energy")

# an energy increase above this aborts the non-backtracking drivers
ENERGY_GUARD = 1e-8


class FlowDivergence(RuntimeError):
    """Energy went up where the scheme guarantees decay; ``state`` holds the history so far."""

    def __init__(self, message, state):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class FlowConfig:
    """Parameters of one run.

    Parameters
    ----------
    algorithm : {'gf', 'acc', 'acc-bt', 'acc-bdf2'}
    damping : {'nesterov', 'heavyball'}
        ``eta = (n-1)/(n+alpha-1)`` or ``eta = 1 - beta*tau``.
    tau, tol : float
        Pseudo time step and stopping tolerance on the energy decrease per unit time.
    stop : {'total-energy', 'potential-energy'}
        Energy monitored by the stopping test (the gradient flow always uses the potential).
    snapshot_stride : int
        Keep a copy of ``y`` every this many iterations; 0 keeps the final iterate only.
    check_constraints : bool
        Record the largest per-element residual of the linearized constraint at every step.
    """

    algorithm: str = "acc"
    damping: str = "nesterov"
    alpha: float = 3.0
    beta: float = 1.0
    tau: float = 0.125
    tol: float = 1e-6
    max_iters: int = 1_000_000
    stop: str = "total-energy"
    snapshot_stride: int = 0
    scale_rows: bool = False
    check_constraints: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.damping not in DAMPINGS:
            raise ValueError(f"damping must be one of {DAMPINGS}, got {self.damping!r}")
        if self.stop not in STOP_MODES:
            raise ValueError(f"stop must be one of {STOP_MODES}, got {self.stop!r}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.snapshot_stride < 0:
            raise ValueError("snapshot_stride must be >= 0")
        if self.algorithm == "gf":
            return
        if self.damping == "nesterov" and self.alpha < 3:
            raise ValueError(f"nesterov damping needs alpha >= 3, got {self.alpha}")
        if self.damping == "heavyball":
            if self.algorithm in ("acc-bt", "acc-bdf2"):
                raise ValueError(f"{self.algorithm} supports nesterov damping only")
            if not (0 < self.beta * self.tau < 1):
                raise ValueError(f"heavy-ball damping needs 0 < beta*tau < 1, got {self.beta * self.tau}")

    def eta(self, n):
        """Damping coefficient for counter value ``n`` (global step or restart counter)."""
        if self.damping == "heavyball":
            return 1.0 - self.beta * self.tau
        return (n - 1) / (n + self.alpha - 1) if n >= 1 else 0.0


@dataclass
class Record:
    iter: int
    E_pot: float
    E_ki: float
    E_total: float
    D_g_1: float
    D_g_2: float
    eta: float
    restarted: bool = False

    def as_row(self):
        return (self.iter, self.E_pot, self.E_ki, self.E_total, self.D_g_1, self.D_g_2, self.eta, int(self.restarted))


@dataclass
class FlowState:
    y: np.ndarray
    dy: np.ndarray
    w: np.ndarray
    n: int = 0
    k: int = 0
    history: list[Record] = field(default_factory=list)
    converged: bool = False
    restarts: int = 0
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)
    constraint_residual: float = 0.0
    wall_time: float = 0.0

    @property
    def final(self) -> Record:
        return self.history[-1]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.history])


def stopping_check(history, tau, tol, mode="total-energy", absolute=False):
    """True when the per-unit-time decrease of the monitored energy is below ``tol``.

    The decrease ``E[y^{N-1}] - E[y^N]`` is signed; ``absolute`` compares its
    magnitude instead, for runs whose energy is not monotone by construction.
    """
    if len(history) < 2:
        return False
    attr = "E_total" if mode == "total-energy" else "E_pot"
    dec = (getattr(history[-2], attr) - getattr(history[-1], attr)) / tau
    if absolute:
        dec = abs(dec)
    return dec < tol


class _Runner:
    """Shared bookkeeping: records, snapshots, constraint checks."""

    def __init__(self, problem: PlateProblem, config: FlowConfig):
        self.p = problem
        self.c = config
        self.tau = config.tau
        y0 = problem.y0.copy()
        self.state = FlowState(y=y0, dy=np.zeros_like(y0), w=y0.copy())
        self.t0 = time.perf_counter()
        self.area = problem.space.area
        self.E = problem.energy(y0)
        self.record(0, self.E, self.state.dy, 0.0, False)

    def solver(self, S):
        return KktSolver(self.p.space, S)

    def constraints(self, base):
        return build_constraints(self.p.space, base, scale_rows=self.c.scale_rows)

    def solve(self, solver, base, rhs):
        C = self.constraints(base)
        solver.factor(C)
        dy, _ = solver.solve(rhs)
        if self.c.check_constraints:
            r = float(np.abs(C.apply(dy)).max())
            self.state.constraint_residual = max(self.state.constraint_residual, r)
        return dy

    def record(self, n, E, dy, eta, restarted, kinetic_tau=None):
        d = self.p.metric_defect(self.state.y)
        Eki = kinetic_energy(dy, self.tau if kinetic_tau is None else kinetic_tau, self.p.M)
        rec = Record(n, E, Eki, E + Eki, violation_from_defect(d, 1, self.area), violation_from_defect(d, 2, self.area), eta, restarted)
        self.state.history.append(rec)
        stride = self.c.snapshot_stride
        if stride and n % stride == 0:
            self.state.snapshots.append((n, self.state.y.copy()))
        return rec

    def finish(self, converged):
        st = self.state
        st.converged = converged
        st.n = st.history[-1].iter
        if not st.snapshots or st.snapshots[-1][0] != st.n:
            st.snapshots.append((st.n, st.y.copy()))
        st.wall_time = time.perf_counter() - self.t0
        if not converged:
            log.warning("%s did not converge in %d iterations", self.c.algorithm, self.c.max_iters)
        return st

    def diverged(self, what, before, after):
        self.finish(False)
        return FlowDivergence(
            f"{what} increased from {before:.12g} to {after:.12g} at iteration {self.state.n}; "
            f"reduce tau (currently {self.tau})",
            self.state,
        )


def run_gradient_flow(problem: PlateProblem, config: FlowConfig) -> FlowState:
    """Semi-implicit H^2 gradient flow: (dy, v)/tau + a(dy, v) = -a(y, v) + explicit forces."""
    r = _Runner(problem, config)
    st, tau, M, A = r.state, r.tau, problem.M, problem.A
    solver = r.solver((M * (1.0 / tau) + A).tocsr())
    for n in range(1, config.max_iters + 1):
        rhs = -(A @ st.y) + problem.explicit_force(st.y)
        dy = r.solve(solver, st.y, rhs)
        st.y = st.y + dy
        st.dy = dy
        st.w = st.y
        E_new = problem.energy(st.y)
        # kinetic column holds |dy|^2 / (2 tau^2), as for the accelerated drivers
        r.record(n, E_new, dy, 0.0, False)
        if E_new - r.E >= ENERGY_GUARD * max(1.0, abs(r.E)):
            raise r.diverged("potential energy", r.E, E_new)
        r.E = E_new
        if stopping_check(st.history, tau, config.tol, "potential-energy"):
            return r.finish(True)
    return r.finish(False)


def run_accelerated(problem: PlateProblem, config: FlowConfig) -> FlowState:
    """BDF1 accelerated flow with nesterov or heavy-ball damping."""
    r = _Runner(problem, config)
    st, tau, M, A = r.state, r.tau, problem.M, problem.A
    solver = r.solver(step_matrix(M, A, tau))
    for n in range(config.max_iters):
        rhs = build_rhs_bdf1(A, M, tau, st.w, st.y, problem.explicit_force(st.w))
        dy = r.solve(solver, st.y, rhs)
        st.y = st.y + dy
        st.dy = dy
        eta = config.eta(n + 1)
        st.w = st.y + eta * dy
        E_new = problem.energy(st.y)
        prev = st.history[-1]
        rec = r.record(n + 1, E_new, dy, eta, False)
        r.E = E_new
        if config.stop == "total-energy" and rec.E_total - prev.E_total >= ENERGY_GUARD * max(1.0, abs(prev.E_total)):
            raise r.diverged("total energy", prev.E_total, rec.E_total)
        if stopping_check(st.history, tau, config.tol, config.stop, absolute=config.stop == "potential-energy"):
            return r.finish(True)
    return r.finish(False)


def _backtracking_update(r: _Runner, y_cand, dy, n_new, kinetic_tau=None):
    """Accept or reject ``y_cand``; returns True when the run has converged."""
    st, c = r.state, r.c
    E_cand = r.p.energy(y_cand)
    prev = st.history[-1]
    # both differences are taken against the candidate, before any backtracking
    dE_total = E_cand + kinetic_energy(dy, kinetic_tau or r.tau, r.p.M) - prev.E_total
    restarted = not (E_cand - r.E < 0)
    if restarted:
        st.k = 1
        st.restarts += 1
        E_new = r.E
    else:
        st.k += 1
        st.y = y_cand
        E_new = E_cand
    eta = c.eta(st.k)
    st.w = st.y + eta * dy
    st.dy = dy
    r.E = E_new
    r.record(n_new, E_new, dy, eta, restarted, kinetic_tau)
    if c.stop == "total-energy":
        return abs(dE_total) / r.tau < c.tol
    return stopping_check(st.history, r.tau, c.tol, "potential-energy", absolute=True) and not restarted


def run_accelerated_backtracking(problem: PlateProblem, config: FlowConfig) -> FlowState:
    """BDF1 accelerated flow that rejects steps raising the potential energy and restarts the damping."""
    r = _Runner(problem, config)
    st, tau, M, A = r.state, r.tau, problem.M, problem.A
    solver = r.solver(step_matrix(M, A, tau))
    for n in range(config.max_iters):
        rhs = build_rhs_bdf1(A, M, tau, st.w, st.y, problem.explicit_force(st.w))
        dy = r.solve(solver, st.y, rhs)
        if _backtracking_update(r, st.y + dy, dy, n + 1):
            return r.finish(True)
    return r.finish(False)


def run_accelerated_bdf2(problem: PlateProblem, config: FlowConfig) -> FlowState:
    """BDF2 accelerated flow with backtracking; the first step is a BDF1 step with w^1 = y^1.

    The kinetic energy uses the solved increment ``dy``, the BDF2 velocity times tau.
    """
    r = _Runner(problem, config)
    st, tau, M, A = r.state, r.tau, problem.M, problem.A
    first = r.solver(step_matrix(M, A, tau))
    rhs = build_rhs_bdf1(A, M, tau, st.w, st.y, problem.explicit_force(st.w))
    dy = r.solve(first, st.y, rhs)
    y_prev, w_prev = st.y, st.w
    st.y = st.y + dy
    st.w = st.y.copy()
    st.dy = dy
    r.E = problem.energy(st.y)
    r.record(1, r.E, dy, 0.0, False)
    if config.max_iters == 1:
        return r.finish(False)
    del first
    solver = r.solver(step_matrix(M, A, tau, 2.0 / 3.0))
    for n in range(1, config.max_iters):
        rhs = build_rhs_bdf2(A, M, tau, st.w, w_prev, st.y, problem.explicit_force(st.w))
        dy = r.solve(solver, extrapolated_base(st.y, y_prev), rhs)
        y_cand = (4.0 / 3.0) * st.y - (1.0 / 3.0) * y_prev + (2.0 / 3.0) * dy
        y_prev, w_prev = st.y, st.w
        if _backtracking_update(r, y_cand, dy, n + 1):
            return r.finish(True)
    return r.finish(False)


DRIVERS = {
    "gf": run_gradient_flow,
    "acc": run_accelerated,
    "acc-bt": run_accelerated_backtracking,
    "acc-bdf2": run_accelerated_bdf2,
}


def run(problem: PlateProblem, config: FlowConfig) -> FlowState:
    return DRIVERS[config.algorithm](problem, config)


def select_parameter(evaluate, interval=None, budget=9, candidates=None):
    """Minimize an iteration count ``N(p)`` over a parameter.

    Parameters
    ----------
    evaluate : callable
        ``p -> FlowState`` (or an int).  Unconverged runs and exceptions score +inf.
    interval : (lo, hi), optional
        Searched by interval bisection: the bracket shrinks around the best of
        its two endpoints and midpoint until ``budget`` evaluations are spent.
    candidates : sequence, optional
        Evaluate exactly these values instead.

    Returns
    -------
    best : float
        Parameter with the smallest score; ties go to the smaller parameter.
    scores : dict
        Every evaluated parameter and its score.
    """
    scores: dict[float, float] = {}

    def score(p):
        p = float(p)
        if p not in scores:
            try:
                out = evaluate(p)
            except (FlowDivergence, ArithmeticError) as exc:
                log.warning("parameter %g failed: %s", p, exc)
                scores[p] = math.inf
            else:
                if isinstance(out, FlowState):
                    scores[p] = float(out.n) if out.converged else math.inf
                else:
                    scores[p] = float(out)
        return scores[p]

    def best():
        return min(scores, key=lambda p: (scores[p], p))

    if candidates is not None:
        if len(candidates) == 0:
            raise ValueError("empty candidate list")
        for p in candidates:
            score(p)
        return best(), scores
    if interval is None:
        raise ValueError("give an interval or a candidate list")
    lo, hi = map(float, interval)
    if lo > hi:
        raise ValueError(f"invalid interval [{lo}, {hi}]")
    if lo == hi:
        score(lo)
        return lo, scores
    if budget < 3:
        raise ValueError("budget must allow at least 3 evaluations")
    for p in (lo, 0.5 * (lo + hi), hi):
        score(p)
    while len(scores) < budget:
        mid = 0.5 * (lo + hi)
        left, right = 0.5 * (lo + mid), 0.5 * (mid + hi)
        sl = score(left)
        if len(scores) >= budget:
            break
        sr = score(right)
        s_mid = scores[mid]
        # keep the half-width bracket centred on the best point among left/mid/right
        if sl <= s_mid and sl <= sr:
            lo, hi = lo, mid
        elif sr < s_mid and sr < sl:
            lo, hi = mid, hi
        else:
            lo, hi = left, right
    return best(), scores


def with_overrides(config: FlowConfig, **kw) -> FlowConfig:
    return replace(config, **kw)
