import numpy as np
import pytest

from plateflow.flow import (
    FlowConfig,
    FlowDivergence,
    Record,
    run,
    run_gradient_flow,
    select_parameter,
    stopping_check,
)
from plateflow.model import PlateProblem, make_benchmark


@pytest.fixture(scope="module")
def tiny():
    """8-element meshes."""
    return {
        "kirchhoff": PlateProblem(make_benchmark("kirchhoff"), 2, 2),
        "bilayer": PlateProblem(make_benchmark("bilayer"), 2, 2),
    }


@pytest.fixture(scope="module")
def ex3():
    return PlateProblem(make_benchmark("prestrained", c=0.01), 8, 4)


# -- configuration -------------------------------------------------------------


@pytest.mark.parametrize(
    "kw",
    [
        dict(algorithm="newton"),
        dict(tau=0.0),
        dict(tol=-1.0),
        dict(alpha=2.0),
        dict(damping="heavyball", beta=10.0, tau=0.1),
        dict(damping="heavyball", algorithm="acc-bt"),
        dict(damping="heavyball", algorithm="acc-bdf2"),
        dict(stop="kinetic"),
        dict(max_iters=0),
    ],
)
def test_invalid_configs(kw):
    with pytest.raises(ValueError):
        FlowConfig(**kw)


def test_damping_coefficients():
    c = FlowConfig(alpha=3.0)
    assert c.eta(1) == 0.0
    assert c.eta(2) == pytest.approx(1 / 4)
    assert all(0 <= c.eta(n) < 1 for n in range(1, 1000))
    h = FlowConfig(damping="heavyball", beta=0.2, tau=0.01)
    assert h.eta(1) == h.eta(50) == pytest.approx(0.998)


# -- stopping rule -------------------------------------------------------------


def rec(E):
    return Record(0, E, 0.0, E, 0.0, 0.0, 0.0)


def test_stopping_strict_inequality():
    # binary fractions keep the decrease exact
    tau, tol = 0.5, 0.25
    assert not stopping_check([rec(1.0), rec(1.0 - tol * tau)], tau, tol)
    assert stopping_check([rec(1.0), rec(1.0 - 0.5 * tol * tau)], tau, tol)


def test_stopping_stationary_and_sign():
    assert stopping_check([rec(2.0), rec(2.0)], 0.1, 1e-8)
    assert not stopping_check([rec(2.0)], 0.1, 1e-8)
    # an increase counts as a negative decrease unless absolute values are requested
    assert stopping_check([rec(1.0), rec(2.0)], 0.1, 1e-8)
    assert not stopping_check([rec(1.0), rec(2.0)], 0.1, 1e-8, absolute=True)


# -- schemes -------------------------------------------------------------------


@pytest.mark.parametrize("name", ["kirchhoff", "bilayer"])
def test_zero_damping_is_gradient_flow_with_tau_squared(tiny, name):
    P = tiny[name]
    tau = 0.3
    # alpha this large makes eta < 1e-14 over five steps
    acc = run(P, FlowConfig(algorithm="acc", alpha=1e15, tau=tau, tol=1e-300, max_iters=5))
    # gradient flow with step tau^2: M/tau^2 + A, same right-hand side
    gf = run_gradient_flow(P, FlowConfig(algorithm="gf", tau=tau**2, tol=1e-300, max_iters=5))
    assert acc.n == gf.n == 5
    assert np.abs(acc.y - gf.y).max() <= 1e-10
    assert np.allclose(acc.column("E_pot"), gf.column("E_pot"), rtol=1e-10, atol=1e-12)


def test_energy_stability_prestrained(ex3):
    tau = 0.1
    s = run(ex3, FlowConfig(algorithm="acc", tau=tau, tol=1e-300, max_iters=200))
    assert s.n == 200
    Et, Ek, eta = s.column("E_total"), s.column("E_ki"), s.column("eta")
    # E_total[n+1] + (1 - eta^n)/(2 tau^2) |dy^{n+1}|^2 <= E_total[n]
    slack = Et[1:-1] - (Et[2:] + (1 - eta[1:-1]) * Ek[2:])
    assert slack.min() >= -1e-10
    # first step is a gradient-flow step with time step tau^2
    assert s.history[1].E_pot + 2 * s.history[1].E_ki <= s.history[0].E_pot + 1e-12


@pytest.mark.parametrize("algorithm", ["gf", "acc", "acc-bt", "acc-bdf2"])
@pytest.mark.parametrize("name", ["kirchhoff", "bilayer"])
def test_increments_stay_in_tangent_space(tiny, algorithm, name):
    s = run(tiny[name], FlowConfig(algorithm=algorithm, tau=0.1, tol=1e-6, max_iters=60, check_constraints=True))
    assert s.constraint_residual <= 1e-9


def test_backtracking_monotone(small_problems):
    s = run(small_problems["bilayer"], FlowConfig(algorithm="acc-bt", tau=0.05, tol=1e-4, max_iters=3000))
    E = s.column("E_pot")
    assert np.all(np.diff(E) <= 0)
    r = s.column("restarted").astype(bool)
    assert np.all(np.diff(E)[r[1:]] == 0)
    assert s.restarts == r.sum()
    # after a restart the damping is zero
    assert np.all(s.column("eta")[r] == 0)


def test_backtracking_rarely_restarts_on_convex_toy(tiny):
    s = run(tiny["kirchhoff"], FlowConfig(algorithm="acc-bt", tau=0.01, tol=1e-8))
    assert s.converged
    assert s.restarts <= 2
    assert np.all(np.diff(s.column("E_pot")) <= 0)


def test_bdf2_first_step_is_bdf1(tiny):
    P = tiny["kirchhoff"]
    a = run(P, FlowConfig(algorithm="acc", tau=0.1, max_iters=1))
    b = run(P, FlowConfig(algorithm="acc-bdf2", tau=0.1, max_iters=1))
    assert np.array_equal(a.y, b.y)
    assert np.array_equal(b.w, b.y)


def test_stationary_start():
    P = PlateProblem(make_benchmark("kirchhoff", load=(0.0, 0.0, 0.0)), 2, 2)
    for algorithm in ("gf", "acc", "acc-bt"):
        s = run(P, FlowConfig(algorithm=algorithm, tau=0.1))
        assert s.converged and s.n == 1
        assert np.abs(s.dy).max() < 1e-14


def test_kinetic_energy_below_tol_at_exit(tiny):
    for algorithm in ("acc", "acc-bt", "acc-bdf2"):
        s = run(tiny["kirchhoff"], FlowConfig(algorithm=algorithm, tau=0.125, tol=1e-7))
        assert s.converged and s.final.E_ki < 1e-7


def test_history_and_snapshots(tiny):
    s = run(tiny["kirchhoff"], FlowConfig(tau=0.125, tol=1e-6, snapshot_stride=5))
    assert len(s.history) == s.n + 1
    assert [r.iter for r in s.history] == list(range(s.n + 1))
    steps = [n for n, _ in s.snapshots]
    assert steps[0] == 0 and steps[-1] == s.n and all(n % 5 == 0 for n in steps[:-1])
    assert s.wall_time > 0


def test_unconverged_flag(tiny):
    s = run(tiny["kirchhoff"], FlowConfig(tau=0.125, tol=1e-12, max_iters=3))
    assert not s.converged and s.n == 3


def test_divergence_guard(tiny, monkeypatch):
    P = PlateProblem(make_benchmark("kirchhoff"), 2, 2)
    energies = iter(np.arange(100.0))
    monkeypatch.setattr(P, "energy", lambda y: next(energies))
    with pytest.raises(FlowDivergence, match="reduce tau") as info:
        run(P, FlowConfig(algorithm="gf", tau=0.1))
    assert len(info.value.state.history) == 2


# -- parameter selection ------------------------------------------------------


def test_select_degenerate_interval():
    best, scores = select_parameter(lambda p: 10, interval=(4.0, 4.0))
    assert best == 4.0 and scores == {4.0: 10.0}


def test_select_candidates_tie_and_failure():
    N = {1.0: 30, 0.5: 20, 0.3: 20, 0.2: float("inf"), 0.1: 40}
    best, scores = select_parameter(lambda p: N[p], candidates=list(N))
    assert best == 0.3
    assert scores[0.2] == float("inf")


def test_select_bisection_finds_minimum():
    calls = []

    def f(p):
        calls.append(p)
        return round(100 * (p - 7.3) ** 2)

    best, scores = select_parameter(f, interval=(3.0, 15.0), budget=15)
    assert abs(best - 7.3) < 0.5
    assert len(calls) <= 15
    assert len(calls) == len(set(calls))


def test_select_scores_unconverged_as_inf(tiny):
    P = tiny["kirchhoff"]
    best, scores = select_parameter(
        lambda a: run(P, FlowConfig(alpha=a, tau=0.125, tol=1e-6, max_iters=40 if a > 5 else 10_000)),
        candidates=[3.0, 8.0],
    )
    assert scores[8.0] == float("inf") and best == 3.0


def test_select_rejects_bad_input():
    with pytest.raises(ValueError):
        select_parameter(lambda p: 1, candidates=[])
    with pytest.raises(ValueError):
        select_parameter(lambda p: 1, interval=(5.0, 3.0))
    with pytest.raises(ValueError):
        select_parameter(lambda p: 1, interval=(3.0, 5.0), budget=2)
