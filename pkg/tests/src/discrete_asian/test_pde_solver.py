import logging

import numpy as np
import pytest
from scipy.linalg import LinAlgError
from scipy.special import ndtr

from discrete_asian.analytic import cascade_price, u_reduced
from discrete_asian.exceptions.base_exceptions import DomainError, SolverError
from discrete_asian.market_model import zero_drift
from discrete_asian.pde_solver import (
    build_grids,
    estimate_derivatives,
    get_u,
    solve_backward,
    truncation_bounds,
)
from discrete_asian.schema.configs import Alignment, SolverConfig
from discrete_asian.schema.market import MarketParams, StepDrift

TWO_STEP = StepDrift(breakpoints=(0.5, 1.0), values=(1.0, 0.5, 0.0), maturity=1.0)
REDUCED = MarketParams(sigma=0.2, T=1.0, K=1.0)
BENCHMARK = MarketParams(sigma=0.2, T=1.0, K=0.8)


# ------------------------------
# Fixtures
# ------------------------------
@pytest.fixture(scope="module")
def reduced_solution():
    return solve_backward(zero_drift(1.0), REDUCED, SolverConfig(M=512, N=512))


@pytest.fixture(scope="module")
def benchmark_solution():
    return solve_backward(TWO_STEP, BENCHMARK, SolverConfig(M=256, N=128))


@pytest.fixture(scope="module")
def implicit_solution():
    return solve_backward(TWO_STEP, BENCHMARK, SolverConfig(theta=1.0, M=128, N=128))


# ------------------------------
# Grids
# ------------------------------
def test_space_grid_carries_zero_and_strike():
    space, _ = build_grids(REDUCED, zero_drift(1.0), SolverConfig(M=64))
    assert space.M == 64
    assert 0.0 in space.nodes
    assert 1.0 in space.nodes
    assert np.all(np.diff(space.nodes) > 0)


def test_space_grid_carries_every_drift_level():
    space, _ = build_grids(BENCHMARK, TWO_STEP, SolverConfig(M=128))
    for anchor in (0.0, 0.5, 0.8, 1.0):
        assert anchor in space.nodes
    assert space.max_spacing_ratio <= 4.0


def test_space_grid_refines_near_strike():
    space, _ = build_grids(REDUCED, zero_drift(1.0), SolverConfig(M=256))
    h = space.spacing
    j = int(np.searchsorted(space.nodes, 1.0))
    assert h[j] < h[-1]
    assert h[j] < h[0]


def test_space_grid_is_geometric_below_strike():
    space, _ = build_grids(REDUCED, zero_drift(1.0), SolverConfig(M=512))
    nodes = space.nodes
    h = np.diff(nodes)
    inside = (nodes[:-1] >= 0.25) & (nodes[1:] <= 1.0)
    relative = h[inside] / nodes[:-1][inside]
    assert relative.max() <= 0.02
    assert relative[-1] < 0.5 * relative[0]


def test_time_grid_aligned_with_sampling_dates():
    _, time = build_grids(BENCHMARK, TWO_STEP, SolverConfig(N=100))
    assert time.N == 100
    assert time.levels[0] == 1.0
    assert time.levels[-1] == 0.0
    assert 0.5 in time.levels
    assert time.levels[time.breakpoint_levels[0]] == 0.5
    assert np.all(np.diff(time.levels) < 0)


def test_time_grid_aligned_with_several_sampling_dates():
    drift = StepDrift(
        breakpoints=(0.2, 0.45, 0.7, 1.0),
        values=(2.0, 1.5, 1.0, 0.5, 0.0),
        maturity=1.0,
    )
    _, time = build_grids(REDUCED, drift, SolverConfig(N=50))
    assert time.N == 50
    assert [time.levels[i] for i in time.breakpoint_levels] == [0.7, 0.45, 0.2]
    assert time.levels[0] == 1.0
    assert time.levels[-1] == 0.0
    assert np.all(np.diff(time.levels) < 0)


def test_time_grid_misaligned_avoids_sampling_dates():
    cfg = SolverConfig(N=16, alignment=Alignment.MISALIGNED)
    _, time = build_grids(BENCHMARK, TWO_STEP, cfg)
    assert time.N == 16
    assert not np.any(np.abs(time.levels - 0.5) < 1e-12)
    assert time.breakpoint_levels == ()
    assert np.all(np.diff(time.levels) < 0)


def test_truncation_bounds_default_margin():
    x_min, x_max = truncation_bounds(REDUCED, zero_drift(1.0), SolverConfig())
    margin = np.expm1(6.0 * 0.2)
    assert x_min == pytest.approx(-margin)
    assert x_max == pytest.approx(1.0 + margin)


def test_truncation_excluding_anchor_is_rejected():
    with pytest.raises(DomainError):
        build_grids(BENCHMARK, TWO_STEP, SolverConfig(x_min=-1.0, x_max=0.9))


# ------------------------------
# solve_backward
# ------------------------------
def test_terminal_slice_is_payoff(benchmark_solution):
    nodes = benchmark_solution.space.nodes
    np.testing.assert_array_equal(benchmark_solution.values[0], np.maximum(nodes - 0.8, 0.0))


def test_solution_is_read_only(benchmark_solution):
    with pytest.raises(ValueError):
        benchmark_solution.values[0, 0] = 1.0


@pytest.mark.parametrize("x", [0.5, 1.0, 2.0])
def test_reduced_problem_matches_closed_form(reduced_solution, x):
    expected = u_reduced(0.0, x, REDUCED)
    assert get_u(reduced_solution, 0.0, x) == pytest.approx(expected, rel=5e-3)


def test_two_atom_benchmark_matches_cascade(benchmark_solution):
    for x in (0.8, 1.0, 1.2):
        reference = cascade_price(0.0, x, TWO_STEP, BENCHMARK)
        assert get_u(benchmark_solution, 0.0, x) == pytest.approx(reference, rel=1e-2)


def test_degenerate_final_interval_keeps_payoff(caplog):
    params = MarketParams(sigma=0.2, T=1.0, K=0.5)
    caplog.set_level(logging.WARNING, logger="discrete_asian.pde_solver")
    sol = solve_backward(TWO_STEP, params, SolverConfig(M=256, N=128))
    assert "K = b(T)" in caplog.text

    payoff = np.maximum(sol.space.nodes - 0.5, 0.0)
    rows = sol.time.levels >= 0.5
    assert rows.sum() > 2
    expected = np.tile(payoff, (rows.sum(), 1))
    np.testing.assert_allclose(sol.values[rows], expected, rtol=0.0, atol=1e-10)


def test_node_on_drift_level_is_frozen(benchmark_solution):
    nodes = benchmark_solution.space.nodes
    j = int(np.flatnonzero(nodes == 1.0)[0])
    levels = benchmark_solution.time.levels
    column = benchmark_solution.values[levels <= 0.5, j]
    np.testing.assert_allclose(column, column[0], rtol=0.0, atol=1e-14)


def test_implicit_scheme_maximum_principle(implicit_solution):
    nodes = implicit_solution.space.nodes
    payoff = np.maximum(nodes - 0.8, 0.0)
    assert implicit_solution.values.min() >= payoff.min() - 1e-10
    assert implicit_solution.values.max() <= payoff.max() + 1e-10


def test_implicit_scheme_preserves_monotonicity(implicit_solution):
    assert np.all(np.diff(implicit_solution.values, axis=1) >= -1e-10)


def test_second_order_convergence_at_strike():
    errors = []
    expected = u_reduced(0.0, 1.0, REDUCED)
    for n in (128, 256):
        sol = solve_backward(zero_drift(1.0), REDUCED, SolverConfig(M=n, N=n))
        errors.append(abs(get_u(sol, 0.0, 1.0) - expected))
    assert errors[0] / errors[1] >= 3.0


def test_aligned_time_grid_beats_misaligned():
    # x = beta_1 is frozen on [0, 0.5], so the error is settled at t = 0.5
    reference = cascade_price(0.0, 1.0, TWO_STEP, BENCHMARK)
    strict = 0
    for n in (64, 128, 256, 512):
        errors = {}
        for alignment in Alignment:
            cfg = SolverConfig(M=n, N=n, alignment=alignment)
            sol = solve_backward(TWO_STEP, BENCHMARK, cfg)
            errors[alignment] = abs(get_u(sol, 0.0, 1.0) - reference)
        assert errors[Alignment.ALIGNED] <= errors[Alignment.MISALIGNED]
        strict += errors[Alignment.ALIGNED] < errors[Alignment.MISALIGNED]
    assert strict >= 3


def test_straddling_step_takes_drift_of_later_date():
    # the misaligned step across t = 0.5 diffuses x = 1 under beta = 0.5
    cfg = SolverConfig(M=128, N=16, alignment=Alignment.MISALIGNED)
    sol = solve_backward(TWO_STEP, BENCHMARK, cfg)
    j = int(np.flatnonzero(sol.space.nodes == 1.0)[0])
    below = sol.time.levels < 0.5
    column = sol.values[below, j]
    np.testing.assert_allclose(column, column[0], rtol=0.0, atol=1e-14)
    straddle = int(np.flatnonzero(below)[0])
    assert sol.values[straddle, j] > sol.values[straddle - 1, j]


def test_failed_tridiagonal_solve_raises_solver_error(monkeypatch):
    def broken(*args, **kwargs):
        raise LinAlgError("singular matrix")

    monkeypatch.setattr("discrete_asian.pde_solver.solve_banded", broken)
    with pytest.raises(SolverError):
        solve_backward(zero_drift(1.0), REDUCED, SolverConfig(M=32, N=8))


def test_non_finite_values_raise_solver_error(monkeypatch):
    def poisoned(l_and_u, ab, b):
        return np.full_like(b, np.nan)

    monkeypatch.setattr("discrete_asian.pde_solver.solve_banded", poisoned)
    with pytest.raises(SolverError):
        solve_backward(zero_drift(1.0), REDUCED, SolverConfig(M=32, N=8))


# ------------------------------
# get_u
# ------------------------------
def test_get_u_exact_at_grid_points(benchmark_solution):
    sol = benchmark_solution
    for n in (0, 7, sol.time.N):
        for j in (3, 100, sol.space.M - 1):
            t, x = float(sol.time.levels[n]), float(sol.space.nodes[j])
            assert get_u(sol, t, x) == sol.values[n, j]


def test_get_u_blends_linearly_in_time(benchmark_solution):
    sol = benchmark_solution
    j = 100
    t = 0.5 * (sol.time.levels[3] + sol.time.levels[4])
    expected = 0.5 * (sol.values[3, j] + sol.values[4, j])
    assert get_u(sol, float(t), float(sol.space.nodes[j])) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("t, x", [(-0.1, 1.0), (1.1, 1.0), (0.0, 1e6), (0.0, -1e6)])
def test_get_u_rejects_queries_outside_domain(benchmark_solution, t, x):
    with pytest.raises(DomainError):
        get_u(benchmark_solution, t, x)


# ------------------------------
# estimate_derivatives
# ------------------------------
def test_derivatives_at_strike_match_closed_form(reduced_solution):
    u_x, u_xx, u_t = estimate_derivatives(reduced_solution, 0.0, 1.0)
    # d1 = 0.1 at x = K = 1, sigma = 0.2, tau = 1
    delta = ndtr(0.1)
    gamma = np.exp(-0.005) / np.sqrt(2.0 * np.pi) / 0.2
    theta = -0.5 * 0.04 * gamma
    assert u_x == pytest.approx(delta, rel=1e-2)
    assert u_xx == pytest.approx(gamma, rel=1e-2)
    assert u_t == pytest.approx(theta, rel=1e-2)


def test_derivatives_far_above_strike_near_maturity(reduced_solution):
    t = float(reduced_solution.time.levels[1])
    u_x, u_xx, _ = estimate_derivatives(reduced_solution, t, 2.5)
    assert u_x == pytest.approx(1.0, abs=1e-6)
    assert u_xx == pytest.approx(0.0, abs=1e-4)


def test_derivatives_rejected_at_sampling_date(benchmark_solution):
    with pytest.raises(DomainError):
        estimate_derivatives(benchmark_solution, 0.5, 1.0)


def test_derivatives_rejected_near_edge(benchmark_solution):
    edge = float(benchmark_solution.space.nodes[1])
    with pytest.raises(DomainError):
        estimate_derivatives(benchmark_solution, 0.25, edge)


def test_residual_shrinks_under_refinement():
    rng = np.random.default_rng(0)
    times = rng.uniform(0.1, 0.9, 100)
    spots = rng.uniform(0.6, 1.6, 100)
    worst = []
    for n in (128, 256):
        sol = solve_backward(zero_drift(1.0), REDUCED, SolverConfig(M=n, N=n))
        residuals = []
        for t, x in zip(times, spots, strict=True):
            _, u_xx, u_t = estimate_derivatives(sol, float(t), float(x))
            residuals.append(abs(u_t + 0.5 * 0.04 * x * x * u_xx))
        worst.append(max(residuals))
    assert worst[1] < worst[0]
