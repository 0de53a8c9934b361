"""Finite differences for u_t + 1/2 sigma^2 (x - b(t))^2 u_xx = 0, u(T, x) = (x - K)_+.

The space grid carries the strike and every drift level as exact nodes, and
the aligned time grid carries every sampling date as a level, so no step
straddles a jump of b and no cell straddles the payoff kink.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import LinAlgError, solve_banded

from discrete_asian.exceptions.base_exceptions import DomainError, SolverError
from discrete_asian.exceptions.exception_constants import (
    DERIVATIVE_AT_BREAKPOINT,
    DERIVATIVE_NEAR_EDGE,
    GRID_EXCLUDES_ANCHOR,
    SOLUTION_QUERY_OUTSIDE,
    TRIDIAGONAL_SOLVE_FAILED,
)
from discrete_asian.market_model import degenerate_split_time, eval_b
from discrete_asian.schema.configs import Alignment, SolverConfig
from discrete_asian.schema.market import MarketParams, StepDrift

logger = logging.getLogger(__name__)

LEVEL_TOLERANCE = 1e-12
FINE_SAMPLES = 2049


@dataclass(frozen=True)
class SpaceGrid:
    nodes: np.ndarray
    anchors: tuple[float, ...]

    @property
    def M(self) -> int:
        return len(self.nodes) - 1

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def max_spacing_ratio(self) -> float:
        h = self.spacing
        ratios = h[1:] / h[:-1]
        return float(np.max(np.maximum(ratios, 1.0 / ratios)))


@dataclass(frozen=True)
class TimeGrid:
    """Levels T = s_0 > s_1 > ... > s_N = 0."""

    levels: np.ndarray
    alignment: Alignment
    breakpoint_levels: tuple[int, ...] = ()

    @property
    def N(self) -> int:
        return len(self.levels) - 1

    @property
    def ascending(self) -> np.ndarray:
        return self.levels[::-1]


@dataclass(frozen=True)
class PDESolution:
    """``values[n, j]`` approximates u(levels[n], nodes[j])."""

    values: np.ndarray
    space: SpaceGrid
    time: TimeGrid
    drift: StepDrift
    params: MarketParams
    cfg: SolverConfig


def _allocate(weights: np.ndarray, total: int) -> np.ndarray:
    """Split ``total`` into integer parts proportional to ``weights``, each at least 1."""
    share = weights / weights.sum() * total
    counts = np.maximum(np.floor(share).astype(int), 1)
    while counts.sum() < total:
        counts[int(np.argmax(share - counts))] += 1
    return counts


def truncation_bounds(
    params: MarketParams, drift: StepDrift, cfg: SolverConfig
) -> tuple[float, float]:
    """[x_min, x_max]; unset ends get a margin of ``margin_sd`` log-scale deviations."""
    beta_1 = drift.values[0]
    top = max(params.K, beta_1)
    scale = max(abs(params.K), beta_1)
    margin = scale * math.expm1(cfg.margin_sd * params.sigma * math.sqrt(params.T))

    x_min = cfg.x_min if cfg.x_min is not None else min(0.0, params.K) - margin
    x_max = cfg.x_max if cfg.x_max is not None else top + margin

    required = (params.K, *drift.values)
    if any(a < x_min or a > x_max for a in required):
        raise DomainError(
            user_message=GRID_EXCLUDES_ANCHOR,
            public_context={"x_min": x_min, "x_max": x_max},
            internal_context={"anchors": required},
        )
    return x_min, x_max


def _space_grid(
    params: MarketParams, drift: StepDrift, cfg: SolverConfig
) -> SpaceGrid:
    """Nodes geometric in the distance to the nearest drift level.

    The diffusion coefficient vanishes on every drift level, so the relative
    spacing (x - beta) / h is what controls the error. The strike neighbourhood
    is refined by a further factor ``refinement`` over a few log-deviations and
    density decays outside the hull of the strike and the drift levels.
    """
    x_min, x_max = truncation_bounds(params, drift, cfg)
    levels = np.array(sorted(drift.values))
    spread = params.sigma * math.sqrt(params.T)
    scale = max(abs(params.K), drift.values[0])
    floor = 1.25 * spread * scale
    decay = spread * scale
    hull = (min(params.K, levels[0]), max(params.K, levels[-1]))
    beta_K = float(levels[np.argmin(np.abs(levels - params.K))])
    strike_gap = max(abs(params.K - beta_K), floor)

    def density(x: np.ndarray) -> np.ndarray:
        nearest = np.min(np.abs(x[:, None] - levels[None, :]), axis=1)
        log_gap = np.log(np.maximum(np.abs(x - beta_K), floor) / strike_gap)
        bump = np.exp(-0.5 * (log_gap / (3.0 * spread)) ** 2)
        outside = np.maximum(hull[0] - x, 0.0) + np.maximum(x - hull[1], 0.0)
        core = (
            (1.0 + (cfg.refinement - 1.0) * bump)
            / np.maximum(nearest, floor)
            / (1.0 + (outside / decay) ** 2)
        )
        return np.maximum(core, 0.5 / (x_max - x_min))

    anchors = sorted({x_min, x_max, params.K, *levels.tolist()})
    segments = list(zip(anchors, anchors[1:], strict=False))

    fine = [np.linspace(a, b, FINE_SAMPLES) for a, b in segments]
    cumulative = [cumulative_trapezoid(density(xs), xs, initial=0.0) for xs in fine]
    counts = _allocate(np.array([c[-1] for c in cumulative]), cfg.M)

    parts = []
    for (a, b), xs, cum, n in zip(segments, fine, cumulative, counts, strict=True):
        nodes = np.interp(np.linspace(0.0, cum[-1], n + 1), cum, xs)
        nodes[0], nodes[-1] = a, b
        parts.append(nodes[:-1])
    nodes = np.append(np.concatenate(parts), anchors[-1])
    return SpaceGrid(nodes=nodes, anchors=tuple(anchors))


def _time_grid(drift: StepDrift, cfg: SolverConfig) -> TimeGrid:
    T = drift.maturity
    interior = [t for t in drift.interior_breakpoints if t > 0]

    if cfg.alignment is Alignment.MISALIGNED:
        dt = T / cfg.N
        times = np.arange(cfg.N + 1) * dt
        times[-1] = T
        for k in range(1, cfg.N):
            if any(abs(times[k] - t_i) <= LEVEL_TOLERANCE * T for t_i in interior):
                times[k] += 0.5 * dt
        return TimeGrid(levels=times[::-1].copy(), alignment=cfg.alignment)

    edges = [0.0, *interior, T]
    counts = _allocate(np.diff(edges), cfg.N)
    pieces = [
        np.linspace(a, b, n + 1)[:-1]
        for a, b, n in zip(edges[:-1], edges[1:], counts, strict=True)
    ]
    times = np.append(np.concatenate(pieces), T)
    levels = times[::-1].copy()
    marks = tuple(
        int(np.argmin(np.abs(levels - t_i))) for t_i in sorted(interior, reverse=True)
    )
    for index, t_i in zip(marks, sorted(interior, reverse=True), strict=True):
        levels[index] = t_i
    return TimeGrid(levels=levels, alignment=cfg.alignment, breakpoint_levels=marks)


def build_grids(
    params: MarketParams, drift: StepDrift, cfg: SolverConfig
) -> tuple[SpaceGrid, TimeGrid]:
    space = _space_grid(params, drift, cfg)
    time = _time_grid(drift, cfg)
    logger.debug(
        "Grids: M=%d on [%.6g, %.6g], N=%d (%s)",
        space.M,
        space.nodes[0],
        space.nodes[-1],
        time.N,
        time.alignment.value,
    )
    return space, time


def _stencil(nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Three-point second-derivative weights at the interior nodes."""
    hl = nodes[1:-1] - nodes[:-2]
    hr = nodes[2:] - nodes[1:-1]
    lower = 2.0 / (hl * (hl + hr))
    diag = -2.0 / (hl * hr)
    upper = 2.0 / (hr * (hl + hr))
    return lower, diag, upper


def _operator(
    nodes: np.ndarray, a: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tridiagonal a * D^2 on the interior, with u_xx = 0 folded into the first and last rows."""
    lower, diag, upper = _stencil(nodes)
    sub, main, sup = a * lower, a * diag, a * upper
    h = np.diff(nodes)
    r0 = h[0] / h[1]
    rM = h[-1] / h[-2]
    # u_0 = (1 + r0) u_1 - r0 u_2
    main[0] += sub[0] * (1.0 + r0)
    sup[0] -= sub[0] * r0
    # u_M = (1 + rM) u_{M-1} - rM u_{M-2}
    main[-1] += sup[-1] * (1.0 + rM)
    sub[-1] -= sup[-1] * rM
    return sub, main, sup


def _apply(
    sub: np.ndarray, main: np.ndarray, sup: np.ndarray, u: np.ndarray
) -> np.ndarray:
    out = main * u
    out[1:] += sub[1:] * u[:-1]
    out[:-1] += sup[:-1] * u[1:]
    return out


def _extrapolate_edges(nodes: np.ndarray, interior: np.ndarray) -> np.ndarray:
    h = np.diff(nodes)
    r0 = h[0] / h[1]
    rM = h[-1] / h[-2]
    u0 = (1.0 + r0) * interior[0] - r0 * interior[1]
    uM = (1.0 + rM) * interior[-1] - rM * interior[-2]
    return np.concatenate(([u0], interior, [uM]))


def _implicit_steps(time: TimeGrid, rannacher_steps: int) -> set[int]:
    steps: set[int] = set(range(min(rannacher_steps, time.N)))
    for level in time.breakpoint_levels:
        steps.update(range(level, min(level + rannacher_steps, time.N)))
    return steps


def solve_backward(
    drift: StepDrift, params: MarketParams, cfg: SolverConfig
) -> PDESolution:
    split = degenerate_split_time(drift, params.K)
    if split is not None:
        logger.warning(
            "K = b(T) = %.6g: u(t, x) = (x - K)_+ on [T', T] with T' = %.6g",
            params.K,
            split,
        )

    space, time = build_grids(params, drift, cfg)
    nodes = space.nodes
    inner = nodes[1:-1]
    implicit = _implicit_steps(time, cfg.rannacher_steps)

    values = np.empty((time.N + 1, space.M + 1))
    values[0] = np.maximum(nodes - params.K, 0.0)
    u = values[0, 1:-1].copy()
    half_var = 0.5 * params.sigma**2

    for n in range(time.N):
        s0, s1 = time.levels[n], time.levels[n + 1]
        dt = s0 - s1
        # b is left-continuous, so (s1, s0] takes its value at s0
        beta = eval_b(drift, s0)
        theta = 1.0 if n in implicit else cfg.theta

        sub, main, sup = _operator(nodes, half_var * (inner - beta) ** 2)
        rhs = u + (1.0 - theta) * dt * _apply(sub, main, sup, u)

        banded = np.zeros((3, inner.size))
        banded[0, 1:] = -theta * dt * sup[:-1]
        banded[1] = 1.0 - theta * dt * main
        banded[2, :-1] = -theta * dt * sub[1:]
        try:
            u = solve_banded((1, 1), banded, rhs)
        except (LinAlgError, ValueError) as exc:
            raise SolverError(
                user_message=TRIDIAGONAL_SOLVE_FAILED,
                log_message=f"Tridiagonal solve failed at level {n + 1}: {exc}",
                internal_context={"level": n + 1, "t": s1},
            ) from exc
        if not np.all(np.isfinite(u)):
            raise SolverError(
                user_message=TRIDIAGONAL_SOLVE_FAILED,
                log_message=f"Non-finite values at level {n + 1}",
                internal_context={"level": n + 1, "t": s1},
            )
        values[n + 1] = _extrapolate_edges(nodes, u)

    values.setflags(write=False)
    logger.info(
        "Solved M=%d N=%d theta=%.3g (%d implicit steps)",
        space.M,
        time.N,
        cfg.theta,
        len(implicit),
    )
    return PDESolution(
        values=values, space=space, time=time, drift=drift, params=params, cfg=cfg
    )


def _bracket(sol: PDESolution, t: float) -> tuple[int, int, float]:
    """Level indices (upper, lower) around t and the weight of the upper level."""
    levels = sol.time.levels
    if not levels[-1] <= t <= levels[0]:
        raise DomainError(
            user_message=SOLUTION_QUERY_OUTSIDE, public_context={"t": t}
        )
    ascending = sol.time.ascending
    k = int(np.searchsorted(ascending, t, side="right")) - 1
    k = min(k, len(ascending) - 2)
    lo_time, hi_time = ascending[k], ascending[k + 1]
    weight = (t - lo_time) / (hi_time - lo_time)
    lower = sol.time.N - k
    return lower - 1, lower, weight


def get_u(sol: PDESolution, t: float, x: float) -> float:
    """Bilinear interpolation in (t, x); exact at grid points."""
    nodes = sol.space.nodes
    if not nodes[0] <= x <= nodes[-1]:
        raise DomainError(
            user_message=SOLUTION_QUERY_OUTSIDE, public_context={"x": x}
        )
    upper, lower, weight = _bracket(sol, t)
    u_upper = np.interp(x, nodes, sol.values[upper])
    u_lower = np.interp(x, nodes, sol.values[lower])
    if weight == 0.0:
        return float(u_lower)
    return float((1.0 - weight) * u_lower + weight * u_upper)


def _difference_rows(
    nodes: np.ndarray, row: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    hl = nodes[1:-1] - nodes[:-2]
    hr = nodes[2:] - nodes[1:-1]
    ux = (
        -hr / (hl * (hl + hr)) * row[:-2]
        + (hr - hl) / (hl * hr) * row[1:-1]
        + hl / (hr * (hl + hr)) * row[2:]
    )
    lower, diag, upper = _stencil(nodes)
    uxx = lower * row[:-2] + diag * row[1:-1] + upper * row[2:]
    return ux, uxx


def estimate_derivatives(
    sol: PDESolution, t: float, x: float
) -> tuple[float, float, float]:
    """(u_x, u_xx, u_t) at (t, x) from the solved grid."""
    nodes = sol.space.nodes
    if any(abs(t - t_i) <= LEVEL_TOLERANCE for t_i in sol.drift.breakpoints):
        raise DomainError(
            user_message=DERIVATIVE_AT_BREAKPOINT, public_context={"t": t}
        )
    if not nodes[2] <= x <= nodes[-3]:
        raise DomainError(user_message=DERIVATIVE_NEAR_EDGE, public_context={"x": x})

    upper, lower, weight = _bracket(sol, t)
    inner = nodes[1:-1]

    def at(row: np.ndarray) -> tuple[float, float]:
        ux, uxx = _difference_rows(nodes, row)
        return float(np.interp(x, inner, ux)), float(np.interp(x, inner, uxx))

    ux_lo, uxx_lo = at(sol.values[lower])
    ux_hi, uxx_hi = at(sol.values[upper])
    u_x = (1.0 - weight) * ux_lo + weight * ux_hi
    u_xx = (1.0 - weight) * uxx_lo + weight * uxx_hi

    dt = sol.time.levels[upper] - sol.time.levels[lower]
    u_t = (
        np.interp(x, nodes, sol.values[upper]) - np.interp(x, nodes, sol.values[lower])
    ) / dt
    return u_x, u_xx, float(u_t)
