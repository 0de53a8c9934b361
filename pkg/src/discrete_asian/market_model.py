"""Trading strategy q(t) and step drift b(t) from the market description.

The integral of the weighting measure over [t, T] is taken over the closed
interval, so an atom at t counts; this yields b(t_i) = beta_i on the
half-open intervals (t_{i-1}, t_i].
"""

import logging
import math

import numpy as np
from scipy.integrate import simpson

from discrete_asian.exceptions.base_exceptions import DomainError, MeasureError
from discrete_asian.exceptions.exception_constants import (
    DENSITY_NOT_SUPPORTED,
    EMPTY_ATOM_LIST,
    TIME_OUTSIDE_HORIZON,
)
from discrete_asian.schema.market import (
    DividendMeasure,
    MarketParams,
    StepDrift,
    WeightingMeasure,
)

logger = logging.getLogger(__name__)

SIMPSON_PANELS = 2**10
BREAKPOINT_TOLERANCE = 1e-12


def _check_time(t: float, T: float) -> None:
    if not 0.0 <= t <= T:
        raise DomainError(
            user_message=TIME_OUTSIDE_HORIZON,
            public_context={"t": t, "T": T},
        )


def _check_atoms_within(measure: WeightingMeasure | DividendMeasure, T: float) -> None:
    if measure.atoms and measure.atoms[-1][0] > T + BREAKPOINT_TOLERANCE:
        raise DomainError(
            user_message=TIME_OUTSIDE_HORIZON,
            log_message="Measure has atoms after maturity",
            internal_context={"last_atom": measure.atoms[-1][0], "T": T},
        )


def _tail_weight(params: MarketParams, nu: DividendMeasure, s: float) -> float:
    """exp{-r(T-s) + nu([s, T])}."""
    return math.exp(-params.r * (params.T - s) + nu.mass_closed(s, params.T))


def _density_integral(
    params: MarketParams, nu: DividendMeasure, mu: WeightingMeasure, t: float
) -> float:
    density = mu.density
    if density is None:
        return 0.0

    T = params.T
    cuts = {t, T}
    cuts.update(k for k in density.knots if t < k < T)
    cuts.update(s for s in nu.times if t < s < T)
    if nu.density is not None:
        cuts.update(k for k in nu.density.knots if t < k < T)
    edges = sorted(cuts)

    nu_total = nu.cumulative(T)
    total = 0.0
    for a, b in zip(edges, edges[1:], strict=False):
        s = np.linspace(a, b, SIMPSON_PANELS + 1)
        # nu([s, T]) is continuous inside (a, b); take one-sided limits at the ends.
        nu_tail = np.array([nu_total - nu.cumulative_left(si) for si in s])
        nu_tail[0] = nu_total - nu.cumulative(a)
        nu_tail[-1] = nu_total - nu.cumulative_left(b)
        rate = density.rate_at(0.5 * (a + b))
        integrand = rate * np.exp(-params.r * (T - s) + nu_tail)
        total += float(simpson(integrand, x=s))
    return total


def compute_q(
    params: MarketParams,
    nu: DividendMeasure,
    mu: WeightingMeasure,
    t: float,
) -> float:
    """Trading strategy q(t) by direct summation over atoms plus Simpson quadrature."""
    _check_time(t, params.T)
    _check_atoms_within(mu, params.T)

    atom_part = sum(
        alpha * _tail_weight(params, nu, t_i)
        for t_i, alpha in mu.atoms
        if t_i >= t
    )
    integral = atom_part + _density_integral(params, nu, mu, t)
    return math.exp(-nu.mass_open_left(t, params.T)) * integral


def compute_b(
    params: MarketParams,
    nu: DividendMeasure,
    mu: WeightingMeasure,
) -> StepDrift:
    if mu.density is not None:
        raise MeasureError(
            user_message=DENSITY_NOT_SUPPORTED,
            internal_context={"density_knots": mu.density.knots},
        )
    if not mu.atoms:
        raise MeasureError(user_message=EMPTY_ATOM_LIST)
    _check_atoms_within(mu, params.T)

    discount = math.exp(-nu.cumulative(params.T))
    terms = [alpha * _tail_weight(params, nu, t_i) for t_i, alpha in mu.atoms]

    # beta_i = discount * sum_{j >= i} terms_j, accumulated from the back
    betas: list[float] = []
    running = 0.0
    for term in reversed(terms):
        running += term
        betas.append(discount * running)
    betas.reverse()

    breakpoints = tuple(min(t_i, params.T) for t_i in mu.times)
    drift = StepDrift(
        breakpoints=breakpoints, values=(*betas, 0.0), maturity=params.T
    )
    logger.debug("Built step drift with %d levels: %s", drift.k, drift.values)
    return drift


def eval_b(drift: StepDrift, t: float) -> float:
    """The level beta_i with t in (t_{i-1}, t_i]; b(0) = beta_1."""
    _check_time(t, drift.maturity)
    index = int(np.searchsorted(drift.breakpoints, t, side="left"))
    return drift.values[index]


def eval_b_many(drift: StepDrift, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > drift.maturity)):
        raise DomainError(
            user_message=TIME_OUTSIDE_HORIZON, public_context={"T": drift.maturity}
        )
    index = np.searchsorted(drift.breakpoints, t, side="left")
    return np.asarray(drift.values)[index]


def zero_drift(T: float) -> StepDrift:
    """b = 0 on [0, T]: the reduced problem."""
    return StepDrift(breakpoints=(), values=(0.0,), maturity=T)


def constant_drift(beta: float, T: float) -> StepDrift:
    """b = beta on [0, T] (a single atom at maturity)."""
    if beta == 0.0:
        return zero_drift(T)
    return StepDrift(breakpoints=(T,), values=(beta, 0.0), maturity=T)


def uniform_sampling(n: int, T: float) -> WeightingMeasure:
    """Equally weighted average over the dates kT/n, k = 1..n."""
    if n < 1:
        raise MeasureError(user_message=EMPTY_ATOM_LIST, public_context={"n": n})
    return WeightingMeasure(atoms=tuple((k * T / n, 1.0 / n) for k in range(1, n + 1)))


def degenerate_split_time(
    drift: StepDrift, K: float, tolerance: float = 1e-12
) -> float | None:
    """T' = inf{t in [0, T] : b(t) = K} when K = b(T), otherwise None."""
    b_T = eval_b(drift, drift.maturity)
    if abs(K - b_T) > tolerance * max(1.0, abs(K)):
        return None

    index = int(np.searchsorted(drift.breakpoints, drift.maturity, side="left"))
    # b equals b(T) on (t_{index-1}, T]; index 0 means the whole horizon
    return 0.0 if index == 0 else drift.breakpoints[index - 1]


def sampling_stage_times(drift: StepDrift, t: float) -> list[float]:
    """Partition t = s_0 < s_1 < ... < s_m = T splitting at every sampling date after t."""
    _check_time(t, drift.maturity)
    points = [t]
    points.extend(
        t_i
        for t_i in drift.breakpoints
        if t_i > t + BREAKPOINT_TOLERANCE
        and t_i < drift.maturity - BREAKPOINT_TOLERANCE
    )
    if drift.maturity > t:
        points.append(drift.maturity)
    return points
