"""Closed forms for the constant-drift problem and the quadrature cascade for step drifts.

Every expectation here is of the form E(y e^G - K)_+ with
G ~ Normal(-s^2/2, s^2) and s = sigma * sqrt(tau).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy.interpolate import PchipInterpolator
from scipy.special import ndtr, roots_hermitenorm

from discrete_asian.exceptions.base_exceptions import DomainError, ExtrapolationError
from discrete_asian.exceptions.exception_constants import (
    CASCADE_EXTRAPOLATION,
    NEGATIVE_TIME_TO_MATURITY,
    TIME_OUTSIDE_HORIZON,
    ZERO_STRIKE_EXCLUDED,
)
from discrete_asian.market_model import eval_b, sampling_stage_times
from discrete_asian.schema.configs import CascadeConfig
from discrete_asian.schema.market import MarketParams, StepDrift

logger = logging.getLogger(__name__)

RANGE_PADDING = 1e-6


def normal_cdf(z: ArrayLike) -> float | np.ndarray:
    """Standard normal distribution function."""
    value = ndtr(z)
    return float(value) if np.ndim(value) == 0 else value


def _black_scholes(x: np.ndarray, K: float, s: float) -> np.ndarray:
    # x > 0, K > 0, s > 0
    d1 = (np.log(x / K) + 0.5 * s * s) / s
    return x * ndtr(d1) - K * ndtr(d1 - s)


def call_values(x: ArrayLike, K: float, s: float) -> np.ndarray:
    """E(x e^G - K)_+ for an array of spots and any real strike.

    ``s`` is the total standard deviation sigma * sqrt(tau).
    """
    x = np.asarray(x, dtype=float)
    if s == 0.0:
        return np.maximum(x - K, 0.0)

    if K > 0:
        out = np.zeros_like(x)
        positive = x > 0
        out[positive] = _black_scholes(x[positive], K, s)
        return out

    # K <= 0: the payoff is linear wherever x >= 0
    out = np.array(x - K, dtype=float)
    negative = x < 0
    if K == 0.0:
        out[negative] = 0.0
    else:
        flipped = -x[negative]
        # put(-x, -K) by parity
        out[negative] = _black_scholes(flipped, -K, s) + x[negative] - K
    return np.maximum(out, 0.0)


def _total_sd(sigma: float, tau: float) -> float:
    if tau < 0:
        raise DomainError(
            user_message=NEGATIVE_TIME_TO_MATURITY, public_context={"tau": tau}
        )
    return sigma * math.sqrt(tau)


def gbm_call(x: float, K: float, sigma: float, tau: float) -> float:
    return float(call_values(x, K, _total_sd(sigma, tau)))


def gbm_put(x: float, K: float, sigma: float, tau: float) -> float:
    """E(K - x e^G)_+ through parity with the call."""
    return gbm_call(x, K, sigma, tau) - x + K


def _reduced_checks(t: float, params: MarketParams) -> float:
    if params.K == 0.0:
        raise DomainError(user_message=ZERO_STRIKE_EXCLUDED)
    if not 0.0 <= t <= params.T:
        raise DomainError(
            user_message=TIME_OUTSIDE_HORIZON, public_context={"t": t, "T": params.T}
        )
    return params.sigma * math.sqrt(params.T - t)


def v_reduced(t: float, x: float, params: MarketParams) -> float:
    """v(t, x): the call for K > 0, the put E(K - x e^G)_+ for K < 0."""
    s = _reduced_checks(t, params)
    if params.K > 0:
        return float(call_values(x, params.K, s))
    return float(call_values(-x, -params.K, s))


def u_reduced(t: float, x: float, params: MarketParams) -> float:
    v = v_reduced(t, x, params)
    if params.K > 0:
        return v
    return x - params.K + v


def shifted_price(t: float, x: float, beta: float, params: MarketParams) -> float:
    """u(t, x) under the constant drift b = beta, via x -> x - beta and K -> K - beta."""
    if params.K == beta:
        return max(x - params.K, 0.0)
    return u_reduced(t, x - beta, params.with_strike(params.K - beta))


@dataclass(frozen=True)
class CascadeStep:
    """One sampling interval (start, end] with its constant drift level."""

    start: float
    end: float
    beta: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class StageTable:
    nodes: np.ndarray
    values: np.ndarray
    interpolant: PchipInterpolator

    @property
    def lo(self) -> float:
        return float(self.nodes[0])

    @property
    def hi(self) -> float:
        return float(self.nodes[-1])


@dataclass(frozen=True)
class CascadePricer:
    """u(t, .) on a query range for a step drift.

    ``steps[j]`` carries the value from time ``steps[j].end`` back to
    ``steps[j].start``. The last step is done in closed form, the first is a
    direct quadrature at the query points, and the values at the
    intermediate dates are kept in ``tables``.
    """

    t: float
    params: MarketParams
    cfg: CascadeConfig
    steps: tuple[CascadeStep, ...]
    tables: tuple[StageTable, ...]
    x_range: tuple[float, float]
    z: np.ndarray
    weights: np.ndarray

    def price(self, x: ArrayLike) -> float | np.ndarray:
        points = np.asarray(x, dtype=float)
        lo, hi = self.x_range
        slack = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(points < lo - slack) or np.any(points > hi + slack):
            raise ExtrapolationError(
                user_message=CASCADE_EXTRAPOLATION,
                public_context={"range": self.x_range},
                internal_context={"x": points.tolist()},
            )
        if not self.steps:
            values = np.maximum(points - self.params.K, 0.0)
        else:
            values = _expectation(self, 0, np.atleast_1d(points)).reshape(points.shape)
        return float(values) if values.ndim == 0 else values


def _value_at(pricer: CascadePricer, level: int, y: np.ndarray) -> np.ndarray:
    """u at time steps[level].start for level >= 1."""
    last = len(pricer.steps) - 1
    if level == last:
        step = pricer.steps[last]
        s = pricer.params.sigma * math.sqrt(step.duration)
        return call_values(y - step.beta, pricer.params.K - step.beta, s)

    table = pricer.tables[level - 1]
    inside = (y >= table.lo) & (y <= table.hi)
    out = np.maximum(y - pricer.params.K, 0.0)
    out[inside] = table.interpolant(y[inside])
    return out


def _expectation(pricer: CascadePricer, level: int, y: np.ndarray) -> np.ndarray:
    """E u(end, beta + (y - beta) e^G) over one step by Gauss-Hermite quadrature."""
    step = pricer.steps[level]
    if level == len(pricer.steps) - 1:
        return _value_at(pricer, level, y)

    s = pricer.params.sigma * math.sqrt(step.duration)
    factors = np.exp(s * pricer.z - 0.5 * s * s)
    points = step.beta + np.outer(y - step.beta, factors)
    values = _value_at(pricer, level + 1, points.ravel()).reshape(points.shape)
    return values @ pricer.weights


def _propagate_range(
    lo: float, hi: float, beta: float, s: float, cfg: CascadeConfig
) -> tuple[float, float]:
    """Image of [lo, hi] under y -> beta + (y - beta) e^G with G within the table band."""
    f_lo = math.exp(cfg.x_lo * s - 0.5 * s * s)
    f_hi = math.exp(cfg.x_hi * s - 0.5 * s * s)
    a, b = lo - beta, hi - beta
    products = (a * f_lo, a * f_hi, b * f_lo, b * f_hi)
    return beta + min(products), beta + max(products)


def _pad(lo: float, hi: float) -> tuple[float, float]:
    width = RANGE_PADDING * max(1.0, abs(lo), abs(hi))
    if hi - lo < width:
        mid = 0.5 * (lo + hi)
        return mid - width, mid + width
    return lo, hi


def _stage_nodes(lo: float, hi: float, beta: float, n: int) -> np.ndarray:
    """Nodes uniform in log |y - beta| when [lo, hi] lies on one side of beta."""
    if lo > beta:
        nodes = beta + np.geomspace(lo - beta, hi - beta, n)
    elif hi < beta:
        nodes = beta - np.geomspace(beta - lo, beta - hi, n)
    else:
        return np.linspace(lo, hi, n)
    nodes[0], nodes[-1] = lo, hi
    return nodes


def build_cascade(
    t: float,
    drift: StepDrift,
    params: MarketParams,
    cfg: CascadeConfig | None = None,
    x_range: tuple[float, float] = (0.0, 0.0),
) -> CascadePricer:
    """Tabulate the backward recursion over the sampling dates in (t, T]."""
    cfg = cfg or CascadeConfig()
    if params.K == 0.0:
        raise DomainError(user_message=ZERO_STRIKE_EXCLUDED)
    if drift.maturity != params.T:
        raise DomainError(
            user_message=TIME_OUTSIDE_HORIZON,
            internal_context={"drift_maturity": drift.maturity, "T": params.T},
        )

    times = sampling_stage_times(drift, t)
    steps = tuple(
        CascadeStep(start=a, end=b, beta=eval_b(drift, b))
        for a, b in zip(times, times[1:], strict=False)
    )

    z, w = roots_hermitenorm(cfg.quad_order)
    weights = w / w.sum()

    # ranges[j] is where u(steps[j].start, .) gets evaluated
    ranges = [_pad(*x_range)]
    for level in range(1, len(steps)):
        prev = steps[level - 1]
        s = params.sigma * math.sqrt(prev.duration)
        ranges.append(_pad(*_propagate_range(*ranges[-1], prev.beta, s, cfg)))

    # tables[j - 1] holds level j for the intermediate levels 1..m-2
    tables: list[StageTable | None] = [None] * max(len(steps) - 2, 0)
    for level in range(len(steps) - 2, 0, -1):
        # the step before maps its points to beta + (y - beta) e^G
        nodes = _stage_nodes(
            *ranges[level], steps[level - 1].beta, cfg.nodes_per_stage
        )
        partial = CascadePricer(
            t=t,
            params=params,
            cfg=cfg,
            steps=steps,
            tables=tuple(tables),  # type: ignore[arg-type]
            x_range=x_range,
            z=z,
            weights=weights,
        )
        values = _expectation(partial, level, nodes)
        tables[level - 1] = StageTable(
            nodes=nodes, values=values, interpolant=PchipInterpolator(nodes, values)
        )
        logger.debug(
            "Cascade level %d tabulated on [%.6g, %.6g]", level, nodes[0], nodes[-1]
        )

    pricer = CascadePricer(
        t=t,
        params=params,
        cfg=cfg,
        steps=steps,
        tables=tuple(table for table in tables if table is not None),
        x_range=x_range,
        z=z,
        weights=weights,
    )
    logger.debug("Built cascade with %d steps and %d tables", len(steps), len(tables))
    return pricer


def cascade_price(
    t: float,
    x: float,
    drift: StepDrift,
    params: MarketParams,
    cfg: CascadeConfig | None = None,
) -> float:
    return float(build_cascade(t, drift, params, cfg, x_range=(x, x)).price(x))
