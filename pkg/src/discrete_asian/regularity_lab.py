"""Numerical checks of the regularity estimates for the problem with b = 0.

v is the call part E(x e^G - K)_+ for K > 0 and the put part
E(K - x e^G)_+ for K < 0. The bound strip Q is [0, T) x (0, K), mirrored
to (K, 0) when K < 0.
"""

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import TypeVar

import numpy as np
from scipy import integrate, optimize, special

from discrete_asian.engines import IPricingEngine
from discrete_asian.exceptions.base_exceptions import DomainError
from discrete_asian.exceptions.exception_constants import (
    DECAY_STRIP_VIOLATION,
    STRIP_VIOLATION,
    TAIL_ALPHA_NOT_POSITIVE,
    TIME_OUTSIDE_HORIZON,
    VANISHING_NEEDS_POSITIVE_STRIKE,
    ZERO_STRIKE_EXCLUDED,
)
from discrete_asian.schema.market import MarketParams
from discrete_asian.schema.reports import (
    BoundReport,
    BoundSample,
    DecayFit,
    DecayProfile,
    DecayRow,
    EngineQuote,
    GaussianTailReport,
    GaussianTailRow,
    VanishingReport,
)

logger = logging.getLogger(__name__)

TOLERANCE_SE = 3.0
WIDENED_TOLERANCE_SE = 5.0
WIDEN_BELOW_PATHS = 10_000
MIN_LOG_DISTANCE = 0.05
MAX_LOG_DISTANCE = 5.0
ROUNDING_SLACK = 1e-14
NEGATIVITY_SLACK = 1e-10


class BoundVariant(str, Enum):
    PRINTED = "printed"
    DERIVATION = "derivation"


def _in_strip(t: float, x: float, params: MarketParams) -> bool:
    if not 0.0 <= t < params.T:
        return False
    if params.K > 0:
        return 0.0 < x < params.K
    return params.K < x < 0.0


def lemma_bound(
    t: float,
    x: float,
    params: MarketParams,
    variant: BoundVariant = BoundVariant.DERIVATION,
) -> float:
    """sqrt(2/pi) sigma |K| sqrt(T) / l * exp(-l^2 / (c sigma^2 T)) with l = ln|K/x|.

    ``c`` is 2 for the derivation variant and 1 for the printed one.
    """
    if params.K == 0.0:
        raise DomainError(user_message=ZERO_STRIKE_EXCLUDED)
    if not _in_strip(t, x, params):
        raise DomainError(
            user_message=STRIP_VIOLATION, public_context={"t": t, "x": x}
        )
    ell = math.log(abs(params.K / x))
    if ell == 0.0:
        raise DomainError(
            user_message=STRIP_VIOLATION, public_context={"t": t, "x": x}
        )

    spread = params.sigma**2 * params.T
    if variant is BoundVariant.DERIVATION:
        spread *= 2.0
    prefactor = (
        math.sqrt(2.0 / math.pi) * params.sigma * abs(params.K) * math.sqrt(params.T)
    )
    return prefactor / ell * math.exp(-(ell**2) / spread)


_T = TypeVar("_T")
_R = TypeVar("_R")


def _map_ordered(
    func: Callable[[_T], _R], items: Sequence[_T], workers: int
) -> list[_R]:
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def bound_lattice(
    params: MarketParams, n_samples: int
) -> list[tuple[float, float]]:
    """(t, x) points in Q: t uniform in [0, T), ln|K/x| log-spaced in [0.05, 5]."""
    n_times = max(1, int(math.isqrt(n_samples)))
    n_levels = max(1, math.ceil(n_samples / n_times))
    times = np.linspace(0.0, params.T, n_times, endpoint=False)
    distances = np.geomspace(MIN_LOG_DISTANCE, MAX_LOG_DISTANCE, n_levels)
    return [
        (float(t), float(params.K * math.exp(-ell)))
        for t in times
        for ell in distances
    ]


def _tolerance_se(quote: EngineQuote) -> tuple[float, bool]:
    widened = quote.n_paths is not None and quote.n_paths < WIDEN_BELOW_PATHS
    return (WIDENED_TOLERANCE_SE if widened else TOLERANCE_SE), widened


def check_bound(
    engine: IPricingEngine,
    params: MarketParams,
    n_samples: int = 400,
    workers: int = 1,
) -> BoundReport:
    """Compare v with both bound variants on a lattice in Q; negative v counts too."""
    if params.K == 0.0:
        raise DomainError(user_message=ZERO_STRIKE_EXCLUDED)

    lattice = bound_lattice(params, n_samples)
    quotes = _map_ordered(
        lambda point: engine.reduced_value(point[0], point[1], params),
        lattice,
        workers,
    )

    # engines with a discretisation floor get it added to every allowance
    absolute = engine.vanishing_tolerance + ROUNDING_SLACK
    tolerance_se = TOLERANCE_SE
    widened = False
    samples: list[BoundSample] = []
    negatives = 0
    for (t, x), quote in zip(lattice, quotes, strict=True):
        tolerance_se, widened = _tolerance_se(quote)
        allowance = tolerance_se * quote.std_error + absolute
        derivation = lemma_bound(t, x, params, BoundVariant.DERIVATION)
        printed = lemma_bound(t, x, params, BoundVariant.PRINTED)
        if quote.value < -(allowance + NEGATIVITY_SLACK):
            negatives += 1
        samples.append(
            BoundSample(
                t=t,
                x=x,
                v=quote.value,
                std_error=quote.std_error,
                bound_derivation=derivation,
                bound_printed=printed,
                violates_derivation=quote.value - derivation > allowance,
                violates_printed=quote.value - printed > allowance,
                margin_derivation=derivation - quote.value,
                margin_printed=printed - quote.value,
            )
        )

    report = BoundReport(
        engine=engine.kind.value,
        sigma=params.sigma,
        T=params.T,
        K=params.K,
        tolerance_se=tolerance_se,
        tolerance_widened=widened,
        absolute_tolerance=absolute,
        samples=samples,
        negative_values=negatives,
    )
    logger.info(
        "Bound check (%s): %d samples, %d derivation and %d printed violations",
        report.engine,
        len(samples),
        report.derivation_violations,
        report.printed_violations,
    )
    return report


def decay_sequence(K: float, start: int = 2, stop: int = 10) -> list[float]:
    """x0 = K 2^-j for j = start..stop."""
    return [K * 2.0**-j for j in range(start, stop + 1)]


def decay_profile(
    engine: IPricingEngine,
    t0: float,
    params: MarketParams,
    x0_sequence: Sequence[float],
) -> DecayProfile:
    """Rows (x0, x0/2, x0|v_x|, x0^2|v_xx|, |v_t|) for x0 decreasing inside (0, 2K/3)."""
    if not 0.0 <= t0 < params.T:
        raise DomainError(
            user_message=TIME_OUTSIDE_HORIZON, public_context={"t0": t0}
        )
    if params.K <= 0 or any(not 0.0 < x0 < 2.0 * params.K / 3.0 for x0 in x0_sequence):
        raise DomainError(
            user_message=DECAY_STRIP_VIOLATION,
            public_context={"K": params.K, "x0": list(x0_sequence)},
        )
    if any(b >= a for a, b in zip(x0_sequence, x0_sequence[1:], strict=False)):
        raise DomainError(
            user_message=DECAY_STRIP_VIOLATION,
            log_message="x0 values must be strictly decreasing",
        )

    rows = []
    for x0 in x0_sequence:
        v_x, v_xx, v_t = engine.reduced_derivatives(t0, x0, params)
        rows.append(
            DecayRow(
                x0=x0,
                r=x0 / 2.0,
                scaled_vx=x0 * abs(v_x),
                scaled_vxx=x0 * x0 * abs(v_xx),
                abs_vt=abs(v_t),
            )
        )
        logger.debug("Decay row x0=%.6g total=%.6g", x0, rows[-1].total)
    return DecayProfile(engine=engine.kind.value, t0=t0, rows=rows)


def _envelope(N: float, x0: float) -> float:
    return N * math.exp(-(math.log(x0) ** 2) / N)


def fit_decay_constant(profile: DecayProfile, fit_rows: Sequence[int]) -> float:
    """Smallest N with N exp(-(ln x0)^2 / N) >= total at every fit row."""
    fitted = 0.0
    for index in fit_rows:
        row = profile.rows[index]
        if row.total <= 0.0:
            continue
        L2 = math.log(row.x0) ** 2
        target = math.log(row.total)

        def gap(N: float, L2: float = L2, target: float = target) -> float:
            return math.log(N) - L2 / N - target

        lo, hi = 1e-12, 1.0
        while gap(hi) < 0:
            hi *= 2.0
        fitted = max(fitted, optimize.brentq(gap, lo, hi, xtol=1e-14, rtol=1e-12))
    return fitted


def verify_decay_bound(
    profile: DecayProfile,
    N: float,
    rows: Sequence[int],
    fit_rows: Sequence[int] = (),
) -> DecayFit:
    violations = [
        index
        for index in rows
        if profile.rows[index].total
        > _envelope(N, profile.rows[index].x0) * (1.0 + 1e-9)
    ]
    if violations:
        logger.warning("Decay envelope with N=%.6g fails at rows %s", N, violations)
    return DecayFit(
        N=N, fit_rows=list(fit_rows), check_rows=list(rows), violations=violations
    )


def _vanishing_points(
    params: MarketParams, n_samples: int
) -> list[tuple[float, float]]:
    n_times = max(1, int(math.isqrt(n_samples)))
    n_x = max(1, math.ceil(n_samples / n_times))
    times = np.linspace(0.0, params.T, n_times, endpoint=False)
    xs = -params.K * np.linspace(0.0, 1.0, n_x)
    return [(float(t), float(x)) for t in times for x in xs][:n_samples]


def vanishing_region_check(
    engine: IPricingEngine,
    params: MarketParams,
    n_samples: int = 100,
    workers: int = 1,
) -> VanishingReport:
    """Count points with x <= 0 where |v| exceeds the engine's tolerance."""
    if params.K <= 0:
        raise DomainError(
            user_message=VANISHING_NEEDS_POSITIVE_STRIKE, public_context={"K": params.K}
        )
    points = _vanishing_points(params, n_samples)
    values = [
        quote.value
        for quote in _map_ordered(
            lambda point: engine.reduced_value(point[0], point[1], params),
            points,
            workers,
        )
    ]
    magnitudes = np.abs(values)
    report = VanishingReport(
        engine=engine.kind.value,
        n_samples=len(points),
        tolerance=engine.vanishing_tolerance,
        violations=int(np.sum(magnitudes > engine.vanishing_tolerance)),
        max_abs_value=float(magnitudes.max()),
    )
    if report.violations:
        logger.warning(
            "Vanishing region (%s): %d of %d points exceed %.3g",
            report.engine,
            report.violations,
            report.n_samples,
            report.tolerance,
        )
    return report


def tail_integral(alpha: float) -> float:
    """exp(alpha^2 / 2) * integral_alpha^inf exp(-x^2 / 2) dx by adaptive quadrature."""
    scaled, _ = integrate.quad(
        lambda y: math.exp(-alpha * y - 0.5 * y * y),
        0.0,
        math.inf,
        epsabs=0.0,
        epsrel=1e-12,
    )
    return scaled


def gaussian_tail_check(alpha_samples: Sequence[float]) -> GaussianTailReport:
    """Check integral_alpha^inf exp(-x^2/2) dx <= exp(-alpha^2/2) / alpha."""
    if any(alpha <= 0 for alpha in alpha_samples):
        raise DomainError(
            user_message=TAIL_ALPHA_NOT_POSITIVE,
            public_context={"alpha": min(alpha_samples)},
        )

    rows = []
    ratios = []
    for alpha in alpha_samples:
        scaled = tail_integral(alpha)
        closed = math.sqrt(math.pi / 2.0) * float(special.erfcx(alpha / math.sqrt(2.0)))
        if abs(scaled - closed) > 1e-8 * closed:
            logger.warning(
                "Tail quadrature at alpha=%.6g differs from erfcx: %.15g vs %.15g",
                alpha,
                scaled,
                closed,
            )
        damping = math.exp(-0.5 * alpha * alpha)
        rows.append(GaussianTailRow(alpha=alpha, lhs=damping * scaled, rhs=damping / alpha))
        # lhs / rhs without the common factor, which underflows for large alpha
        ratios.append(alpha * scaled)

    ratio = np.array(ratios)
    return GaussianTailReport(
        rows=rows,
        violations=int(np.sum(ratio > 1.0)),
        tightest_ratio=float(ratio.max()),
        max_relative_violation=float((ratio - 1.0).max()),
    )


def barrier_check(
    engine: IPricingEngine, params: MarketParams, n_times: int = 100
) -> int:
    """Count times t in [0, T] where v(t, K) > K beyond the engine's noise."""
    violations = 0
    for t in np.linspace(0.0, params.T, n_times):
        quote = engine.reduced_value(float(t), params.K, params)
        tolerance_se, _ = _tolerance_se(quote)
        if quote.value - abs(params.K) > tolerance_se * quote.std_error + ROUNDING_SLACK:
            violations += 1
    return violations

