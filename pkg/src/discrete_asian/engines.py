import logging
import threading
from typing import Protocol

from discrete_asian.analytic import build_cascade, shifted_price, v_reduced
from discrete_asian.exceptions.base_exceptions import EngineUnavailableError
from discrete_asian.exceptions.exception_constants import (
    ANALYTIC_NEEDS_CONSTANT_DRIFT,
    MC_HAS_NO_DERIVATIVES,
    UNKNOWN_ENGINE,
)
from discrete_asian.market_model import eval_b, zero_drift
from discrete_asian.mc_engine import price_mc
from discrete_asian.pde_solver import (
    PDESolution,
    estimate_derivatives,
    get_u,
    solve_backward,
)
from discrete_asian.schema.configs import (
    CascadeConfig,
    EngineKind,
    EnginesSection,
    PathConfig,
    SolverConfig,
)
from discrete_asian.schema.market import MarketParams, StepDrift
from discrete_asian.schema.reports import EngineQuote

logger = logging.getLogger(__name__)

DERIVATIVE_STEP = 0.01


class IPricingEngine(Protocol):
    kind: EngineKind
    vanishing_tolerance: float

    def price(
        self, t: float, x: float, drift: StepDrift, params: MarketParams
    ) -> EngineQuote: ...

    def reduced_value(self, t: float, x: float, params: MarketParams) -> EngineQuote:
        """v(t, x) of the problem with b = 0 (the put part when K < 0)."""
        ...

    def reduced_derivatives(
        self, t: float, x: float, params: MarketParams
    ) -> tuple[float, float, float]:
        """(v_x, v_xx, v_t) of the problem with b = 0."""
        ...


def _put_part(u: float, x: float, params: MarketParams) -> float:
    """v from u: equal for K > 0, u - (x - K) for K < 0."""
    return u if params.K > 0 else u - (x - params.K)


def _central_derivatives(
    engine: IPricingEngine, t: float, x: float, params: MarketParams
) -> tuple[float, float, float]:
    """Central differences with h = |x| / 100; v_t from v_t = -1/2 sigma^2 x^2 v_xx."""
    h = DERIVATIVE_STEP * abs(x)
    up = engine.reduced_value(t, x + h, params).value
    mid = engine.reduced_value(t, x, params).value
    down = engine.reduced_value(t, x - h, params).value
    v_x = (up - down) / (2.0 * h)
    v_xx = (up - 2.0 * mid + down) / (h * h)
    v_t = -0.5 * params.sigma**2 * x * x * v_xx
    return v_x, v_xx, v_t


class AnalyticEngine:
    kind = EngineKind.ANALYTIC
    vanishing_tolerance = 0.0

    def price(
        self, t: float, x: float, drift: StepDrift, params: MarketParams
    ) -> EngineQuote:
        if any(t < t_i < params.T for t_i in drift.breakpoints):
            raise EngineUnavailableError(
                user_message=ANALYTIC_NEEDS_CONSTANT_DRIFT,
                internal_context={"breakpoints": drift.breakpoints, "t": t},
            )
        return EngineQuote(value=shifted_price(t, x, eval_b(drift, params.T), params))

    def reduced_value(self, t: float, x: float, params: MarketParams) -> EngineQuote:
        return EngineQuote(value=v_reduced(t, x, params))

    def reduced_derivatives(
        self, t: float, x: float, params: MarketParams
    ) -> tuple[float, float, float]:
        return _central_derivatives(self, t, x, params)


class CascadeEngine:
    kind = EngineKind.CASCADE
    vanishing_tolerance = 0.0

    def __init__(self, cfg: CascadeConfig | None = None):
        self.cfg = cfg or CascadeConfig()

    def price(
        self, t: float, x: float, drift: StepDrift, params: MarketParams
    ) -> EngineQuote:
        pricer = build_cascade(t, drift, params, self.cfg, x_range=(x, x))
        return EngineQuote(value=float(pricer.price(x)))

    def reduced_value(self, t: float, x: float, params: MarketParams) -> EngineQuote:
        u = self.price(t, x, zero_drift(params.T), params).value
        return EngineQuote(value=max(_put_part(u, x, params), 0.0))

    def reduced_derivatives(
        self, t: float, x: float, params: MarketParams
    ) -> tuple[float, float, float]:
        return _central_derivatives(self, t, x, params)


class MonteCarloEngine:
    kind = EngineKind.MC
    vanishing_tolerance = 0.0

    def __init__(self, cfg: PathConfig | None = None):
        self.cfg = cfg or PathConfig()

    def price(
        self, t: float, x: float, drift: StepDrift, params: MarketParams
    ) -> EngineQuote:
        estimate = price_mc(t, x, drift, params, self.cfg)
        return EngineQuote(
            value=estimate.mean,
            std_error=estimate.std_error,
            n_paths=estimate.n_paths,
        )

    def reduced_value(self, t: float, x: float, params: MarketParams) -> EngineQuote:
        quote = self.price(t, x, zero_drift(params.T), params)
        return quote.model_copy(update={"value": _put_part(quote.value, x, params)})

    def reduced_derivatives(
        self, t: float, x: float, params: MarketParams
    ) -> tuple[float, float, float]:
        raise EngineUnavailableError(user_message=MC_HAS_NO_DERIVATIVES)


class PDEEngine:
    """Prices from cached backward solves, one per (drift, params) pair."""

    kind = EngineKind.PDE
    vanishing_tolerance = 1e-8

    def __init__(self, cfg: SolverConfig | None = None):
        self.cfg = cfg or SolverConfig()
        self._solutions: dict[tuple[StepDrift, MarketParams], PDESolution] = {}
        self._lock = threading.Lock()

    def solution(self, drift: StepDrift, params: MarketParams) -> PDESolution:
        key = (drift, params)
        with self._lock:
            cached = self._solutions.get(key)
            if cached is None:
                cached = solve_backward(drift, params, self.cfg)
                self._solutions[key] = cached
        return cached

    def price(
        self, t: float, x: float, drift: StepDrift, params: MarketParams
    ) -> EngineQuote:
        return EngineQuote(value=get_u(self.solution(drift, params), t, x))

    def reduced_value(self, t: float, x: float, params: MarketParams) -> EngineQuote:
        u = self.price(t, x, zero_drift(params.T), params).value
        return EngineQuote(value=_put_part(u, x, params))

    def reduced_derivatives(
        self, t: float, x: float, params: MarketParams
    ) -> tuple[float, float, float]:
        sol = self.solution(zero_drift(params.T), params)
        u_x, u_xx, u_t = estimate_derivatives(sol, t, x)
        if params.K < 0:
            # v = u - (x - K)
            u_x -= 1.0
        return u_x, u_xx, u_t


class EngineFactory:

    def get_engine(
        self, kind: EngineKind | str, settings: EnginesSection | None = None
    ) -> IPricingEngine:
        kind_value = kind.value if isinstance(kind, EngineKind) else kind
        if kind_value == EngineKind.ANALYTIC.value:
            return AnalyticEngine()
        elif kind_value == EngineKind.CASCADE.value:
            return CascadeEngine(
                settings.cascade.to_cascade_config() if settings else None
            )
        elif kind_value == EngineKind.MC.value:
            return MonteCarloEngine(settings.mc.to_path_config() if settings else None)
        elif kind_value == EngineKind.PDE.value:
            return PDEEngine(settings.pde.to_solver_config() if settings else None)

        raise EngineUnavailableError(
            user_message=UNKNOWN_ENGINE, public_context={"engine": kind_value}
        )
