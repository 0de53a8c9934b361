from typing import Any

from discrete_asian.engines import IPricingEngine
from discrete_asian.exceptions.base_exceptions import (
    EngineUnavailableError,
    SolverError,
)
from discrete_asian.exceptions.exception_constants import (
    MC_HAS_NO_DERIVATIVES,
    TRIDIAGONAL_SOLVE_FAILED,
)
from discrete_asian.schema.configs import EngineKind, EnginesSection
from discrete_asian.schema.market import MarketParams, StepDrift
from discrete_asian.schema.reports import EngineQuote


class FakeEngine(IPricingEngine):
    """Returns fixed quotes and records every call."""

    def __init__(
        self,
        kind: EngineKind = EngineKind.ANALYTIC,
        value: float = 0.1,
        std_error: float = 0.0,
        n_paths: int | None = None,
        derivatives: tuple[float, float, float] = (0.0, 0.0, 0.0),
    ):
        self.kind = kind
        self.vanishing_tolerance = 0.0
        self.value = value
        self.std_error = std_error
        self.n_paths = n_paths
        self.derivatives = derivatives
        self.received_calls: list[tuple[Any, ...]] = []

    def _quote(self) -> EngineQuote:
        return EngineQuote(
            value=self.value, std_error=self.std_error, n_paths=self.n_paths
        )

    def price(
        self, t: float, x: float, drift: StepDrift, params: MarketParams
    ) -> EngineQuote:
        self.received_calls.append(("price", t, x))
        return self._quote()

    def reduced_value(self, t: float, x: float, params: MarketParams) -> EngineQuote:
        self.received_calls.append(("reduced_value", t, x))
        return self._quote()

    def reduced_derivatives(
        self, t: float, x: float, params: MarketParams
    ) -> tuple[float, float, float]:
        self.received_calls.append(("reduced_derivatives", t, x))
        return self.derivatives


class FailingEngine(FakeEngine):
    """Raises a SolverError from every pricing call."""

    def price(
        self, t: float, x: float, drift: StepDrift, params: MarketParams
    ) -> EngineQuote:
        self.received_calls.append(("price", t, x))
        raise SolverError(user_message=TRIDIAGONAL_SOLVE_FAILED)

    def reduced_value(self, t: float, x: float, params: MarketParams) -> EngineQuote:
        self.received_calls.append(("reduced_value", t, x))
        raise SolverError(user_message=TRIDIAGONAL_SOLVE_FAILED)


class UnavailableEngine(FakeEngine):
    def price(
        self, t: float, x: float, drift: StepDrift, params: MarketParams
    ) -> EngineQuote:
        self.received_calls.append(("price", t, x))
        raise EngineUnavailableError(user_message=MC_HAS_NO_DERIVATIVES)


class FakeEngineFactory:
    """Hands out preconfigured engines by kind."""

    def __init__(self, engines: dict[EngineKind, IPricingEngine]):
        self.engines = engines
        self.calls: list[tuple[str, EngineKind]] = []

    def get_engine(
        self, kind: EngineKind, settings: EnginesSection | None = None
    ) -> IPricingEngine:
        self.calls.append(("get_engine", kind))
        return self.engines[kind]
