from bisect import bisect_left, bisect_right

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ATOM_MERGE_TOLERANCE = 1e-12


class MarketParams(BaseModel):
    """Inputs of one pricing problem."""

    model_config = ConfigDict(frozen=True)

    sigma: float = Field(..., gt=0, description="Volatility per square-root time")
    r: float = Field(0.0, description="Interest rate per unit time")
    T: float = Field(..., gt=0, description="Maturity")
    K: float = Field(..., description="Strike; any real")

    def with_strike(self, K: float) -> "MarketParams":
        return self.model_copy(update={"K": K})


class PiecewiseDensity(BaseModel):
    """Piecewise-constant density: ``rates[i]`` on ``[knots[i], knots[i+1])``."""

    model_config = ConfigDict(frozen=True)

    knots: tuple[float, ...] = Field(..., min_length=2)
    rates: tuple[float, ...] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _check_shape(self) -> "PiecewiseDensity":
        if len(self.rates) != len(self.knots) - 1:
            raise ValueError("density needs exactly one rate per knot interval")
        if any(b <= a for a, b in zip(self.knots, self.knots[1:], strict=False)):
            raise ValueError("density knots must be strictly increasing")
        if self.knots[0] < 0:
            raise ValueError("density support must start at or after 0")
        if any(rate < 0 for rate in self.rates):
            raise ValueError("density values must be nonnegative")
        return self

    def rate_at(self, s: float) -> float:
        if s < self.knots[0] or s >= self.knots[-1]:
            return 0.0
        return self.rates[bisect_right(self.knots, s) - 1]

    def integral(self, a: float, b: float) -> float:
        """Integral of the density over [a, b]."""
        total = 0.0
        for lo, hi, rate in zip(self.knots, self.knots[1:], self.rates, strict=False):
            left, right = max(lo, a), min(hi, b)
            if right > left:
                total += rate * (right - left)
        return total

    @property
    def total(self) -> float:
        return self.integral(self.knots[0], self.knots[-1])


class _AtomicMeasure(BaseModel):
    model_config = ConfigDict(frozen=True)

    atoms: tuple[tuple[float, float], ...] = Field(
        default=(), description="(time, mass) pairs sorted by time"
    )
    density: PiecewiseDensity | None = Field(
        None, description="Optional absolutely continuous part"
    )

    @field_validator("atoms", mode="after")
    @classmethod
    def _merge_and_order(
        cls, atoms: tuple[tuple[float, float], ...]
    ) -> tuple[tuple[float, float], ...]:
        merged: list[tuple[float, float]] = []
        for t, mass in atoms:
            if t < 0:
                raise ValueError("atom times must be nonnegative")
            if merged and t < merged[-1][0] - ATOM_MERGE_TOLERANCE:
                raise ValueError("atoms must be sorted by time")
            if merged and t - merged[-1][0] <= ATOM_MERGE_TOLERANCE:
                merged[-1] = (merged[-1][0], merged[-1][1] + mass)
            else:
                merged.append((t, mass))
        return tuple(merged)

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.atoms)

    @property
    def masses(self) -> tuple[float, ...]:
        return tuple(m for _, m in self.atoms)

    def cumulative(self, t: float) -> float:
        """Mass of [0, t] (right-continuous in t)."""
        atom_mass = sum(self.masses[: bisect_right(self.times, t)])
        if self.density is not None:
            atom_mass += self.density.integral(0.0, t)
        return atom_mass

    def cumulative_left(self, t: float) -> float:
        """Mass of [0, t)."""
        atom_mass = sum(self.masses[: bisect_left(self.times, t)])
        if self.density is not None:
            atom_mass += self.density.integral(0.0, t)
        return atom_mass

    def mass_closed(self, a: float, b: float) -> float:
        """Mass of [a, b]."""
        return self.cumulative(b) - self.cumulative_left(a)

    def mass_open_left(self, a: float, b: float) -> float:
        """Mass of (a, b]."""
        return self.cumulative(b) - self.cumulative(a)


class WeightingMeasure(_AtomicMeasure):
    """Sampling measure mu: positive atoms plus an optional density."""

    @model_validator(mode="after")
    def _check_masses(self) -> "WeightingMeasure":
        if any(mass <= 0 for mass in self.masses):
            raise ValueError("sampling atoms must have positive mass")
        if self.atoms and self.atoms[0][0] <= 0:
            raise ValueError("sampling dates must be strictly positive")
        total = sum(self.masses) + (self.density.total if self.density else 0.0)
        if not total > 0:
            raise ValueError("sampling measure must have positive total mass")
        return self

    def scaled(self, factor: float) -> "WeightingMeasure":
        return WeightingMeasure(
            atoms=tuple((t, factor * m) for t, m in self.atoms),
            density=(
                PiecewiseDensity(
                    knots=self.density.knots,
                    rates=tuple(factor * rate for rate in self.density.rates),
                )
                if self.density
                else None
            ),
        )


class DividendMeasure(_AtomicMeasure):
    """Dividend measure nu; zero masses allowed, nu = 0 is the default."""

    @model_validator(mode="after")
    def _check_masses(self) -> "DividendMeasure":
        if any(mass < 0 for mass in self.masses):
            raise ValueError("dividend masses must be nonnegative")
        return self


class StepDrift(BaseModel):
    """b(t) = values[i] on (breakpoints[i-1], breakpoints[i]], last value 0."""

    model_config = ConfigDict(frozen=True)

    breakpoints: tuple[float, ...] = Field(
        default=(), description="Sampling dates t_1 < ... < t_k <= T"
    )
    values: tuple[float, ...] = Field(
        ..., min_length=1, description="beta_1 > ... > beta_k > beta_{k+1} = 0"
    )
    maturity: float = Field(..., gt=0, description="Horizon T")

    @model_validator(mode="after")
    def _check_shape(self) -> "StepDrift":
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("a step drift needs one more value than breakpoints")
        if any(
            b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:], strict=False)
        ):
            raise ValueError("breakpoints must be strictly increasing")
        if self.breakpoints and (
            self.breakpoints[0] <= 0 or self.breakpoints[-1] > self.maturity
        ):
            raise ValueError("breakpoints must lie in (0, T]")
        if self.values[-1] != 0.0:
            raise ValueError("the final drift level must be exactly 0")
        if any(v < 0 for v in self.values):
            raise ValueError("drift levels must be nonnegative")
        if any(b >= a for a, b in zip(self.values, self.values[1:], strict=False)):
            raise ValueError("drift levels must be strictly decreasing")
        return self

    @property
    def k(self) -> int:
        return len(self.breakpoints)

    @property
    def levels(self) -> tuple[float, ...]:
        """beta_1, ..., beta_k (the nonzero levels)."""
        return self.values[:-1]

    @property
    def interior_breakpoints(self) -> tuple[float, ...]:
        """Sampling dates strictly before T."""
        return tuple(t for t in self.breakpoints if t < self.maturity)
