from pydantic import BaseModel, ConfigDict, Field

from discrete_asian.schema.configs import Alignment, EngineKind


class MCEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float
    std_error: float = Field(..., ge=0)
    n_paths: int = Field(..., ge=1)


class EngineQuote(BaseModel):
    """A price from any engine; std_error is zero for deterministic engines."""

    model_config = ConfigDict(frozen=True)

    value: float
    std_error: float = Field(0.0, ge=0)
    n_paths: int | None = None


class EulerBias(BaseModel):
    model_config = ConfigDict(frozen=True)

    euler: MCEstimate
    exact: MCEstimate
    difference: MCEstimate = Field(..., description="Paired euler - exact")


class BoundSample(BaseModel):
    t: float
    x: float
    v: float
    std_error: float = 0.0
    bound_derivation: float
    bound_printed: float
    violates_derivation: bool
    violates_printed: bool
    margin_derivation: float = Field(..., description="bound - v; negative means v exceeds")
    margin_printed: float


class BoundReport(BaseModel):
    engine: str
    sigma: float
    T: float
    K: float
    tolerance_se: float = Field(..., description="Allowed excess in standard errors")
    tolerance_widened: bool = False
    absolute_tolerance: float = Field(
        0.0, description="Allowed excess independent of the standard error"
    )
    samples: list[BoundSample]
    negative_values: int = 0

    @property
    def derivation_violations(self) -> int:
        return sum(sample.violates_derivation for sample in self.samples)

    @property
    def printed_violations(self) -> int:
        return sum(sample.violates_printed for sample in self.samples)

    @property
    def passed(self) -> bool:
        return self.derivation_violations == 0 and self.negative_values == 0


class DecayRow(BaseModel):
    x0: float
    r: float
    scaled_vx: float
    scaled_vxx: float
    abs_vt: float

    @property
    def total(self) -> float:
        return self.scaled_vx + self.scaled_vxx + self.abs_vt


class DecayProfile(BaseModel):
    engine: str
    t0: float
    rows: list[DecayRow]

    def is_monotone_from(self, start: int) -> bool:
        """True when every column is nonincreasing from row ``start`` on."""
        tail = self.rows[start:]
        for prev, cur in zip(tail, tail[1:], strict=False):
            if (
                cur.scaled_vx > prev.scaled_vx
                or cur.scaled_vxx > prev.scaled_vxx
                or cur.abs_vt > prev.abs_vt
            ):
                return False
        return True


class DecayFit(BaseModel):
    N: float
    fit_rows: list[int]
    check_rows: list[int]
    violations: list[int]

    @property
    def passed(self) -> bool:
        return not self.violations


class VanishingReport(BaseModel):
    engine: str
    n_samples: int
    tolerance: float
    violations: int
    max_abs_value: float


class GaussianTailRow(BaseModel):
    alpha: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


class GaussianTailReport(BaseModel):
    rows: list[GaussianTailRow]
    violations: int
    tightest_ratio: float = Field(..., description="max lhs/rhs over the samples")
    max_relative_violation: float = Field(
        ..., description="max (lhs - rhs)/rhs, negative when all samples hold"
    )


class EnginePrice(BaseModel):
    engine: EngineKind
    value: float | None = None
    std_error: float = 0.0
    error: str | None = None
    skipped: bool = Field(False, description="Engine cannot serve this problem")
    seconds: float = 0.0


class Disagreement(BaseModel):
    engine: EngineKind
    other: EngineKind
    difference: float
    tolerance: float
    agree: bool


class PriceReport(BaseModel):
    t: float = 0.0
    x: float
    prices: list[EnginePrice]
    disagreements: list[Disagreement]
    warnings: list[str] = Field(default_factory=list)
    split_time: float | None = None


class ConvergenceRow(BaseModel):
    N: int
    M: int
    value: float
    reference: float
    error: float


class ConvergenceTable(BaseModel):
    alignment: Alignment
    x: float
    rows: list[ConvergenceRow]


class SuiteResult(BaseModel):
    name: str
    passed: bool
    gated: bool = True
    detail: str = ""


class VerificationReport(BaseModel):
    bounds: list[BoundReport] = Field(default_factory=list)
    barrier_violations: int = 0
    decay: list[DecayProfile] = Field(default_factory=list)
    decay_fit: DecayFit | None = None
    vanishing: list[VanishingReport] = Field(default_factory=list)
    gaussian_tail: GaussianTailReport | None = None
    suites: list[SuiteResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(suite.passed for suite in self.suites if suite.gated)
