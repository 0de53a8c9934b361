from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from discrete_asian.schema.market import MarketParams


class EngineKind(str, Enum):
    ANALYTIC = "analytic"
    CASCADE = "cascade"
    MC = "mc"
    PDE = "pde"


class PathScheme(str, Enum):
    EXACT_PIECEWISE = "exact-piecewise"
    EULER = "euler"


class Alignment(str, Enum):
    ALIGNED = "aligned"
    MISALIGNED = "misaligned"


class CascadeConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    nodes_per_stage: int = Field(512, ge=64, description="Table nodes per stage")
    quad_order: int = Field(64, ge=8, description="Gauss-Hermite order")
    x_lo: float = Field(
        -8.0, lt=0, description="Lower table edge in diffusion standard deviations"
    )
    x_hi: float = Field(
        8.0, gt=0, description="Upper table edge in diffusion standard deviations"
    )


class PathConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_paths: int = Field(100_000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    scheme: PathScheme = PathScheme.EXACT_PIECEWISE
    euler_steps_per_interval: int = Field(16, ge=1)
    antithetic: bool = False
    workers: int = Field(1, ge=1, description="Threads simulating path blocks")
    block_size: int = Field(
        1 << 15, ge=1, description="Paths per RNG block; fixes the RNG layout"
    )

    @model_validator(mode="after")
    def _check_pairing(self) -> "PathConfig":
        if self.antithetic and self.block_size % 2:
            raise ValueError("antithetic sampling needs an even block_size")
        return self


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    theta: float = Field(0.5, ge=0.5, le=1.0)
    M: int = Field(512, ge=16, description="Space cells")
    N: int = Field(512, ge=4, description="Time steps")
    rannacher_steps: int = Field(4, ge=0)
    x_min: float | None = Field(None, description="Lower truncation; auto if unset")
    x_max: float | None = Field(None, description="Upper truncation; auto if unset")
    margin_sd: float = Field(
        6.0, gt=0, description="Log-scale margin in diffusion standard deviations"
    )
    refinement: float = Field(4.0, ge=1.0, description="Local refinement factor")
    alignment: Alignment = Alignment.ALIGNED

    @model_validator(mode="after")
    def _check_bounds(self) -> "SolverConfig":
        if (
            self.x_min is not None
            and self.x_max is not None
            and not self.x_min < self.x_max
        ):
            raise ValueError("x_min must be below x_max")
        return self


class MarketSection(BaseModel):
    sigma: float = Field(..., gt=0)
    r: float = 0.0
    T: float = Field(..., gt=0)
    K: float
    spot: float = Field(1.0, description="Query point x at t = 0")

    def to_params(self) -> MarketParams:
        return MarketParams(sigma=self.sigma, r=self.r, T=self.T, K=self.K)


class SamplingSection(BaseModel):
    atoms: list[tuple[float, float]] = Field(default_factory=list)
    dividends: list[tuple[float, float]] = Field(default_factory=list)


class MonteCarloSettings(BaseModel):
    paths: int = Field(100_000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    scheme: PathScheme = PathScheme.EXACT_PIECEWISE
    steps: int = Field(16, ge=1)
    antithetic: bool = False
    workers: int = Field(1, ge=1)

    def to_path_config(self) -> PathConfig:
        return PathConfig(
            n_paths=self.paths,
            seed=self.seed,
            scheme=self.scheme,
            euler_steps_per_interval=self.steps,
            antithetic=self.antithetic,
            workers=self.workers,
        )


class PDESettings(BaseModel):
    M: int = Field(512, ge=16)
    N: int = Field(512, ge=4)
    theta: float = Field(0.5, ge=0.5, le=1.0)
    rannacher_steps: int = Field(4, ge=0)
    levels: list[int] = Field(default_factory=lambda: [64, 128, 256, 512])

    def to_solver_config(self, alignment: Alignment = Alignment.ALIGNED) -> SolverConfig:
        return SolverConfig(
            theta=self.theta,
            M=self.M,
            N=self.N,
            rannacher_steps=self.rannacher_steps,
            alignment=alignment,
        )


class CascadeSettings(BaseModel):
    quad_order: int = Field(64, ge=8)
    nodes: int = Field(512, ge=64)

    def to_cascade_config(self) -> CascadeConfig:
        return CascadeConfig(quad_order=self.quad_order, nodes_per_stage=self.nodes)


class EnginesSection(BaseModel):
    use: list[EngineKind] = Field(..., min_length=1)
    mc: MonteCarloSettings = Field(default_factory=MonteCarloSettings)
    pde: PDESettings = Field(default_factory=PDESettings)
    cascade: CascadeSettings = Field(default_factory=CascadeSettings)


class ReportSection(BaseModel):
    out: str = "results"
    formats: list[str] = Field(default_factory=lambda: ["csv", "txt"])


class RunConfig(BaseModel):
    market: MarketSection
    sampling: SamplingSection = Field(default_factory=SamplingSection)
    engines: EnginesSection
    report: ReportSection = Field(default_factory=ReportSection)
