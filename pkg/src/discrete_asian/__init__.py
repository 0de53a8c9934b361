from discrete_asian.analytic import (
    build_cascade,
    cascade_price,
    gbm_call,
    gbm_put,
    normal_cdf,
    shifted_price,
    u_reduced,
    v_reduced,
)
from discrete_asian.market_model import compute_b, compute_q, eval_b
from discrete_asian.mc_engine import martingale_residual, price_mc, simulate_terminal
from discrete_asian.pde_solver import (
    build_grids,
    estimate_derivatives,
    get_u,
    solve_backward,
)
from discrete_asian.schema.market import (
    DividendMeasure,
    MarketParams,
    StepDrift,
    WeightingMeasure,
)

__all__ = [
    "DividendMeasure",
    "MarketParams",
    "StepDrift",
    "WeightingMeasure",
    "build_cascade",
    "build_grids",
    "cascade_price",
    "compute_b",
    "compute_q",
    "estimate_derivatives",
    "eval_b",
    "gbm_call",
    "gbm_put",
    "get_u",
    "martingale_residual",
    "normal_cdf",
    "price_mc",
    "shifted_price",
    "simulate_terminal",
    "solve_backward",
    "u_reduced",
    "v_reduced",
]
