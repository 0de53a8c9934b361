TIME_OUTSIDE_HORIZON = "Time must lie in [0, T]"

EMPTY_ATOM_LIST = "The sampling measure has no atoms"

DENSITY_NOT_SUPPORTED = "Continuous sampling unsupported in step form"

NEGATIVE_TIME_TO_MATURITY = "Time to maturity must be nonnegative"

ZERO_STRIKE_EXCLUDED = "The reduced problem requires K != 0"

CASCADE_EXTRAPOLATION = "Query point lies outside the cascade table range"

STRIP_VIOLATION = "Point lies outside the bound strip Q"

DECAY_STRIP_VIOLATION = "x0 must lie strictly inside the decay strip (0, 2K/3)"

VANISHING_NEEDS_POSITIVE_STRIKE = "The vanishing-region check requires K > 0"

TAIL_ALPHA_NOT_POSITIVE = "Tail inequality requires alpha > 0"

GRID_EXCLUDES_ANCHOR = "Truncation bounds exclude the strike or a drift level"

TRIDIAGONAL_SOLVE_FAILED = "Tridiagonal solve failed"

SOLUTION_QUERY_OUTSIDE = "Query lies outside the solved domain"

DERIVATIVE_AT_BREAKPOINT = "Time derivative is not defined at a sampling date"

DERIVATIVE_NEAR_EDGE = "Derivative query is too close to the grid edge"

ANALYTIC_NEEDS_CONSTANT_DRIFT = "The analytic engine needs a constant drift"

MC_HAS_NO_DERIVATIVES = "The Monte Carlo engine does not estimate derivatives"

UNKNOWN_ENGINE = "Unknown pricing engine"

CONVERGENCE_NEEDS_PDE = "The convergence study requires the pde engine"

CONFIG_INVALID = "Configuration is invalid"
