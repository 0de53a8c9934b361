"""Monte Carlo on dX = (X - b) sigma dW with a step drift b.

Paths are simulated in fixed-size blocks. Block ``i`` draws its uniforms
from a Philox stream keyed by ``(seed, i)``, so a path's randomness depends
only on its index and results do not change with the worker count.
"""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.random import Generator, Philox, SeedSequence
from scipy.special import ndtri

from discrete_asian.exceptions.base_exceptions import DomainError
from discrete_asian.exceptions.exception_constants import TIME_OUTSIDE_HORIZON
from discrete_asian.market_model import eval_b, sampling_stage_times
from discrete_asian.schema.configs import PathConfig, PathScheme
from discrete_asian.schema.market import MarketParams, StepDrift
from discrete_asian.schema.reports import EulerBias, MCEstimate

logger = logging.getLogger(__name__)

# keeps the uniforms inside (0, 1) before the inverse normal CDF
UNIFORM_OFFSET = 2.0**-54
STD_ERROR_WARN_RATIO = 0.05


def _check_horizon(t: float, T: float) -> None:
    if not 0.0 <= t <= T:
        raise DomainError(
            user_message=TIME_OUTSIDE_HORIZON, public_context={"t": t, "T": T}
        )


def _intervals(t: float, drift: StepDrift) -> list[tuple[float, float]]:
    """(duration, beta) for each interval between t and T, split at every sampling date."""
    times = sampling_stage_times(drift, t)
    return [(b - a, eval_b(drift, b)) for a, b in zip(times, times[1:], strict=False)]


def _block_sizes(cfg: PathConfig) -> list[int]:
    full, rest = divmod(cfg.n_paths, cfg.block_size)
    return [cfg.block_size] * full + ([rest] if rest else [])


def _block_normals(
    cfg: PathConfig, block: int, n: int, shape: tuple[int, ...]
) -> np.ndarray:
    """Standard normals of shape (n, *shape) for one block, by inverse CDF."""
    rng = Generator(Philox(SeedSequence(cfg.seed, spawn_key=(block,))))
    rows = (n + 1) // 2 if cfg.antithetic else n
    z = ndtri(rng.random((rows, *shape)) + UNIFORM_OFFSET)
    if not cfg.antithetic:
        return z
    # path 2j uses z_j, path 2j + 1 uses -z_j
    paired = np.stack((z, -z), axis=1).reshape((2 * rows, *shape))
    return paired[:n]


def _run_blocks(
    cfg: PathConfig, simulate: Callable[[int, int], np.ndarray]
) -> np.ndarray:
    sizes = _block_sizes(cfg)
    jobs = list(enumerate(sizes))
    if cfg.workers == 1 or len(jobs) == 1:
        parts = [simulate(block, n) for block, n in jobs]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(lambda job: simulate(*job), jobs))
    return np.concatenate(parts)


def simulate_terminal(
    t: float,
    x: float,
    drift: StepDrift,
    sigma: float,
    T: float,
    cfg: PathConfig,
) -> np.ndarray:
    """Samples of X_T started from X_t = x."""
    _check_horizon(t, T)
    if sigma == 0.0 or t == T:
        return np.full(cfg.n_paths, float(x))

    intervals = _intervals(t, drift)
    substeps = cfg.euler_steps_per_interval

    def simulate(block: int, n: int) -> np.ndarray:
        X = np.full(n, float(x))
        if cfg.scheme is PathScheme.EXACT_PIECEWISE:
            z = _block_normals(cfg, block, n, (len(intervals),))
            for j, (duration, beta) in enumerate(intervals):
                s = sigma * math.sqrt(duration)
                X = beta + (X - beta) * np.exp(s * z[:, j] - 0.5 * s * s)
        else:
            z = _block_normals(cfg, block, n, (len(intervals), substeps))
            for j, (duration, beta) in enumerate(intervals):
                scale = sigma * math.sqrt(duration / substeps)
                for k in range(substeps):
                    X = X + (X - beta) * scale * z[:, j, k]
        return X

    samples = _run_blocks(cfg, simulate)
    logger.debug(
        "Simulated %d paths over %d intervals (%s)",
        cfg.n_paths,
        len(intervals),
        cfg.scheme.value,
    )
    return samples


def _estimate(values: np.ndarray, antithetic: bool) -> MCEstimate:
    n = values.size
    mean = float(np.mean(values))
    if antithetic and n >= 4:
        pairs = values[: 2 * (n // 2)].reshape(-1, 2).mean(axis=1)
        std_error = float(np.std(pairs, ddof=1) / math.sqrt(pairs.size))
    elif n >= 2:
        std_error = float(np.std(values, ddof=1) / math.sqrt(n))
    else:
        std_error = 0.0
    return MCEstimate(mean=mean, std_error=std_error, n_paths=n)


def _warn_if_high_std_error(estimate: MCEstimate, label: str) -> None:
    scale = max(abs(estimate.mean), 1.0e-12)
    ratio = estimate.std_error / scale
    if ratio > STD_ERROR_WARN_RATIO:
        logger.warning(
            "MC %s standard error high: std_error=%.6g ratio=%.6g paths=%d",
            label,
            estimate.std_error,
            ratio,
            estimate.n_paths,
        )


def price_mc(
    t: float,
    x: float,
    drift: StepDrift,
    params: MarketParams,
    cfg: PathConfig,
) -> MCEstimate:
    """Mean of (X_T - K)_+ with its standard error."""
    _check_horizon(t, params.T)
    if t == params.T:
        return MCEstimate(
            mean=max(x - params.K, 0.0), std_error=0.0, n_paths=cfg.n_paths
        )

    samples = simulate_terminal(t, x, drift, params.sigma, params.T, cfg)
    estimate = _estimate(np.maximum(samples - params.K, 0.0), cfg.antithetic)
    if estimate.mean > 0:
        _warn_if_high_std_error(estimate, "price")
    logger.info(
        "MC price %.10g +/- %.3g from %d paths",
        estimate.mean,
        estimate.std_error,
        estimate.n_paths,
    )
    return estimate


def martingale_residual(
    t: float,
    x: float,
    drift: StepDrift,
    sigma: float,
    T: float,
    cfg: PathConfig,
) -> MCEstimate:
    """Sample mean of X_T - x; zero in expectation since X has no drift term."""
    samples = simulate_terminal(t, x, drift, sigma, T, cfg)
    return _estimate(samples - x, cfg.antithetic)


def euler_bias(
    t: float,
    x: float,
    drift: StepDrift,
    params: MarketParams,
    cfg: PathConfig,
) -> EulerBias:
    """Euler and exact prices driven by the same Brownian increments.

    The exact scheme uses the interval increment sum(z_k) / sqrt(m) of the
    ``m`` Euler substeps, so the difference has a small variance.
    """
    _check_horizon(t, params.T)
    intervals = _intervals(t, drift)
    substeps = cfg.euler_steps_per_interval
    sigma = params.sigma

    def simulate(block: int, n: int) -> np.ndarray:
        z = _block_normals(cfg, block, n, (len(intervals), substeps))
        euler = np.full(n, float(x))
        exact = np.full(n, float(x))
        for j, (duration, beta) in enumerate(intervals):
            scale = sigma * math.sqrt(duration / substeps)
            for k in range(substeps):
                euler = euler + (euler - beta) * scale * z[:, j, k]
            s = sigma * math.sqrt(duration)
            total = z[:, j, :].sum(axis=1) / math.sqrt(substeps)
            exact = beta + (exact - beta) * np.exp(s * total - 0.5 * s * s)
        return np.stack((euler, exact), axis=1)

    if t == params.T or not intervals:
        terminal = np.full((cfg.n_paths, 2), float(x))
    else:
        terminal = _run_blocks(cfg, simulate)

    payoffs = np.maximum(terminal - params.K, 0.0)
    return EulerBias(
        euler=_estimate(payoffs[:, 0], cfg.antithetic),
        exact=_estimate(payoffs[:, 1], cfg.antithetic),
        difference=_estimate(payoffs[:, 0] - payoffs[:, 1], cfg.antithetic),
    )
