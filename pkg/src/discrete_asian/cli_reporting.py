"""Batch front end: ``discrete-asian price|verify|converge --config FILE --out DIR``.

Exit codes: 0 when every gated check passes, 1 when one fails, 2 for usage
and configuration errors.
"""

import argparse
import logging
import math
import sys
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from discrete_asian.analytic import cascade_price
from discrete_asian.engines import AnalyticEngine, EngineFactory, IPricingEngine
from discrete_asian.exceptions.base_exceptions import (
    AsianPricingException,
    ConfigError,
    ConfigIssue,
    DomainError,
    EngineUnavailableError,
    MeasureError,
)
from discrete_asian.exceptions.exception_constants import (
    CONVERGENCE_NEEDS_PDE,
    ZERO_STRIKE_EXCLUDED,
)
from discrete_asian.market_model import compute_b, degenerate_split_time, zero_drift
from discrete_asian.pde_solver import get_u, solve_backward
from discrete_asian.regularity_lab import (
    barrier_check,
    check_bound,
    decay_profile,
    decay_sequence,
    fit_decay_constant,
    gaussian_tail_check,
    vanishing_region_check,
    verify_decay_bound,
)
from discrete_asian.schema.configs import (
    Alignment,
    EngineKind,
    MonteCarloSettings,
    RunConfig,
    SolverConfig,
)
from discrete_asian.schema.market import (
    DividendMeasure,
    MarketParams,
    StepDrift,
    WeightingMeasure,
)
from discrete_asian.schema.reports import (
    ConvergenceRow,
    ConvergenceTable,
    Disagreement,
    EnginePrice,
    PriceReport,
    SuiteResult,
    VerificationReport,
)
from discrete_asian.utils.config_parser import parse_config
from discrete_asian.utils.report_writer import (
    price_summary,
    verification_summary,
    write_convergence,
    write_price_report,
    write_summary,
    write_verification,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

AGREEMENT_SE = 3.0
PDE_RELATIVE_TOLERANCE = 0.01
RELATIVE_TOLERANCE = 1e-6
ABSOLUTE_TOLERANCE = 1e-10

BOUND_SAMPLES = 400
VANISHING_SAMPLES = 100
BARRIER_TIMES = 100
DECAY_T0_SWEEP = 5
# rows of decay_sequence(K, 2, 10): index i holds j = i + 2
DECAY_MONOTONE_FROM = 2
DECAY_FIT_ROWS = (2, 3)
DECAY_CHECK_ROWS = (4, 5, 6, 7, 8)
TAIL_ALPHAS = np.geomspace(1e-3, 10.0, 50)
TAIL_MIN_RATIO = 0.98
ALIGNMENT_SLACK = 1e-15


def _log_exception(exc: AsianPricingException) -> None:
    logger.log(
        logging.getLevelName(exc.log_level.upper()),
        "%s %s",
        exc.log_message,
        exc.internal_context,
    )


def build_problem(cfg: RunConfig) -> tuple[MarketParams, StepDrift]:
    """MarketParams and the step drift of the configured sampling."""
    params = cfg.market.to_params()
    if not cfg.sampling.atoms:
        return params, zero_drift(params.T)
    try:
        mu = WeightingMeasure(atoms=tuple(cfg.sampling.atoms))
        nu = DividendMeasure(atoms=tuple(cfg.sampling.dividends))
    except ValidationError as exc:
        raise ConfigError(
            [ConfigIssue(line=0, message=error["msg"]) for error in exc.errors()]
        ) from exc
    return params, compute_b(params, nu, mu)


def _unique(kinds: Sequence[EngineKind]) -> list[EngineKind]:
    return list(dict.fromkeys(kinds))


def _tolerance(a: EnginePrice, b: EnginePrice) -> float:
    assert a.value is not None and b.value is not None
    noise = AGREEMENT_SE * math.hypot(a.std_error, b.std_error)
    relative = (
        PDE_RELATIVE_TOLERANCE
        if EngineKind.PDE in (a.engine, b.engine)
        else RELATIVE_TOLERANCE
    )
    return noise + relative * max(abs(a.value), abs(b.value)) + ABSOLUTE_TOLERANCE


def compare_prices(prices: Sequence[EnginePrice]) -> list[Disagreement]:
    ok = [price for price in prices if price.error is None and price.value is not None]
    pairs = []
    for i, first in enumerate(ok):
        for second in ok[i + 1 :]:
            assert first.value is not None and second.value is not None
            difference = first.value - second.value
            tolerance = _tolerance(first, second)
            pairs.append(
                Disagreement(
                    engine=first.engine,
                    other=second.engine,
                    difference=difference,
                    tolerance=tolerance,
                    agree=abs(difference) <= tolerance,
                )
            )
    return pairs


def run_price(cfg: RunConfig, factory: EngineFactory | None = None) -> PriceReport:
    """Price at (0, spot) with every selected engine; one failing engine does not stop the rest."""
    factory = factory or EngineFactory()
    params, drift = build_problem(cfg)
    x = cfg.market.spot
    kinds = _unique(cfg.engines.use)

    def run(kind: EngineKind) -> EnginePrice:
        start = time.perf_counter()
        try:
            engine = factory.get_engine(kind, cfg.engines)
            quote = engine.price(0.0, x, drift, params)
        except EngineUnavailableError as exc:
            _log_exception(exc)
            return EnginePrice(
                engine=kind,
                error=exc.user_message,
                skipped=True,
                seconds=time.perf_counter() - start,
            )
        except AsianPricingException as exc:
            _log_exception(exc)
            logger.warning("Engine %s failed: %s", kind.value, exc)
            return EnginePrice(
                engine=kind, error=str(exc), seconds=time.perf_counter() - start
            )
        return EnginePrice(
            engine=kind,
            value=quote.value,
            std_error=quote.std_error,
            seconds=time.perf_counter() - start,
        )

    with ThreadPoolExecutor(max_workers=len(kinds)) as pool:
        prices = list(pool.map(run, kinds))

    warnings = []
    split = degenerate_split_time(drift, params.K)
    if split is not None:
        message = (
            f"K = b(T) = {params.K:.12g}: the solution is (x - K)_+ on [T', T]"
            f" with T' = {split:.12g}"
        )
        logger.warning(message)
        warnings.append(message)

    return PriceReport(
        t=0.0,
        x=x,
        prices=prices,
        disagreements=compare_prices(prices),
        warnings=warnings,
        split_time=split,
    )


def run_convergence(cfg: RunConfig, alignment: Alignment) -> ConvergenceTable:
    """PDE error against the cascade reference along the configured resolution levels."""
    if EngineKind.PDE not in cfg.engines.use:
        raise EngineUnavailableError(user_message=CONVERGENCE_NEEDS_PDE)
    params, drift = build_problem(cfg)
    x = cfg.market.spot
    reference = cascade_price(
        0.0, x, drift, params, cfg.engines.cascade.to_cascade_config()
    )

    base = cfg.engines.pde.to_solver_config(alignment).model_dump()
    rows = []
    for level in cfg.engines.pde.levels:
        solver_cfg = SolverConfig(**{**base, "M": level, "N": level})
        value = get_u(solve_backward(drift, params, solver_cfg), 0.0, x)
        rows.append(
            ConvergenceRow(
                N=level,
                M=level,
                value=value,
                reference=reference,
                error=abs(value - reference),
            )
        )
        logger.info(
            "Convergence %s M=N=%d: error %.3g", alignment.value, level, rows[-1].error
        )
    return ConvergenceTable(alignment=alignment, x=x, rows=rows)


def _guarded(
    suites: list[SuiteResult], name: str, check: Callable[[], SuiteResult]
) -> None:
    """Run one suite; a failure is recorded and the remaining suites still run."""
    try:
        suites.append(check())
    except AsianPricingException as exc:
        _log_exception(exc)
        suites.append(SuiteResult(name=name, passed=False, detail=exc.user_message))


def run_verify(cfg: RunConfig, factory: EngineFactory | None = None) -> VerificationReport:
    """Regularity suites on the problem with b = 0 and the configured strike."""
    params = cfg.market.to_params()
    if params.K == 0.0:
        raise DomainError(user_message=ZERO_STRIKE_EXCLUDED)
    factory = factory or EngineFactory()
    engines: list[IPricingEngine] = [
        factory.get_engine(kind, cfg.engines) for kind in _unique(cfg.engines.use)
    ]
    closed_form = AnalyticEngine()
    report = VerificationReport()
    suites = report.suites

    for engine in engines:
        name = engine.kind.value

        def bound_suite(engine: IPricingEngine = engine, name: str = name) -> SuiteResult:
            bound = check_bound(engine, params, BOUND_SAMPLES)
            report.bounds.append(bound)
            suites.append(
                SuiteResult(
                    name=f"bound_printed[{name}]",
                    passed=bound.printed_violations == 0,
                    gated=False,
                    detail=f"{bound.printed_violations} violations",
                )
            )
            return SuiteResult(
                name=f"bound[{name}]",
                passed=bound.passed,
                detail=(
                    f"{bound.derivation_violations} violations,"
                    f" {bound.negative_values} negative values"
                ),
            )

        _guarded(suites, f"bound[{name}]", bound_suite)

    def barrier_suite() -> SuiteResult:
        violations = barrier_check(closed_form, params, BARRIER_TIMES)
        report.barrier_violations = violations
        return SuiteResult(
            name="barrier", passed=violations == 0, detail=f"{violations} violations"
        )

    _guarded(suites, "barrier", barrier_suite)

    if params.K > 0:
        _decay_suites(params, engines, closed_form, report)
        for engine in engines:

            def vanishing_suite(engine: IPricingEngine = engine) -> SuiteResult:
                result = vanishing_region_check(engine, params, VANISHING_SAMPLES)
                report.vanishing.append(result)
                return SuiteResult(
                    name=f"vanishing[{engine.kind.value}]",
                    passed=result.violations == 0,
                    detail=f"max |v| = {result.max_abs_value:.3g}",
                )

            _guarded(suites, f"vanishing[{engine.kind.value}]", vanishing_suite)
    else:
        for skipped in ("decay_monotone", "decay_bound", "vanishing"):
            suites.append(
                SuiteResult(name=skipped, passed=True, gated=False, detail="skipped: K < 0")
            )

    def tail_suite() -> SuiteResult:
        tail = gaussian_tail_check(TAIL_ALPHAS.tolist())
        report.gaussian_tail = tail
        tight = tail.rows[-1].ratio
        return SuiteResult(
            name="gaussian_tail",
            passed=tail.violations == 0 and tight >= TAIL_MIN_RATIO,
            detail=f"{tail.violations} violations, ratio {tight:.4f} at alpha = 10",
        )

    _guarded(suites, "gaussian_tail", tail_suite)
    return report


def _decay_suites(
    params: MarketParams,
    engines: Sequence[IPricingEngine],
    closed_form: AnalyticEngine,
    report: VerificationReport,
) -> None:
    x0 = decay_sequence(params.K)
    suites = report.suites

    def monotone_suite() -> SuiteResult:
        failing = []
        for t0 in np.linspace(0.0, params.T, DECAY_T0_SWEEP, endpoint=False):
            profile = decay_profile(closed_form, float(t0), params, x0)
            report.decay.append(profile)
            if not profile.is_monotone_from(DECAY_MONOTONE_FROM):
                failing.append(f"{t0:.6g}")
        return SuiteResult(
            name="decay_monotone",
            passed=not failing,
            detail=f"not monotone at t0 = {', '.join(failing)}" if failing else "",
        )

    def bound_suite() -> SuiteResult:
        profile = next(
            (p for p in report.decay if p.engine == closed_form.kind.value and p.t0 == 0.0),
            None,
        ) or decay_profile(closed_form, 0.0, params, x0)
        N = fit_decay_constant(profile, DECAY_FIT_ROWS)
        fit = verify_decay_bound(profile, N, DECAY_CHECK_ROWS, DECAY_FIT_ROWS)
        report.decay_fit = fit
        return SuiteResult(
            name="decay_bound",
            passed=fit.passed,
            detail=f"N = {N:.6g}, failing rows {fit.violations}",
        )

    _guarded(suites, "decay_monotone", monotone_suite)
    _guarded(suites, "decay_bound", bound_suite)

    # profiles from the other engines are reported for comparison only
    for engine in engines:
        if engine.kind in (EngineKind.ANALYTIC, EngineKind.MC):
            continue
        try:
            report.decay.append(decay_profile(engine, 0.0, params, x0))
        except AsianPricingException as exc:
            _log_exception(exc)


def _write_requested(cfg: RunConfig, kind: str) -> bool:
    return kind in cfg.report.formats


def _price(cfg: RunConfig, out_dir: Path) -> int:
    report = run_price(cfg)
    if _write_requested(cfg, "csv"):
        write_price_report(report, out_dir)
    if _write_requested(cfg, "txt"):
        write_summary(price_summary(report), out_dir)
    failed = any(price.error and not price.skipped for price in report.prices)
    disagree = any(not pair.agree for pair in report.disagreements)
    return EXIT_FAILURE if failed or disagree else EXIT_OK


def compare_alignments(
    aligned: ConvergenceTable, misaligned: ConvergenceTable, interior_dates: bool
) -> str | None:
    """Failure detail when the aligned grid is not the better one, else None.

    Aligned must never be worse. With interior sampling dates it must also be
    strictly better on all but a quarter of the levels; without them the two
    grids coincide.
    """
    pairs = list(zip(aligned.rows, misaligned.rows, strict=True))
    worse = [
        a.N for a, m in pairs if a.error > m.error * (1.0 + 1e-12) + ALIGNMENT_SLACK
    ]
    if worse:
        return f"aligned error larger at N = {worse}"
    if not interior_dates:
        return None
    strict = sum(a.error < m.error for a, m in pairs)
    needed = len(pairs) - len(pairs) // 4
    if strict < needed:
        return f"aligned error smaller at only {strict} of {len(pairs)} levels"
    return None


def _converge(cfg: RunConfig, out_dir: Path) -> int:
    tables = [run_convergence(cfg, alignment) for alignment in Alignment]
    aligned, misaligned = tables
    lines = []
    for table in tables:
        if _write_requested(cfg, "csv"):
            write_convergence(table, out_dir)
        lines.append(f"convergence ({table.alignment.value}) at x = {table.x:.12g}")
        lines.extend(f"  M = N = {row.N}: error {row.error:.6g}" for row in table.rows)

    _, drift = build_problem(cfg)
    failure = compare_alignments(aligned, misaligned, bool(drift.interior_breakpoints))
    verdict = "pass" if failure is None else f"FAIL: {failure}"
    lines.append(f"aligned vs misaligned: {verdict}")
    if _write_requested(cfg, "txt"):
        write_summary(lines, out_dir)
    return EXIT_OK if failure is None else EXIT_FAILURE


def _verify(cfg: RunConfig, out_dir: Path) -> int:
    report = run_verify(cfg)
    if _write_requested(cfg, "csv"):
        write_verification(report, out_dir)
    if _write_requested(cfg, "txt"):
        write_summary(verification_summary(report), out_dir)
    return EXIT_OK if report.passed else EXIT_FAILURE


COMMANDS: dict[str, Callable[[RunConfig, Path], int]] = {
    "price": _price,
    "verify": _verify,
    "converge": _converge,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="discrete-asian",
        description="Price and verify discretely sampled Asian options on the reduced PDE.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("price", "price with every selected engine and compare"),
        ("verify", "run the regularity suites"),
        ("converge", "PDE convergence on aligned and misaligned time grids"),
    ):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True, type=Path, help="config file")
        sub.add_argument("--out", type=Path, help="output directory")
        sub.add_argument("--seed", type=int, help="Monte Carlo seed override")
        sub.add_argument("--workers", type=int, help="Monte Carlo worker threads")
        sub.add_argument(
            "--log-level",
            default="WARNING",
            choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        )
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = parse_config(args.config.read_text(encoding="utf-8"))
    mc_updates = {}
    if args.seed is not None:
        mc_updates["seed"] = args.seed
    if args.workers is not None:
        mc_updates["workers"] = args.workers
    engines = cfg.engines
    if mc_updates:
        mc = MonteCarloSettings.model_validate({**engines.mc.model_dump(), **mc_updates})
        engines = engines.model_copy(update={"mc": mc})
    report = cfg.report
    if args.out is not None:
        report = report.model_copy(update={"out": str(args.out)})
    return cfg.model_copy(update={"engines": engines, "report": report})


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=args.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        cfg = load_config(args)
    except ConfigError as exc:
        _log_exception(exc)
        for issue in exc.issues:
            print(f"config error: {issue}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return COMMANDS[args.command](cfg, Path(cfg.report.out))
    except ConfigError as exc:
        _log_exception(exc)
        for issue in exc.issues:
            print(f"config error: {issue}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, MeasureError, EngineUnavailableError) as exc:
        _log_exception(exc)
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except AsianPricingException as exc:
        _log_exception(exc)
        print(str(exc), file=sys.stderr)
        return EXIT_FAILURE
