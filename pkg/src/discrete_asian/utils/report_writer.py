import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import pandas as pd

from discrete_asian.schema.reports import (
    ConvergenceTable,
    PriceReport,
    VerificationReport,
)

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"

PRICE_COLUMNS = ["kind", "engine", "other", "value", "std_error", "tolerance", "status"]
BOUND_COLUMNS = [
    "engine",
    "t",
    "x",
    "v",
    "std_error",
    "bound_derivation",
    "bound_printed",
    "violates_derivation",
    "violates_printed",
    "margin_derivation",
    "margin_printed",
]
DECAY_COLUMNS = ["engine", "t0", "x0", "r", "scaled_vx", "scaled_vxx", "abs_vt", "total"]
CONVERGENCE_COLUMNS = ["alignment", "x", "N", "M", "value", "reference", "error"]
VANISHING_COLUMNS = ["engine", "n_samples", "tolerance", "violations", "max_abs_value"]
TAIL_COLUMNS = ["alpha", "lhs", "rhs", "ratio"]


def write_csv(rows: Sequence[dict[str, Any]], columns: list[str], path: Path) -> Path:
    """Write rows with a fixed header; numbers carry 12 significant digits."""
    frame = pd.DataFrame(list(rows), columns=columns)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote %d rows to %s", len(frame), path)
    return path


def write_summary(lines: Sequence[str], out_dir: Path) -> Path:
    path = out_dir / "summary.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def price_rows(report: PriceReport) -> list[dict[str, Any]]:
    rows: list[dict[str, Any]] = []
    for price in report.prices:
        if price.error is None:
            status = "ok"
        else:
            status = "skipped" if price.skipped else "error"
        rows.append(
            {
                "kind": "price",
                "engine": price.engine.value,
                "other": "",
                "value": price.value,
                "std_error": price.std_error,
                "tolerance": None,
                "status": status,
            }
        )
    for pair in report.disagreements:
        rows.append(
            {
                "kind": "disagreement",
                "engine": pair.engine.value,
                "other": pair.other.value,
                "value": pair.difference,
                "std_error": None,
                "tolerance": pair.tolerance,
                "status": "agree" if pair.agree else "disagree",
            }
        )
    if report.split_time is not None:
        rows.append(
            {
                "kind": "split_time",
                "engine": "",
                "other": "",
                "value": report.split_time,
                "std_error": None,
                "tolerance": None,
                "status": "warning",
            }
        )
    return rows


def price_summary(report: PriceReport) -> list[str]:
    lines = [f"price at t = {report.t:.12g}, x = {report.x:.12g}"]
    for price in report.prices:
        if price.error is not None:
            lines.append(f"  {price.engine.value}: {price.error}")
        else:
            lines.append(
                f"  {price.engine.value}: {price.value:.12g}"
                f" (se {price.std_error:.3g}, {price.seconds:.3f} s)"
            )
    for pair in report.disagreements:
        verdict = "agree" if pair.agree else "DISAGREE"
        lines.append(
            f"  {pair.engine.value} - {pair.other.value} = {pair.difference:.3g}"
            f" (tolerance {pair.tolerance:.3g}): {verdict}"
        )
    lines.extend(f"warning: {warning}" for warning in report.warnings)
    return lines


def write_price_report(report: PriceReport, out_dir: Path) -> Path:
    return write_csv(price_rows(report), PRICE_COLUMNS, out_dir / "price.csv")


def convergence_rows(table: ConvergenceTable) -> list[dict[str, Any]]:
    return [
        {
            "alignment": table.alignment.value,
            "x": table.x,
            "N": row.N,
            "M": row.M,
            "value": row.value,
            "reference": row.reference,
            "error": row.error,
        }
        for row in table.rows
    ]


def write_convergence(table: ConvergenceTable, out_dir: Path) -> Path:
    name = f"convergence_{table.alignment.value}.csv"
    return write_csv(convergence_rows(table), CONVERGENCE_COLUMNS, out_dir / name)


def write_verification(report: VerificationReport, out_dir: Path) -> list[Path]:
    bound_rows = [
        {"engine": bound.engine, **sample.model_dump()}
        for bound in report.bounds
        for sample in bound.samples
    ]
    decay_rows = [
        {"engine": profile.engine, "t0": profile.t0, **row.model_dump(), "total": row.total}
        for profile in report.decay
        for row in profile.rows
    ]
    tail_rows = (
        [
            {"alpha": row.alpha, "lhs": row.lhs, "rhs": row.rhs, "ratio": row.ratio}
            for row in report.gaussian_tail.rows
        ]
        if report.gaussian_tail
        else []
    )
    return [
        write_csv(bound_rows, BOUND_COLUMNS, out_dir / "bound_report.csv"),
        write_csv(decay_rows, DECAY_COLUMNS, out_dir / "decay_profile.csv"),
        write_csv(
            [item.model_dump() for item in report.vanishing],
            VANISHING_COLUMNS,
            out_dir / "vanishing_region.csv",
        ),
        write_csv(tail_rows, TAIL_COLUMNS, out_dir / "gaussian_tail.csv"),
    ]


def verification_summary(report: VerificationReport) -> list[str]:
    lines = ["verification suites"]
    for suite in report.suites:
        status = "pass" if suite.passed else "FAIL"
        gate = "" if suite.gated else " (reported, not gated)"
        detail = f": {suite.detail}" if suite.detail else ""
        lines.append(f"  {suite.name}: {status}{gate}{detail}")
    for bound in report.bounds:
        if bound.tolerance_widened:
            lines.append(
                f"  note: {bound.engine} tolerance widened to"
                f" {bound.tolerance_se:g} standard errors (few paths)"
            )
    if report.decay_fit is not None:
        lines.append(f"  fitted decay constant N = {report.decay_fit.N:.6g}")
    lines.append("overall: " + ("pass" if report.passed else "FAIL"))
    return lines
