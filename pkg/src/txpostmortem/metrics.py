"""Token, cost, outcome-rate, checklist, and latency accounting.

Monetary arithmetic is exact: prices are decimals, accumulation happens in
rationals, and rounding is applied only at display time.  Rates are returned
as rationals (or None when the denominator is zero) with explicit helpers
for fixed-precision percent rendering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from .agents import InvalidUsage, Usage


class MetricsError(Exception):
    pass


# --------------------------------------------------------------------------
# Token accounting and cost.


@dataclass(frozen=True)
class PriceTable:
    """Per-million-token USD rates."""

    uncached_input: Decimal = Decimal("1.25")
    cached_input: Decimal = Decimal("0.125")
    output: Decimal = Decimal("10.00")

    def __post_init__(self) -> None:
        for name in ("uncached_input", "cached_input", "output"):
            if getattr(self, name) < 0:
                raise MetricsError(f"price {name} must be non-negative")


DEFAULT_PRICES = PriceTable()


def token_accounting(usage: Usage) -> dict[str, int]:
    """Split input into uncached and cached: uncached = input - cached."""
    if usage.cached_input_tokens > usage.input_tokens:
        raise InvalidUsage("cached input exceeds total input")
    return {
        "uncached": usage.uncached_input_tokens,
        "cached": usage.cached_input_tokens,
        "output": usage.output_tokens,
    }


def estimate_cost(usage: Usage, prices: PriceTable = DEFAULT_PRICES) -> Decimal:
    """Exact session cost: (p_u*T_u + p_c*T_c + p_o*T_o) / 1e6."""
    total = (
        Fraction(prices.uncached_input) * usage.uncached_input_tokens
        + Fraction(prices.cached_input) * usage.cached_input_tokens
        + Fraction(prices.output) * usage.output_tokens
    ) / 1_000_000
    with localcontext() as ctx:
        ctx.prec = 60
        return Decimal(total.numerator) / Decimal(total.denominator)


def display_usd(cost: Decimal) -> str:
    """Render a cost to 4 decimal places; the only rounding point."""
    return str(cost.quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP))


# --------------------------------------------------------------------------
# Outcome rates.


@dataclass(frozen=True)
class OutcomeTally:
    """Root-cause outcome counts plus reproduction outcomes.

    aligned/misaligned/missed/not_act mirror the AL/MA/MS/NA labels; the
    reproduction counts cover only incidents the pipeline took to the PoC
    stage, with invalid marking upstream misalignment or misses.
    """

    aligned: int = 0
    misaligned: int = 0
    missed: int = 0
    not_act: int = 0
    poc_correct: int = 0
    poc_failed: int = 0
    poc_invalid: int = 0

    def __post_init__(self) -> None:
        for name in (
            "aligned",
            "misaligned",
            "missed",
            "not_act",
            "poc_correct",
            "poc_failed",
            "poc_invalid",
        ):
            if getattr(self, name) < 0:
                raise MetricsError(f"count {name} must be non-negative")

    def validate(self) -> list[str]:
        errors = []
        if self.poc_invalid != self.misaligned + self.missed + self.not_act:
            errors.append(
                "invalid reproductions must equal the misaligned+missed+not_act total"
            )
        return errors


def outcome_rates(tally: OutcomeTally) -> dict[str, Optional[Fraction]]:
    """Misalignment, miss, and reproduction rates; None when undefined."""

    def rate(num: int, den: int) -> Optional[Fraction]:
        return Fraction(num, den) if den > 0 else None

    act_total = tally.aligned + tally.misaligned + tally.missed
    return {
        "misalignment_rate": rate(tally.misaligned, tally.aligned + tally.misaligned),
        "miss_rate": rate(tally.missed, tally.aligned + tally.missed),
        "reproduction_rate": rate(tally.poc_correct, act_total),
    }


def as_percent(rate: Optional[Fraction], digits: int = 2) -> Optional[Decimal]:
    if rate is None:
        return None
    quantum = Decimal(1).scaleb(-digits)
    with localcontext() as ctx:
        ctx.prec = 60
        value = Decimal(rate.numerator) * 100 / Decimal(rate.denominator)
    return value.quantize(quantum, rounding=ROUND_HALF_UP)


# --------------------------------------------------------------------------
# Checklist aggregation over incident comparison rows.

CHECKLIST_METRICS = ("c1", "c2", "c3", "q1", "q2", "q3", "q4", "q5", "q6")
SYSTEMS = ("pipeline", "baseline")


def aligned_rows(rows: Iterable[Mapping[str, Any]]) -> list[Mapping[str, Any]]:
    """Rows where an opportunity was identified and the root cause aligned."""
    return [r for r in rows if r.get("act") is True and r.get("rc") is True]


def checklist_pass_counts(
    rows: Iterable[Mapping[str, Any]],
    systems: Sequence[str] = SYSTEMS,
    metrics: Sequence[str] = CHECKLIST_METRICS,
) -> dict[str, dict[str, dict[str, int]]]:
    """Per-system, per-metric pass counts over the aligned subset.

    Cells are True/False/None; None (unscored) cells are excluded from the
    pass count but the comparison denominator is the aligned subset size.
    """
    subset = aligned_rows(rows)
    counts: dict[str, dict[str, dict[str, int]]] = {}
    for system in systems:
        counts[system] = {}
        for metric in metrics:
            cells = [row.get(f"{system}_{metric}") for row in subset]
            counts[system][metric] = {
                "passes": sum(1 for c in cells if c is True),
                "scored": sum(1 for c in cells if c is not None),
                "denominator": len(subset),
            }
    return counts


def pass_rate(
    counts: Mapping[str, Mapping[str, Mapping[str, int]]], system: str, metric: str
) -> Optional[Fraction]:
    cell = counts[system][metric]
    if cell["denominator"] == 0:
        return None
    return Fraction(cell["passes"], cell["denominator"])


def pass_rate_lift(
    counts: Mapping[str, Mapping[str, Mapping[str, int]]],
    metric: str,
    better: str = "pipeline",
    worse: str = "baseline",
    digits: int = 1,
) -> Optional[Decimal]:
    """Percentage-point lift of one system over another on a metric."""
    a = pass_rate(counts, better, metric)
    b = pass_rate(counts, worse, metric)
    if a is None or b is None:
        return None
    return as_percent(a - b, digits)


# --------------------------------------------------------------------------
# Latency summaries.


def percentile(values: Sequence[float], q: float) -> float:
    """Linear interpolation between closest ranks: pos = q * (n - 1)."""
    if not values:
        raise MetricsError("percentile of empty sequence")
    if not 0.0 <= q <= 1.0:
        raise MetricsError("quantile must be within [0, 1]")
    ordered = sorted(values)
    pos = q * (len(ordered) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(ordered) - 1)
    weight = pos - lo
    return ordered[lo] * (1.0 - weight) + ordered[hi] * weight


def latency_summary(durations: Sequence[float]) -> dict[str, float | int]:
    """Order statistics for a duration sample; empty input, empty summary."""
    if any(d < 0 for d in durations):
        raise MetricsError("durations must be non-negative")
    if not durations:
        return {"count": 0}
    return {
        "count": len(durations),
        "min": min(durations),
        "median": percentile(durations, 0.5),
        "q1": percentile(durations, 0.25),
        "q3": percentile(durations, 0.75),
        "p90": percentile(durations, 0.9),
        "p95": percentile(durations, 0.95),
        "max": max(durations),
    }


# --------------------------------------------------------------------------
# Session-summary aggregation.


def load_session_summaries(sessions_dir: str | Path) -> list[dict[str, Any]]:
    root = Path(sessions_dir)
    summaries = []
    for path in sorted(root.glob("*/session_summary.json")):
        summaries.append(json.loads(path.read_text(encoding="utf-8")))
    return summaries


def sessions_report(
    summaries: Sequence[Mapping[str, Any]], prices: PriceTable = DEFAULT_PRICES
) -> dict[str, Any]:
    """Aggregate usage, cost, and latency across finished sessions.

    Latency is summarized twice: per whole session and per stage, since
    either grain can be the unit of interest.
    """
    total_usage = Usage()
    per_session: list[dict[str, Any]] = []
    session_durations: list[float] = []
    stage_durations: dict[str, list[float]] = {}
    outcomes: dict[str, int] = {}
    fetched_total = 0
    for doc in summaries:
        usage = Usage.from_doc(doc["usage"])
        total_usage = total_usage + usage
        cost = estimate_cost(usage, prices)
        stage = doc.get("outcome", {}).get("stage", "unknown")
        outcomes[stage] = outcomes.get(stage, 0) + 1
        fetched_total += int(doc.get("fetched_items", 0))
        latencies = doc.get("latencies", {})
        if "session" in latencies:
            session_durations.append(float(latencies["session"]))
        for key, value in latencies.items():
            if key == "session":
                continue
            stage_durations.setdefault(key, []).append(float(value))
        per_session.append(
            {
                "session_id": doc.get("session_id"),
                "stage": stage,
                "cost_usd": display_usd(cost),
                "usage": usage.to_doc(),
            }
        )
    total_cost = estimate_cost(total_usage, prices)
    return {
        "sessions": len(per_session),
        "outcomes": outcomes,
        "usage_total": total_usage.to_doc(),
        "uncached_tokens": total_usage.uncached_input_tokens,
        "cost_usd_total": display_usd(total_cost) if per_session else "0.0000",
        "fetched_items_total": fetched_total,
        "latency_per_session": latency_summary(session_durations),
        "latency_per_stage": {
            key: latency_summary(values)
            for key, values in sorted(stage_durations.items())
        },
        "per_session": per_session,
    }
