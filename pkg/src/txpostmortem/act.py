"""Semantics of anyone-can-take (ACT) opportunities.

An incident is ACT when a permissionless adversary, playing by standard
transaction-submission rules, either extracts strictly positive value in a
reference asset after fees, or deterministically violates a stated safety
or liveness property.  All value arithmetic is exact integer math in base
units; nothing here rounds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union

from .domain import Address, TokenAmount
from .gateway.types import TxRecord

logger = logging.getLogger(__name__)


class ActError(Exception):
    pass


class ValuationError(ActError):
    """A holding could not be priced in the reference asset."""


class InsufficientEvidence(ActError):
    """A predicate references an observation that was never measured."""


@dataclass(frozen=True)
class ProfitAssessment:
    """Outcome of the monetary predicate: value_after - value_before - fees > 0."""

    value_before: TokenAmount
    value_after: TokenAmount
    fees: TokenAmount
    margin: TokenAmount
    satisfied: bool

    def to_doc(self) -> dict:
        return {
            "reference_asset": str(self.margin.asset),
            "value_before": self.value_before.raw,
            "value_after": self.value_after.raw,
            "fees": self.fees.raw,
            "margin": self.margin.raw,
            "decimals": self.margin.decimals,
            "satisfied": self.satisfied,
        }


@dataclass(frozen=True)
class SafetyPredicate:
    """Deterministic non-monetary violation check over named observations."""

    predicate_id: str
    description: str
    kind: str  # "safety" | "liveness"
    lhs: str
    comparator: str  # eq | gt | lt | ge | le
    rhs: Union[int, bool, str]


@dataclass(frozen=True)
class FeasibilityCheck:
    """Standard-submission feasibility: what the adversary must NOT need."""

    standard_submission: bool
    reasons: tuple[str, ...] = ()

    def to_doc(self) -> dict:
        return {
            "standard_submission": self.standard_submission,
            "reasons": list(self.reasons),
        }


@dataclass(frozen=True)
class ActAssessment:
    is_act: bool
    profit: Optional[ProfitAssessment]
    nonmonetary_violations: tuple[str, ...]
    feasibility: FeasibilityCheck

    def to_doc(self) -> dict:
        return {
            "is_act": self.is_act,
            "profit": self.profit.to_doc() if self.profit else None,
            "nonmonetary_violations": list(self.nonmonetary_violations),
            "feasibility": self.feasibility.to_doc(),
        }


def compute_fees(
    records: Iterable[TxRecord],
    payers: Iterable[Address],
    decimals: int = 18,
    asset: str = "native",
) -> TokenAmount:
    """Total gas spend (gas_used * effective price) by the payer set."""
    payer_set = set(payers)
    total = 0
    for record in records:
        if record.from_address in payer_set:
            total += record.gas_used * record.effective_gas_price
    return TokenAmount(total, decimals, asset)


#: Price of one base unit of an asset, in reference-asset base units.
PriceMap = Mapping[str, Fraction]


def value_portfolio(
    holdings: Iterable[TokenAmount],
    prices: PriceMap,
    reference_asset: str = "native",
    reference_decimals: int = 18,
) -> TokenAmount:
    """Value holdings in the reference asset with exact rational arithmetic.

    The final amount floors to an integer base-unit count; the reference
    asset itself always prices at 1.
    """
    total = Fraction(0)
    for holding in holdings:
        key = str(holding.asset)
        if key == reference_asset:
            price = Fraction(1)
        else:
            try:
                price = prices[key]
            except KeyError:
                raise ValuationError(f"no price for asset {key}") from None
        total += Fraction(holding.raw) * price
    return TokenAmount(int(total), reference_decimals, reference_asset)


def evaluate_profit_predicate(
    value_before: TokenAmount,
    value_after: TokenAmount,
    fees: TokenAmount,
) -> ProfitAssessment:
    """Strict monetary predicate; a zero margin does not qualify."""
    margin = value_after - value_before - fees
    return ProfitAssessment(
        value_before=value_before,
        value_after=value_after,
        fees=fees,
        margin=margin,
        satisfied=margin.raw > 0,
    )


_COMPARATORS = {
    "eq": lambda a, b: a == b,
    "gt": lambda a, b: a > b,
    "lt": lambda a, b: a < b,
    "ge": lambda a, b: a >= b,
    "le": lambda a, b: a <= b,
}


def evaluate_nonmonetary(
    predicate: SafetyPredicate,
    observations: Mapping[str, Union[int, bool, str]],
) -> bool:
    """Evaluate one safety/liveness predicate against measured observations."""
    if predicate.lhs not in observations:
        raise InsufficientEvidence(
            f"predicate {predicate.predicate_id} needs observation {predicate.lhs!r}"
        )
    measured = observations[predicate.lhs]
    expected = predicate.rhs
    if isinstance(expected, str) and expected in observations:
        expected = observations[expected]
    try:
        op = _COMPARATORS[predicate.comparator]
    except KeyError:
        raise ActError(f"unknown comparator {predicate.comparator!r}") from None
    try:
        return bool(op(measured, expected))
    except TypeError as exc:
        raise InsufficientEvidence(
            f"predicate {predicate.predicate_id}: incomparable values "
            f"{measured!r} vs {expected!r}"
        ) from exc


def check_feasibility(
    uses_victim_keys: bool = False,
    needs_privileged_role: bool = False,
    breaks_cryptography: bool = False,
) -> FeasibilityCheck:
    reasons = []
    if uses_victim_keys:
        reasons.append("requires victim private keys")
    if needs_privileged_role:
        reasons.append("requires a privileged protocol role")
    if breaks_cryptography:
        reasons.append("requires breaking cryptographic assumptions")
    return FeasibilityCheck(standard_submission=not reasons, reasons=tuple(reasons))


def classify_act(
    profit: Optional[ProfitAssessment],
    nonmonetary: Mapping[str, bool] | None,
    feasibility: FeasibilityCheck,
) -> ActAssessment:
    """Combine predicate outcomes: ACT needs feasibility and one satisfied route."""
    violations = tuple(
        sorted(name for name, violated in (nonmonetary or {}).items() if violated)
    )
    monetary_ok = bool(profit and profit.satisfied)
    is_act = feasibility.standard_submission and (monetary_ok or bool(violations))
    return ActAssessment(
        is_act=is_act,
        profit=profit,
        nonmonetary_violations=violations,
        feasibility=feasibility,
    )
