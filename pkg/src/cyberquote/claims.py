"""Post-incident loss adjustment and claim settlement.

After an incident the adjuster re-assesses the insured's practices. The
adjusted loss L' uses the same loss form as pricing, with the adjuster's
practice score in place of the underwriter's, so weaker observed compliance
raises the loss estimate and stronger compliance lowers it.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from decimal import Decimal
from typing import Sequence

from .errors import Diagnostic, FormatError
from .maturity import AssessmentWarning, MuRecord
from .money import to_money
from .org import Layer
from .pricing import LayerEconomics, Scenario, layer_loss


@dataclass(frozen=True)
class Claim:
    layer: Layer
    claimed_amount: float
    observed_delta_c: float
    observed_delta_s: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer", Layer.parse(self.layer))
        if self.claimed_amount < 0:
            raise ValueError(f"claimed_amount must be >= 0, got {self.claimed_amount}")
        for name in ("observed_delta_c", "observed_delta_s"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0,1], got {getattr(self, name)}")

    @property
    def scenario(self) -> Scenario:
        return Scenario(self.observed_delta_c, self.observed_delta_s)


@dataclass(frozen=True)
class Settlement:
    layer: Layer
    claimed: Decimal
    priced_loss: Decimal
    adjusted_loss: Decimal
    payout: Decimal
    ratio: float
    limit: Decimal
    warnings: tuple[Diagnostic, ...] = ()

    def to_dict(self) -> dict:
        return {
            "layer": int(self.layer),
            "claimed": float(self.claimed),
            "priced_loss": float(self.priced_loss),
            "adjusted_loss": float(self.adjusted_loss),
            "payout": float(self.payout),
            "ratio": self.ratio,
            "limit": float(self.limit),
        }


def adjust_losses(mu_prime: MuRecord, econ: LayerEconomics, claim: Claim) -> Decimal:
    """Adjusted loss L' for the claim's observed degradation under ``mu_prime``."""
    return layer_loss(econ, mu_prime, claim.scenario)


def settlement_ratio(adjusted: Decimal | float, priced: Decimal | float) -> float:
    """L' / L, unclamped.

    Raises:
        ZeroDivisionError: when ``priced`` is zero.
    """
    if priced == 0:
        raise ZeroDivisionError("settlement ratio undefined for a zero priced loss")
    return float(Decimal(str(adjusted)) / Decimal(str(priced)))


def settle(
    claim: Claim,
    adjusted: Decimal | float,
    mu: MuRecord,
    econ: LayerEconomics,
    priced: Decimal | float | None = None,
) -> Settlement:
    """Pay min(claimed, adjusted, m * kappa), never below zero.

    ``priced`` is the loss the underwriter would have assigned to the same
    observed degradation; by default it is recomputed from ``mu``. When it is
    zero the ratio is reported as 1 and a warning is attached.
    """
    adjusted = to_money(float(adjusted))
    priced_loss = layer_loss(econ, mu, claim.scenario) if priced is None else to_money(float(priced))
    limit = to_money(mu.m * econ.kappa)
    claimed = to_money(claim.claimed_amount)
    payout = max(Decimal("0.00"), min(claimed, adjusted, limit))
    notes: list[Diagnostic] = []
    if priced_loss == 0:
        ratio = 1.0
        notes.append(
            Diagnostic("warning", "zero-priced-loss", "priced loss is 0; ratio set to 1", f"layer {int(claim.layer)}")
        )
        warnings.warn("priced loss is 0; settlement ratio set to 1", AssessmentWarning, stacklevel=2)
    else:
        ratio = settlement_ratio(adjusted, priced_loss)
    return Settlement(claim.layer, claimed, priced_loss, adjusted, payout, ratio, limit, tuple(notes))


@dataclass(frozen=True)
class SettlementReport:
    settlements: tuple[Settlement, ...]

    @property
    def total_payout(self) -> Decimal:
        return sum((s.payout for s in self.settlements), Decimal("0.00"))

    @property
    def warnings(self) -> list[Diagnostic]:
        return [w for s in self.settlements for w in s.warnings]

    def to_dict(self) -> dict:
        return {
            "settlements": [s.to_dict() for s in self.settlements],
            "total_payout": float(self.total_payout),
            "warnings": [w.to_dict() for w in self.warnings],
        }

    def to_text(self) -> str:
        head = f"{'layer':<12}{'claimed':>14}{'priced':>14}{'adjusted':>14}{'payout':>14}{'ratio':>10}{'limit':>14}"
        rows = [head, "-" * len(head)]
        for s in self.settlements:
            rows.append(
                f"{s.layer.title:<12}{s.claimed:>14}{s.priced_loss:>14}{s.adjusted_loss:>14}"
                f"{s.payout:>14}{s.ratio:>10.6f}{s.limit:>14}"
            )
        rows.append("-" * len(head))
        rows.append(f"total payout: {self.total_payout}")
        rows.extend(str(w) for w in self.warnings)
        return "\n".join(rows) + "\n"


def load_claims(text: str) -> list[Claim]:
    """Parse claim rows ``layer,claimed_amount,delta_c,delta_s`` (header optional)."""
    claims: list[Claim] = []
    lines = [ln for ln in text.replace("\r\n", "\n").split("\n") if ln.strip() and not ln.lstrip().startswith("#")]
    for lineno, row in enumerate(csv.reader(io.StringIO("\n".join(lines))), start=1):
        row = [c.strip() for c in row]
        if lineno == 1 and row and row[0].lower() == "layer":
            continue
        if len(row) != 4:
            raise FormatError(f"claims row {lineno}: expected 4 columns, got {len(row)}")
        try:
            claims.append(Claim(Layer.parse(row[0]), float(row[1]), float(row[2]), float(row[3])))
        except ValueError as exc:
            raise FormatError(f"claims row {lineno}: {exc}") from None
    if not claims:
        raise FormatError("claims file has no rows")
    return claims


def settle_all(
    claims: Sequence[Claim],
    economics: dict[Layer, LayerEconomics],
    underwriting: dict[Layer, MuRecord],
    adjuster: dict[Layer, MuRecord],
) -> SettlementReport:
    """Settle each claim; layers without an adjuster record reuse the underwriting one."""
    out = []
    for claim in claims:
        if claim.layer not in economics or claim.layer not in underwriting:
            raise FormatError(f"claim on layer {int(claim.layer)} has no economics or assessment")
        econ, mu = economics[claim.layer], underwriting[claim.layer]
        adjusted = adjust_losses(adjuster.get(claim.layer, mu), econ, claim)
        out.append(settle(claim, adjusted, mu, econ))
    return SettlementReport(tuple(out))
