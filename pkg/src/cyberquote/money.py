"""Fixed-point money: two-decimal ``Decimal`` values, half-even rounding."""

from __future__ import annotations

from decimal import ROUND_HALF_EVEN, Decimal, localcontext

CENT = Decimal("0.01")


def to_cents(x: float) -> int:
    """Round a float amount to integer minor units, half-even."""
    # round() on x*100 matches numpy.rint, so scalar and vectorized paths agree
    return int(round(x * 100.0))


def from_cents(cents: int) -> Decimal:
    return Decimal(int(cents)).scaleb(-2)


def to_money(x: float) -> Decimal:
    return from_cents(to_cents(x))


def quantize(d: Decimal) -> Decimal:
    return d.quantize(CENT, rounding=ROUND_HALF_EVEN)


def weighted_cents_sum(cents, weights) -> Decimal:
    """Exact sum of weight*cents/100, rounded half-even once at the end.

    Amounts sharing a weight are summed as integers first, so equally
    weighted sets cost one Decimal product.
    """
    by_weight: dict[float, int] = {}
    for c, w in zip(cents, weights):
        by_weight[w] = by_weight.get(w, 0) + int(c)
    with localcontext() as ctx:
        ctx.prec = 120
        total = sum((Decimal(w) * Decimal(c) for w, c in by_weight.items()), Decimal(0))
        return quantize(total.scaleb(-2))

