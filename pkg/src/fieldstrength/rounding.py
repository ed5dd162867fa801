"""Exact half-up rounding of ratios for display."""

from __future__ import annotations

from decimal import Decimal
from fractions import Fraction


def round_half_up(value: Fraction | int | float, digits: int = 1) -> Decimal:
    """Round ``value`` half-up at ``digits`` decimals using exact rational arithmetic."""
    value = Fraction(value)
    scaled = value * 10**digits
    sign = -1 if scaled < 0 else 1
    scaled = abs(scaled)
    whole, rem = divmod(scaled.numerator, scaled.denominator)
    if 2 * rem >= scaled.denominator:
        whole += 1
    return Decimal(sign * whole).scaleb(-digits)


def format_pct(numerator: int, denominator: int, digits: int = 1) -> str:
    """Percentage ``100 * numerator / denominator`` at ``digits`` decimals, half-up."""
    if denominator <= 0:
        raise ValueError("denominator must be positive")
    return str(round_half_up(Fraction(100 * numerator, denominator), digits))
