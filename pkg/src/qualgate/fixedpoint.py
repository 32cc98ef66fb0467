"""Fixed-point decimal arithmetic shared by every module.

All quantities (thresholds, band percentages, deviation percentages) are
``decimal.Decimal`` values carrying at most 4 fractional digits.  Results of
arithmetic are quantized with round-half-even so boundary comparisons are
deterministic and reproducible across platforms.  Adverse deviations against
a zero threshold are represented by ``Decimal("Infinity")``.
"""

from __future__ import annotations

from decimal import Decimal, InvalidOperation

QUANTUM = Decimal("0.0001")

INFINITE = Decimal("Infinity")


class FixedPointError(ValueError):
    """Raised for values that are not representable at 4 fractional digits."""


def q4(value: Decimal) -> Decimal:
    """Quantize to 4 fractional digits, round-half-even.

    Infinite values pass through unchanged so deviation percentages against a
    zero threshold survive arithmetic helpers.
    """
    if value.is_infinite():
        return value
    return value.quantize(QUANTUM)


def parse_decimal(text: str | int | Decimal) -> Decimal:
    """Parse a decimal string, rejecting NaN and more than 4 fractional digits.

    Accepts "inf" / "Infinity" (any case, optional sign) for the infinite
    sentinel used by deviation percentages.
    """
    if isinstance(text, Decimal):
        value = text
    else:
        try:
            value = Decimal(str(text).strip())
        except InvalidOperation as exc:
            raise FixedPointError(f"not a decimal value: {text!r}") from exc
    if value.is_nan():
        raise FixedPointError(f"not a decimal value: {text!r}")
    if value.is_infinite():
        return value
    if -value.as_tuple().exponent > 4:
        raise FixedPointError(f"more than 4 fractional digits: {text!r}")
    return value


def format_decimal(value: Decimal) -> str:
    """Render a Decimal without exponent notation or trailing zeros.

    Infinite values render as "inf"; this is the wire form everywhere a
    deviation percentage may be unbounded.
    """
    if value.is_infinite():
        return "inf" if value > 0 else "-inf"
    text = format(value, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    if text in ("", "-0"):
        text = "0"
    return text
