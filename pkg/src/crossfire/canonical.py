"""Canonical JSON encoding, 64-bit structural hashing, and display rounding.

Every on-disk artifact uses one canonical JSON form (object keys sorted
ascending by code point, no insignificant whitespace, UTF-8), so byte
equality of two files is equivalent to semantic equality of their payloads.
"""

from __future__ import annotations

import json
from decimal import Decimal, ROUND_HALF_UP, localcontext
from fractions import Fraction
from typing import Any

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def dumps_canonical(payload: Any) -> str:
    """Render a JSON-able payload in canonical form."""
    return json.dumps(
        payload,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    )


def canonical_bytes(payload: Any) -> bytes:
    return dumps_canonical(payload).encode("utf-8")


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a over a byte sequence."""
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def canonical_value(value: Any) -> tuple[str, str]:
    """Render a runtime value as a (type name, canonical string) pair.

    Rules: booleans "true"/"false" (checked before int; bool is an int
    subtype), integers base-10, floats as the shortest round-trip decimal,
    strings JSON-escaped including quotes.
    """
    if isinstance(value, bool):
        return "bool", "true" if value else "false"
    if isinstance(value, int):
        return "int", str(value)
    if isinstance(value, float):
        return "float", repr(value)
    if isinstance(value, str):
        return "str", json.dumps(value, ensure_ascii=False)
    raise TypeError(f"no canonical form for {type(value).__name__}")


def round_half_up(ratio: Fraction | int, places: int) -> Decimal:
    """Exact rational -> Decimal rounded half-up to `places` decimals.

    Rounding happens only here, at display time; all arithmetic upstream
    stays rational.
    """
    frac = Fraction(ratio)
    with localcontext() as ctx:
        ctx.prec = 50
        dec = Decimal(frac.numerator) / Decimal(frac.denominator)
        quantum = Decimal(1).scaleb(-places)
        return dec.quantize(quantum, rounding=ROUND_HALF_UP)


def fmt_mean(ratio: Fraction | int) -> str:
    """One-decimal display of a mean, e.g. Fraction(27) -> "27.0"."""
    return str(round_half_up(ratio, 1))


def fmt_factor(covered: int, units: Fraction | int) -> str:
    """Crossfire-factor display: covered mutants per selected unit, one decimal."""
    units = Fraction(units)
    if units == 0:
        return "0.0"
    return str(round_half_up(Fraction(covered) / units, 1))


def fmt_percent(numerator: int, denominator: int) -> str:
    """Integer-percent display, e.g. (36, 60) -> "60%"."""
    if denominator == 0:
        return "0%"
    return f"{round_half_up(Fraction(100 * numerator, denominator), 0)}%"


def fraction_payload(ratio: Fraction) -> dict[str, int]:
    """JSON shape for an exact rational."""
    return {"den": ratio.denominator, "num": ratio.numerator}
