"""Exact rational parsing and formatting shared across the package.

Every number in the pipeline is a `fractions.Fraction`; decimal surface
syntax is converted exactly (power-of-ten denominators), never through a
float.
"""

from __future__ import annotations

from fractions import Fraction


def parse_rational(text: str | int | Fraction) -> Fraction:
    """Parse "7/2", "1.5" or "-3" into an exact Fraction.

    Floats are rejected: they carry binary rounding from upstream and would
    poison the exact pipeline.
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, bool):
        raise ValueError(f"not a rational: {text!r}")
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        raise ValueError(f"inexact float rejected: {text!r}; pass a string like '3/2'")
    return Fraction(str(text).strip())


def format_rational(value: Fraction | int) -> str:
    """Canonical text form: "p/q" for non-integers, plain "p" otherwise."""
    q = Fraction(value)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"
