"""Decibel / linear conversions, kept in one place to avoid factor-of-10 drift."""

from __future__ import annotations


def db_to_linear(db: float) -> float:
    """Power ratio for a dB value: 10**(db/10)."""
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    """dB value of a linear power ratio."""
    import math

    return 10.0 * math.log10(x)


def dbm_to_watts(dbm: float) -> float:
    """Absolute power in W for a dBm value."""
    return 10.0 ** ((dbm - 30.0) / 10.0)
