"""Bounded tolerance functions used by the benchmark-style rewards."""

from __future__ import annotations

import numpy as np

from horizon_bench.errors import ContractViolation


def tolerance(x, bounds=(0.0, 0.0), margin: float = 0.0, sigmoid: str = "gaussian", value_at_margin: float = 0.1):
    """1 inside ``bounds``; outside, a sigmoid of the distance that equals
    ``value_at_margin`` one ``margin`` away from the nearest bound."""
    lower, upper = bounds
    if lower > upper:
        raise ContractViolation("lower bound exceeds upper bound")
    if margin < 0:
        raise ContractViolation("margin must be non-negative")
    x = np.asarray(x, dtype=float)
    in_bounds = (lower <= x) & (x <= upper)
    if margin == 0:
        return np.where(in_bounds, 1.0, 0.0)
    d = np.where(x < lower, lower - x, x - upper) / margin
    if sigmoid == "gaussian":
        if not 0 < value_at_margin < 1:
            raise ContractViolation("gaussian tolerance needs 0 < value_at_margin < 1")
        scale = np.sqrt(-2.0 * np.log(value_at_margin))
        value = np.exp(-0.5 * (d * scale) ** 2)
    elif sigmoid == "quadratic":
        if not 0 <= value_at_margin < 1:
            raise ContractViolation("quadratic tolerance needs 0 <= value_at_margin < 1")
        scaled = d * np.sqrt(1.0 - value_at_margin)
        value = np.where(np.abs(scaled) < 1.0, 1.0 - scaled**2, 0.0)
    else:
        raise ContractViolation(f"unknown sigmoid {sigmoid!r}")
    return np.where(in_bounds, 1.0, value)


def small_control(u, limits):
    """In [0.8, 1]; 1 at zero actuation, falling quadratically toward the limits."""
    frac = np.asarray(u, float) / np.asarray(limits, float)
    per_channel = tolerance(frac, (0.0, 0.0), 1.0, "quadratic", 0.0)
    return (4.0 + per_channel.mean(axis=-1)) / 5.0
