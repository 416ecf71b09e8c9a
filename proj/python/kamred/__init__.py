"""Quantitative KAM reducibility of quasi-periodic SL(2,R) cocycles."""

from ._core import (
    Cocycle,
    FourierMap,
    Frequency,
    KamredError,
    Potential,
    counting_ids,
    diophantine_check,
    ids,
    is_uniformly_hyperbolic,
    lyapunov_exponent,
    reduce,
    rotation_number,
    schrodinger_cocycle,
    smooth_approximate,
    transport,
)

__all__ = [
    "Cocycle",
    "FourierMap",
    "Frequency",
    "KamredError",
    "Potential",
    "counting_ids",
    "diophantine_check",
    "ids",
    "is_uniformly_hyperbolic",
    "lyapunov_exponent",
    "reduce",
    "rotation_number",
    "schrodinger_cocycle",
    "smooth_approximate",
    "transport",
]
