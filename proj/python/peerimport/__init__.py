"""Peer effects in firm import decisions on production networks."""

from ._core import (
    __version__,
    demean,
    estimate,
    montecarlo,
    presets,
    report,
    second_order_exclusive,
    simulate,
    specs,
)

__all__ = [
    "demean",
    "estimate",
    "montecarlo",
    "presets",
    "report",
    "second_order_exclusive",
    "simulate",
    "specs",
]
