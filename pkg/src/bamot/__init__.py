"""Robust price bounds for exotic options when vanilla options trade with bid-ask spreads."""

__version__ = "0.1.0"

from .closedform import one_sided_digital
from .lp.hedging import ArbitrageError, HedgeConfig, PriceBound, subhedge, superhedge
from .measures import DiscreteMeasure, MixtureMarginal, convex_order_leq, discretize
from .metrics import bid_ask_distance, directed_distance, wasserstein1
from .payoffs import parse as parse_payoff

__all__ = [
    "ArbitrageError",
    "DiscreteMeasure",
    "HedgeConfig",
    "MixtureMarginal",
    "PriceBound",
    "bid_ask_distance",
    "convex_order_leq",
    "directed_distance",
    "discretize",
    "one_sided_digital",
    "parse_payoff",
    "subhedge",
    "superhedge",
    "wasserstein1",
]
