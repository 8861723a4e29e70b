"""Reference marginals used by the examples, the CLI defaults and the tests."""

from __future__ import annotations

import numpy as np

from .measures import MixtureMarginal

# SPX 2025-07-18 expiry, quoted 2025-02-27: (mean, bid vol, ask vol, weight)
SPX_COMPONENTS = (
    (6250.0, 0.04008, 0.04009, 0.09591),
    (6098.0, 0.07222, 0.07408, 0.5814),
    (5531.0, 0.1293, 0.1360, 0.2741),
    (4116.0, 0.3150, 0.3198, 0.04852),
)
SPX_SPOT = 5861.0
SPX_DIGITAL_STRIKE = 6154.05  # 1.05 * spot


def spx_marginals() -> tuple[MixtureMarginal, MixtureMarginal]:
    """(bid, ask) mixtures; the published weights sum to 0.99993 and are renormalised."""
    bid = MixtureMarginal.from_components([(z, sb, w) for z, sb, _, w in SPX_COMPONENTS], normalize=True,
                                          maturity="2025-07-18")
    ask = MixtureMarginal.from_components([(z, sa, w) for z, _, sa, w in SPX_COMPONENTS], normalize=True,
                                          maturity="2025-07-18")
    return bid, ask


def bs_pair(x0: float, vol_bid: float, vol_ask: float, maturity: float) -> tuple[MixtureMarginal, MixtureMarginal]:
    return (MixtureMarginal.lognormal(x0, vol_bid, maturity), MixtureMarginal.lognormal(x0, vol_ask, maturity))


def convergence_marginals() -> tuple[MixtureMarginal, MixtureMarginal]:
    """One-year Black-Scholes marginals, bid vol 15%, ask vol 20%, spot 1."""
    return bs_pair(1.0, 0.15, 0.20, 1.0)


FORWARD_START_SPOT = 100.0
FORWARD_START_STRIKES = np.arange(60.0, 140.0 + 1e-9, 5.0)
FORWARD_START_KS = np.round(np.arange(0.8, 1.2 + 1e-9, 0.05), 10)


def forward_start_marginals(x0: float = FORWARD_START_SPOT):
    """((bid1, bid2), (ask1, ask2)): T1 = 0.5 with vols 19/20%, T2 = 1 with vols 17/18%."""
    b1, a1 = bs_pair(x0, 0.19, 0.20, 0.5)
    b2, a2 = bs_pair(x0, 0.17, 0.18, 1.0)
    return (b1, b2), (a1, a2)


def example_one_sided() -> MixtureMarginal:
    """Black-Scholes ask marginal with 20% vol over one month, spot 1."""
    return MixtureMarginal.lognormal(1.0, 0.2, 1.0 / 12.0)
