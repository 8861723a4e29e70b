"""Parameter sweeps: convergence of the superhedging premium as spreads shrink,
and BAMOT versus MOT bounds for forward-start options."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lp.hedging import HedgeConfig, check_assumption, subhedge, superhedge
from .measures import DiscreteMeasure, Marginal, MixtureMarginal, deform, mid_marginal
from .metrics import bid_ask_distance
from .payoffs import Payoff, PayoffError, forward_start


def default_gammas(n: int = 14, smallest: float = 1e-3) -> np.ndarray:
    """``gamma`` with ``1 - gamma`` log-spaced from 1 down to ``smallest``."""
    return 1.0 - np.logspace(0.0, np.log10(smallest), n)


def exact_price(m: Marginal, h: Payoff) -> float:
    if isinstance(m, DiscreteMeasure):
        return float(np.dot(m.weights, h(m.atoms)))
    return m.expect(h, points=list(h.kinks()))


def loglog_slope(d: np.ndarray, premium: np.ndarray, n_smallest: int = 10) -> float:
    """Least-squares slope of log premium against log distance over the smallest distances."""
    d, premium = np.asarray(d, float), np.asarray(premium, float)
    ok = (d >= 1e-12) & (premium > 0)
    d, premium = d[ok], premium[ok]
    if d.size < 2:
        return float("nan")
    idx = np.argsort(d)[:n_smallest]
    return float(np.polyfit(np.log(d[idx]), np.log(premium[idx]), 1)[0])


@dataclass
class ConvergenceResult:
    gammas: np.ndarray
    distances: np.ndarray
    premiums: np.ndarray
    superhedges: np.ndarray
    mid_price: float
    slope: float
    bound_constant: float | None = None
    bound_kind: str | None = None  # linear | sqrt
    meta: dict = field(default_factory=dict)

    def bounds(self) -> np.ndarray | None:
        if self.bound_kind == "linear":
            return self.bound_constant * self.distances
        if self.bound_kind == "sqrt":
            return self.bound_constant * np.sqrt(self.distances)
        return None

    def bound_holds(self, slack: float = 0.0) -> np.ndarray | None:
        b = self.bounds()
        return None if b is None else self.premiums <= b + slack

    def rows(self):
        b = self.bounds()
        for i in range(self.gammas.size):
            yield (float(self.gammas[i]), float(self.distances[i]), float(self.premiums[i]),
                   None if b is None else float(b[i]))


def rate_bound(h: Payoff, mid: MixtureMarginal) -> tuple[float | None, str | None]:
    """Constant and form of the premium bound: ``C d`` for convex splits, ``C sqrt(d)`` for step payoffs."""
    try:
        la, lb = h.lipschitz_split()
        return la + lb, "linear"
    except PayoffError:
        pass
    try:
        v = h.total_variation()
    except PayoffError:
        return None, None
    return float(np.sqrt(2.0 * mid.max_density()) * v), "sqrt"


def convergence_sweep(h: Payoff, bid: Marginal, ask: Marginal, gammas=None,
                      config: HedgeConfig | None = None, n_fit: int = 10) -> ConvergenceResult:
    """Deform both marginals towards the mid and record distance and superhedging premium."""
    gammas = default_gammas() if gammas is None else np.asarray(gammas, float)
    cfg = config or HedgeConfig(strike_mode="dense", solve_primal=False, audit=False)
    mid = mid_marginal(bid, ask)
    x0 = ask.barycenter
    m_price = exact_price(mid, h)
    d = np.empty(gammas.size)
    prem = np.empty(gammas.size)
    sup = np.empty(gammas.size)
    for i, g in enumerate(gammas):
        b, a = deform(bid, mid, float(g)), deform(ask, mid, float(g))
        d[i] = bid_ask_distance(b, a).value
        sup[i] = superhedge(h, b, a, x0=x0, config=cfg).dual_value
        prem[i] = sup[i] - m_price
    C, kind = rate_bound(h, mid) if isinstance(mid, MixtureMarginal) else (None, None)
    return ConvergenceResult(gammas, d, prem, sup, m_price, loglog_slope(d, prem, n_fit), C, kind,
                             {"n_grid": cfg.n_grid, "payoff": h.text})


@dataclass
class ForwardStartRow:
    K: float
    bamot_super: float
    bamot_sub: float
    mot_super: float
    mot_sub: float
    primal_super: float | None = None
    primal_sub: float | None = None

    @property
    def width_difference(self) -> float:
        return (self.bamot_super - self.bamot_sub) - (self.mot_super - self.mot_sub)


def forward_start_sweep(bids, asks, Ks, strikes, config: HedgeConfig | None = None) -> list[ForwardStartRow]:
    """Super/subhedging bounds of ``(x2 - K x1)^+`` under BAMOT and under MOT with mid marginals.

    MOT uses degenerate bands (bid = ask = mid price) at the same quoted strikes.
    """
    check_assumption(list(bids), list(asks))
    cfg = config or HedgeConfig(n_product=60)
    cfg = HedgeConfig(**{**cfg.__dict__, "strike_mode": "quoted", "strikes": list(np.asarray(strikes, float))})
    mids = [mid_marginal(b, a) for b, a in zip(bids, asks)]
    rows = []
    for K in Ks:
        h = forward_start(float(K))
        up = superhedge(h, bids, asks, config=cfg, check=False)
        lo = subhedge(h, bids, asks, config=cfg, check=False)
        mu = superhedge(h, mids, mids, config=cfg, check=False)
        ml = subhedge(h, mids, mids, config=cfg, check=False)
        rows.append(ForwardStartRow(float(K), up.dual_value, lo.dual_value, mu.dual_value, ml.dual_value,
                                    up.primal_value, lo.primal_value))
    return rows
