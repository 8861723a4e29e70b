"""Super- and subhedging bounds from bid and ask marginals.

``superhedge`` solves the discretised dual (portfolio) and primal (measure)
programs on a common grid and reports both values with the extracted
optimisers. ``subhedge(h) = -superhedge(-h)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..measures import DiscreteMeasure, Marginal, check_bid_ask_order, mid_marginal
from ..payoffs import Payoff
from . import builders
from .builders import BandQuotes, DualSpecSingle, DualSpecTwo
from .model import LpSolution, solve


class ArbitrageError(ValueError):
    """Inputs admit static arbitrage; ``witness`` locates the violation."""

    def __init__(self, message, witness: dict | None = None):
        super().__init__(message)
        self.witness = witness or {}


class LpFailure(RuntimeError):
    def __init__(self, message, solution: LpSolution):
        super().__init__(message)
        self.solution = solution


@dataclass
class HedgeConfig:
    """Discretisation and solver settings.

    ``n_grid`` is the size of the one-maturity constraint/support grid and
    ``n_product`` the per-axis size for two maturities. ``strike_mode`` is
    ``quoted`` (hedge with ``strikes`` only) or ``dense`` (every interior grid
    point is a strike); ``quoted`` without strikes falls back to ``dense``.
    """

    n_grid: int = 400
    n_product: int = 60
    q_lo: float = 1e-6
    q_hi: float = 1 - 1e-6
    extend: float = 0.3
    strike_mode: str = "quoted"
    strikes: Sequence[float] | None = None
    backend: str = "auto"
    terminal_row: bool = True
    solve_primal: bool = True
    audit: bool = True
    extra_points: Sequence[float] = ()
    audit_tol: float = 1e-8


@dataclass
class HedgePortfolio:
    """Static portfolio: cash, forward position per maturity, call legs per maturity.

    ``legs[i]`` lists ``(strike, weight, side)`` with positive weights bought at
    the ask and negative weights sold at the bid. ``delta`` holds the dynamic
    hedge ``Delta(x1)`` on ``delta_grid`` for two maturities.
    """

    cash: float
    forwards: list
    legs: list
    x0: float
    delta: np.ndarray | None = None
    delta_grid: np.ndarray | None = None
    cost: float = 0.0

    def static_value(self, i: int, x):
        x = np.asarray(x, float)
        out = self.forwards[i] * x
        for k, w, _ in self.legs[i]:
            out = out + w * np.maximum(x - k, 0.0)
        return out

    def value(self, *xs):
        """Terminal value of the hedge (cash + static legs + delta gains)."""
        if len(xs) == 1:
            return self.cash + self.static_value(0, xs[0])
        x1, x2 = np.broadcast_arrays(*(np.asarray(x, float) for x in xs))
        out = self.cash + self.static_value(0, x1) + self.static_value(1, x2)
        if self.delta is not None:
            idx = np.clip(np.searchsorted(self.delta_grid, x1, side="right") - 1, 0, self.delta.size - 1)
            out = out + self.delta[idx] * (x2 - x1)
        return out

    def call_legs(self, tol: float = 1e-10) -> list:
        """Significant legs for the first maturity (single-maturity view)."""
        return [(k, w, s) for k, w, s in self.legs[0] if abs(w) > tol]

    def negate(self) -> "HedgePortfolio":
        flip = {"ask": "ask", "bid": "bid"}
        legs = [[(k, -w, flip[s]) for k, w, s in lg] for lg in self.legs]
        return HedgePortfolio(-self.cash, [-f for f in self.forwards], legs, self.x0,
                              None if self.delta is None else -self.delta, self.delta_grid, -self.cost)

    def rows(self) -> list:
        out = []
        for i, lg in enumerate(self.legs):
            for k, w, s in lg:
                out.append({"maturity": i + 1, "strike": k, "weight": w, "side": s})
        return out

    def to_json(self) -> dict:
        return {
            "cash": self.cash,
            "forwards": list(self.forwards),
            "legs": self.rows(),
            "cost": self.cost,
            "delta": None if self.delta is None else self.delta.tolist(),
            "delta_grid": None if self.delta_grid is None else self.delta_grid.tolist(),
        }


@dataclass
class PriceBound:
    side: str  # super | sub
    dual_value: float
    primal_value: float | None
    portfolio: HedgePortfolio | None
    measure: object = None  # DiscreteMeasure (N=1) or (grid1, grid2, p) (N=2)
    dual_solution: LpSolution | None = field(default=None, repr=False)
    primal_solution: LpSolution | None = field(default=None, repr=False)
    audit: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return self.dual_value

    @property
    def gap(self) -> float | None:
        if self.primal_value is None:
            return None
        return abs(self.dual_value - self.primal_value)

    def to_json(self) -> dict:
        meas = None
        if isinstance(self.measure, DiscreteMeasure):
            meas = self.measure.to_json()
        return {"side": self.side, "primal_value": self.primal_value, "dual_value": self.dual_value,
                "gap": self.gap, "portfolio": None if self.portfolio is None else self.portfolio.to_json(),
                "measure": meas, "audit": self.audit}


# ---------------------------------------------------------------------------
# grids


def quantile_grid(ref: Sequence[Marginal], n: int, q_lo=1e-6, q_hi=1 - 1e-6, extend=0.3,
                  include=()) -> tuple[np.ndarray, tuple[float, float]]:
    """Quantile grid of the reference marginals widened by ``extend`` on each side.

    About 90% of the points sit at quantiles of the equal mixture of ``ref``
    in ``[q_lo, q_hi]``; the rest are uniform in the widened tails. The origin
    and ``include`` are always added. Returns the grid and the core range.
    """
    ref = list(ref)
    lo = min(m.support_range(q_lo, q_hi)[0] for m in ref)
    hi = max(m.support_range(q_lo, q_hi)[1] for m in ref)
    n_tail = max(2, n // 20)
    n_core = max(n - 2 * n_tail - 1, 3)
    levels = np.linspace(q_lo, q_hi, n_core)
    # quantiles of the equal-weight mixture via bisection on the averaged CDF
    from ..measures import _bisect_increasing

    cdf = lambda x: np.mean([m.cdf(x) for m in ref], axis=0)
    core = _bisect_increasing(cdf, levels, 0.0, hi * 4 + 1.0)
    core = np.clip(core, lo, hi)
    width = hi - lo
    left = np.linspace(max(lo - extend * width, 0.0), lo, n_tail + 1)[:-1]
    right = np.linspace(hi, hi + extend * width, n_tail + 1)[1:]
    pts = np.concatenate([[0.0], left, core, right, np.asarray(list(include), float)])
    pts = np.unique(pts)
    # merge near-duplicates that would make rows numerically identical
    keep = np.concatenate([[True], np.diff(pts) > 1e-9 * max(hi, 1.0)])
    return pts[keep], (lo, hi)


def dense_strikes(grid: np.ndarray, core: tuple[float, float]) -> np.ndarray:
    lo, hi = core
    return grid[(grid > 0) & (grid >= lo) & (grid <= hi)]


def _as_list(m):
    return list(m) if isinstance(m, (list, tuple)) else [m]


def _forward(bids, asks, x0):
    f = asks[0].barycenter if x0 is None else x0
    for m in list(bids) + list(asks):
        if abs(m.barycenter - f) > 1e-8 * f:
            raise ValueError(f"marginal barycenter {m.barycenter} differs from spot {f}")
    return f


def check_assumption(bids, asks, tol=None):
    viol = check_bid_ask_order(bids, asks, tol)
    if viol is not None:
        raise ArbitrageError(
            f"bid marginal {viol.bid_index + 1} exceeds ask marginal {viol.ask_index + 1} "
            f"in convex order at strike {viol.strike:.6g}",
            {"bid_maturity": viol.bid_index + 1, "ask_maturity": viol.ask_index + 1,
             "strike": viol.strike, "excess": viol.excess})


# ---------------------------------------------------------------------------
# single maturity


def _extract_single(lp, sol, spec) -> HedgePortfolio:
    lay = lp.meta["layout"]
    s = spec.x0
    v = sol.primal
    a, b = v[lay["a"]][0] * s, v[lay["b"]][0]
    ca, cb = v[lay["ca"]], v[lay["cb"]]
    legs = []
    for k, wa, wb in zip(spec.quotes.strikes, ca, cb):
        if wa > 1e-12:
            legs.append((float(k), float(wa), "ask"))
        if wb > 1e-12:
            legs.append((float(k), -float(wb), "bid"))
    return HedgePortfolio(float(a), [float(b)], [legs], s, cost=builders.price_value(lp, sol.value))


def single_spec(h: Payoff, bid: Marginal, ask: Marginal, x0: float, cfg: HedgeConfig) -> DualSpecSingle:
    kinks = h.kinks()
    quoted = cfg.strike_mode == "quoted" and cfg.strikes is not None
    include = list(kinks) + list(cfg.extra_points) + (list(cfg.strikes) if quoted else [])
    grid, core = quantile_grid([ask], cfg.n_grid, cfg.q_lo, cfg.q_hi, cfg.extend, include)
    if quoted:
        strikes = np.unique(np.asarray(cfg.strikes, float))
    elif cfg.strike_mode in ("dense", "quoted"):
        strikes = dense_strikes(grid, core)
    else:
        raise ValueError(f"unknown strike mode {cfg.strike_mode!r}")
    quotes = BandQuotes.from_marginals(strikes, bid, ask)
    return DualSpecSingle(x0, quotes, grid, h(grid), h.terminal_slope() if cfg.terminal_row else None)


def _audit_single(port: HedgePortfolio, h: Payoff, grid: np.ndarray, x0: float) -> float:
    fine = np.unique(np.concatenate([np.linspace(a, b, 11) for a, b in zip(grid[:-1], grid[1:])]))
    fine = np.concatenate([fine, grid[-1] + np.linspace(0, 5, 11)[1:] * (grid[-1] + x0)])
    pnl = port.value(fine) - h(fine)
    return float(pnl.min() / x0)


def _superhedge_single(h, bid, ask, x0, cfg, side="super") -> PriceBound:
    spec = single_spec(h, bid, ask, x0, cfg)
    dual_lp = builders.build_dual_single(spec)
    dsol = solve(dual_lp, cfg.backend, cfg.audit_tol)
    if not dsol.ok:
        raise LpFailure(f"dual program ended with status {dsol.status}", dsol)
    dual_value = builders.price_value(dual_lp, dsol.value)
    port = _extract_single(dual_lp, dsol, spec)
    audit = {}
    if cfg.audit:
        audit["min_pnl_over_x0"] = _audit_single(port, h, spec.grid, x0)
    primal_value = measure = psol = None
    if cfg.solve_primal:
        primal_lp = builders.build_primal_single(spec)
        psol = solve(primal_lp, cfg.backend, cfg.audit_tol)
        if psol.ok:
            primal_value = builders.price_value(primal_lp, psol.value)
            p = psol.primal[primal_lp.meta["layout"]["p"]]
            p = np.maximum(p, 0.0)
            keep = p > 1e-14
            measure = DiscreteMeasure.from_unsorted(spec.grid[keep], p[keep], normalize=True)
            calls = measure.call_price(spec.quotes.strikes)
            audit["band_violation_over_x0"] = float(max(
                np.max(calls - spec.quotes.ask, initial=0.0), np.max(spec.quotes.bid - calls, initial=0.0)) / x0)
        else:
            audit["primal_status"] = psol.status
            audit["primal_witness"] = psol.witness
    return PriceBound(side, dual_value, primal_value, port, measure, dsol, psol, audit)


# ---------------------------------------------------------------------------
# two maturities


def two_spec(h: Payoff, bids, asks, x0: float, cfg: HedgeConfig) -> DualSpecTwo:
    kinks = list(h.kinks()) + list(cfg.extra_points)
    quoted = cfg.strike_mode == "quoted" and cfg.strikes is not None
    if quoted:
        kinks += list(cfg.strikes)
    g1, core1 = quantile_grid([asks[0]], cfg.n_product, cfg.q_lo, cfg.q_hi, cfg.extend, kinks)
    g2, core2 = quantile_grid([asks[1]], cfg.n_product, cfg.q_lo, cfg.q_hi, cfg.extend, kinks)
    if quoted:
        k1 = k2 = np.unique(np.asarray(cfg.strikes, float))
    else:
        k1, k2 = dense_strikes(g1, core1), dense_strikes(g2, core2)
    quotes = (BandQuotes.from_marginals(k1, bids[0], asks[0]), BandQuotes.from_marginals(k2, bids[1], asks[1]))
    X1, X2 = np.meshgrid(g1, g2, indexing="ij")
    return DualSpecTwo(x0, quotes, g1, g2, h(X1, X2), h.terminal_slope() if cfg.terminal_row else None)


def _superhedge_two(h, bids, asks, x0, cfg, side="super") -> PriceBound:
    spec = two_spec(h, bids, asks, x0, cfg)
    return solve_two(spec, cfg, side)


def solve_two(spec: DualSpecTwo, cfg: HedgeConfig, side: str = "super") -> PriceBound:
    dual_lp = builders.build_dual_two(spec)
    dsol = solve(dual_lp, cfg.backend, cfg.audit_tol)
    if not dsol.ok:
        raise LpFailure(f"dual program ended with status {dsol.status}", dsol)
    lay = dual_lp.meta["layout"]
    v = dsol.primal
    s = spec.x0
    legs = []
    for i, (q, ka, kb) in enumerate(zip(spec.quotes, ("c1a", "c2a"), ("c1b", "c2b"))):
        lg = []
        for k, wa, wb in zip(q.strikes, v[lay[ka]], v[lay[kb]]):
            if wa > 1e-12:
                lg.append((float(k), float(wa), "ask"))
            if wb > 1e-12:
                lg.append((float(k), -float(wb), "bid"))
        legs.append(lg)
    port = HedgePortfolio(float(v[lay["a"]][0] * s), [float(v[lay["b1"]][0]), float(v[lay["b2"]][0])],
                          legs, s, v[lay["delta"]].copy(), spec.grid1.copy(),
                          builders.price_value(dual_lp, dsol.value))
    dual_value = builders.price_value(dual_lp, dsol.value)
    primal_value = measure = psol = None
    audit = {}
    if cfg.solve_primal:
        primal_lp = builders.build_primal_two(spec)
        psol = solve(primal_lp, cfg.backend, cfg.audit_tol)
        if psol.ok:
            primal_value = builders.price_value(primal_lp, psol.value)
            p = psol.primal[primal_lp.meta["layout"]["p"]].reshape(primal_lp.meta["shape"])
            measure = (spec.grid1, spec.grid2, p)
            u1, u2 = spec.grid1 / s, spec.grid2 / s
            audit["martingale_residual"] = float(np.max(np.abs(p @ u2 - p.sum(axis=1) * u1)))
        else:
            audit["primal_status"] = psol.status
    return PriceBound(side, dual_value, primal_value, port, measure, dsol, psol, audit)


# ---------------------------------------------------------------------------
# public entry points


def superhedge(h: Payoff, bids, asks, x0: float | None = None, config: HedgeConfig | None = None,
               check: bool = True) -> PriceBound:
    """Upper price bound of ``h`` given bid and ask marginals (one or two maturities)."""
    cfg = config or HedgeConfig()
    bids, asks = _as_list(bids), _as_list(asks)
    if len(bids) != len(asks) or len(bids) not in (1, 2):
        raise ValueError("one or two maturities of bid/ask marginals are supported")
    x0 = _forward(bids, asks, x0)
    if check:
        check_assumption(bids, asks)
    if len(bids) == 1:
        if h.dim != 1:
            raise ValueError("two-maturity payoff with a single maturity")
        return _superhedge_single(h, bids[0], asks[0], x0, cfg)
    return _superhedge_two(h, bids, asks, x0, cfg)


def subhedge(h: Payoff, bids, asks, x0: float | None = None, config: HedgeConfig | None = None,
             check: bool = True) -> PriceBound:
    """Lower price bound, computed as ``-superhedge(-h)``."""
    up = superhedge(-h, bids, asks, x0, config, check)
    return PriceBound("sub", -up.dual_value, None if up.primal_value is None else -up.primal_value,
                      None if up.portfolio is None else up.portfolio.negate(), up.measure,
                      up.dual_solution, up.primal_solution, up.audit)


def mot_marginals(bids, asks):
    """Mid marginals used for frictionless (classical MOT) comparisons."""
    return [mid_marginal(b, a) for b, a in zip(_as_list(bids), _as_list(asks))]
