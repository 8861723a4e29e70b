"""Digital call superhedging when only ask quotes exist (bid marginal a point mass).

With ask marginal ``mu`` of mean ``x0`` and digital strike ``K > x0`` the
cheapest superhedge is the call spread ``(x - L)^+ / (K - L)`` whose lower
strike ``L*`` solves ``b(L) = E_mu[(X - K); X > L] = 0``. Its cost equals
``mu([L*, inf))``, and moving all ask mass above ``L*`` to an atom at ``K``
gives a measure attaining it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import DiscreteMeasure, Grid, Marginal, MixtureMarginal, discretize


class TrivialProblem(ValueError):
    """The ask marginal puts no mass above the strike (or ``L* = K``)."""


@dataclass(frozen=True)
class OneSidedDigitalResult:
    critical_strike: float
    strike: float
    price: float
    x0: float
    ask: Marginal

    @property
    def slope(self) -> float:
        return 1.0 / (self.strike - self.critical_strike)

    @property
    def dual_profile(self) -> tuple[float, float, float]:
        """(lower strike, upper strike, slope) of the superhedging call spread."""
        return self.critical_strike, self.strike, self.slope

    @property
    def upper_mass(self) -> float:
        return self.price

    def optimal_measure(self, cells: int = 256) -> DiscreteMeasure:
        """Ask mass below ``L*`` locally concentrated on ``cells`` cells, plus an atom at ``K``."""
        L, K = self.critical_strike, self.strike
        lo = float(self.ask.quantile(np.array([1e-12]))[0])
        edges = np.linspace(min(lo, L * 0.5), L, cells + 1)
        edges[0] = -1.0
        mass, mom = self.ask.partial_moments(edges[:-1], edges[1:])
        keep = mass > 1e-300
        atoms = np.append(mom[keep] / mass[keep], K)
        weights = np.append(mass[keep], self.price)
        return DiscreteMeasure.from_unsorted(atoms, weights, normalize=True)

    def to_json(self) -> dict:
        return {"critical_strike": self.critical_strike, "strike": self.strike, "price": self.price,
                "x0": self.x0, "dual_profile": {"lower": self.critical_strike, "upper": self.strike,
                                                 "slope": self.slope}}


def balance(ask: MixtureMarginal, K: float, L):
    """``b(L) = E[(X - K); X > L] = c(L) - (K - L) P(X > L)``."""
    L = np.asarray(L, float)
    return ask.call_price(L) - (K - L) * ask.survival(L)


def _check(ask, K, x0):
    if not isinstance(ask, MixtureMarginal):
        raise TypeError("closed form needs an atomless ask marginal; use the LP for discrete inputs")
    if len(ask.atoms_or_empty()):
        raise TypeError("ask marginal has atoms")
    if x0 is None:
        x0 = ask.barycenter
    if abs(x0 - ask.barycenter) > 1e-9 * x0:
        raise ValueError("x0 must equal the ask barycenter")
    if not K > x0:
        raise ValueError("the digital strike must exceed x0")
    return x0


def critical_strike(ask: MixtureMarginal, K: float, x0: float | None = None) -> float:
    """Root of ``b`` on ``[0, K]`` by bisection to ``1e-12 K``."""
    x0 = _check(ask, K, x0)
    lo, hi = 0.0, float(K)
    b_lo, b_hi = float(balance(ask, K, lo)), float(balance(ask, K, hi))
    if not b_lo < 0:
        raise ValueError("expected b(0) = x0 - K < 0")
    if b_hi <= 0:
        raise TrivialProblem("ask marginal is supported in [0, K]")
    while hi - lo > 1e-12 * K:
        mid = 0.5 * (lo + hi)
        if balance(ask, K, mid) < 0:
            lo = mid
        else:
            hi = mid
    L = 0.5 * (lo + hi)
    if L >= K:
        raise TrivialProblem("critical strike coincides with K")
    return L


def one_sided_digital(ask: MixtureMarginal, K: float, x0: float | None = None) -> OneSidedDigitalResult:
    x0 = _check(ask, K, x0)
    L = critical_strike(ask, K, x0)
    price = float(ask.survival(L))
    return OneSidedDigitalResult(L, float(K), price, x0, ask)


@dataclass(frozen=True)
class TouchReport:
    call_matches: bool
    call_residual: float
    gap_empty: bool
    gap_mass: float


def primal_dual_iv_touch(result: OneSidedDigitalResult, ask: Marginal | None = None,
                         cells: int = 256) -> TouchReport:
    """Check that the optimal measure reprices the ``L*`` call and puts no mass in ``(L*, K)``."""
    ask = result.ask if ask is None else ask
    mu = result.optimal_measure(cells)
    L, K = result.critical_strike, result.strike
    resid = float(abs(mu.call_price(L) - ask.call_price(L)))
    inside = (mu.atoms > L) & (mu.atoms < K)
    gap_mass = float(mu.weights[inside].sum())
    return TouchReport(resid <= 1e-8 * max(1.0, result.x0), resid, gap_mass == 0.0, gap_mass)
