"""Vega-weighted least-squares calibration of log-normal mixtures to OTM quotes.

The ask fit searches over weights, vols and all but one mean; the last mean is
solved from the forward constraint. The bid fit keeps the ask means and weights
and shrinks each vol by a factor in ``(0, 1]``, which keeps bid below ask in
convex order.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares, minimize

from .measures import MixtureMarginal, black_call, black_put, black_vega


class CalibrationError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def implied_total_vol(price: float, forward: float, strike: float, put: bool = False) -> float:
    """Black implied total vol of an OTM price; NaN outside the no-arbitrage range."""
    intrinsic = max(strike - forward, 0.0) if put else max(forward - strike, 0.0)
    cap = strike if put else forward
    if not intrinsic < price < cap:
        return np.nan
    # invert the quoted side directly; parity would cancel digits for OTM puts
    pricer = black_put if put else black_call
    f = lambda s: float(pricer(forward, strike, s)) - price
    return brentq(f, 1e-10, 20.0, xtol=1e-14, rtol=1e-14, maxiter=500)


@dataclass
class CalibrationProblem:
    """OTM quotes with Vega weights: puts below the spot, calls at or above it."""

    strikes: np.ndarray
    otm_prices: np.ndarray
    forward: float
    spot: float | None = None
    n_components: int = 4
    vegas: np.ndarray | None = None
    side: str = "ask"

    def __post_init__(self):
        self.strikes = np.asarray(self.strikes, float)
        self.otm_prices = np.asarray(self.otm_prices, float)
        if self.strikes.size == 0:
            raise CalibrationError("empty quote set")
        if self.strikes.shape != self.otm_prices.shape:
            raise ValueError("strikes and prices differ in length")
        if self.spot is None:
            self.spot = self.forward
        if self.n_components < 1:
            raise ValueError("need at least one component")
        if self.side not in ("ask", "bid-from-ask"):
            raise ValueError("side must be 'ask' or 'bid-from-ask'")
        if self.vegas is None or np.any(np.isnan(self.vegas)):
            self.vegas = self._fallback_vegas(self.vegas)
        self.vegas = np.asarray(self.vegas, float)
        if np.any(~(self.vegas > 0)):
            raise CalibrationError("vegas must be positive",
                                   {"strikes": self.strikes[~(self.vegas > 0)].tolist()})

    @property
    def is_put(self) -> np.ndarray:
        return self.strikes < self.spot

    def _fallback_vegas(self, given):
        out = np.full(self.strikes.size, np.nan) if given is None else np.asarray(given, float).copy()
        for i in np.flatnonzero(np.isnan(out)):
            s = implied_total_vol(self.otm_prices[i], self.forward, self.strikes[i], bool(self.is_put[i]))
            out[i] = black_vega(self.forward, self.strikes[i], s) if np.isfinite(s) else np.nan
        return out

    @classmethod
    def from_marginal(cls, m: MixtureMarginal, strikes, spot=None, n_components=None, side="ask"):
        """Exact OTM prices of ``m`` with Vega at each quote's own implied vol."""
        strikes = np.asarray(strikes, float)
        F = m.barycenter
        spot = F if spot is None else spot
        calls = m.call_price(strikes)
        otm = np.where(strikes < spot, calls - F + strikes, calls)
        return cls(strikes, otm, F, spot, n_components or m.n_components, None, side)

    def model_prices(self, m: MixtureMarginal) -> np.ndarray:
        calls = m.call_price(self.strikes)
        return np.where(self.is_put, calls - m.barycenter + self.strikes, calls)

    def residuals(self, m: MixtureMarginal) -> np.ndarray:
        return (self.model_prices(m) - self.otm_prices) / self.vegas

    def objective(self, m: MixtureMarginal) -> float:
        r = self.residuals(m)
        return float(r @ r)


def read_problem(csv_path, sidecar_path) -> CalibrationProblem:
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    with open(csv_path) as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    k = np.array([float(r["strike"]) for r in rows])
    p = np.array([float(r["otm_price"]) for r in rows])
    v = np.array([float(r["vega"]) if r.get("vega") not in (None, "") else np.nan for r in rows])
    return CalibrationProblem(k, p, float(meta["forward"]), meta.get("spot"), int(meta.get("J", 4)),
                              None if np.all(np.isnan(v)) else v, meta.get("side", "ask"))


@dataclass
class CalibrationResult:
    marginal: MixtureMarginal
    objective: float
    initial_objectives: list = field(default_factory=list)
    start_index: int = -1
    method: str = ""

    def max_scaled_error(self, problem: CalibrationProblem) -> float:
        return float(np.max(np.abs(problem.residuals(self.marginal))))


# ---------------------------------------------------------------------------
# ask fit


class _AskParams:
    """theta = (logits[J-1], log vols[J], log means[J-1]); last logit is 0, last mean solved."""

    def __init__(self, J, F):
        self.J, self.F = J, F

    def unpack(self, theta):
        J = self.J
        logits = np.append(theta[: J - 1], 0.0)
        w = np.exp(logits - logits.max())
        w /= w.sum()
        s = np.exp(theta[J - 1: 2 * J - 1])
        z_free = np.exp(theta[2 * J - 1:])
        last = (self.F - np.dot(w[:-1], z_free)) / w[-1]
        return np.append(z_free, last), s, w

    def pack(self, z, s, w):
        w = np.asarray(w, float)
        logits = np.log(w[:-1] / w[-1])
        return np.concatenate([logits, np.log(s), np.log(z[:-1])])

    def marginal(self, theta):
        z, s, w = self.unpack(theta)
        if not (np.all(np.isfinite(z)) and z[-1] > 1e-6 * self.F and np.all(s > 1e-6) and np.all(s < 5)):
            return None
        return MixtureMarginal(z, s, w)


_PENALTY = 1e12


def _single_lognormal_vol(p: CalibrationProblem) -> float:
    i = int(np.argmin(np.abs(p.strikes - p.forward)))
    s = implied_total_vol(p.otm_prices[i], p.forward, p.strikes[i], bool(p.is_put[i]))
    return float(s) if np.isfinite(s) else 0.2


def _starts(p: CalibrationProblem, rng, n_starts):
    """Start 0 spreads the single log-normal fit evenly; later starts perturb it at random."""
    J, F = p.n_components, p.forward
    s0 = _single_lognormal_vol(p)
    out = []
    for k in range(n_starts):
        if k == 0:
            w = np.full(J, 1.0 / J)
            z = F * np.exp(np.linspace(-0.03, 0.03, J))
            s = s0 * np.exp(np.linspace(-0.3, 0.3, J))
        else:
            w = rng.dirichlet(np.full(J, 4.0))
            z = F * np.exp(rng.normal(0.0, 0.05, J))
            s = s0 * np.exp(rng.normal(0.0, 0.3, J))
        z[-1] = (F - np.dot(w[:-1], z[:-1])) / w[-1]
        if z[-1] <= 0.05 * F:
            z = np.full(J, F)
        out.append((z, s, w))
    return out


def calibrate_ask(p: CalibrationProblem, n_starts: int = 16, seed: int = 0, polish: bool = True,
                  maxiter: int | None = None) -> CalibrationResult:
    """Multi-start Nelder-Mead on the Vega-weighted objective, then a least-squares polish."""
    J = p.n_components
    if p.strikes.size < 3 * J - 1:
        warnings.warn(f"{p.strikes.size} quotes for {3 * J - 1} free parameters; fit may be non-unique",
                      stacklevel=2)
    par = _AskParams(J, p.forward)
    rng = np.random.default_rng(seed)

    def obj(theta):
        m = par.marginal(theta)
        if m is None:
            return _PENALTY
        v = p.objective(m)
        return v if np.isfinite(v) else _PENALTY

    initial, results = [], []
    for k, (z, s, w) in enumerate(_starts(p, rng, n_starts)):
        th0 = par.pack(z, s, w)
        f0 = obj(th0)
        initial.append(f0)
        if f0 >= _PENALTY:
            continue
        res = minimize(obj, th0, method="Nelder-Mead",
                       options={"maxiter": maxiter or 400 * th0.size, "xatol": 1e-10, "fatol": 1e-16,
                                "adaptive": True})
        results.append((float(res.fun), k, res.x))
    if not results:
        raise CalibrationError("every start produced a non-finite objective", {"initial": initial})
    results.sort(key=lambda t: (t[0], t[1]))
    best_f, best_k, best_th = results[0]
    method = "nelder-mead"
    if polish:
        def resid(theta):
            m = par.marginal(theta)
            if m is None:
                return np.full(p.strikes.size, 1e6)
            return p.residuals(m)
        # polish the best few simplex results; keep any improvement
        for f, k, th in results[:4]:
            ls = least_squares(resid, th, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
            f_ls = obj(ls.x)
            if f_ls < best_f:
                best_f, best_k, best_th, method = f_ls, k, ls.x, "nelder-mead+least-squares"
    m = par.marginal(best_th)
    return CalibrationResult(m, best_f, initial, best_k, method)


# ---------------------------------------------------------------------------
# bid fit


def calibrate_bid_from_ask(ask: MixtureMarginal, p: CalibrationProblem,
                           lower: float = 1e-4) -> CalibrationResult:
    """Fit vol scales ``s_j`` in ``[lower, 1]`` so ``sigma_b = s * sigma_a`` matches the bid quotes."""
    if abs(p.forward - ask.barycenter) > 1e-9 * p.forward:
        raise CalibrationError("bid quotes use a different forward than the ask marginal")
    z, sa, w = ask.means, ask.vols, ask.weights

    def marginal(scales):
        return MixtureMarginal(z, sa * np.clip(scales, lower, 1.0), w)

    resid = lambda sc: p.residuals(marginal(sc))
    J = sa.size
    starts = [np.ones(J), np.full(J, 0.9), np.full(J, 0.5)]
    initial, best = [], None
    for k, s0 in enumerate(starts):
        initial.append(float(np.sum(resid(s0) ** 2)))
        ls = least_squares(resid, s0, bounds=(np.full(J, lower), np.ones(J)), method="trf",
                           xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
        f = float(np.sum(ls.fun ** 2))
        if best is None or f < best[0]:
            best = (f, k, ls.x)
    f, k, sc = best
    if np.all(sc <= lower * (1 + 1e-6)):
        warnings.warn("all bid vol scales hit the lower bound; bid and ask quotes may be inverted",
                      stacklevel=2)
    return CalibrationResult(marginal(sc), f, initial, k, "bounded-least-squares")
