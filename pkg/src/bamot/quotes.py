"""Option-chain processing: imputation, put-call combination, quote enhancement,
validation of the enhanced quotes and construction of an exact ask marginal.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .lp.hedging import ArbitrageError
from .lp.model import EQ, GE, LE, build, solve
from .measures import DiscreteMeasure, MixtureMarginal


class DegenerateMarket(ValueError):
    """Every enhanced ask equals the forward."""


def _arr(x, n):
    if x is None:
        return np.full(n, np.nan)
    a = np.asarray(x, float).copy()
    if a.shape != (n,):
        raise ValueError("quote arrays must match the strikes")
    return a


@dataclass(frozen=True)
class QuoteChain:
    """Strike-indexed put/call bid/ask quotes; NaN marks a missing quote.

    The first strike is 0 with puts worth 0 and calls worth the forward.
    """

    forward: float
    strikes: np.ndarray
    put_bid: np.ndarray
    put_ask: np.ndarray
    call_bid: np.ndarray
    call_ask: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.strikes, float)
        n = k.size
        if n < 2 or k[0] != 0.0 or np.any(np.diff(k) <= 0):
            raise ValueError("strikes must start at 0 and increase strictly")
        arrs = {name: _arr(getattr(self, name), n) for name in ("put_bid", "put_ask", "call_bid", "call_ask")}
        F = float(self.forward)
        if not F > 0:
            raise ValueError("forward must be positive")
        for name, a in arrs.items():
            a[0] = 0.0 if name.startswith("put") else F
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        for side in ("put", "call"):
            b, a = arrs[f"{side}_bid"], arrs[f"{side}_ask"]
            both = ~np.isnan(b) & ~np.isnan(a)
            bad = both & (b > a)
            if np.any(bad):
                i = int(np.flatnonzero(bad)[0])
                raise ArbitrageError(f"{side} bid above ask at strike {k[i]}", {"strike": float(k[i])})
        k.setflags(write=False)
        object.__setattr__(self, "strikes", k)

    @classmethod
    def create(cls, forward, strikes, put_bid=None, put_ask=None, call_bid=None, call_ask=None):
        """Build from quoted strikes, prepending the zero strike when absent."""
        strikes = np.asarray(strikes, float)
        n = strikes.size
        cols = [_arr(c, n) for c in (put_bid, put_ask, call_bid, call_ask)]
        if strikes[0] != 0.0:
            strikes = np.concatenate([[0.0], strikes])
            cols = [np.concatenate([[np.nan], c]) for c in cols]
        return cls(float(forward), strikes, *cols)

    @property
    def size(self) -> int:
        return self.strikes.size

    @property
    def has_puts(self) -> bool:
        return not (np.all(np.isnan(self.put_bid[1:])) and np.all(np.isnan(self.put_ask[1:])))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# forward: {self.forward!r}\n")
        w = csv.writer(buf)
        w.writerow(["strike", "put_bid", "put_ask", "call_bid", "call_ask"])
        for i in range(1, self.size):
            row = [self.strikes[i], self.put_bid[i], self.put_ask[i], self.call_bid[i], self.call_ask[i]]
            w.writerow([repr(float(v)) if not np.isnan(v) else "" for v in row])
        return buf.getvalue()


def read_chain_csv(text: str, forward: float | None = None) -> QuoteChain:
    """Parse chain CSV; the forward comes from a ``# forward: F`` preamble or the argument."""
    lines = text.splitlines()
    body = []
    for ln in lines:
        s = ln.strip()
        if s.startswith("#"):
            key, _, val = s[1:].partition(":")
            if key.strip().lower() == "forward" and forward is None:
                forward = float(val)
            continue
        if s:
            body.append(ln)
    if forward is None:
        raise ValueError("forward missing (preamble '# forward: F' or sidecar)")
    reader = csv.DictReader(body)
    need = {"strike", "put_bid", "put_ask", "call_bid", "call_ask"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise ValueError(f"chain CSV needs columns {sorted(need)}")
    rows = list(reader)
    val = lambda r, c: float(r[c]) if r[c] not in ("", None) else np.nan
    cols = {c: np.array([val(r, c) for r in rows]) for c in need}
    order = np.argsort(cols["strike"])
    cols = {c: v[order] for c, v in cols.items()}
    return QuoteChain.create(forward, cols["strike"], cols["put_bid"], cols["put_ask"],
                             cols["call_bid"], cols["call_ask"])


def load_chain(path, sidecar=None) -> QuoteChain:
    fwd = None
    if sidecar is not None:
        with open(sidecar) as fh:
            fwd = float(json.load(fh)["forward"])
    with open(path) as fh:
        return read_chain_csv(fh.read(), fwd)


# ---------------------------------------------------------------------------
# imputation and put-call combination


def impute(chain: QuoteChain) -> QuoteChain:
    """Fill missing quotes with model-free bounds: puts in ``[0, K]``, calls in ``[0, F]``."""
    K, F = chain.strikes, chain.forward
    fill = lambda a, v: np.where(np.isnan(a), v, a)
    return QuoteChain(F, K, fill(chain.put_bid, 0.0), fill(chain.put_ask, K),
                      fill(chain.call_bid, 0.0), fill(chain.call_ask, F))


def combine_put_call(chain: QuoteChain) -> QuoteChain:
    """Tighten call quotes with parity-converted put quotes and drop the puts."""
    if np.any(np.isnan(chain.call_bid)) or np.any(np.isnan(chain.call_ask)) or \
            np.any(np.isnan(chain.put_bid)) or np.any(np.isnan(chain.put_ask)):
        raise ValueError("impute the chain before combining puts and calls")
    K, F = chain.strikes, chain.forward
    cb = np.maximum(chain.call_bid, chain.put_bid + F - K)
    ca = np.minimum(chain.call_ask, chain.put_ask + F - K)
    bad = cb > ca
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ArbitrageError(f"parity-tightened call bid exceeds ask at strike {K[i]}",
                             {"strike": float(K[i]), "bid": float(cb[i]), "ask": float(ca[i])})
    return QuoteChain(F, K, None, None, cb, ca)


def prepare(chain: QuoteChain) -> QuoteChain:
    return combine_put_call(impute(chain))


# ---------------------------------------------------------------------------
# enhancement


@dataclass(frozen=True)
class EnhancedChain:
    forward: float
    strikes: np.ndarray
    bid: np.ndarray  # enhanced call bids
    ask: np.ndarray  # enhanced call asks
    original_bid: np.ndarray
    original_ask: np.ndarray
    truncation: int  # largest index with a strictly decreasing ask step

    def as_chain(self) -> QuoteChain:
        return QuoteChain(self.forward, self.strikes, None, None, self.bid, self.ask)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# forward: {self.forward!r}\n# truncation_index: {self.truncation}\n")
        w = csv.writer(buf)
        w.writerow(["strike", "call_bid", "call_ask", "enhanced_bid", "enhanced_ask"])
        for row in zip(self.strikes, self.original_bid, self.original_ask, self.bid, self.ask):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def feasibility_check(chain: QuoteChain, backend="auto"):
    """Find a measure on the strikes (plus escaping first moment) repricing inside every band.

    Returns ``(feasible, witness)``; the witness names the most violated band.
    """
    K = chain.strikes / chain.forward
    cb = chain.call_bid / chain.forward
    ca = chain.call_ask / chain.forward
    n = K.size
    H = np.maximum(K[None, :] - K[:, None], 0.0)  # H[m, l] = (K_l - K_m)^+
    Hm = np.hstack([H, np.ones((n, 1))])
    A = np.vstack([np.concatenate([np.ones(n), [0.0]])[None, :], Hm, Hm])
    senses = [EQ] + [LE] * n + [GE] * n
    rhs = np.concatenate([[1.0], ca, cb])
    lp = build(np.zeros(n + 1), (A, senses, rhs), np.zeros(n + 1), np.full(n + 1, np.inf),
               row_names=["mass"] + [f"ask_{m}" for m in range(n)] + [f"bid_{m}" for m in range(n)])
    sol = solve(lp, backend)
    if sol.ok:
        return True, None
    wit = dict(sol.witness or {})
    name = wit.get("name", "")
    if "_" in name:
        side, idx = name.split("_")
        wit["strike"] = float(chain.strikes[int(idx)])
        wit["side"] = side
    return False, wit


def _enhance_one(K, cb, ca, m, backend):
    """Return (enhanced ask, enhanced bid) for strike index ``m`` in forward units."""
    n = K.size
    H = np.maximum(K[:, None] - K[None, :], 0.0)  # H[j, l] = (K_j - K_l)^+
    target = np.maximum(K - K[m], 0.0)
    row = np.vstack([np.hstack([H, -H]), np.concatenate([np.ones(n), -np.ones(n)])[None, :]])
    cost = np.concatenate([ca, -cb])
    lo, hi = np.zeros(2 * n), np.full(2 * n, np.inf)
    rhs = np.append(target, 1.0)
    # superhedge: long lambda^a at the ask, short lambda^b at the bid
    up = solve(build(cost, (row, [GE] * (n + 1), rhs), lo, hi), backend)
    # subhedge: long lambda^b valued at the bid, short lambda^a at the ask
    down = solve(build(cost, (-row, [LE] * (n + 1), rhs), lo, hi), backend)
    if not (up.ok and down.ok):
        raise ArbitrageError(f"enhancement LP failed at strike index {m} ({up.status}/{down.status})")
    return up.value, -down.value


def enhance(chain: QuoteChain, backend: str = "auto", check: bool = True) -> EnhancedChain:
    """Replace every call quote by the best super/subhedging price from the other quotes."""
    if chain.has_puts or np.any(np.isnan(chain.call_bid)) or np.any(np.isnan(chain.call_ask)):
        chain = prepare(chain)
    if check:
        ok, wit = feasibility_check(chain, backend)
        if not ok:
            raise ArbitrageError("quotes admit no calibrated model", wit)
    F = chain.forward
    K, cb, ca = chain.strikes / F, chain.call_bid / F, chain.call_ask / F
    asks = np.empty(K.size)
    bids = np.empty(K.size)
    for m in range(K.size):
        a, b = _enhance_one(K, cb, ca, m, backend)
        asks[m], bids[m] = a, b
    # clip in original units so the band containment is exact
    asks = np.minimum(asks * F, chain.call_ask)
    bids = np.maximum(bids * F, chain.call_bid)
    asks[0] = bids[0] = F
    return EnhancedChain(F, chain.strikes, bids, asks, chain.call_bid.copy(), chain.call_ask.copy(),
                         truncation_index(asks, F))


def truncation_index(asks: np.ndarray, forward: float, tol: float = 1e-12) -> int:
    steps = np.flatnonzero(asks[1:] < asks[:-1] - tol * forward) + 1
    return int(steps[-1]) if steps.size else 0


@dataclass
class EnhancedReport:
    consistency: bool
    monotonicity: bool
    convexity: bool
    max_violation: dict = field(default_factory=dict)
    witness: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.consistency and self.monotonicity and self.convexity


def validate_enhanced(e: EnhancedChain, tol: float = 1e-8) -> EnhancedReport:
    """Consistency, monotonicity from the forward and ask convexity on all strike triples.

    Tolerances are relative to the forward.
    """
    F = e.forward
    t = tol * F
    cons = float(np.max(e.bid - e.ask))
    mono = float(max(np.max(np.diff(e.ask)), np.max(np.diff(e.bid)),
                     abs(e.ask[0] - F), abs(e.bid[0] - F)))
    K, c = e.strikes, e.ask
    worst, triple = -np.inf, None
    n = K.size
    for lo in range(n - 2):
        for hi in range(lo + 2, n):
            mid = np.arange(lo + 1, hi)
            g = (K[hi] - K[mid]) / (K[hi] - K[lo])
            excess = c[mid] - (g * c[lo] + (1 - g) * c[hi])
            j = int(np.argmax(excess))
            if excess[j] > worst:
                worst, triple = float(excess[j]), (lo, int(mid[j]), hi)
    worst = max(worst, 0.0) if triple is not None else 0.0
    rep = EnhancedReport(cons <= t, mono <= t, worst <= t,
                         {"consistency": max(cons, 0.0), "monotonicity": max(mono, 0.0), "convexity": worst})
    if not rep.consistency:
        i = int(np.argmax(e.bid - e.ask))
        rep.witness["consistency"] = {"strike": float(K[i])}
    if not rep.monotonicity:
        rep.witness["monotonicity"] = {"strike": float(K[int(np.argmax(np.diff(e.ask)) + 1)])}
    if not rep.convexity:
        rep.witness["convexity"] = {"triple": [float(K[i]) for i in triple]}
    return rep


def _lower_hull(x: np.ndarray, y: np.ndarray) -> list:
    """Indices of the lower convex hull of points sorted by ``x`` (monotone chain)."""
    idx = []
    for i in range(x.size):
        while len(idx) >= 2:
            a, b = idx[-2], idx[-1]
            if (y[b] - y[a]) * (x[i] - x[a]) >= (y[i] - y[a]) * (x[b] - x[a]):
                idx.pop()
            else:
                break
        idx.append(i)
    return idx


def ask_marginal(e: EnhancedChain) -> DiscreteMeasure:
    """Discrete measure on the strikes (plus one synthetic strike) repricing every enhanced ask."""
    F = e.forward
    M = e.truncation
    if M == 0:
        raise DegenerateMarket("all enhanced asks equal the forward")
    K = e.strikes[: M + 1] / F
    c = e.ask[: M + 1] / F
    slope_last = (c[M] - c[M - 1]) / (K[M] - K[M - 1])
    K_end = K[M] - c[M] / slope_last
    knots = np.append(K, K_end)
    vals = np.append(c, 0.0)
    if K_end <= K[M]:
        knots, vals = K, c
    hull = _lower_hull(knots, vals)
    # points above the hull by more than round-off are a genuine convexity breach
    gap = vals - np.interp(knots, knots[hull], vals[hull])
    if gap.max() > 1e-9:
        raise ArbitrageError("enhanced asks are not convex", {"strike": float(knots[int(np.argmax(gap))] * F)})
    knots, vals = knots[hull], vals[hull]
    slopes = np.concatenate([[-1.0], np.diff(vals) / np.diff(knots), [0.0]])
    w = np.maximum(np.diff(slopes), 0.0)
    return DiscreteMeasure.from_unsorted(knots * F, w, normalize=True)


# ---------------------------------------------------------------------------
# synthetic chains


def random_mixture(rng: np.random.Generator, forward: float = 1.0, max_components: int = 3) -> MixtureMarginal:
    J = int(rng.integers(1, max_components + 1))
    w = rng.dirichlet(np.ones(J))
    z = forward * np.exp(rng.normal(0.0, 0.08, J))
    z *= forward / np.dot(w, z)
    s = rng.uniform(0.05, 0.35, J)
    return MixtureMarginal(z, s, w)


def random_chain(rng: np.random.Generator, n_strikes: int | None = None, forward: float | None = None,
                 drop: float = 0.1, max_spread: float = 0.25) -> tuple[QuoteChain, MixtureMarginal]:
    """Arbitrage-free chain: exact mixture prices widened by strike-dependent spreads.

    Every band contains the generating model's price, so the chain is
    consistent by construction. Random quotes are removed with probability ``drop``.
    """
    F = float(rng.uniform(0.5, 2.0)) if forward is None else float(forward)
    m = random_mixture(rng, F)
    M = int(rng.integers(4, 26)) if n_strikes is None else int(n_strikes)
    K = np.sort(rng.uniform(0.5 * F, 1.6 * F, M))
    K = np.unique(np.round(K / F, 4) * F)
    c = m.call_price(K)
    p = c - F + K
    wing = np.abs(np.log(K / F))
    def widen(v, lo_bound, hi_bound):
        sb = rng.uniform(0.0, max_spread, v.size) * (1 + 3 * wing)
        sa = rng.uniform(0.0, max_spread, v.size) * (1 + 3 * wing)
        bid = np.clip(v * (1 - np.minimum(sb, 0.95)), lo_bound, v)
        ask = np.clip(v * (1 + sa) + 1e-4 * F * rng.uniform(size=v.size), v, hi_bound)
        return bid, ask
    cb, ca = widen(c, np.maximum(F - K, 0.0), F)
    pb, pa = widen(p, np.maximum(K - F, 0.0), K)
    for arr in (cb, ca, pb, pa):
        arr[rng.uniform(size=arr.size) < drop] = np.nan
    return QuoteChain.create(F, K, pb, pa, cb, ca), m
