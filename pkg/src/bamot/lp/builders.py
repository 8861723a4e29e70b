"""Discretised primal and dual superhedging programs for one and two maturities.

All programs are built in units of the spot ``x0``: grid points, strikes and
prices are divided by ``x0`` so that coefficients are of order one and the
solver tolerances are scale-free. ``LinearProgram.meta['scale']`` records the
factor that converts the optimal value back to price units.

Variable layouts are recorded in ``meta['layout']`` as ``name -> slice``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import EQ, GE, LE, LinearProgram


@dataclass(frozen=True)
class BandQuotes:
    """Call strikes with bid and ask prices for one maturity."""

    strikes: np.ndarray
    bid: np.ndarray
    ask: np.ndarray

    def __post_init__(self):
        k = np.atleast_1d(np.asarray(self.strikes, float))
        b = np.atleast_1d(np.asarray(self.bid, float))
        a = np.atleast_1d(np.asarray(self.ask, float))
        if not (k.shape == b.shape == a.shape):
            raise ValueError("strikes, bid and ask must have equal length")
        if k.size and (np.any(np.diff(k) <= 0) or k[0] < 0):
            raise ValueError("strikes must be nonnegative and strictly increasing")
        if np.any(b > a + 1e-12 * np.maximum(1.0, np.abs(a))):
            i = int(np.argmax(b - a))
            raise ValueError(f"bid above ask at strike {k[i]}")
        object.__setattr__(self, "strikes", k)
        object.__setattr__(self, "bid", b)
        object.__setattr__(self, "ask", a)

    @property
    def size(self) -> int:
        return self.strikes.size

    @classmethod
    def from_marginals(cls, strikes, bid, ask) -> "BandQuotes":
        strikes = np.asarray(strikes, float)
        return cls(strikes, bid.call_price(strikes), ask.call_price(strikes))


@dataclass(frozen=True)
class DualSpecSingle:
    """Single-maturity superhedging data.

    ``h_values`` is the payoff sampled on ``grid``; ``terminal_slope`` is its
    slope at infinity (``None`` drops the asymptotic row).
    """

    x0: float
    quotes: BandQuotes
    grid: np.ndarray
    h_values: np.ndarray
    terminal_slope: float | None = None

    def __post_init__(self):
        g = np.asarray(self.grid, float)
        if g.ndim != 1 or np.any(np.diff(g) <= 0) or g[0] < 0:
            raise ValueError("grid must be nonnegative and strictly increasing")
        h = np.asarray(self.h_values, float)
        if h.shape != g.shape or not np.all(np.isfinite(h)):
            raise ValueError("payoff must be finite on the grid")
        if np.any(self.quotes.ask > self.x0 * (1 + 1e-12)) or np.any(
                self.quotes.bid < np.maximum(self.x0 - self.quotes.strikes, 0.0) - 1e-12 * self.x0):
            raise ValueError("call prices violate the model-free bounds (x0-K)^+ <= c <= x0")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "h_values", h)


PrimalSpecSingle = DualSpecSingle


@dataclass(frozen=True)
class DualSpecTwo:
    """Two-maturity data on the product grid ``grid1 x grid2``."""

    x0: float
    quotes: tuple  # (BandQuotes, BandQuotes)
    grid1: np.ndarray
    grid2: np.ndarray
    h_values: np.ndarray  # shape (len(grid1), len(grid2))
    terminal_slope: float | None = None

    def __post_init__(self):
        g1 = np.asarray(self.grid1, float)
        g2 = np.asarray(self.grid2, float)
        h = np.asarray(self.h_values, float)
        if h.shape != (g1.size, g2.size) or not np.all(np.isfinite(h)):
            raise ValueError("payoff must be finite on the product grid")
        if len(self.quotes) != 2:
            raise ValueError("need quotes for two maturities")
        object.__setattr__(self, "grid1", g1)
        object.__setattr__(self, "grid2", g2)
        object.__setattr__(self, "h_values", h)


PrimalSpecTwo = DualSpecTwo


def _hinge(u: np.ndarray, k: np.ndarray) -> np.ndarray:
    return np.maximum(u[:, None] - k[None, :], 0.0)


def _layout(*sizes):
    out, start = {}, 0
    for name, n in sizes:
        out[name] = slice(start, start + n)
        start += n
    return out, start


def build_dual_single(spec: DualSpecSingle) -> LinearProgram:
    """Cheapest cash + forward + bid/ask call portfolio dominating ``h`` on the grid."""
    s = spec.x0
    u = spec.grid / s
    k = spec.quotes.strikes / s
    M = k.size
    layout, n = _layout(("a", 1), ("b", 1), ("ca", M), ("cb", M))
    H = _hinge(u, k)
    rows = sp.csr_matrix(np.hstack([np.ones((u.size, 1)), u[:, None], H, -H]))
    senses = [GE] * u.size
    rhs = list(spec.h_values / s)
    names = [f"grid_{i}" for i in range(u.size)]
    if spec.terminal_slope is not None:
        term = np.concatenate([[0.0, 1.0], np.ones(M), -np.ones(M)])
        rows = sp.vstack([rows, term[None, :]]).tocsr()
        senses.append(GE)
        rhs.append(spec.terminal_slope)
        names.append("terminal_slope")
    c = np.concatenate([[1.0, 1.0], spec.quotes.ask / s, -spec.quotes.bid / s])
    lo = np.concatenate([[-np.inf, -np.inf], np.zeros(2 * M)])
    hi = np.full(n, np.inf)
    var_names = ["a", "b"] + [f"ca_{m}" for m in range(M)] + [f"cb_{m}" for m in range(M)]
    return LinearProgram(c, rows, senses, np.array(rhs), lo, hi, 0.0, var_names, names,
                         {"scale": s, "layout": layout, "kind": "dual1"})


def build_primal_single(spec: PrimalSpecSingle, tail_mass: bool = False) -> LinearProgram:
    """Most expensive grid measure with mean ``x0`` whose call prices lie in the bands.

    With ``tail_mass`` an extra nonnegative variable carries first moment
    escaping to infinity; the program is then the exact LP dual of
    :func:`build_dual_single` with the terminal-slope row.
    """
    s = spec.x0
    u = spec.grid / s
    k = spec.quotes.strikes / s
    M = k.size
    I = u.size
    layout, n = _layout(("p", I), ("t", 1 if tail_mass else 0))
    H = _hinge(u, k)
    slope = spec.terminal_slope if spec.terminal_slope is not None else 0.0
    tcol = np.ones((1, 1)) if tail_mass else np.zeros((1, 0))

    def with_t(block, tv):
        return np.hstack([block, np.full((block.shape[0], tcol.shape[1]), tv)])

    A = np.vstack([
        with_t(np.ones((1, I)), 0.0),
        with_t(u[None, :], 1.0),
        with_t(H.T, 1.0),
        with_t(H.T, 1.0),
    ])
    senses = [EQ, EQ] + [LE] * M + [GE] * M
    rhs = np.concatenate([[1.0, 1.0], spec.quotes.ask / s, spec.quotes.bid / s])
    c = -np.concatenate([spec.h_values / s, [slope] if tail_mass else []])
    names = ["mass", "mean"] + [f"ask_{m}" for m in range(M)] + [f"bid_{m}" for m in range(M)]
    var_names = [f"p_{i}" for i in range(I)] + (["t"] if tail_mass else [])
    return LinearProgram(c, sp.csr_matrix(A), senses, rhs, np.zeros(n), np.full(n, np.inf), 0.0,
                         var_names, names, {"scale": s, "layout": layout, "kind": "primal1", "negated": True})


def build_dual_two(spec: DualSpecTwo) -> LinearProgram:
    """Two-maturity dual with a piecewise-constant delta ``Delta(x1)`` on the first grid.

    With a terminal slope, one asymptotic row per first-maturity grid point
    bounds the slope in ``x2`` of the hedge from below.
    """
    s = spec.x0
    u1, u2 = spec.grid1 / s, spec.grid2 / s
    q1, q2 = spec.quotes
    k1, k2 = q1.strikes / s, q2.strikes / s
    M1, M2, n1, n2 = k1.size, k2.size, u1.size, u2.size
    layout, n = _layout(("a", 1), ("b1", 1), ("b2", 1), ("c1a", M1), ("c1b", M1),
                        ("c2a", M2), ("c2b", M2), ("delta", n1))
    H1 = _hinge(u1, k1)
    H2 = _hinge(u2, k2)
    ii, jj = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    R = n1 * n2
    dense_part = np.hstack([np.ones((R, 1)), u1[ii][:, None], u2[jj][:, None],
                            H1[ii], -H1[ii], H2[jj], -H2[jj]])
    delta_part = sp.csr_matrix((u2[jj] - u1[ii], (np.arange(R), ii)), shape=(R, n1))
    A = sp.hstack([sp.csr_matrix(dense_part), delta_part]).tocsr()
    senses = [GE] * R
    rhs = list(spec.h_values.ravel() / s)
    if spec.terminal_slope is not None:
        base = np.concatenate([[0.0, 0.0, 1.0], np.zeros(2 * M1), np.ones(M2), -np.ones(M2)])
        T = sp.hstack([sp.csr_matrix(np.tile(base, (n1, 1))), sp.eye(n1)]).tocsr()
        A = sp.vstack([A, T]).tocsr()
        senses += [GE] * n1
        rhs += [spec.terminal_slope] * n1
    c = np.concatenate([[1.0, 1.0, 1.0], q1.ask / s, -q1.bid / s, q2.ask / s, -q2.bid / s, np.zeros(n1)])
    lo = np.concatenate([[-np.inf] * 3, np.zeros(2 * M1 + 2 * M2), np.full(n1, -np.inf)])
    return LinearProgram(c, A, senses, np.array(rhs), lo, np.full(n, np.inf), 0.0, None, None,
                         {"scale": s, "layout": layout, "kind": "dual2", "shape": (n1, n2)})


def build_primal_two(spec: PrimalSpecTwo, tail_mass: bool = False) -> LinearProgram:
    """Martingale coupling on the product grid with calls inside both maturities' bands.

    Without ``tail_mass`` this is the LP dual of :func:`build_dual_two` without
    terminal rows; with it, of the program including them.
    """
    s = spec.x0
    u1, u2 = spec.grid1 / s, spec.grid2 / s
    q1, q2 = spec.quotes
    k1, k2 = q1.strikes / s, q2.strikes / s
    M1, M2, n1, n2 = k1.size, k2.size, u1.size, u2.size
    nt = n1 if tail_mass else 0
    layout, n = _layout(("p", n1 * n2), ("t", nt))
    ii, jj = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    H1 = _hinge(u1, k1)[ii]  # (R, M1)
    H2 = _hinge(u2, k2)[jj]
    blocks = []
    senses, rhs, names = [], [], []

    def add(block, t_block, sense, b, name):
        blocks.append(sp.hstack([sp.csr_matrix(block), sp.csr_matrix(t_block)]))
        senses.extend([sense] * block.shape[0])
        rhs.extend(np.broadcast_to(b, (block.shape[0],)))
        names.extend([f"{name}_{r}" for r in range(block.shape[0])] if block.shape[0] > 1 else [name])

    R = n1 * n2
    add(np.ones((1, R)), np.zeros((1, nt)), EQ, 1.0, "mass")
    add(u1[ii][None, :], np.zeros((1, nt)), EQ, 1.0, "mean1")
    add(u2[jj][None, :], np.ones((1, nt)), EQ, 1.0, "mean2")
    add(H1.T, np.zeros((M1, nt)), LE, q1.ask / s, "ask1")
    add(H1.T, np.zeros((M1, nt)), GE, q1.bid / s, "bid1")
    add(H2.T, np.ones((M2, nt)), LE, q2.ask / s, "ask2")
    add(H2.T, np.ones((M2, nt)), GE, q2.bid / s, "bid2")
    mart = sp.csr_matrix((u2[jj] - u1[ii], (ii, np.arange(R))), shape=(n1, R))
    blocks.append(sp.hstack([mart, sp.eye(n1) if tail_mass else sp.csr_matrix((n1, 0))]))
    senses += [EQ] * n1
    rhs += [0.0] * n1
    names += [f"mart_{i}" for i in range(n1)]
    A = sp.vstack(blocks).tocsr()
    slope = spec.terminal_slope if spec.terminal_slope is not None else 0.0
    c = -np.concatenate([spec.h_values.ravel() / s, np.full(nt, slope)])
    return LinearProgram(c, A, senses, np.array(rhs, float), np.zeros(n), np.full(n, np.inf), 0.0,
                         None, names, {"scale": s, "layout": layout, "kind": "primal2",
                                       "negated": True, "shape": (n1, n2)})


def price_value(lp: LinearProgram, value: float) -> float:
    """Convert a solver objective back to price units."""
    v = -value if lp.meta.get("negated") else value
    return v * lp.meta.get("scale", 1.0)
