"""Probability measures on the half-line and convex-order machinery.

Two concrete marginals are supported: :class:`DiscreteMeasure` (finitely many
atoms) and :class:`MixtureMarginal` (a finite mixture of log-normal laws).
Both expose call prices, CDF, potential function, barycenter and quantiles,
which is all the downstream pricing code needs.

Log-normal components are parametrised by their mean ``z`` and *total*
log-volatility ``sigma`` over the horizon, i.e. ``X = z * exp(sigma*G - sigma^2/2)``
with ``G`` standard normal. The maturity is carried along as metadata only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.special import ndtr

DEGENERATE_VOL = 1e-8
_WEIGHT_TOL = 1e-12


class MeasureError(ValueError):
    """Raised when a measure or call curve violates its invariants."""


def black_call(forward, strike, total_vol):
    """Undiscounted Black call price with total volatility ``total_vol``.

    Vectorised over all arguments. ``total_vol`` below ``DEGENERATE_VOL`` is
    treated as a point mass at ``forward``.
    """
    forward, strike, total_vol = np.broadcast_arrays(
        np.asarray(forward, float), np.asarray(strike, float), np.asarray(total_vol, float)
    )
    out = np.array(np.maximum(forward - strike, 0.0))
    live = (strike > 0) & (total_vol >= DEGENERATE_VOL)
    if np.any(live):
        f, k, s = forward[live], strike[live], total_vol[live]
        d1 = (np.log(f) - np.log(k) + 0.5 * s * s) / s
        out[live] = f * ndtr(d1) - k * ndtr(d1 - s)
    return out if out.ndim else float(out)


def black_put(forward, strike, total_vol):
    """Undiscounted Black put price, computed directly rather than through parity."""
    forward, strike, total_vol = np.broadcast_arrays(
        np.asarray(forward, float), np.asarray(strike, float), np.asarray(total_vol, float)
    )
    out = np.array(np.maximum(strike - forward, 0.0))
    live = (strike > 0) & (total_vol >= DEGENERATE_VOL)
    if np.any(live):
        f, k, s = forward[live], strike[live], total_vol[live]
        d1 = (np.log(f) - np.log(k) + 0.5 * s * s) / s
        out[live] = k * ndtr(s - d1) - f * ndtr(-d1)
    return out if out.ndim else float(out)


def black_vega(forward, strike, total_vol):
    """Sensitivity of :func:`black_call` to the total volatility."""
    forward, strike, total_vol = (np.asarray(a, float) for a in (forward, strike, total_vol))
    d1 = (np.log(forward / strike) + 0.5 * total_vol**2) / total_vol
    return forward * np.exp(-0.5 * d1 * d1) / np.sqrt(2 * np.pi)


def _bisect_increasing(fun, targets, lo, hi, iters=200):
    """Vectorised bisection for ``fun(x) = targets`` with ``fun`` nondecreasing."""
    lo = np.full_like(targets, lo, dtype=float)
    hi = np.full_like(targets, hi, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = fun(mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(hi))):
            break
    return 0.5 * (lo + hi)


class Marginal:
    """Common interface of the one-dimensional laws used throughout the package."""

    def call_price(self, strike):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, q):
        raise NotImplementedError

    @property
    def barycenter(self) -> float:
        raise NotImplementedError

    def atoms_or_empty(self) -> np.ndarray:
        return np.empty(0)

    def put_price(self, strike):
        # parity: E(K-X)^+ = C(K) - E[X] + K
        strike = np.asarray(strike, float)
        return self.call_price(strike) - self.barycenter + strike

    def potential(self, x):
        """Potential function ``U(x) = E|X - x|``."""
        x = np.asarray(x, float)
        return 2.0 * self.call_price(x) + x - self.barycenter

    def expect(self, fun) -> float:
        raise NotImplementedError

    def support_range(self, q_lo: float = 1e-6, q_hi: float = 1 - 1e-6) -> tuple[float, float]:
        lo, hi = self.quantile(np.array([q_lo, q_hi]))
        return float(lo), float(hi)

    def call_curve(self) -> "CallCurve":
        return MarginalCallCurve(self)


@dataclass(frozen=True)
class DiscreteMeasure(Marginal):
    """Finitely supported probability measure ``sum_i w_i delta_{x_i}``."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_1d(np.asarray(self.atoms, float))
        weights = np.atleast_1d(np.asarray(self.weights, float))
        if atoms.shape != weights.shape or atoms.ndim != 1 or atoms.size == 0:
            raise MeasureError("atoms and weights must be nonempty 1-d arrays of equal length")
        if np.any(atoms < 0) or np.any(np.diff(atoms) <= 0):
            raise MeasureError("atoms must be nonnegative and strictly increasing")
        if np.any(weights < 0):
            raise MeasureError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
            raise MeasureError(f"weights sum to {weights.sum():.15g}, not 1")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        # suffix sums drive O(log n) call-price and CDF evaluation
        tail_w = np.concatenate([np.cumsum(weights[::-1])[::-1], [0.0]])
        tail_wx = np.concatenate([np.cumsum((weights * atoms)[::-1])[::-1], [0.0]])
        object.__setattr__(self, "_tail_w", tail_w)
        object.__setattr__(self, "_tail_wx", tail_wx)

    @classmethod
    def from_unsorted(cls, atoms: Iterable[float], weights: Iterable[float], normalize: bool = False):
        """Build from arbitrary atoms, merging duplicates and dropping zero weights."""
        atoms = np.asarray(list(atoms), float)
        weights = np.asarray(list(weights), float)
        order = np.argsort(atoms, kind="stable")
        atoms, weights = atoms[order], weights[order]
        uniq, inverse = np.unique(atoms, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inverse, weights)
        keep = merged > 0
        uniq, merged = uniq[keep], merged[keep]
        if normalize:
            merged = merged / merged.sum()
        return cls(uniq, merged)

    @classmethod
    def dirac(cls, x0: float) -> "DiscreteMeasure":
        return cls(np.array([float(x0)]), np.array([1.0]))

    @property
    def barycenter(self) -> float:
        return float(self._tail_wx[0])

    def atoms_or_empty(self) -> np.ndarray:
        return self.atoms

    def call_price(self, strike):
        strike = np.asarray(strike, float)
        idx = np.searchsorted(self.atoms, strike, side="right")
        return np.maximum(self._tail_wx[idx] - strike * self._tail_w[idx], 0.0)

    def cdf(self, x):
        x = np.asarray(x, float)
        idx = np.searchsorted(self.atoms, x, side="right")
        return 1.0 - self._tail_w[idx]

    def quantile(self, q):
        q = np.asarray(q, float)
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(cum, q - 1e-15, side="left")
        return self.atoms[np.minimum(idx, self.atoms.size - 1)]

    def expect(self, fun) -> float:
        return float(np.dot(self.weights, fun(self.atoms)))

    def to_json(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}


@dataclass(frozen=True)
class MixtureMarginal(Marginal):
    """Finite mixture of log-normal laws.

    ``means[j]``, ``vols[j]`` and ``weights[j]`` are the mean, total log-volatility
    and mixing weight of component ``j``. Components with vol below
    ``DEGENERATE_VOL`` behave as atoms at their mean.
    """

    means: np.ndarray
    vols: np.ndarray
    weights: np.ndarray
    maturity: str | None = None

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(a, float)) for a in (self.means, self.vols, self.weights)]
        means, vols, weights = arrs
        if not (means.shape == vols.shape == weights.shape) or means.ndim != 1 or means.size == 0:
            raise MeasureError("means, vols and weights must be nonempty 1-d arrays of equal length")
        if np.any(means <= 0) or np.any(vols <= 0) or np.any(weights < 0):
            raise MeasureError("means and vols must be positive, weights nonnegative")
        if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
            raise MeasureError(f"weights sum to {weights.sum():.15g}, not 1")
        for a in arrs:
            a.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "vols", vols)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def lognormal(cls, forward: float, vol: float, maturity: float = 1.0, label: str | None = None):
        """Black-Scholes marginal: annualised ``vol`` over ``maturity`` years."""
        return cls(np.array([forward]), np.array([vol * np.sqrt(maturity)]), np.array([1.0]), label)

    @classmethod
    def from_components(cls, components: Sequence[tuple[float, float, float]], normalize=False,
                        maturity: str | None = None):
        z, s, w = (np.array(c, float) for c in zip(*components))
        if normalize:
            w = w / w.sum()
        return cls(z, s, w, maturity)

    @property
    def barycenter(self) -> float:
        return float(np.dot(self.weights, self.means))

    @property
    def n_components(self) -> int:
        return self.means.size

    def _z_s_w(self, x):
        x = np.asarray(x, float)
        return x[..., None], self.means, self.vols, self.weights

    def atoms_or_empty(self) -> np.ndarray:
        return np.unique(self.means[self.vols < DEGENERATE_VOL])

    def call_price(self, strike):
        k, z, s, w = self._z_s_w(strike)
        return black_call(z, k, s) @ w

    def survival(self, x):
        """``P(X > x)``, computed directly to avoid cancellation in the far tail."""
        x, z, s, w = self._z_s_w(x)
        live = s >= DEGENERATE_VOL
        with np.errstate(divide="ignore"):
            d2 = (np.log(z / np.maximum(x, 1e-300)) - 0.5 * s * s) / np.where(live, s, 1.0)
        out = np.where(live, ndtr(d2), (z > x).astype(float))
        out = np.where(x <= 0, np.where(live, 1.0, out), out)
        return out @ w

    def cdf(self, x):
        return 1.0 - self.survival(x)

    def partial_moments(self, a, b):
        """Return ``(P(a < X <= b), E[X; a < X <= b])`` elementwise."""
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        mass = self.survival(a) - self.survival(b)
        return mass, self._upper_moment(a) - self._upper_moment(b)

    def _upper_moment(self, x):
        """``E[X; X > x]``."""
        x, z, s, w = self._z_s_w(x)
        live = s >= DEGENERATE_VOL
        with np.errstate(divide="ignore"):
            d1 = (np.log(z / np.maximum(x, 1e-300)) + 0.5 * s * s) / np.where(live, s, 1.0)
        frac = np.where(live, ndtr(d1), (z > x).astype(float))
        frac = np.where(np.isinf(x), 0.0, frac)
        return (z * frac) @ w

    def density(self, x):
        x, z, s, w = self._z_s_w(x)
        live = s >= DEGENERATE_VOL
        with np.errstate(divide="ignore", invalid="ignore"):
            ss = np.where(live, s, 1.0)
            u = (np.log(np.maximum(x, 1e-300) / z) + 0.5 * ss * ss) / ss
            dens = np.exp(-0.5 * u * u) / (np.maximum(x, 1e-300) * ss * np.sqrt(2 * np.pi))
        dens = np.where(live & (x > 0), dens, 0.0)
        return dens @ w

    def max_density(self) -> float:
        """Supremum of the density, located by a dense scan plus local refinement."""
        lo, hi = self.support_range(1e-7, 1 - 1e-7)
        xs = np.linspace(lo, hi, 20001)
        d = self.density(xs)
        i = int(np.argmax(d))
        a, b = xs[max(i - 1, 0)], xs[min(i + 1, xs.size - 1)]
        phi = (np.sqrt(5) - 1) / 2
        for _ in range(100):
            c, e = b - phi * (b - a), a + phi * (b - a)
            if self.density(c) > self.density(e):
                b = e
            else:
                a = c
        return float(max(d[i], self.density(0.5 * (a + b))))

    def quantile(self, q):
        q = np.atleast_1d(np.asarray(q, float))
        hi = float(np.max(self.means * np.exp(10 * self.vols + 1.0)))
        return _bisect_increasing(self.cdf, q, 0.0, hi)

    def expect(self, fun, lo=None, hi=None, points=None) -> float:
        from scipy.integrate import quad

        lo_, hi_ = self.support_range(1e-12, 1 - 1e-12)
        lo = lo_ if lo is None else lo
        hi = hi_ if hi is None else hi
        val = 0.0
        live = self.vols >= DEGENERATE_VOL
        if np.any(~live):
            val += float(np.dot(self.weights[~live], fun(self.means[~live])))
        if np.any(live):
            part = MixtureMarginal(self.means[live], self.vols[live],
                                   self.weights[live] / self.weights[live].sum())
            scale = self.weights[live].sum()
            brk = None if points is None else [p for p in points if lo < p < hi]
            res, _ = quad(lambda t: float(fun(np.array([t]))[0]) * float(part.density(t)),
                          lo, hi, points=brk, limit=500, epsabs=1e-13, epsrel=1e-11)
            val += scale * res
        return val

    def to_json(self, forward: float | None = None) -> dict:
        out = {
            "components": [
                {"mean": float(z), "vol": float(s), "weight": float(w)}
                for z, s, w in zip(self.means, self.vols, self.weights)
            ],
            "forward": self.barycenter if forward is None else forward,
        }
        if self.maturity is not None:
            out["maturity"] = self.maturity
        return out


def mixture_combine(parts: Sequence[tuple[float, Marginal]]) -> Marginal:
    """Convex combination ``sum_k a_k m_k`` of marginals of one concrete type."""
    parts = [(float(a), m) for a, m in parts if a > 0]
    if len(parts) == 1:
        return parts[0][1]
    if all(isinstance(m, MixtureMarginal) for _, m in parts):
        z = np.concatenate([m.means for _, m in parts])
        s = np.concatenate([m.vols for _, m in parts])
        w = np.concatenate([a * m.weights for a, m in parts])
        return MixtureMarginal(z, s, w / w.sum(), parts[0][1].maturity)
    if all(isinstance(m, DiscreteMeasure) for _, m in parts):
        atoms = np.concatenate([m.atoms for _, m in parts])
        weights = np.concatenate([a * m.weights for a, m in parts])
        return DiscreteMeasure.from_unsorted(atoms, weights, normalize=True)
    raise TypeError("can only combine marginals of the same concrete type")


def mid_marginal(bid: Marginal, ask: Marginal) -> Marginal:
    return mixture_combine([(0.5, bid), (0.5, ask)])


def deform(s: Marginal, mid: Marginal, gamma: float) -> Marginal:
    """Move ``s`` towards ``mid``: ``(1 - gamma) s + gamma mid``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    if abs(s.barycenter - mid.barycenter) > 1e-9 * max(1.0, abs(s.barycenter)):
        raise MeasureError("deform requires equal barycenters")
    if gamma == 0.0:
        return s
    if gamma == 1.0:
        return mid
    return mixture_combine([(1.0 - gamma, s), (gamma, mid)])


# ---------------------------------------------------------------------------
# module-level operation surface


def call_price(m: Marginal, strike):
    return m.call_price(strike)


def cdf(m: Marginal, x):
    return m.cdf(x)


def potential(m: Marginal, x):
    return m.potential(x)


def barycenter(m: Marginal) -> float:
    return m.barycenter


def verification_grid(*measures: Marginal, n: int = 512) -> np.ndarray:
    """Strikes on which call-price domination is checked.

    Union of all atoms, each measure's 1e-6 / 1-1e-6 quantiles and a
    quantile grid of ``n`` points per measure (plus zero).
    """
    pts = [np.array([0.0])]
    qs = np.linspace(1e-6, 1 - 1e-6, n)
    for m in measures:
        pts.append(m.atoms_or_empty())
        if isinstance(m, DiscreteMeasure):
            continue
        pts.append(m.quantile(qs))
    return np.unique(np.concatenate(pts))


@dataclass(frozen=True)
class OrderCheck:
    holds: bool
    witness: float | None = None
    violation: float = 0.0

    def __bool__(self):
        return self.holds


def convex_order_leq(mu: Marginal, nu: Marginal, tol: float | None = None) -> OrderCheck:
    """Test ``mu <=_c nu`` via barycenters and call prices on a verification grid.

    ``tol`` defaults to ``1e-8 * barycenter``. On failure the result carries a
    violating strike as witness (0 for a barycenter mismatch).
    """
    if tol is None:
        tol = 1e-8 * max(abs(nu.barycenter), 1e-300)
    if tol <= 0:
        raise ValueError("tol must be positive")
    gap = mu.barycenter - nu.barycenter
    if abs(gap) > tol:
        return OrderCheck(False, 0.0, abs(gap))
    ks = verification_grid(mu, nu)
    diff = mu.call_price(ks) - nu.call_price(ks)
    i = int(np.argmax(diff))
    if diff[i] > tol:
        return OrderCheck(False, float(ks[i]), float(diff[i]))
    return OrderCheck(True, None, float(max(diff[i], 0.0)))


# ---------------------------------------------------------------------------
# call curves and envelopes


class CallCurve:
    """Convex, nonincreasing call-price function of strike."""

    forward: float

    def __call__(self, strike):
        raise NotImplementedError

    def sample_points(self, n: int = 2048) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class MarginalCallCurve(CallCurve):
    marginal: Marginal

    @property
    def forward(self) -> float:
        return self.marginal.barycenter

    def __call__(self, strike):
        return self.marginal.call_price(strike)

    def sample_points(self, n: int = 2048) -> np.ndarray:
        return verification_grid(self.marginal, n=n)


@dataclass(frozen=True)
class PiecewiseLinearCallCurve(CallCurve):
    """Call curve interpolating ``values`` at ``knots`` (first knot is 0).

    Beyond the last knot the curve continues with the last slope until it
    reaches zero, and is zero afterwards.
    """

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, float)
        v = np.asarray(self.values, float)
        if k[0] != 0.0 or np.any(np.diff(k) <= 0):
            raise MeasureError("knots must start at 0 and increase strictly")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    @property
    def forward(self) -> float:
        return float(self.values[0])

    def _tail(self):
        k, v = self.knots, self.values
        slope = (v[-1] - v[-2]) / (k[-1] - k[-2]) if k.size > 1 else -1.0
        if v[-1] <= 0:
            return k[-1], slope
        if slope >= 0:
            raise MeasureError("call curve does not decay to zero")
        return k[-1] - v[-1] / slope, slope

    def __call__(self, strike):
        strike = np.asarray(strike, float)
        k, v = self.knots, self.values
        zero_at, slope = self._tail()
        inside = np.interp(strike, k, v)
        beyond = np.maximum(v[-1] + slope * (strike - k[-1]), 0.0)
        return np.where(strike <= k[-1], inside, np.where(strike >= zero_at, 0.0, beyond))

    def sample_points(self, n: int = 2048) -> np.ndarray:
        zero_at, _ = self._tail()
        return np.unique(np.concatenate([self.knots, [zero_at]]))

    def to_measure(self) -> DiscreteMeasure:
        """The measure whose call curve this is (second differences of the curve)."""
        zero_at, _ = self._tail()
        k = self.knots
        v = self.values
        if zero_at > k[-1]:
            k = np.append(k, zero_at)
            v = np.append(v, 0.0)
        slopes = np.concatenate([[-1.0], np.diff(v) / np.diff(k), [0.0]])
        w = np.diff(slopes)
        w[np.abs(w) < 1e-13] = 0.0
        if np.any(w < 0):
            raise MeasureError("call curve is not convex")
        return DiscreteMeasure.from_unsorted(k, w, normalize=True)


@dataclass(frozen=True)
class MaxCallCurve(CallCurve):
    curves: tuple

    @property
    def forward(self) -> float:
        return self.curves[0].forward

    def __call__(self, strike):
        return np.max([c(strike) for c in self.curves], axis=0)

    def sample_points(self, n: int = 2048) -> np.ndarray:
        return np.unique(np.concatenate([c.sample_points(n) for c in self.curves]))


def _as_curve(c) -> CallCurve:
    return c.call_curve() if isinstance(c, Marginal) else c


def _check_forwards(curves: Sequence[CallCurve]) -> None:
    fwd = curves[0].forward
    for c in curves[1:]:
        if abs(c.forward - fwd) > 1e-9 * max(1.0, abs(fwd)):
            raise MeasureError(f"forward mismatch: {c.forward} vs {fwd}")


def lower_convex_hull(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vertices of the lower convex hull of points sorted by ``x`` (monotone chain)."""
    hx: list[float] = []
    hy: list[float] = []
    for xi, yi in zip(x, y):
        while len(hx) >= 2:
            # drop the middle point if it lies on or above the chord
            cross = (hx[-1] - hx[-2]) * (yi - hy[-2]) - (hy[-1] - hy[-2]) * (xi - hx[-2])
            if cross <= 0:
                hx.pop()
                hy.pop()
            else:
                break
        hx.append(float(xi))
        hy.append(float(yi))
    return np.array(hx), np.array(hy)


def convex_meet(curves: Sequence) -> CallCurve:
    """Call curve of the convex-order infimum of the given curves.

    Greatest convex minorant of the pointwise minimum, sampled on the union of
    the inputs' quantile grids (2048 points each) and anchored at ``(0, forward)``.
    """
    curves = [_as_curve(c) for c in curves]
    if not curves:
        raise ValueError("need at least one curve")
    _check_forwards(curves)
    if len(curves) == 1:
        return curves[0]
    xs = np.unique(np.concatenate([[0.0]] + [c.sample_points(2048) for c in curves]))
    ys = np.min([c(xs) for c in curves], axis=0)
    ys[0] = curves[0].forward
    hx, hy = lower_convex_hull(xs, ys)
    return PiecewiseLinearCallCurve(hx, hy)


def convex_join(curves: Sequence) -> CallCurve:
    """Call curve of the convex-order supremum: the pointwise maximum."""
    curves = [_as_curve(c) for c in curves]
    if not curves:
        raise ValueError("need at least one curve")
    _check_forwards(curves)
    if len(curves) == 1:
        return curves[0]
    return MaxCallCurve(tuple(curves))


@dataclass(frozen=True)
class OrderViolation:
    bid_index: int
    ask_index: int
    strike: float
    excess: float


def check_bid_ask_order(bids: Sequence[Marginal], asks: Sequence[Marginal],
                        tol: float | None = None) -> OrderViolation | None:
    """Check ``bid_i <=_c ask_j`` for every ``i <= j``; return the first violation."""
    if len(bids) != len(asks):
        raise ValueError("need one bid and one ask marginal per maturity")
    for i, b in enumerate(bids):
        for j in range(i, len(asks)):
            res = convex_order_leq(b, asks[j], tol)
            if not res:
                return OrderViolation(i, j, float(res.witness), res.violation)
    return None


def envelopes_ordered(bids: Sequence[Marginal], asks: Sequence[Marginal],
                      tol: float | None = None) -> bool:
    """Equivalent envelope form: ``join(bids[:i+1]) <= meet(asks[i:])`` for all ``i``."""
    fwd = asks[0].barycenter
    tol = 1e-8 * fwd if tol is None else tol
    for i in range(len(bids)):
        up = convex_join(bids[: i + 1])
        low = convex_meet(asks[i:])
        ks = np.unique(np.concatenate([up.sample_points(), low.sample_points()]))
        if np.any(up(ks) - low(ks) > tol):
            return False
    return True


# ---------------------------------------------------------------------------
# grids and local concentration


@dataclass(frozen=True)
class Grid:
    points: np.ndarray
    q_lo: float | None = None
    q_hi: float | None = None

    def __post_init__(self):
        p = np.asarray(self.points, float)
        if p.ndim != 1 or p.size < 2 or np.any(np.diff(p) <= 0) or p[0] < 0:
            raise ValueError("grid points must be nonnegative and strictly increasing")
        object.__setattr__(self, "points", p)

    def __len__(self):
        return self.points.size

    @classmethod
    def uniform(cls, measures: Sequence[Marginal], n: int, q_lo: float = 1e-6,
                q_hi: float = 1 - 1e-6, extend: float = 0.3, include=(), zero: bool = True):
        """Uniform grid over the quantile range of ``measures`` widened by ``extend``.

        ``include`` adds extra points (payoff kinks, strikes); ``zero`` adds the origin.
        """
        lo = min(m.support_range(q_lo, q_hi)[0] for m in measures)
        hi = max(m.support_range(q_lo, q_hi)[1] for m in measures)
        width = hi - lo
        lo, hi = max(lo - extend * width, 0.0), hi + extend * width
        pts = np.linspace(lo, hi, n)
        extra = [np.asarray(list(include), float)]
        if zero:
            extra.append(np.array([0.0]))
        return cls(np.unique(np.concatenate([pts, *extra])), q_lo, q_hi)

    def refine(self, factor: int) -> "Grid":
        p = self.points
        fine = [np.linspace(a, b, factor + 1)[:-1] for a, b in zip(p[:-1], p[1:])]
        return Grid(np.concatenate(fine + [p[-1:]]), self.q_lo, self.q_hi)

    def with_points(self, extra) -> "Grid":
        return Grid(np.unique(np.concatenate([self.points, np.asarray(list(extra), float)])),
                    self.q_lo, self.q_hi)


def discretize(m: Marginal, grid: Grid | np.ndarray) -> DiscreteMeasure:
    """Local concentration of ``m`` onto cells centred at the grid points.

    Cell boundaries are the midpoints between consecutive grid points; each
    cell's mass sits at the cell's conditional barycenter. The result is
    smaller than ``m`` in convex order and has the same mean.
    """
    pts = grid.points if isinstance(grid, Grid) else np.asarray(grid, float)
    edges = np.concatenate([[-np.inf], 0.5 * (pts[1:] + pts[:-1]), [np.inf]])
    if isinstance(m, DiscreteMeasure):
        cell = np.searchsorted(edges, m.atoms, side="left") - 1
        mass = np.bincount(cell, m.weights, minlength=pts.size)
        mom = np.bincount(cell, m.weights * m.atoms, minlength=pts.size)
    elif isinstance(m, MixtureMarginal):
        # survival(-1) = 1 and survival(inf) = 0 cover the unbounded end cells
        mass, mom = m.partial_moments(np.where(np.isinf(edges[:-1]), -1.0, edges[:-1]), edges[1:])
    else:
        raise TypeError(f"cannot discretize {type(m).__name__}")
    keep = mass >= 1e-14
    atoms = mom[keep] / mass[keep]
    return DiscreteMeasure.from_unsorted(atoms, mass[keep], normalize=True)


def concentrate_on_cells(m: MixtureMarginal, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Masses and conditional barycenters of ``m`` on cells ``(edges[i], edges[i+1]]``."""
    mass, mom = m.partial_moments(edges[:-1], edges[1:])
    keep = mass >= 1e-14
    return mom[keep] / mass[keep], mass[keep]


# ---------------------------------------------------------------------------
# JSON


MarginalLike = Union[DiscreteMeasure, MixtureMarginal]


def marginal_from_json(obj: dict | str, normalize: bool = True) -> MarginalLike:
    """Parse a marginal from its JSON form (mixture or discrete).

    Mixture weights that do not sum to one (rounded tables) are renormalised
    when ``normalize`` is set. A declared ``forward`` must match the mixture
    barycenter to 1e-9 relative.
    """
    if isinstance(obj, str):
        obj = json.loads(obj)
    if "components" in obj:
        comps = [(c["mean"], c["vol"], c["weight"]) for c in obj["components"]]
        m = MixtureMarginal.from_components(comps, normalize=normalize, maturity=obj.get("maturity"))
        fwd = obj.get("forward")
        if fwd is not None and abs(m.barycenter - fwd) > 1e-9 * abs(fwd):
            raise MeasureError(f"declared forward {fwd} differs from barycenter {m.barycenter}")
        return m
    if "atoms" in obj:
        return DiscreteMeasure.from_unsorted(obj["atoms"], obj["weights"], normalize=normalize)
    raise MeasureError("unrecognised marginal JSON")


def marginal_to_json(m: Marginal) -> dict:
    return m.to_json()


def load_marginal(path) -> MarginalLike:
    with open(path) as fh:
        return marginal_from_json(json.load(fh))


def save_marginal(m: Marginal, path) -> None:
    with open(path, "w") as fh:
        json.dump(m.to_json(), fh, indent=2)
