"""Directed and symmetrised bid-ask distances and the one-dimensional W1 distance."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .measures import DiscreteMeasure, Marginal, MixtureMarginal, verification_grid


class BarycenterMismatch(ValueError):
    """The call-spread formula needs equal barycenters; use ``directed_distance_lp``."""


@dataclass(frozen=True)
class DistanceReport:
    value: float
    argmax_strike: float | None
    method: str  # call-sup | lp-oracle | cdf-integral

    def __post_init__(self):
        if self.value < 0:
            object.__setattr__(self, "value", 0.0)

    def to_json(self) -> dict:
        return asdict(self)


def _scan_points(mu: Marginal, nu: Marginal) -> np.ndarray:
    pts = [verification_grid(mu, nu, n=1024)]
    return np.unique(np.concatenate(pts))


def _golden_max(f, a, b, iters=60):
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def max_call_gap(mu: Marginal, nu: Marginal) -> tuple[float, float]:
    """``sup_K (c_mu(K) - c_nu(K))`` and a maximising strike.

    Dense scan over atoms and quantile points, then golden-section search on
    the bracketing interval. The gap is piecewise linear between atoms of
    discrete measures, so for two discrete inputs the scan is already exact.
    """
    ks = _scan_points(mu, nu)
    gaps = mu.call_price(ks) - nu.call_price(ks)
    i = int(np.argmax(gaps))
    best_k, best = float(ks[i]), float(gaps[i])
    if isinstance(mu, DiscreteMeasure) and isinstance(nu, DiscreteMeasure):
        return best, best_k
    a = ks[max(i - 1, 0)]
    b = ks[min(i + 1, ks.size - 1)]
    if b > a:
        f = lambda k: float(mu.call_price(k) - nu.call_price(k))
        k, val = _golden_max(f, a, b)
        if val > best:
            best_k, best = float(k), float(val)
    return best, best_k


def _require_equal_means(mu, nu):
    scale = max(abs(mu.barycenter), abs(nu.barycenter), 1.0)
    if abs(mu.barycenter - nu.barycenter) > 1e-9 * scale:
        raise BarycenterMismatch(
            f"barycenters differ ({mu.barycenter} vs {nu.barycenter}); "
            "the call-spread formula does not apply, use directed_distance_lp")


def directed_distance(mu: Marginal, nu: Marginal) -> DistanceReport:
    """``2 sup_K (c_mu - c_nu)`` for equal-mean marginals (clipped at zero)."""
    _require_equal_means(mu, nu)
    gap, k = max_call_gap(mu, nu)
    if gap <= 0:
        return DistanceReport(0.0, None, "call-sup")
    return DistanceReport(2.0 * gap, k, "call-sup")


def bid_ask_distance(mu: Marginal, nu: Marginal) -> DistanceReport:
    """Symmetrised distance ``(d(mu, nu) + d(nu, mu)) / 2``.

    The reported strike is the maximiser of the larger directed gap.
    """
    a = directed_distance(mu, nu)
    b = directed_distance(nu, mu)
    k = a.argmax_strike if a.value >= b.value else b.argmax_strike
    return DistanceReport(0.5 * (a.value + b.value), k, "call-sup")


def directed_distance_lp(mu: DiscreteMeasure, nu: DiscreteMeasure, backend: str = "auto") -> DistanceReport:
    """Maximise ``(mu - nu)(psi)`` over convex 1-Lipschitz piecewise-linear ``psi``.

    ``psi`` has knots at the union of atoms ``x_0 < ... < x_n`` and is written
    as ``psi(x) = s0 (x - x_0) + sum_k D_k (x - x_k)^+`` (the constant cancels).
    Convexity is ``D_k >= 0``; the Lipschitz bound is ``-1 <= s0`` and
    ``s0 + sum D_k <= 1``.
    """
    from .lp.model import LE, build, solve

    if not (isinstance(mu, DiscreteMeasure) and isinstance(nu, DiscreteMeasure)):
        raise TypeError("the LP oracle needs discrete measures")
    knots = np.union1d(mu.atoms, nu.atoms)
    inner = knots[1:-1] if knots.size > 2 else np.empty(0)
    gain_lin = mu.barycenter - nu.barycenter
    gain = mu.call_price(inner) - nu.call_price(inner)
    n = 1 + inner.size
    c = -np.concatenate([[gain_lin], gain])
    A = np.concatenate([[1.0], np.ones(inner.size)])[None, :]
    lo = np.concatenate([[-1.0], np.zeros(inner.size)])
    hi = np.concatenate([[1.0], np.full(inner.size, np.inf)])
    lp = build(c, (A, [LE], [1.0]), lo, hi)
    sol = solve(lp, backend)
    if not sol.ok:
        raise RuntimeError(f"distance LP ended with status {sol.status}")
    value = max(-sol.value, 0.0)
    d = sol.primal[1:]
    k = float(inner[np.argmax(d)]) if inner.size and d.max() > 1e-12 else None
    return DistanceReport(value, k, "lp-oracle")


def wasserstein1(mu: Marginal, nu: Marginal) -> float:
    """``int |F_mu - F_nu|``: exact for two discrete measures, adaptive quadrature otherwise."""
    if isinstance(mu, DiscreteMeasure) and isinstance(nu, DiscreteMeasure):
        pts = np.union1d(mu.atoms, nu.atoms)
        diff = np.abs(mu.cdf(pts[:-1]) - nu.cdf(pts[:-1]))
        return float(np.sum(diff * np.diff(pts)))
    from scipy.integrate import quad

    lo = min(mu.support_range(1e-13, 1 - 1e-13)[0], nu.support_range(1e-13, 1 - 1e-13)[0])
    hi = max(mu.support_range(1e-13, 1 - 1e-13)[1], nu.support_range(1e-13, 1 - 1e-13)[1])
    brk = np.union1d(mu.atoms_or_empty(), nu.atoms_or_empty())
    edges = np.unique(np.concatenate([[0.0, lo, hi], brk[(brk > 0) & (brk < hi)]]))
    f = lambda x: abs(float(mu.cdf(x)) - float(nu.cdf(x)))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += quad(f, a, b, limit=400, epsabs=1e-13, epsrel=1e-10)[0]
    return total


def counterexample_pair(n: int) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """Uniform law on ``{2m : |m| <= n}`` and its Rademacher smear, shifted by ``2n + 2``.

    The first is smaller in convex order, their W1 distance is one, and the
    bid-ask distance vanishes as ``n`` grows.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    shift = 2 * n + 2
    c = 1.0 / (2 * n + 1)
    mu_atoms = np.arange(-n, n + 1) * 2.0 + shift
    mu = DiscreteMeasure(mu_atoms, np.full(2 * n + 1, c))
    nu_atoms = np.arange(-2 * n - 1, 2 * n + 2, 2, dtype=float) + shift
    nu_w = np.full(nu_atoms.size, c)
    nu_w[0] = nu_w[-1] = c / 2
    nu = DiscreteMeasure(nu_atoms, nu_w / nu_w.sum())
    return mu, nu
