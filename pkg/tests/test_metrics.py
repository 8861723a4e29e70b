import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import wasserstein_distance

from bamot.measures import DiscreteMeasure, MixtureMarginal, convex_order_leq
from bamot.metrics import (BarycenterMismatch, bid_ask_distance, counterexample_pair, directed_distance,
                           directed_distance_lp, wasserstein1)
from strategies import discrete_measures, random_equal_mean_discrete

# 2 sup_K (c_ask - c_bid) for Black-Scholes 15%/20% over one year: dense 2e5-point scan
BS_15_20_DIRECTED = 0.039890072780
# sup_K (c_ask - c_bid) for the SPX mixtures: dense scan refined with mpmath quadrature prices
SPX_DISTANCE = 6.2928735036


def test_directed_distance_of_identical_measures():
    m = MixtureMarginal([1.0, 1.4], [0.1, 0.3], [0.6, 0.4])
    assert directed_distance(m, m).value == 0.0
    assert bid_ask_distance(m, m).value == 0.0


def test_counterexample_directed_distances():
    mu, nu = counterexample_pair(1)
    assert directed_distance(nu, mu).value == pytest.approx(1 / 3, abs=1e-12)
    assert directed_distance(mu, nu).value == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_counterexample_symmetrised_distance_is_half_the_directed_one(n):
    mu, nu = counterexample_pair(n)
    c = 1 / (2 * n + 1)
    assert bid_ask_distance(mu, nu).value == pytest.approx(c / 2, abs=1e-12)
    assert directed_distance(nu, mu).value == pytest.approx(c, abs=1e-12)


def test_black_scholes_directed_distance(bs_15_20):
    bid, ask = bs_15_20
    rep = directed_distance(ask, bid)
    assert rep.value == pytest.approx(BS_15_20_DIRECTED, abs=1e-10)
    assert abs(rep.argmax_strike - 1.0) < 0.05
    assert directed_distance(bid, ask).value == 0.0


def test_spx_distance_equals_largest_spread(spx):
    bid, ask = spx
    rep = bid_ask_distance(bid, ask)
    assert rep.value == pytest.approx(SPX_DISTANCE, abs=1e-8)
    assert rep.method == "call-sup"


def test_barycenter_mismatch_points_to_lp_oracle():
    a, b = DiscreteMeasure.dirac(1.0), DiscreteMeasure.dirac(2.0)
    with pytest.raises(BarycenterMismatch, match="directed_distance_lp"):
        directed_distance(a, b)
    # the LP realises the definition anyway: psi(x) = x gives 1 - 2 < 0, psi(x) = -x gives 1
    assert directed_distance_lp(a, b).value == pytest.approx(1.0)


def test_lp_oracle_counterexample_and_strangle():
    mu, nu = counterexample_pair(1)
    rep = directed_distance_lp(nu, mu)
    assert rep.value == pytest.approx(1 / 3, abs=1e-12)
    assert directed_distance_lp(mu, mu).value == pytest.approx(0.0, abs=1e-14)
    # the strangle around the shifted support attains the bound
    n, shift = 1, 4.0
    psi = lambda x: np.maximum(-2 * n - (x - shift), 0.0) + np.maximum((x - shift) - 2 * n, 0.0)
    gain = np.dot(nu.weights, psi(nu.atoms)) - np.dot(mu.weights, psi(mu.atoms))
    assert gain == pytest.approx(1 / 3, abs=1e-14)


def test_lp_oracle_agrees_with_call_formula(rng):
    for _ in range(50):
        a = random_equal_mean_discrete(rng)
        b = random_equal_mean_discrete(rng)
        assert directed_distance_lp(a, b).value == pytest.approx(directed_distance(a, b).value, abs=1e-8)


def test_wasserstein_examples():
    m = DiscreteMeasure([0.0, 1.0, 4.0], [0.2, 0.3, 0.5])
    assert wasserstein1(m, m) == 0.0
    assert wasserstein1(DiscreteMeasure.dirac(0.0), DiscreteMeasure.dirac(2.5)) == 2.5
    for n in range(1, 6):
        assert wasserstein1(*counterexample_pair(n)) == pytest.approx(1.0, abs=1e-12)


def test_wasserstein_matches_scipy(rng):
    for _ in range(20):
        a = random_equal_mean_discrete(rng, n_atoms=int(rng.integers(1, 9)))
        b = random_equal_mean_discrete(rng, n_atoms=int(rng.integers(1, 9)), mean=2.3)
        ref = wasserstein_distance(a.atoms, b.atoms, a.weights, b.weights)
        assert wasserstein1(a, b) == pytest.approx(ref, abs=1e-12)


def test_wasserstein_of_mixtures_by_quadrature():
    # W1 between log-normals with equal mean: compare with a fine discretised reference
    a, b = MixtureMarginal.lognormal(1.0, 0.15), MixtureMarginal.lognormal(1.0, 0.2)
    xs = np.linspace(0.0, 5.0, 400001)
    ref = np.trapezoid(np.abs(a.cdf(xs) - b.cdf(xs)), xs)
    assert wasserstein1(a, b) == pytest.approx(ref, abs=1e-9)


def test_counterexample_pair_structure():
    mu, nu = counterexample_pair(1)
    np.testing.assert_allclose(mu.weights, [1 / 3] * 3)
    np.testing.assert_allclose(nu.weights, [1 / 6, 1 / 3, 1 / 3, 1 / 6])
    assert mu.atoms.min() >= 0 and nu.atoms.min() >= 0
    for n in (1, 2, 3):
        assert convex_order_leq(*counterexample_pair(n))
    with pytest.raises(ValueError):
        counterexample_pair(0)


def test_distance_report_json():
    rep = bid_ask_distance(*counterexample_pair(2))
    assert set(rep.to_json()) == {"value", "argmax_strike", "method"}


# ---------------------------------------------------------------------------
# properties


@st.composite
def equal_mean_pairs(draw):
    a = draw(discrete_measures(max_atoms=6, lo=0.5, hi=4.5))
    b = draw(discrete_measures(max_atoms=6, lo=0.5, hi=4.5))
    shift = a.barycenter - b.barycenter
    atoms = b.atoms + shift
    if atoms.min() < 0:
        a, b = b, a
        atoms = b.atoms - shift
    return a, DiscreteMeasure(atoms, b.weights)


@given(equal_mean_pairs())
def test_zero_directed_distance_iff_convex_order(pair):
    a, b = pair
    d = directed_distance(a, b).value
    leq = convex_order_leq(a, b, tol=1e-9)
    # both sides scan the same atoms, so the thresholds line up exactly
    assert (d <= 2e-9) == bool(leq)


@given(equal_mean_pairs())
def test_distance_below_wasserstein_and_symmetric(pair):
    a, b = pair
    d = bid_ask_distance(a, b).value
    assert d == bid_ask_distance(b, a).value
    assert d <= wasserstein1(a, b) + 1e-12
    assert directed_distance_lp(a, b).value == pytest.approx(directed_distance(a, b).value, abs=1e-8)


@given(st.integers(0, 10_000))
def test_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_equal_mean_discrete(rng) for _ in range(3))
    ab, bc, ac = directed_distance(a, b).value, directed_distance(b, c).value, directed_distance(a, c).value
    assert ac <= ab + bc + 1e-9
