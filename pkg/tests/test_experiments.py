import numpy as np
import pytest

from bamot.experiments import (ConvergenceResult, convergence_sweep, default_gammas, exact_price,
                               forward_start_sweep, loglog_slope, rate_bound)
from bamot.fixtures import FORWARD_START_STRIKES, forward_start_marginals
from bamot.lp.hedging import ArbitrageError, HedgeConfig
from bamot.measures import DiscreteMeasure, MixtureMarginal
from bamot.payoffs import call, digital, forward_start, risk_reversal


def test_default_gammas():
    g = default_gammas(14, 1e-3)
    assert g.size == 14 and g[0] == 0.0
    assert 1 - g[-1] == pytest.approx(1e-3)
    assert np.all(np.diff(g) > 0)


def test_loglog_slope_recovers_power_law():
    d = np.logspace(-4, -1, 12)
    assert loglog_slope(d, 3 * d ** 0.5) == pytest.approx(0.5, abs=1e-12)
    # zero distances and nonpositive premiums are dropped
    d2 = np.append(d, 0.0)
    p2 = np.append(2 * d, 1e-3)
    assert loglog_slope(d2, p2) == pytest.approx(1.0, abs=1e-12)
    assert np.isnan(loglog_slope([0.0, 0.0], [1.0, 1.0]))


def test_rate_bound_constants():
    mid = MixtureMarginal.lognormal(1.0, 0.2)
    assert rate_bound(risk_reversal(0.95, 1.05), mid) == (2.0, "linear")
    C, kind = rate_bound(digital(1.0), mid)
    assert kind == "sqrt" and C == pytest.approx(np.sqrt(2 * mid.max_density()))
    assert rate_bound(call(1.0) + digital(1.0), mid) == (None, None)


def test_exact_price():
    m = DiscreteMeasure([0.5, 1.5], [0.5, 0.5])
    assert exact_price(m, call(1.0)) == 0.25
    ln = MixtureMarginal.lognormal(1.0, 0.2)
    assert exact_price(ln, call(1.05)) == pytest.approx(float(ln.call_price(1.05)), abs=1e-10)


def test_convergence_result_bounds():
    r = ConvergenceResult(np.array([0.0, 0.5]), np.array([0.04, 0.01]), np.array([0.03, 0.021]),
                          np.zeros(2), 0.0, 1.0, 2.0, "linear")
    np.testing.assert_allclose(r.bounds(), [0.08, 0.02])
    assert r.bound_holds().tolist() == [True, False]
    assert len(list(r.rows())) == 2


def test_short_convergence_sweep():
    bid, ask = MixtureMarginal.lognormal(1.0, 0.15), MixtureMarginal.lognormal(1.0, 0.2)
    cfg = HedgeConfig(n_grid=150, strike_mode="dense", solve_primal=False, audit=False)
    r = convergence_sweep(risk_reversal(0.95, 1.05), bid, ask, [0.0, 0.6, 0.9, 0.99], cfg)
    assert np.all(np.diff(r.distances) < 0)
    assert np.all(np.diff(r.premiums) < 0)
    assert np.all(r.bound_holds(1e-9))
    assert r.slope == pytest.approx(1.0, abs=0.15)


@pytest.mark.slow
def test_forward_start_envelope_and_peak():
    bids, asks = forward_start_marginals()
    rows = forward_start_sweep(bids, asks, [0.9, 1.0, 1.1], FORWARD_START_STRIKES, HedgeConfig(n_product=40))
    for r in rows:
        assert r.bamot_super >= r.mot_super - 1e-9
        assert r.bamot_sub <= r.mot_sub + 1e-9
        assert r.primal_super <= r.bamot_super + 1e-7
    assert max(rows, key=lambda r: r.width_difference).K == 1.0


def test_forward_start_checks_cross_maturity_order():
    # each maturity is fine on its own, but the first bid is wider than the second ask
    b1, a1 = MixtureMarginal.lognormal(100, 0.4, 0.5), MixtureMarginal.lognormal(100, 0.42, 0.5)
    b2, a2 = MixtureMarginal.lognormal(100, 0.2, 1.0), MixtureMarginal.lognormal(100, 0.25, 1.0)
    with pytest.raises(ArbitrageError) as exc:
        forward_start_sweep((b1, b2), (a1, a2), [1.0], FORWARD_START_STRIKES)
    assert exc.value.witness["bid_maturity"] == 1 and exc.value.witness["ask_maturity"] == 2


def test_forward_start_zero_strike_is_replicated():
    bids, asks = forward_start_marginals()
    rows = forward_start_sweep(bids, asks, [0.0], FORWARD_START_STRIKES, HedgeConfig(n_product=20))
    assert rows[0].bamot_super == pytest.approx(100.0, abs=1e-6)
    assert rows[0].bamot_sub == pytest.approx(100.0, abs=1e-6)
    assert forward_start(0.0)(1.0, 2.0) == 2.0
