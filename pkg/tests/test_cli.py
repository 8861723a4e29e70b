import json

import numpy as np
import pytest

from bamot import cli
from bamot.calibration import CalibrationProblem
from bamot.measures import DiscreteMeasure, MixtureMarginal, save_marginal
from bamot.quotes import QuoteChain, random_chain


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if code == 0 else None), (json.loads(err) if code else None)


@pytest.fixture
def bs_files(tmp_path):
    bid, ask = MixtureMarginal.lognormal(1.0, 0.15), MixtureMarginal.lognormal(1.0, 0.2)
    save_marginal(bid, tmp_path / "bid.json")
    save_marginal(ask, tmp_path / "ask.json")
    return tmp_path / "bid.json", tmp_path / "ask.json", bid, ask


def test_price_call_at_quoted_strike(capsys, tmp_path, bs_files):
    b, a, _, ask = bs_files
    out = tmp_path / "out"
    code, res, _ = run(capsys, "--out", out, "price", "--payoff", "call(1.05)", "--bid", b, "--ask", a,
                       "--strikes", "0.9,1.0,1.05,1.1")
    assert code == 0
    assert res["super"] == pytest.approx(float(ask.call_price(1.05)), abs=1e-9)
    assert res["sub"] <= res["super"]
    lines = (out / "portfolio_super.csv").read_text().splitlines()
    assert lines[0].startswith("# bamot ") and "config=" in lines[0]
    assert lines[1] == "maturity,strike,weight,side"
    js = json.loads((out / "price.json").read_text())
    assert js["super"]["side"] == "super"


def test_price_rejects_bad_payoff_and_arbitrage(capsys, tmp_path, bs_files):
    b, a, _, _ = bs_files
    code, _, err = run(capsys, "--out", tmp_path, "price", "--payoff", "open('x')", "--bid", b, "--ask", a)
    assert code == 2 and err["error"] == "input"
    # swap bid and ask: the bid is wider than the ask
    code, _, err = run(capsys, "--out", tmp_path, "price", "--payoff", "call(1)", "--bid", a, "--ask", b)
    assert code == 2 and err["error"] == "arbitrage" and "strike" in err["witness"]


def test_numerical_failure_exit_code(capsys, tmp_path, bs_files, monkeypatch):
    from bamot.lp.hedging import LpFailure
    from bamot.lp.model import LpSolution

    def boom(*a, **k):
        raise LpFailure("dual program ended with status numerical", LpSolution("numerical", np.nan, None))

    monkeypatch.setattr(cli, "superhedge", boom)
    b, a, _, _ = bs_files
    code, _, err = run(capsys, "--out", tmp_path, "price", "--payoff", "call(1)", "--bid", b, "--ask", a)
    assert code == 3 and err["error"] == "numerical"


def test_distance_commands(capsys, tmp_path, bs_files):
    b, a, _, _ = bs_files
    code, res, _ = run(capsys, "--out", tmp_path, "distance", a, a)
    assert code == 0 and res["distance"] == 0.0
    code, res, _ = run(capsys, "--out", tmp_path, "distance", "--counterexample", 2)
    assert res["directed_backward"] == pytest.approx(0.2, abs=1e-12)
    assert res["distance"] == pytest.approx(0.1, abs=1e-12)
    assert res["wasserstein1"] == pytest.approx(1.0, abs=1e-12)
    code, _, err = run(capsys, "--out", tmp_path, "distance", a)
    assert code == 2


def test_digital_one_sided(capsys, tmp_path):
    save_marginal(MixtureMarginal.lognormal(1.0, 0.2, 1 / 12), tmp_path / "ask.json")
    code, res, _ = run(capsys, "--out", tmp_path, "digital-one-sided", "--ask", tmp_path / "ask.json",
                       "--strike", 1.05)
    assert code == 0
    assert res["price"] == pytest.approx(0.46, abs=0.005)
    assert res["touch"]["call_matches"] and res["touch"]["gap_empty"]
    save_marginal(DiscreteMeasure([0.5, 1.5], [0.5, 0.5]), tmp_path / "d.json")
    code, _, err = run(capsys, "--out", tmp_path, "digital-one-sided", "--ask", tmp_path / "d.json",
                       "--strike", 1.05)
    assert code == 2


def test_converge_small_sweep(capsys, tmp_path):
    code, res, _ = run(capsys, "--out", tmp_path, "--config", _config(tmp_path, n_grid=120),
                       "converge", "--payoff", "risk_reversal(0.95, 1.05)", "--gammas", "0.5,0.9,1.0")
    assert code == 0
    rows = (tmp_path / "converge.csv").read_text().splitlines()
    assert rows[0].startswith("# bamot ")
    last = rows[-1].split(",")
    assert float(last[0]) == 1.0 and abs(float(last[2])) < 1e-9  # gamma = 1: no spread, no premium
    assert res["bound_kind"] == "linear" and res["bound_holds"]


def test_forward_start_small(capsys, tmp_path):
    code, res, _ = run(capsys, "--out", tmp_path, "--config", _config(tmp_path, n_product=16),
                       "forward-start", "--K", "0.9,1.0,1.1")
    assert code == 0 and res["rows"] == 3
    rows = [r.split(",") for r in (tmp_path / "forward_start.csv").read_text().splitlines()[2:]]
    for K, bs, bb, ms, mb in rows:
        assert float(bs) >= float(ms) - 1e-9 and float(bb) <= float(mb) + 1e-9


def test_enhance_chain(capsys, tmp_path):
    rng = np.random.default_rng(3)
    ch, _ = random_chain(rng)
    (tmp_path / "chain.csv").write_text(ch.to_csv())
    code, res, _ = run(capsys, "--out", tmp_path, "enhance", tmp_path / "chain.csv")
    assert code == 0 and res["valid"]
    assert (tmp_path / "enhanced.csv").read_text().startswith("# bamot ")
    flat = QuoteChain.create(1.0, [1.0, 2.0], call_bid=[1.0, 1.0], call_ask=[1.0, 1.0])
    (tmp_path / "flat.csv").write_text(flat.to_csv())
    code, _, err = run(capsys, "--out", tmp_path, "enhance", tmp_path / "flat.csv")
    assert code == 2


def test_calibrate(capsys, tmp_path):
    m = MixtureMarginal.lognormal(1.0, 0.25)
    p = CalibrationProblem.from_marginal(m, np.linspace(0.8, 1.2, 7))
    (tmp_path / "q.csv").write_text("strike,otm_price,vega\n" + "".join(
        f"{float(k)!r},{float(v)!r},{float(w)!r}\n" for k, v, w in zip(p.strikes, p.otm_prices, p.vegas)))
    (tmp_path / "q.json").write_text('{"forward": 1.0, "J": 1}')
    code, res, _ = run(capsys, "--out", tmp_path, "calibrate", tmp_path / "q.csv", "--sidecar", tmp_path / "q.json",
                       "--bid-quotes", tmp_path / "q.csv")
    assert code == 0
    assert res["ask_max_scaled_error"] < 1e-6 and res["bid_max_scaled_error"] < 1e-6
    ask = json.loads((tmp_path / "ask.json").read_text())
    assert ask["components"][0]["vol"] == pytest.approx(0.25, abs=1e-6)


def test_config_validation(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n_grid": 2}')
    code, _, err = run(capsys, "--config", bad, "distance", "--counterexample", 1)
    assert code == 2
    bad.write_text('{"colour": "red"}')
    code, _, err = run(capsys, "--config", bad, "distance", "--counterexample", 1)
    assert code == 2 and "unknown" in err["message"]


def test_deterministic_outputs(capsys, tmp_path, bs_files):
    b, a, _, _ = bs_files
    texts = []
    for tag in ("one", "two"):
        out = tmp_path / tag
        code, _, _ = run(capsys, "--out", out, "--seed", 7, "price", "--payoff", "digital(1.02)",
                         "--bid", b, "--ask", a, "--strikes", "0.9,1.0,1.1")
        assert code == 0
        texts.append(((out / "price.json").read_text(), (out / "portfolio_super.csv").read_text()))
    assert texts[0] == texts[1]


def _config(tmp_path, **kw):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(kw))
    return path
