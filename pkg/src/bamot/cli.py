"""Command-line front end: ``bamot <command> [options]``.

Exit codes: 0 success, 2 bad input or arbitrage (JSON diagnostic on stderr),
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from .calibration import CalibrationError, calibrate_ask, calibrate_bid_from_ask, read_problem
from .closedform import TrivialProblem, one_sided_digital, primal_dual_iv_touch
from .experiments import convergence_sweep, default_gammas, forward_start_sweep
from .fixtures import (FORWARD_START_KS, FORWARD_START_STRIKES, convergence_marginals,
                       forward_start_marginals)
from .lp.hedging import ArbitrageError, HedgeConfig, LpFailure, subhedge, superhedge
from .lp.model import LpError
from .lp.simplex import SimplexIterationLimit
from .measures import MeasureError, MixtureMarginal, load_marginal
from .metrics import BarycenterMismatch, bid_ask_distance, counterexample_pair, directed_distance, wasserstein1
from .payoffs import PayoffError, parse
from .quotes import DegenerateMarket, ask_marginal, enhance, load_chain, validate_enhanced


# superhedging values carry the solver's feasibility tolerance (relative to the spot)
LP_VALUE_TOL = 1e-9


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    """Settings shared by all commands; a JSON config file may override any field."""

    n_grid: int = 400  # one-maturity support and constraint grid
    n_product: int = 60  # per-axis grid for two maturities
    q_tail: float = 1e-6  # quantile truncation on each side
    extend: float = 0.3
    lp_tol: float = 1e-8  # audit tolerance on constraint residuals
    strike_mode: str = "quoted"
    backend: str = "auto"
    out: str = "."
    seed: int = 0

    def __post_init__(self):
        if self.n_grid < 4 or self.n_product < 4:
            raise InputError("grid sizes must be at least 4")
        if not 0.0 < self.q_tail < 0.5:
            raise InputError("q_tail must lie in (0, 0.5)")
        if self.strike_mode not in ("quoted", "dense"):
            raise InputError("strike_mode must be 'quoted' or 'dense'")
        if self.lp_tol <= 0:
            raise InputError("lp_tol must be positive")

    @classmethod
    def load(cls, path: str | None, **overrides) -> "RunConfig":
        data = {}
        if path:
            with open(path) as fh:
                data = json.load(fh)
            unknown = set(data) - {f.name for f in fields(cls)}
            if unknown:
                raise InputError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def digest(self) -> str:
        # the output location does not affect results
        data = {k: v for k, v in asdict(self).items() if k != "out"}
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:16]

    def hedge(self, **kw) -> HedgeConfig:
        base = dict(n_grid=self.n_grid, n_product=self.n_product, q_lo=self.q_tail, q_hi=1 - self.q_tail,
                    extend=self.extend, strike_mode=self.strike_mode, backend=self.backend,
                    audit_tol=self.lp_tol)
        base.update(kw)
        return HedgeConfig(**base)


# ---------------------------------------------------------------------------
# output helpers


def _path(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def _write_csv(cfg: RunConfig, name: str, header, rows) -> str:
    path = _path(cfg, name)
    with open(path, "w", newline="") as fh:
        fh.write(f"# bamot {__version__} config={cfg.digest()}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else v for v in r])
    return path


def _write_json(cfg: RunConfig, name: str, obj) -> str:
    path = _path(cfg, name)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_jsonable)
    return path


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


def _floats(text: str | None):
    if text is None:
        return None
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _marginals(paths):
    return [load_marginal(p) for p in paths]


# ---------------------------------------------------------------------------
# commands


def cmd_price(args, cfg: RunConfig) -> dict:
    h = parse(args.payoff)
    bids, asks = _marginals(args.bid), _marginals(args.ask)
    strikes = _floats(args.strikes)
    hc = cfg.hedge(strikes=strikes)
    up = superhedge(h, bids, asks, x0=args.x0, config=hc)
    lo = subhedge(h, bids, asks, x0=args.x0, config=hc)
    out = {"payoff": h.text, "super": up.to_json(), "sub": lo.to_json()}
    _write_json(cfg, "price.json", out)
    for tag, b in (("super", up), ("sub", lo)):
        rows = [(r["maturity"], r["strike"], r["weight"], r["side"]) for r in b.portfolio.rows()]
        _write_csv(cfg, f"portfolio_{tag}.csv", ["maturity", "strike", "weight", "side"], rows)
    return {"payoff": h.text, "super": up.dual_value, "sub": lo.dual_value,
            "super_primal": up.primal_value, "sub_primal": lo.primal_value}


def cmd_enhance(args, cfg: RunConfig) -> dict:
    chain = load_chain(args.chain, args.sidecar)
    e = enhance(chain, backend=cfg.backend)
    rep = validate_enhanced(e)
    path = _path(cfg, "enhanced.csv")
    with open(path, "w") as fh:
        fh.write(f"# bamot {__version__} config={cfg.digest()}\n")
        fh.write(e.to_csv())
    mu = ask_marginal(e)
    _write_json(cfg, "ask_marginal.json", mu.to_json())
    return {"truncation_index": e.truncation, "valid": rep.ok, "max_violation": rep.max_violation,
            "ask_marginal_atoms": int(mu.atoms.size)}


def cmd_calibrate(args, cfg: RunConfig) -> dict:
    p = read_problem(args.quotes, args.sidecar)
    res = calibrate_ask(p, seed=cfg.seed)
    _write_json(cfg, "ask.json", res.marginal.to_json())
    out = {"ask_objective": res.objective, "ask_max_scaled_error": res.max_scaled_error(p),
           "method": res.method}
    if args.bid_quotes:
        pb = read_problem(args.bid_quotes, args.sidecar)
        rb = calibrate_bid_from_ask(res.marginal, pb)
        _write_json(cfg, "bid.json", rb.marginal.to_json())
        out.update(bid_objective=rb.objective, bid_max_scaled_error=rb.max_scaled_error(pb))
    return out


def cmd_distance(args, cfg: RunConfig) -> dict:
    if args.counterexample is not None:
        mu, nu = counterexample_pair(args.counterexample)
    else:
        if len(args.marginals) != 2:
            raise InputError("distance needs two marginal files or --counterexample N")
        mu, nu = _marginals(args.marginals)
    d = bid_ask_distance(mu, nu)
    out = {"distance": d.value, "argmax_strike": d.argmax_strike,
           "directed_forward": directed_distance(mu, nu).value,
           "directed_backward": directed_distance(nu, mu).value,
           "wasserstein1": wasserstein1(mu, nu), "method": d.method}
    _write_json(cfg, "distance.json", out)
    return out


def cmd_digital_one_sided(args, cfg: RunConfig) -> dict:
    ask = load_marginal(args.ask)
    if not isinstance(ask, MixtureMarginal):
        raise InputError("the closed form needs a mixture ask marginal")
    res = one_sided_digital(ask, args.strike, args.x0)
    touch = primal_dual_iv_touch(res)
    out = res.to_json()
    out["touch"] = asdict(touch)
    _write_json(cfg, "digital_one_sided.json", out)
    return out


def cmd_converge(args, cfg: RunConfig) -> dict:
    h = parse(args.payoff)
    if args.bid and args.ask:
        bid, ask = load_marginal(args.bid), load_marginal(args.ask)
    else:
        bid, ask = convergence_marginals()
    gammas = _floats(args.gammas) or default_gammas(args.n_gamma, args.smallest)
    hc = cfg.hedge(strike_mode="dense", solve_primal=False, audit=False)
    res = convergence_sweep(h, bid, ask, gammas, hc)
    _write_csv(cfg, "converge.csv", ["gamma", "distance", "premium", "bound"], res.rows())
    out = {"payoff": h.text, "slope": res.slope, "mid_price": res.mid_price,
           "bound_kind": res.bound_kind, "bound_constant": res.bound_constant}
    hold = res.bound_holds(slack=LP_VALUE_TOL * ask.barycenter)
    if hold is not None:
        out["bound_holds"] = bool(np.all(hold))
    _write_json(cfg, "converge.json", out)
    return out


def cmd_forward_start(args, cfg: RunConfig) -> dict:
    if args.bid and args.ask:
        bids, asks = _marginals(args.bid), _marginals(args.ask)
        if len(bids) != 2 or len(asks) != 2:
            raise InputError("forward-start needs two bid and two ask marginals")
    else:
        bids, asks = forward_start_marginals()
    Ks = _floats(args.K) or FORWARD_START_KS
    strikes = _floats(args.strikes) or FORWARD_START_STRIKES
    rows = forward_start_sweep(bids, asks, Ks, strikes, cfg.hedge())
    _write_csv(cfg, "forward_start.csv", ["K", "bamot_super", "bamot_sub", "mot_super", "mot_sub"],
               [(r.K, r.bamot_super, r.bamot_sub, r.mot_super, r.mot_sub) for r in rows])
    widest = max(rows, key=lambda r: r.width_difference)
    return {"rows": len(rows), "max_width_difference_at": widest.K}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bamot", description="Robust price bounds under bid-ask spreads.")
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="seed for randomised starts and generators")
    p.add_argument("--version", action="version", version=f"bamot {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("price", help="super- and subhedging bounds of a payoff")
    s.add_argument("--payoff", required=True, help="e.g. '100*digital(6154.05)'")
    s.add_argument("--bid", nargs="+", required=True, help="bid marginal JSON per maturity")
    s.add_argument("--ask", nargs="+", required=True, help="ask marginal JSON per maturity")
    s.add_argument("--x0", type=float)
    s.add_argument("--strikes", help="comma-separated quoted strikes")
    s.set_defaults(func=cmd_price)

    s = sub.add_parser("enhance", help="tighten a quote chain and build its ask marginal")
    s.add_argument("chain", help="chain CSV")
    s.add_argument("--sidecar", help="JSON with the forward")
    s.set_defaults(func=cmd_enhance)

    s = sub.add_parser("calibrate", help="fit ask (and bid) mixtures to OTM quotes")
    s.add_argument("quotes", help="CSV with strike, otm_price, vega")
    s.add_argument("--sidecar", required=True, help="JSON with forward, spot, J")
    s.add_argument("--bid-quotes", help="CSV of bid OTM quotes")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("distance", help="bid-ask distance between two marginals")
    s.add_argument("marginals", nargs="*")
    s.add_argument("--counterexample", type=int, metavar="N", help="use the discrete family of size N")
    s.set_defaults(func=cmd_distance)

    s = sub.add_parser("digital-one-sided", help="closed-form digital superhedge with ask quotes only")
    s.add_argument("--ask", required=True)
    s.add_argument("--strike", type=float, required=True)
    s.add_argument("--x0", type=float)
    s.set_defaults(func=cmd_digital_one_sided)

    s = sub.add_parser("converge", help="premium against bid-ask distance as spreads shrink")
    s.add_argument("--payoff", required=True)
    s.add_argument("--bid")
    s.add_argument("--ask")
    s.add_argument("--gammas", help="comma-separated gamma values")
    s.add_argument("--n-gamma", type=int, default=14)
    s.add_argument("--smallest", type=float, default=1e-3, help="smallest 1 - gamma")
    s.set_defaults(func=cmd_converge)

    s = sub.add_parser("forward-start", help="BAMOT and MOT bounds of (x2 - K x1)^+")
    s.add_argument("--bid", nargs=2)
    s.add_argument("--ask", nargs=2)
    s.add_argument("--K", help="comma-separated K values")
    s.add_argument("--strikes", help="comma-separated quoted strikes")
    s.set_defaults(func=cmd_forward_start)
    return p


_INPUT_ERRORS = (InputError, PayoffError, MeasureError, BarycenterMismatch, DegenerateMarket, TrivialProblem,
                 FileNotFoundError, json.JSONDecodeError, KeyError, ValueError)
_NUMERICAL = (LpFailure, LpError, SimplexIterationLimit, CalibrationError)


def _fail(code: int, kind: str, exc: Exception) -> int:
    diag = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    wit = getattr(exc, "witness", None)
    if wit:
        diag["witness"] = wit
    sys.stderr.write(json.dumps(diag, default=_jsonable) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, out=args.out, seed=args.seed)
        result = args.func(args, cfg)
    except ArbitrageError as exc:
        return _fail(2, "arbitrage", exc)
    except _NUMERICAL as exc:
        return _fail(3, "numerical", exc)
    except _INPUT_ERRORS as exc:
        return _fail(2, "input", exc)
    sys.stdout.write(json.dumps(result, default=_jsonable, indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
