import numpy as np
import pytest
import scipy.sparse as sp

from bamot.lp import EQ, GE, LE, build, solve
from bamot.lp import simplex
from bamot.lp.builders import BandQuotes, DualSpecSingle, build_dual_single, build_primal_single
from bamot.lp.model import LinearProgram, LpError
from bamot.lp.mps import from_mps, to_mps
from bamot.measures import MixtureMarginal
from oracles import vertex_min


def _transport(rng, m=2, n=3):
    supply = rng.integers(1, 6, m).astype(float)
    demand = rng.multinomial(int(supply.sum()), np.ones(n) / n).astype(float)
    cost = rng.uniform(0, 10, (m, n))
    rows = []
    for i in range(m):
        r = np.zeros((m, n)); r[i] = 1; rows.append(r.ravel())
    for j in range(n):
        r = np.zeros((m, n)); r[:, j] = 1; rows.append(r.ravel())
    return cost.ravel(), np.array(rows), np.concatenate([supply, demand])


def test_single_bound():
    lp = build([1.0], (np.array([[1.0]]), [GE], [3.0]), [-np.inf], [np.inf])
    for backend in ("simplex", "highs"):
        sol = solve(lp, backend)
        assert sol.ok and sol.value == pytest.approx(3.0)


def test_infeasible_and_unbounded():
    lp = build([1.0], (np.array([[1.0], [1.0]]), [GE, LE], [1.0, 0.0]), [-np.inf], [np.inf])
    sol = solve(lp, "simplex")
    assert sol.status == "infeasible"
    assert solve(lp, "highs").status == "infeasible"
    assert solve(lp, "highs").witness["name"] in ("r0", "r1")
    lp = build([-1.0, 0.0], (np.array([[1.0, -1.0]]), [LE], [1.0]), [0, 0], [np.inf, np.inf])
    assert solve(lp, "simplex").status == "unbounded"
    assert solve(lp, "highs").status == "unbounded"


@pytest.mark.parametrize("seed", range(10))
def test_transport_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    c, A, b = _transport(rng)
    ref = vertex_min(c, A, b)
    lp = build(c, (A, [EQ] * len(b), b), np.zeros(c.size), np.full(c.size, np.inf))
    sol = solve(lp, "simplex")
    assert sol.ok and sol.value == pytest.approx(ref, abs=1e-10)
    # the redundant row survives phase 1 and duals still price the cost
    assert solve(lp, "highs").value == pytest.approx(ref, abs=1e-10)


def test_standard_form_duals_certify_optimum():
    rng = np.random.default_rng(7)
    c, A, b = _transport(rng, 3, 3)
    res = simplex.solve_standard(c, A, b)
    assert res.status == "optimal"
    assert res.duals @ b == pytest.approx(res.value, abs=1e-10)
    assert np.all(c - res.duals @ A >= -1e-9)


@pytest.mark.parametrize("seed", range(30))
def test_simplex_agrees_with_highs_on_random_programs(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(2, 8)), int(rng.integers(2, 10))
    A = rng.normal(size=(m, n)) * (rng.uniform(size=(m, n)) < 0.7)
    x_feas = rng.uniform(0, 2, n)
    senses = list(rng.choice([GE, LE, EQ], m))
    slack = rng.uniform(0, 1, m)
    rhs = A @ x_feas + np.select([np.array(senses) == GE, np.array(senses) == LE], [-slack, slack], 0.0)
    c = rng.normal(size=n)
    lo = np.where(rng.uniform(size=n) < 0.3, -np.inf, 0.0)
    hi = np.where(rng.uniform(size=n) < 0.5, 3.0, np.inf)
    lp = build(c, (A, senses, rhs), lo, hi)
    a, h = solve(lp, "simplex"), solve(lp, "highs")
    assert a.status == h.status
    if h.ok:
        assert a.value == pytest.approx(h.value, abs=1e-8 * max(1.0, abs(h.value)))
        assert a.max_violation <= 1e-8


@pytest.fixture(scope="module")
def small_dual():
    bid = MixtureMarginal.lognormal(1.0, 0.15)
    ask = MixtureMarginal.lognormal(1.0, 0.2)
    strikes = np.linspace(0.7, 1.3, 9)
    grid = np.linspace(0.0, 3.0, 61)
    h = np.where(grid >= 1.05, 1.0, 0.0)
    return DualSpecSingle(1.0, BandQuotes.from_marginals(strikes, bid, ask), grid, h, 0.0)


def test_bamot_dual_simplex_matches_highs(small_dual):
    lp = build_dual_single(small_dual)
    a, h = solve(lp, "simplex"), solve(lp, "highs")
    assert a.ok and h.ok
    assert a.value == pytest.approx(h.value, abs=1e-9)


def test_bamot_primal_tail_mass_closes_the_gap(small_dual):
    d = solve(build_dual_single(small_dual), "highs").value
    p = -solve(build_primal_single(small_dual, tail_mass=True), "highs").value
    assert p == pytest.approx(d, abs=1e-9)


def test_mps_roundtrip(small_dual):
    lp = build_dual_single(small_dual)
    lp.offset = 0.25
    back = from_mps(to_mps(lp))
    assert back.senses == lp.senses and back.var_names == lp.var_names
    np.testing.assert_array_equal(back.c, lp.c)
    np.testing.assert_array_equal(back.rhs, lp.rhs)
    np.testing.assert_array_equal(back.lo, lp.lo)
    assert (back.A != lp.A).nnz == 0
    assert solve(back, "highs").value == pytest.approx(solve(lp, "highs").value, abs=1e-12)


def test_mps_bounds_and_names():
    lp = build([1.0, -1.0, 0.5], (np.array([[1.0, 1.0, 1.0]]), [LE], [4.0]),
               [-np.inf, 1.0, 2.0], [np.inf, 1.0, 5.0], var_names=["a", "b", "c"], row_names=["cap"])
    text = to_mps(lp)
    assert " FR bnd a" in text and " FX bnd b 1.0" in text
    back = from_mps(text)
    np.testing.assert_array_equal(back.hi, lp.hi)
    bad = build([1.0], (np.array([[1.0]]), [LE], [1.0]), [0], [1], var_names=["has space"])
    with pytest.raises(LpError):
        to_mps(bad)


def test_audit_downgrades_violating_answers(monkeypatch):
    lp = build([1.0], (np.array([[1.0]]), [GE], [3.0]), [0.0], [np.inf])

    def fake(c, A, b, **kw):
        return simplex.StandardResult("optimal", np.array([2.0] + [0.0] * (A.shape[1] - 1)), 2.0, 1,
                                      np.zeros(A.shape[0]))

    monkeypatch.setattr(simplex, "solve_standard", fake)
    sol = solve(lp, "simplex")
    assert sol.status == "numerical"
    assert sol.witness["violation"] == pytest.approx(1.0)
    # auto mode confirms with HiGHS
    assert solve(lp, "auto").ok


def test_twin_columns_do_not_break_the_basis():
    # free variable split into +/- columns, plus an explicit anti-parallel pair
    A = np.array([[1.0, -1.0, 2.0, -2.0, 1.0], [0.0, 0.0, 1.0, -1.0, 1.0]])
    twins = simplex._find_twins(A)
    pairs = set(zip(twins[0].tolist(), twins[1].tolist()))
    assert {(0, 1), (1, 0), (2, 3), (3, 2)} <= pairs
    lp = build([0.0, 1.0], (np.array([[1.0, 1.0], [1.0, -1.0]]), [GE, GE], [1.0, -3.0]),
               [-np.inf, -np.inf], [np.inf, np.inf])
    assert solve(lp, "simplex").value == pytest.approx(solve(lp, "highs").value)


def test_iteration_limit_raises():
    rng = np.random.default_rng(1)
    c, A, b = _transport(rng, 3, 3)
    with pytest.raises(simplex.SimplexIterationLimit):
        simplex.solve_standard(c, A, b, max_iter=1)


def test_malformed_programs_rejected():
    with pytest.raises(LpError):
        build([1.0, 2.0], (np.ones((1, 3)), [LE], [1.0]), [0, 0], [1, 1])
    with pytest.raises(LpError):
        build([1.0], (np.ones((1, 1)), ["<"], [1.0]), [0], [1])
    with pytest.raises(LpError):
        build([np.nan], (np.ones((1, 1)), [LE], [1.0]), [0], [1])
    with pytest.raises(LpError):
        LinearProgram(np.ones(1), sp.csr_matrix(np.ones((1, 1))), [LE], np.ones(1), np.ones(1), np.zeros(1))
    with pytest.raises(ValueError):
        simplex.solve_standard([1.0], [[1.0]], [-1.0])
