"""Solver-agnostic linear programs and their solutions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import simplex

GE, EQ, LE = ">=", "=", "<="
_SENSES = (GE, EQ, LE)

AUDIT_TOL = 1e-8
SIMPLEX_MAX_CELLS = 60_000


class LpError(RuntimeError):
    """Raised on malformed programs or solver breakdown."""


@dataclass
class LinearProgram:
    """``min c.v + offset`` subject to ``A v (sense) rhs`` and ``lo <= v <= hi``.

    ``A`` is stored sparse (CSR). Names are optional and only used for
    reporting and MPS export.
    """

    c: np.ndarray
    A: sp.csr_matrix
    senses: list
    rhs: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    offset: float = 0.0
    var_names: list | None = None
    row_names: list | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.rhs = np.asarray(self.rhs, float)
        self.lo = np.asarray(self.lo, float)
        self.hi = np.asarray(self.hi, float)
        self.senses = list(self.senses)
        n = self.c.size
        m = self.rhs.size
        if self.A.shape != (m, n):
            raise LpError(f"constraint matrix is {self.A.shape}, expected {(m, n)}")
        if len(self.senses) != m or any(s not in _SENSES for s in self.senses):
            raise LpError("one sense in {>=, =, <=} per row is required")
        if self.lo.size != n or self.hi.size != n or np.any(self.lo > self.hi):
            raise LpError("bounds must have one entry per variable with lo <= hi")
        for arr in (self.c, self.A.data, self.rhs):
            if not np.all(np.isfinite(arr)):
                raise LpError("NaN or infinite coefficient")
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise LpError("NaN bound")

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.rhs.size

    def residuals(self, v: np.ndarray) -> np.ndarray:
        """Constraint violations per row (nonnegative; zero when satisfied)."""
        ax = self.A @ v
        s = np.array(self.senses)
        viol = np.zeros(self.n_rows)
        viol[s == GE] = np.maximum(self.rhs[s == GE] - ax[s == GE], 0.0)
        viol[s == LE] = np.maximum(ax[s == LE] - self.rhs[s == LE], 0.0)
        viol[s == EQ] = np.abs(ax[s == EQ] - self.rhs[s == EQ])
        return viol

    def bound_violation(self, v: np.ndarray) -> float:
        return float(max(np.max(self.lo - v, initial=0.0), np.max(v - self.hi, initial=0.0)))

    def objective(self, v: np.ndarray) -> float:
        return float(self.c @ v + self.offset)


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | numerical
    value: float
    primal: np.ndarray | None
    iterations: int = 0
    duals: np.ndarray | None = None
    backend: str = ""
    max_violation: float = 0.0
    witness: dict | None = None

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _to_standard(lp: LinearProgram):
    """Rewrite as ``min c'.x, A' x = b', x >= 0, b' >= 0``.

    Returns the standard data and a recovery map ``v = T x + t0``.
    """
    n = lp.n_vars
    A = lp.A.toarray()
    cols = []  # (orig index, sign) for each standard column
    t0 = np.zeros(n)
    extra_rows = []
    for j in range(n):
        lo, hi = lp.lo[j], lp.hi[j]
        if np.isfinite(lo):
            t0[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            t0[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    k = len(cols)
    T = np.zeros((n, k))
    for col, (j, s) in enumerate(cols):
        T[j, col] = s
    A_x = A @ T
    rhs = lp.rhs - A @ t0
    senses = list(lp.senses)
    rows = [A_x]
    for col, width in extra_rows:
        r = np.zeros((1, k))
        r[0, col] = 1.0
        rows.append(r)
        rhs = np.append(rhs, width)
        senses.append(LE)
    A_x = np.vstack(rows)
    m = A_x.shape[0]
    n_slack = sum(1 for s in senses if s != EQ)
    S = np.zeros((m, n_slack))
    col = 0
    for i, s in enumerate(senses):
        if s == LE:
            S[i, col] = 1.0
            col += 1
        elif s == GE:
            S[i, col] = -1.0
            col += 1
    A_std = np.hstack([A_x, S])
    c_std = np.concatenate([lp.c @ T, np.zeros(n_slack)])
    flip = rhs < 0
    A_std[flip] *= -1.0
    rhs = np.where(flip, -rhs, rhs)
    offset = float(lp.c @ t0) + lp.offset
    return c_std, A_std, rhs, T, t0, k, offset, flip


def _solve_simplex(lp: LinearProgram) -> LpSolution:
    c, A, b, T, t0, k, offset, flip = _to_standard(lp)
    try:
        res = simplex.solve_standard(c, A, b)
    except simplex.SimplexNumericalError as exc:
        return LpSolution("numerical", np.nan, None, backend="simplex", witness={"message": str(exc)})
    if res.status != "optimal":
        witness = None
        if res.status == "infeasible" and res.infeasible_row is not None and res.infeasible_row < lp.n_rows:
            witness = {"row": int(res.infeasible_row), "name": _row_name(lp, res.infeasible_row)}
        return LpSolution(res.status, np.nan if res.status == "infeasible" else -np.inf,
                          None, res.iterations, backend="simplex", witness=witness)
    v = T @ res.x[:k] + t0
    duals = res.duals[: lp.n_rows] * np.where(flip[: lp.n_rows], -1.0, 1.0)
    return LpSolution("optimal", lp.objective(v), v, res.iterations, duals, "simplex")


def _solve_highs(lp: LinearProgram, tol: float = 1e-9) -> LpSolution:
    from scipy.optimize import linprog

    s = np.array(lp.senses)
    ge, le, eq = s == GE, s == LE, s == EQ
    A_ub = sp.vstack([lp.A[np.flatnonzero(le)], -lp.A[np.flatnonzero(ge)]]).tocsr()
    b_ub = np.concatenate([lp.rhs[le], -lp.rhs[ge]])
    A_eq = lp.A[np.flatnonzero(eq)] if eq.any() else None
    b_eq = lp.rhs[eq] if eq.any() else None
    bounds = np.column_stack([np.where(np.isfinite(lp.lo), lp.lo, -np.inf),
                              np.where(np.isfinite(lp.hi), lp.hi, np.inf)])
    res = linprog(lp.c, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol,
                           "presolve": True})
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 2:
        return LpSolution("infeasible", np.nan, None, iters, backend="highs",
                          witness=_elastic_witness(lp))
    if res.status == 3:
        return LpSolution("unbounded", -np.inf, None, iters, backend="highs")
    if res.status != 0:
        return LpSolution("numerical", np.nan, None, iters, backend="highs",
                          witness={"message": str(res.message)})
    duals = np.zeros(lp.n_rows)
    n_le = int(le.sum())
    if res.ineqlin is not None and res.ineqlin.marginals is not None and A_ub.shape[0]:
        marg = np.asarray(res.ineqlin.marginals)
        duals[np.flatnonzero(le)] = marg[:n_le]
        duals[np.flatnonzero(ge)] = -marg[n_le:]
    if eq.any() and res.eqlin is not None:
        duals[np.flatnonzero(eq)] = np.asarray(res.eqlin.marginals)
    v = np.asarray(res.x, float)
    return LpSolution("optimal", lp.objective(v), v, iters, duals, "highs")


def _row_name(lp: LinearProgram, i: int) -> str:
    return lp.row_names[i] if lp.row_names else f"r{i}"


def _elastic_witness(lp: LinearProgram) -> dict | None:
    """Locate the most violated row of an infeasible program by minimising total slack."""
    from scipy.optimize import linprog

    m, n = lp.n_rows, lp.n_vars
    s = np.array(lp.senses)
    # v, e_plus, e_minus; A v + e_plus - e_minus (sense) rhs
    A = sp.hstack([lp.A, sp.eye(m), -sp.eye(m)]).tocsr()
    c = np.concatenate([np.zeros(n), np.ones(2 * m)])
    ge, le, eq = s == GE, s == LE, s == EQ
    A_ub = sp.vstack([A[np.flatnonzero(le)], -A[np.flatnonzero(ge)]]).tocsr()
    b_ub = np.concatenate([lp.rhs[le], -lp.rhs[ge]])
    bounds = [(lo if np.isfinite(lo) else None, hi if np.isfinite(hi) else None)
              for lo, hi in zip(lp.lo, lp.hi)] + [(0, None)] * (2 * m)
    res = linprog(c, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=A[np.flatnonzero(eq)] if eq.any() else None,
                  b_eq=lp.rhs[eq] if eq.any() else None, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    slack = res.x[n:n + m] + res.x[n + m:]
    i = int(np.argmax(slack))
    return {"row": i, "name": _row_name(lp, i), "slack": float(slack[i])}


def solve(lp: LinearProgram, backend: str = "auto", audit_tol: float = AUDIT_TOL) -> LpSolution:
    """Solve ``lp`` and audit the answer.

    ``backend`` is ``simplex`` (embedded dense revised simplex), ``highs``
    (scipy's HiGHS interface) or ``auto``, which picks the embedded solver for
    programs with at most ``SIMPLEX_MAX_CELLS`` matrix cells and re-solves
    with HiGHS whenever the embedded solver does not report an optimum.
    """
    auto = backend == "auto"
    if auto:
        backend = "simplex" if lp.n_vars * lp.n_rows <= SIMPLEX_MAX_CELLS else "highs"
    if backend == "simplex":
        sol = _solve_simplex(lp)
    elif backend == "highs":
        sol = _solve_highs(lp)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    sol = _audit(lp, sol, audit_tol)
    if auto and backend == "simplex" and not sol.ok:
        # confirm failures of the dense simplex with HiGHS before reporting them
        sol = _audit(lp, _solve_highs(lp), audit_tol)
    return sol


def _audit(lp: LinearProgram, sol: LpSolution, audit_tol: float) -> LpSolution:
    if sol.ok:
        viol = max(float(np.max(lp.residuals(sol.primal), initial=0.0)), lp.bound_violation(sol.primal))
        sol.max_violation = viol
        if viol > audit_tol:
            r = int(np.argmax(lp.residuals(sol.primal))) if lp.n_rows else -1
            sol.status = "numerical"
            sol.witness = {"row": r, "name": _row_name(lp, r) if r >= 0 else "", "violation": viol}
    return sol


def build(c, rows, lo, hi, offset=0.0, var_names=None, row_names=None, meta=None) -> LinearProgram:
    """Convenience constructor from ``rows = (A, senses, rhs)``."""
    A, senses, rhs = rows
    return LinearProgram(np.asarray(c, float), sp.csr_matrix(A), senses, np.asarray(rhs, float),
                         np.asarray(lo, float), np.asarray(hi, float), offset, var_names,
                         row_names, meta or {})
