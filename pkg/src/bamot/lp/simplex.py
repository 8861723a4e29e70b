"""Dense revised simplex for ``min c.x  s.t.  A x = b, x >= 0`` with ``b >= 0``.

Two-phase method with Bland's smallest-index rule for the entering variable.
The leaving row comes from a Harris ratio test (largest pivot among rows that
block within a small tolerance, smallest basic index among equals); after a
long run of degenerate pivots the strict Bland ratio test takes over, which
rules out cycling. Columns that are negative multiples of a basic column are
never entered. The basis inverse is kept explicitly and refactorised
periodically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_ITERATIONS = 1_000_000
REFACTOR_EVERY = 64
HARRIS_DELTA = 1e-9
DEGENERATE_LIMIT = 200


class SimplexIterationLimit(RuntimeError):
    """Raised when the iteration safeguard trips (suspected cycling)."""


class SimplexNumericalError(RuntimeError):
    """Raised when the basis loses numerical rank."""


@dataclass
class StandardResult:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None
    value: float
    iterations: int
    duals: np.ndarray | None = None
    infeasible_row: int | None = None


class _Tableau:
    def __init__(self, A, b, basis, tol_piv, max_iter, twins=None):
        self.A = A
        self.twins = twins
        self.b = b
        self.m, self.n = A.shape
        self.basis = np.array(basis, dtype=int)
        self.tol_piv = tol_piv
        self.max_iter = max_iter
        self.iterations = 0
        self.degenerate_run = 0
        self._refactor()

    def _refactor(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise SimplexNumericalError("basis matrix became singular") from exc
        self.xB = self.Binv @ self.b
        self.since_refactor = 0

    def pivot(self, enter, leave_row, u):
        piv = u[leave_row]
        self.Binv[leave_row] /= piv
        others = np.arange(self.m) != leave_row
        self.Binv[others] -= np.outer(u[others], self.Binv[leave_row])
        self.basis[leave_row] = enter
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self._refactor()
        else:
            self.xB = self.Binv @ self.b

    def _twin_blocked(self, c, is_basic, tol_opt):
        """Columns whose negatively proportional twin is basic.

        Entering such a column gives a singular basis, and its exact reduced
        cost ``c_j + s c_t`` tells whether it is a ray; ``nan`` marks rays.
        """
        j, t, s = self.twins
        hit = is_basic[t] & (j < self.n)
        blocked = np.zeros(self.n, bool)
        jj = j[hit]
        ray = c[jj] + s[hit] * c[t[hit]] < -tol_opt
        blocked[jj[~ray]] = True
        self.ray = int(jj[ray][0]) if ray.any() else None
        return blocked

    def run(self, c, tol_opt, allowed=None):
        """Iterate to optimality for cost ``c``; return ``optimal``, ``unbounded`` or ``stalled``.

        Candidates whose column has no usable pivot are skipped until the next
        basis change; a ray is reported only after a fresh factorisation.
        """
        is_basic = np.zeros(self.n, bool)
        skip = np.zeros(self.n, bool)
        while True:
            if self.iterations >= self.max_iter:
                raise SimplexIterationLimit(f"simplex exceeded {self.max_iter} iterations")
            y = c[self.basis] @ self.Binv
            d = c - y @ self.A
            is_basic[:] = False
            is_basic[self.basis] = True
            cand = (d < -tol_opt) & ~is_basic & ~skip
            if allowed is not None:
                cand &= allowed
            if self.twins is not None:
                cand &= ~self._twin_blocked(c, is_basic, tol_opt)
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                if skip.any():
                    if self.since_refactor:
                        self._refactor()
                        skip[:] = False
                        continue
                    return "stalled", y
                return "optimal", y
            enter = int(idx[0])  # Bland: smallest eligible index
            if self.twins is not None and self.ray is not None and self.ray <= enter:
                return "unbounded", y
            u = self.Binv @ self.A[:, enter]
            if not np.any(u > self.tol_piv):
                if self.since_refactor:
                    # confirm the ray on a fresh factorisation before reporting it
                    self._refactor()
                    skip[:] = False
                    continue
                return "unbounded", y
            pos = u > max(self.tol_piv, 1e-7 * float(np.abs(u).max()))
            if not np.any(pos):
                skip[enter] = True
                continue
            xB = np.maximum(self.xB, 0.0)
            ratios = np.full(self.m, np.inf)
            ratios[pos] = xB[pos] / u[pos]
            rmin = ratios.min()
            if self.degenerate_run < DEGENERATE_LIMIT:
                # Harris pass: among rows blocking within HARRIS_DELTA take the largest pivot
                bound = np.full(self.m, np.inf)
                bound[pos] = (xB[pos] + HARRIS_DELTA) / u[pos]
                rows = np.flatnonzero(ratios <= bound.min())
                rows = rows[u[rows] >= u[rows].max()]
            else:
                # long degenerate stretch: strict Bland ratio test so cycling cannot occur
                rows = np.flatnonzero(ratios <= rmin + 1e-12 * max(1.0, rmin))
                rows = rows[u[rows] >= 1e-3 * u[rows].max()]
            leave_row = int(rows[np.argmin(self.basis[rows])])
            self.degenerate_run = self.degenerate_run + 1 if rmin <= 1e-12 else 0
            self.pivot(enter, leave_row, u)
            skip[:] = False
            self.iterations += 1


def _find_twins(A):
    """Pairs ``(j, t, s)`` with column ``j = -s * column t`` and ``s > 0``."""
    n = A.shape[1]
    scale = np.abs(A).max(axis=0)
    groups = {}
    sign = np.zeros(n)
    for j in range(n):
        if scale[j] == 0.0:
            continue
        col = A[:, j] / scale[j]
        first = col[np.flatnonzero(col)[0]]
        sign[j] = np.sign(first)
        key = (np.round(col * sign[j], 12) + 0.0).tobytes()  # +0.0 folds -0.0
        groups.setdefault(key, []).append(j)
    pairs = []
    for members in groups.values():
        for j in members:
            for t in members:
                if sign[j] != sign[t]:
                    pairs.append((j, t, scale[j] / scale[t]))
    if not pairs:
        return None
    j, t, s = (np.array(v) for v in zip(*pairs))
    return j.astype(int), t.astype(int), s.astype(float)


def solve_standard(c, A, b, tol_feas=1e-9, tol_opt=1e-9, tol_piv=1e-11,
                   max_iter=MAX_ITERATIONS) -> StandardResult:
    """Solve ``min c.x, A x = b, x >= 0``. ``b`` must be nonnegative."""
    c = np.asarray(c, float)
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    m, n = A.shape
    if np.any(b < 0):
        raise ValueError("right-hand side must be nonnegative")
    if m == 0:
        if np.any(c < -tol_opt):
            return StandardResult("unbounded", None, -np.inf, 0)
        return StandardResult("optimal", np.zeros(n), 0.0, 0, np.zeros(0))

    # phase 1 on [A | I] with artificial basis
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    twins = _find_twins(A)
    tab = _Tableau(A1, b, np.arange(n, n + m), tol_piv, max_iter, twins)
    if tab.run(c1, tol_opt)[0] != "optimal":
        # phase 1 is bounded below by zero, so anything else is numerical trouble
        raise SimplexNumericalError("phase 1 stalled without a usable pivot")
    infeas = float(c1[tab.basis] @ tab.xB)
    if infeas > tol_feas * max(1.0, float(np.abs(b).max())):
        art = tab.basis >= n
        rows_art = np.flatnonzero(art)
        worst = int(tab.basis[rows_art[np.argmax(tab.xB[rows_art])]] - n) if rows_art.size else None
        return StandardResult("infeasible", None, np.nan, tab.iterations, infeasible_row=worst)

    # drive zero-level artificials out of the basis; drop redundant rows
    keep_rows = np.ones(m, bool)
    for r in range(m):
        if tab.basis[r] < n:
            continue
        row = tab.Binv[r] @ A
        row[tab.basis[tab.basis < n]] = 0.0
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) > 1e-9:
            # largest pivot keeps the basis well conditioned; zero level, so no ratio test
            tab.pivot(j, r, tab.Binv @ A1[:, j])
        else:
            keep_rows[tab.basis[r] - n] = False

    if not keep_rows.all():
        # rebuild on the non-redundant rows with the structural basis found so far
        A = A[keep_rows]
        b = b[keep_rows]
        basis = [j for j in tab.basis if j < n]
        tab2 = _Tableau(A, b, basis, tol_piv, max_iter, twins)
        tab2.iterations = tab.iterations
        tab = tab2
        A_run = A
        c_run = c
        allowed = None
    else:
        A_run = A1
        c_run = np.concatenate([c, np.zeros(m)])
        allowed = np.concatenate([np.ones(n, bool), np.zeros(m, bool)])

    status, y = tab.run(c_run, tol_opt, allowed)
    if status == "stalled":
        raise SimplexNumericalError("phase 2 stalled without a usable pivot")
    if status == "unbounded":
        return StandardResult("unbounded", None, -np.inf, tab.iterations)
    x = np.zeros(A_run.shape[1])
    x[tab.basis] = np.maximum(tab.xB, 0.0)
    x = x[:n]
    duals = np.zeros(m)
    duals[keep_rows] = y
    return StandardResult("optimal", x, float(c @ x), tab.iterations, duals)
