"""Free-format MPS export and import for :class:`LinearProgram`."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .model import EQ, GE, LE, LinearProgram, LpError

_ROW_CODE = {GE: "G", EQ: "E", LE: "L"}
_CODE_ROW = {v: k for k, v in _ROW_CODE.items()}


def _names(lp: LinearProgram):
    cols = lp.var_names or [f"x{j}" for j in range(lp.n_vars)]
    rows = lp.row_names or [f"r{i}" for i in range(lp.n_rows)]
    for group in (cols, rows):
        if len(set(group)) != len(group) or any(" " in n for n in group):
            raise LpError("MPS names must be unique and contain no spaces")
    return cols, rows


def to_mps(lp: LinearProgram, name: str = "BAMOT") -> str:
    cols, rows = _names(lp)
    out = [f"NAME {name}", "ROWS", " N obj"]
    out += [f" {_ROW_CODE[s]} {r}" for s, r in zip(lp.senses, rows)]
    out.append("COLUMNS")
    A = lp.A.tocsc()
    for j, cname in enumerate(cols):
        if lp.c[j] != 0.0:
            out.append(f" {cname} obj {float(lp.c[j])!r}")
        start, end = A.indptr[j], A.indptr[j + 1]
        for i, v in zip(A.indices[start:end], A.data[start:end]):
            out.append(f" {cname} {rows[i]} {float(v)!r}")
    out.append("RHS")
    if lp.offset != 0.0:
        out.append(f" rhs obj {-float(lp.offset)!r}")
    for r, b in zip(rows, lp.rhs):
        if b != 0.0:
            out.append(f" rhs {r} {float(b)!r}")
    out.append("BOUNDS")
    for cname, lo, hi in zip(cols, lp.lo, lp.hi):
        if np.isneginf(lo) and np.isposinf(hi):
            out.append(f" FR bnd {cname}")
            continue
        if lo == hi:
            out.append(f" FX bnd {cname} {float(lo)!r}")
            continue
        if np.isneginf(lo):
            out.append(f" MI bnd {cname}")
        elif lo != 0.0:
            out.append(f" LO bnd {cname} {float(lo)!r}")
        if np.isfinite(hi):
            out.append(f" UP bnd {cname} {float(hi)!r}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def from_mps(text: str) -> LinearProgram:
    section = None
    obj = None
    row_names, senses = [], []
    row_idx = {}
    col_idx = {}
    entries, cost = [], {}
    rhs, offset = {}, 0.0
    bounds = {}
    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            section = raw.split()[0].upper()
            if section == "ENDATA":
                break
            continue
        tok = raw.split()
        if section == "ROWS":
            code, rname = tok[0].upper(), tok[1]
            if code == "N":
                if obj is None:
                    obj = rname
                continue
            row_idx[rname] = len(row_names)
            row_names.append(rname)
            senses.append(_CODE_ROW[code])
        elif section == "COLUMNS":
            cname = tok[0]
            j = col_idx.setdefault(cname, len(col_idx))
            for rname, val in zip(tok[1::2], tok[2::2]):
                if rname == obj:
                    cost[j] = float(val)
                elif rname in row_idx:
                    entries.append((row_idx[rname], j, float(val)))
        elif section == "RHS":
            for rname, val in zip(tok[1::2], tok[2::2]):
                if rname == obj:
                    offset = -float(val)
                else:
                    rhs[row_idx[rname]] = float(val)
        elif section == "BOUNDS":
            kind, cname = tok[0].upper(), tok[2]
            j = col_idx.setdefault(cname, len(col_idx))
            lo, hi = bounds.get(j, (0.0, np.inf))
            val = float(tok[3]) if len(tok) > 3 else None
            if kind == "LO":
                lo = val
            elif kind == "UP":
                hi = val
            elif kind == "FX":
                lo = hi = val
            elif kind == "FR":
                lo, hi = -np.inf, np.inf
            elif kind == "MI":
                lo = -np.inf
            elif kind == "PL":
                hi = np.inf
            else:
                raise LpError(f"unsupported bound type {kind}")
            bounds[j] = (lo, hi)
        else:
            raise LpError(f"unsupported MPS section {section}")
    n, m = len(col_idx), len(row_names)
    c = np.zeros(n)
    for j, v in cost.items():
        c[j] = v
    if entries:
        i, j, v = zip(*entries)
        A = sp.csr_matrix((v, (i, j)), shape=(m, n))
    else:
        A = sp.csr_matrix((m, n))
    b = np.zeros(m)
    for i, v in rhs.items():
        b[i] = v
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    for j, (l, h) in bounds.items():
        lo[j], hi[j] = l, h
    names = [None] * n
    for k, j in col_idx.items():
        names[j] = k
    return LinearProgram(c, A, senses, b, lo, hi, offset, names, row_names)
