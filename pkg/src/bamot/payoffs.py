"""Payoffs and a small closed expression language for them.

Terms available: ``call(K)``, ``put(K)``, ``digital(K)``,
``risk_reversal(K1, K2)``, ``forward_start(K)`` and the linear atoms ``x``,
``x1``, ``x2``. Terms combine linearly with numeric coefficients and
constants, e.g. ``100*digital(6154.05)`` or ``call(1.05) - put(0.95)``.

One-dimensional terms act on the last maturity of the payoff. Expressions are
parsed with :mod:`ast`; nothing is evaluated.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np

_ARITY = {"call": 1, "put": 1, "digital": 1, "risk_reversal": 2, "forward_start": 1}
_ATOMS = ("x", "x1", "x2")


class PayoffError(ValueError):
    pass


@dataclass(frozen=True)
class Term:
    coef: float
    kind: str  # call | put | digital | risk_reversal | forward_start | const | x | x1
    params: tuple = ()


def _eval_1d(kind, params, x):
    if kind == "call":
        return np.maximum(x - params[0], 0.0)
    if kind == "put":
        return np.maximum(params[0] - x, 0.0)
    if kind == "digital":
        return (x >= params[0]).astype(float)
    if kind == "risk_reversal":
        return np.maximum(x - params[1], 0.0) - np.maximum(params[0] - x, 0.0)
    if kind == "x":
        return np.asarray(x, float)
    if kind == "const":
        return np.ones_like(np.asarray(x, float))
    raise PayoffError(f"{kind} is not a one-dimensional term")


@dataclass(frozen=True)
class Payoff:
    """Linear combination of payoff terms."""

    terms: tuple
    text: str = field(default="", compare=False)

    @property
    def dim(self) -> int:
        return 2 if any(t.kind in ("forward_start", "x1") for t in self.terms) else 1

    def __call__(self, *xs):
        if len(xs) == 1:
            if self.dim != 1:
                raise PayoffError("two-maturity payoff needs (x1, x2)")
            x = np.asarray(xs[0], float)
            out = np.zeros_like(x)
            for t in self.terms:
                out = out + t.coef * _eval_1d(t.kind, t.params, x)
            return out
        if len(xs) == 2:
            x1, x2 = np.broadcast_arrays(np.asarray(xs[0], float), np.asarray(xs[1], float))
            out = np.zeros_like(x1)
            for t in self.terms:
                if t.kind == "forward_start":
                    val = np.maximum(x2 - t.params[0] * x1, 0.0)
                elif t.kind == "x1":
                    val = x1
                else:
                    val = _eval_1d(t.kind, t.params, x2)
                out = out + t.coef * val
            return out
        raise PayoffError("payoffs take one or two arguments")

    def __neg__(self):
        return Payoff(tuple(Term(-t.coef, t.kind, t.params) for t in self.terms),
                      f"-({self.text})" if self.text else "")

    def __mul__(self, k: float):
        k = float(k)
        return Payoff(tuple(Term(k * t.coef, t.kind, t.params) for t in self.terms),
                      f"{k:g}*({self.text})" if self.text else "")

    __rmul__ = __mul__

    def __add__(self, other: "Payoff"):
        text = " + ".join(t for t in (self.text, other.text) if t)
        return Payoff(self.terms + other.terms, text)

    def __sub__(self, other: "Payoff"):
        return self + (-other)

    def kinks(self) -> np.ndarray:
        """Breakpoints in the last coordinate (strikes of one-dimensional terms)."""
        pts = []
        for t in self.terms:
            if t.kind in ("call", "put", "digital", "risk_reversal"):
                pts.extend(t.params)
        return np.unique(np.array(pts, float))

    def terminal_slope(self) -> float:
        """Slope as the last coordinate tends to infinity (other coordinate fixed)."""
        s = 0.0
        for t in self.terms:
            if t.kind in ("call", "risk_reversal", "x", "forward_start"):
                s += t.coef
        return s

    def is_convex(self) -> bool:
        """Sufficient test: every nonlinear term enters with a nonnegative weight."""
        for t in self.terms:
            if t.kind in ("call", "put", "forward_start") and t.coef < 0:
                return False
            if t.kind in ("digital", "risk_reversal") and t.coef != 0:
                return False
        return True

    def is_concave(self) -> bool:
        return (-self).is_convex()

    def lipschitz_split(self) -> tuple[float, float]:
        """Lipschitz constants of a convex/convex split ``h = psi_a - psi_b``."""
        la = lb = 0.0
        for t in self.terms:
            c = t.coef
            if t.kind in ("call", "put"):
                la, lb = (la + c, lb) if c > 0 else (la, lb - c)
            elif t.kind == "risk_reversal":
                # long call and short put: one unit in each leg of the split
                la, lb = (la + c, lb + c) if c > 0 else (la - c, lb - c)
            elif t.kind == "x":
                la, lb = (la + c, lb) if c > 0 else (la, lb - c)
            elif t.kind == "digital":
                raise PayoffError("digital is not a difference of Lipschitz convex functions")
        return la, lb

    def total_variation(self) -> float:
        """Total variation for payoffs built from digitals and constants."""
        v = 0.0
        for t in self.terms:
            if t.kind == "digital":
                v += abs(t.coef)
            elif t.kind != "const":
                raise PayoffError("total variation only available for step payoffs")
        return v


def call(K):
    return Payoff((Term(1.0, "call", (float(K),)),), f"call({K})")


def put(K):
    return Payoff((Term(1.0, "put", (float(K),)),), f"put({K})")


def digital(K):
    return Payoff((Term(1.0, "digital", (float(K),)),), f"digital({K})")


def risk_reversal(K1, K2):
    if not K1 <= K2:
        raise PayoffError("risk_reversal needs K1 <= K2")
    return Payoff((Term(1.0, "risk_reversal", (float(K1), float(K2))),), f"risk_reversal({K1}, {K2})")


def forward_start(K):
    return Payoff((Term(1.0, "forward_start", (float(K),)),), f"forward_start({K})")


def constant(c):
    return Payoff((Term(float(c), "const"),), f"{c}")


def linear(name="x"):
    if name not in _ATOMS:
        raise PayoffError(f"unknown coordinate {name!r}")
    kind = "x" if name == "x2" else name  # x2 is the last maturity
    return Payoff((Term(1.0, kind),), name)


_BUILDERS = {"call": call, "put": put, "digital": digital, "risk_reversal": risk_reversal,
             "forward_start": forward_start}


def _number(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _number(node.operand)
        return None if v is None else (-v if isinstance(node.op, ast.USub) else v)
    return None


def _walk(node):
    num = _number(node)
    if num is not None:
        return num
    if isinstance(node, ast.Name):
        if node.id in _ATOMS:
            return linear(node.id)
        raise PayoffError(f"unknown name {node.id!r}")
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _BUILDERS:
            raise PayoffError("unknown payoff function")
        if node.keywords or len(node.args) != _ARITY[node.func.id]:
            raise PayoffError(f"{node.func.id} takes {_ARITY[node.func.id]} numeric argument(s)")
        args = [_number(a) for a in node.args]
        if any(a is None for a in args):
            raise PayoffError("payoff arguments must be numbers")
        return _BUILDERS[node.func.id](*args)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _walk(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        left, right = _walk(node.left), _walk(node.right)
        if isinstance(node.op, (ast.Add, ast.Sub)):
            if isinstance(node.op, ast.Sub):
                right = -right
            if isinstance(left, float) and isinstance(right, float):
                return left + right
            left = constant(left) if isinstance(left, float) else left
            right = constant(right) if isinstance(right, float) else right
            return left + right
        if isinstance(node.op, ast.Mult):
            if isinstance(left, float) and isinstance(right, float):
                return left * right
            if isinstance(left, float):
                return right * left
            if isinstance(right, float):
                return left * right
            raise PayoffError("products of payoffs are not linear")
        if isinstance(node.op, ast.Div) and isinstance(right, float):
            if right == 0:
                raise PayoffError("division by zero")
            return left / right if isinstance(left, float) else left * (1.0 / right)
    raise PayoffError(f"unsupported syntax: {ast.dump(node)[:60]}")


def parse(text: str) -> Payoff:
    """Parse a payoff expression such as ``100*digital(6154.05)``."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise PayoffError(f"cannot parse payoff {text!r}: {exc.msg}") from None
    out = _walk(tree.body)
    if isinstance(out, float):
        out = constant(out)
    return Payoff(out.terms, text.strip())
