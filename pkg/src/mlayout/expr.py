"""Expression trees for linking functions.

Nodes are small frozen dataclasses, so structural equality and hashing come
for free.  ``Ref("nu")`` names the noise-fallback constant, which is supplied
by the data rather than declared in the layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

#: reserved name for the constant-model fallback probability
NU = "nu"


class Expr:
    __slots__ = ()

    def children(self) -> tuple["Expr", ...]:
        return ()

    # operator sugar for building layouts in Python
    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __neg__(self):
        return Neg(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Ref(Expr):
    name: str
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr

    def children(self):
        return (self.operand,)


@dataclass(frozen=True)
class Logistic(Expr):
    operand: Expr

    def children(self):
        return (self.operand,)


@dataclass(frozen=True)
class Mix(Expr):
    """``(1 - weight) * model + weight * fallback``."""

    weight: Expr
    model: Expr
    fallback: Expr

    def children(self):
        return (self.weight, self.model, self.fallback)


@dataclass(frozen=True)
class Margin(Expr):
    """``1 - (1 - ability) * presence``: ability when present, 1 when absent."""

    ability: Expr
    presence: Expr

    def children(self):
        return (self.ability, self.presence)


@dataclass(frozen=True)
class GenMean(Expr):
    """Power mean ``(mean(x_i ** p)) ** (1 / p)`` with a literal exponent.

    Large positive ``p`` approaches the maximum, large negative ``p`` the
    minimum; ``p == 0`` is the geometric mean.
    """

    exponent: float
    operands: tuple[Expr, ...]

    def children(self):
        return self.operands


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return Ref(x)
    return Const(float(x))


def refs(expr: Expr) -> list[str]:
    """Referenced names in first-occurrence order."""
    seen: dict[str, None] = {}
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Ref):
            seen.setdefault(e.name, None)
        stack.extend(reversed(e.children()))
    return list(seen)


def ref_positions(expr: Expr) -> dict[str, tuple[int, int] | None]:
    out: dict[str, tuple[int, int] | None] = {}
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Ref) and e.name not in out:
            out[e.name] = e.pos
        stack.extend(reversed(e.children()))
    return out


def logistic(x):
    """Numerically stable standard logistic, elementwise."""
    return expit(x)


def evaluate(expr: Expr, env) -> np.ndarray | float:
    """Evaluate ``expr`` with numpy broadcasting; ``env`` maps names to values."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Ref):
        return env[expr.name]
    if isinstance(expr, Add):
        return evaluate(expr.left, env) + evaluate(expr.right, env)
    if isinstance(expr, Sub):
        return evaluate(expr.left, env) - evaluate(expr.right, env)
    if isinstance(expr, Mul):
        return evaluate(expr.left, env) * evaluate(expr.right, env)
    if isinstance(expr, Div):
        return evaluate(expr.left, env) / evaluate(expr.right, env)
    if isinstance(expr, Neg):
        return -evaluate(expr.operand, env)
    if isinstance(expr, Logistic):
        return logistic(evaluate(expr.operand, env))
    if isinstance(expr, Mix):
        w = evaluate(expr.weight, env)
        return (1.0 - w) * evaluate(expr.model, env) + w * evaluate(expr.fallback, env)
    if isinstance(expr, Margin):
        p = evaluate(expr.presence, env)
        # a*p + (1 - p) keeps both boundary identities exact
        return evaluate(expr.ability, env) * p + (1.0 - p)
    if isinstance(expr, GenMean):
        xs = [np.asarray(evaluate(o, env), dtype=float) for o in expr.operands]
        return genmean(expr.exponent, xs)
    raise TypeError(f"not an expression: {expr!r}")


GEOMETRIC_TOL = 1e-8
LOG_PATH_MAX = 1.0


def genmean_exponent(p: float) -> float:
    """Exponents this close to 0 are evaluated as the geometric mean."""
    return 0.0 if abs(p) < GEOMETRIC_TOL else float(p)


def genmean(p: float, xs):
    k = len(xs)
    p = genmean_exponent(p)
    if p == 0.0:
        return np.exp(sum(np.log(x) for x in xs) / k)
    if abs(p) < LOG_PATH_MAX:
        # log space keeps full precision as p approaches 0
        return np.exp(np.log1p(sum(np.expm1(p * np.log(x)) for x in xs) / k) / p)
    return (sum(np.power(x, p) for x in xs) / k) ** (1.0 / p)
