"""Compile a layout to a flat tape of primitive operations.

Slot ``k`` holds one value per instance (or a scalar broadcast across
instances).  The forward sweep fills slots in tape order; the reverse sweep
accumulates adjoints back to the profile-parameter slots.  Two executors
share the tape: the vectorised numpy one below and a generated numba kernel
in :mod:`mlayout._jit`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import expr as E
from .errors import NonFiniteNode
from .layout import NodeKind, ValidatedLayout

EPS = 1e-9

# opcodes
CONST, ADD, SUB, MUL, DIV, NEG, LOGISTIC, MIX, MARGIN, GENMEAN = range(10)
OP_NAMES = ("const", "add", "sub", "mul", "div", "neg", "logistic", "mix", "margin", "genmean")


@dataclass(frozen=True)
class Op:
    code: int
    out: int
    args: tuple[int, ...] = ()
    value: float = 0.0  # constant, or genmean exponent
    owner: str = ""  # declaring node, for error messages


@dataclass(frozen=True)
class Program:
    """Linearised layout.

    Slots ``0..M-1`` are meta-features, ``M..M+P-1`` profile parameters and
    ``M+P`` is the noise-fallback constant.
    """

    n_meta: int
    n_params: int
    n_slots: int
    ops: tuple[Op, ...]
    node_slots: dict
    output: int
    observed: str

    @property
    def nu_slot(self) -> int:
        return self.n_meta + self.n_params

    @property
    def param_slots(self) -> range:
        return range(self.n_meta, self.n_meta + self.n_params)


def compile_layout(layout: ValidatedLayout) -> Program:
    metas = [n.name for n in layout.meta_features]
    params = layout.parameter_names
    slots: dict[str, int] = {name: i for i, name in enumerate(metas)}
    slots.update({name: len(metas) + j for j, name in enumerate(params)})
    nu_slot = len(metas) + len(params)
    ops: list[Op] = []
    counter = [nu_slot + 1]

    def fresh() -> int:
        counter[0] += 1
        return counter[0] - 1

    def emit(e: E.Expr, owner: str) -> int:
        if isinstance(e, E.Ref):
            return nu_slot if e.name == E.NU else slots[e.name]
        if isinstance(e, E.Const):
            out = fresh()
            ops.append(Op(CONST, out, (), float(e.value), owner))
            return out
        if isinstance(e, E.GenMean):
            args = tuple(emit(o, owner) for o in e.operands)
            out = fresh()
            ops.append(Op(GENMEAN, out, args, E.genmean_exponent(e.exponent), owner))
            return out
        code = {E.Add: ADD, E.Sub: SUB, E.Mul: MUL, E.Div: DIV, E.Neg: NEG,
                E.Logistic: LOGISTIC, E.Mix: MIX, E.Margin: MARGIN}[type(e)]
        args = tuple(emit(c, owner) for c in e.children())
        out = fresh()
        ops.append(Op(code, out, args, 0.0, owner))
        return out

    for name in layout.order:
        node = layout.node(name)
        if node.kind in (NodeKind.DERIVED, NodeKind.OBSERVED):
            slots[name] = emit(node.expr, name)

    return Program(
        n_meta=len(metas),
        n_params=len(params),
        n_slots=counter[0],
        ops=tuple(ops),
        node_slots=dict(slots),
        output=slots[layout.observed.name],
        observed=layout.observed.name,
    )


# -- numpy executor ---------------------------------------------------------
def forward(prog: Program, x, X, nu: float) -> list:
    """Evaluate every slot.

    ``x`` holds constrained parameters with shape ``(P,)`` or ``(D, P)``;
    ``X`` is the ``(N, M)`` design matrix.  With a batch of ``D`` draws the
    row-varying slots have shape ``(D, N)``.
    """
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    vals: list = [None] * prog.n_slots
    for j in range(prog.n_meta):
        vals[j] = X[:, j]
    for j in range(prog.n_params):
        vals[prog.n_meta + j] = x[..., j, None] if x.ndim == 2 else x[j]
    vals[prog.nu_slot] = float(nu)
    with np.errstate(all="ignore"):
        for op in prog.ops:
            a = [vals[k] for k in op.args]
            vals[op.out] = _apply(op, a)
    return vals


def _apply(op: Op, a):
    c = op.code
    if c == CONST:
        return op.value
    if c == ADD:
        return a[0] + a[1]
    if c == SUB:
        return a[0] - a[1]
    if c == MUL:
        return a[0] * a[1]
    if c == DIV:
        return a[0] / a[1]
    if c == NEG:
        return -a[0]
    if c == LOGISTIC:
        return expit(a[0])
    if c == MIX:
        return (1.0 - a[0]) * a[1] + a[0] * a[2]
    if c == MARGIN:
        return a[0] * a[1] + (1.0 - a[1])
    if c == GENMEAN:
        return E.genmean(op.value, [np.asarray(v, dtype=float) for v in a])
    raise ValueError(f"bad opcode {c}")


def check_finite(prog: Program, vals, layout: ValidatedLayout) -> None:
    """Raise :class:`NonFiniteNode` for the first derived node with a bad value."""
    for name in layout.order:
        node = layout.node(name)
        if node.kind in (NodeKind.DERIVED, NodeKind.OBSERVED):
            if not np.all(np.isfinite(vals[prog.node_slots[name]])):
                raise NonFiniteNode(name)


def clamp(q):
    return np.clip(q, EPS, 1.0 - EPS)


def loglik_grad(prog: Program, x, X, y, nu: float, layout: ValidatedLayout | None = None):
    """Bernoulli log-likelihood and its gradient in the constrained parameters."""
    x = np.asarray(x, dtype=float)
    n = X.shape[0]
    if n == 0:
        return 0.0, np.zeros(prog.n_params)
    vals = forward(prog, x, X, nu)
    raw = np.broadcast_to(np.asarray(vals[prog.output], dtype=float), (n,))
    if layout is not None:
        check_finite(prog, vals, layout)
    elif not np.all(np.isfinite(raw)):
        raise NonFiniteNode(prog.observed)
    q = clamp(raw)
    y = np.asarray(y, dtype=float)
    ll = float(np.sum(y * np.log(q) + (1.0 - y) * np.log1p(-q)))
    inside = (raw > EPS) & (raw < 1.0 - EPS)
    dq = np.where(inside, y / q - (1.0 - y) / (1.0 - q), 0.0)
    grads = backward(prog, vals, dq)
    return ll, grads


def backward(prog: Program, vals, g_out) -> np.ndarray:
    adj: list = [0.0] * prog.n_slots
    adj[prog.output] = g_out
    with np.errstate(all="ignore"):
        for op in reversed(prog.ops):
            g = adj[op.out]
            if isinstance(g, float) and g == 0.0:
                continue
            a = op.args
            c = op.code
            if c == CONST:
                continue
            if c == ADD:
                adj[a[0]] = adj[a[0]] + g
                adj[a[1]] = adj[a[1]] + g
            elif c == SUB:
                adj[a[0]] = adj[a[0]] + g
                adj[a[1]] = adj[a[1]] - g
            elif c == MUL:
                adj[a[0]] = adj[a[0]] + g * vals[a[1]]
                adj[a[1]] = adj[a[1]] + g * vals[a[0]]
            elif c == DIV:
                adj[a[0]] = adj[a[0]] + g / vals[a[1]]
                adj[a[1]] = adj[a[1]] - g * vals[a[0]] / (vals[a[1]] * vals[a[1]])
            elif c == NEG:
                adj[a[0]] = adj[a[0]] - g
            elif c == LOGISTIC:
                s = vals[op.out]
                adj[a[0]] = adj[a[0]] + g * s * (1.0 - s)
            elif c == MIX:
                w, m, f = (vals[k] for k in a)
                adj[a[0]] = adj[a[0]] + g * (f - m)
                adj[a[1]] = adj[a[1]] + g * (1.0 - w)
                adj[a[2]] = adj[a[2]] + g * w
            elif c == MARGIN:
                adj[a[0]] = adj[a[0]] + g * vals[a[1]]
                adj[a[1]] = adj[a[1]] - g * (1.0 - vals[a[0]])
            elif c == GENMEAN:
                p, k = op.value, len(a)
                out = vals[op.out]
                for slot in a:
                    xi = vals[slot]
                    if p == 0.0:
                        d = out / (k * xi)
                    else:
                        d = np.power(xi, p - 1.0) * np.power(out, 1.0 - p) / k
                    adj[slot] = adj[slot] + g * d
    return np.array([float(np.sum(adj[s])) for s in prog.param_slots])
