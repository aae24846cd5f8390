"""Generated numba kernels for the log-likelihood tape.

The kernel walks instances one at a time with scalar locals, doing the
forward sweep then the adjoint sweep for each row.  Kernels are cached by
their generated source, so layouts that compile to the same tape share one.
"""

from __future__ import annotations

import logging

import numpy as np

from . import expr as E
from . import program as P

log = logging.getLogger(__name__)

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

_CACHE: dict[str, object] = {}

_PRELUDE = """
import math
import numpy as np

def _sig(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)
"""


def _fwd(op: P.Op) -> list[str]:
    o, a = f"s{op.out}", [f"s{k}" for k in op.args]
    c = op.code
    if c == P.CONST:
        return [f"{o} = {op.value!r}"]
    if c == P.ADD:
        return [f"{o} = {a[0]} + {a[1]}"]
    if c == P.SUB:
        return [f"{o} = {a[0]} - {a[1]}"]
    if c == P.MUL:
        return [f"{o} = {a[0]} * {a[1]}"]
    if c == P.DIV:
        return [f"{o} = {a[0]} / {a[1]}"]
    if c == P.NEG:
        return [f"{o} = -{a[0]}"]
    if c == P.LOGISTIC:
        return [f"{o} = _sig({a[0]})"]
    if c == P.MIX:
        return [f"{o} = (1.0 - {a[0]}) * {a[1]} + {a[0]} * {a[2]}"]
    if c == P.MARGIN:
        return [f"{o} = {a[0]} * {a[1]} + (1.0 - {a[1]})"]
    if c == P.GENMEAN:
        k = len(a)
        if op.value == 0.0:
            return [f"{o} = math.exp((" + " + ".join(f"math.log({x})" for x in a) + f") / {k}.0)"]
        p = op.value
        if abs(p) < E.LOG_PATH_MAX:
            terms = " + ".join(f"math.expm1({p!r} * math.log({x}))" for x in a)
            return [f"{o} = math.exp(math.log1p(({terms}) / {k}.0) / {p!r})"]
        return [f"{o} = ((" + " + ".join(f"{x} ** {p!r}" for x in a) + f") / {k}.0) ** {1.0 / p!r}"]
    raise ValueError(c)


def _bwd(op: P.Op) -> list[str]:
    g, a = f"g{op.out}", op.args
    s = [f"s{k}" for k in a]
    ga = [f"g{k}" for k in a]
    c = op.code
    if c == P.CONST:
        return []
    if c == P.ADD:
        return [f"{ga[0]} += {g}", f"{ga[1]} += {g}"]
    if c == P.SUB:
        return [f"{ga[0]} += {g}", f"{ga[1]} -= {g}"]
    if c == P.MUL:
        return [f"{ga[0]} += {g} * {s[1]}", f"{ga[1]} += {g} * {s[0]}"]
    if c == P.DIV:
        return [f"{ga[0]} += {g} / {s[1]}", f"{ga[1]} -= {g} * {s[0]} / ({s[1]} * {s[1]})"]
    if c == P.NEG:
        return [f"{ga[0]} -= {g}"]
    if c == P.LOGISTIC:
        return [f"{ga[0]} += {g} * s{op.out} * (1.0 - s{op.out})"]
    if c == P.MIX:
        return [f"{ga[0]} += {g} * ({s[2]} - {s[1]})",
                f"{ga[1]} += {g} * (1.0 - {s[0]})",
                f"{ga[2]} += {g} * {s[0]}"]
    if c == P.MARGIN:
        return [f"{ga[0]} += {g} * {s[1]}", f"{ga[1]} -= {g} * (1.0 - {s[0]})"]
    if c == P.GENMEAN:
        k, p, out = len(a), op.value, f"s{op.out}"
        if p == 0.0:
            return [f"{gx} += {g} * {out} / ({k}.0 * {x})" for gx, x in zip(ga, s)]
        return [f"{gx} += {g} * {x} ** {p - 1.0!r} * {out} ** {1.0 - p!r} / {k}.0"
                for gx, x in zip(ga, s)]
    raise ValueError(c)


def generate_source(prog: P.Program) -> str:
    """Python source of ``kernel(x, X, y, nu) -> (ll, grad, bad_row)``."""
    M, K = prog.n_meta, prog.n_params
    lines = ["def kernel(x, X, y, nu):",
             f"    grad = np.zeros({K})",
             "    ll = 0.0",
             "    bad = -1",
             f"    s{prog.nu_slot} = nu"]
    lines += [f"    s{M + j} = x[{j}]" for j in range(K)]
    lines.append("    for i in range(X.shape[0]):")
    body = [f"s{j} = X[i, {j}]" for j in range(M)]
    for op in prog.ops:
        body += _fwd(op)
    out = f"s{prog.output}"
    # every computed node must be finite, not just the output
    computed = sorted({k for k in prog.node_slots.values() if k > prog.nu_slot} | {prog.output})
    finite = " and ".join(f"math.isfinite(s{k})" for k in computed)
    body += [
        f"r = {out}",
        f"if not ({finite}):",
        "    bad = i",
        "    break",
        "yi = y[i]",
        f"if r <= {P.EPS!r}:",
        f"    q = {P.EPS!r}",
        "    dq = 0.0",
        f"elif r >= {1.0 - P.EPS!r}:",
        f"    q = {1.0 - P.EPS!r}",
        "    dq = 0.0",
        "else:",
        "    q = r",
        "    dq = yi / q - (1.0 - yi) / (1.0 - q)",
        "ll += yi * math.log(q) + (1.0 - yi) * math.log(1.0 - q)",
    ]
    body += [f"g{k} = 0.0" for k in range(prog.n_slots)]
    body.append(f"g{prog.output} = dq")
    for op in reversed(prog.ops):
        body += _bwd(op)
    body += [f"grad[{j}] += g{M + j}" for j in range(K)]
    lines += ["        " + b for b in body]
    lines.append("    return ll, grad, bad")
    return _PRELUDE + "\n" + "\n".join(lines) + "\n"


def available() -> bool:
    return numba is not None


def get_kernel(prog: P.Program):
    """Compiled kernel for ``prog``, or ``None`` when numba is unavailable."""
    if numba is None:
        return None
    src = generate_source(prog)
    kern = _CACHE.get(src)
    if kern is None:
        ns: dict = {}
        exec(compile(src, "<mlayout-kernel>", "exec"), ns)
        sig = numba.njit(cache=False, nogil=True, error_model="numpy")(ns["_sig"])
        ns["_sig"] = sig
        # rebind the helper so the jitted kernel sees the jitted logistic
        kernel_py = ns["kernel"]
        kernel_py.__globals__["_sig"] = sig
        kern = numba.njit(cache=False, nogil=True, error_model="numpy")(kernel_py)
        _CACHE[src] = kern
        log.debug("compiled kernel with %d ops", len(prog.ops))
    return kern


def run_kernel(kern, x, X, y, nu: float):
    return kern(np.ascontiguousarray(x, dtype=float), X, y, float(nu))


__all__ = ["available", "generate_source", "get_kernel", "run_kernel"]
