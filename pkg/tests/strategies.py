"""Hypothesis strategies for random valid layouts."""

from hypothesis import strategies as st

from mlayout import expr as E
from mlayout.layout import LayoutSpec, bias, capability, derived, metafeature, observed, robustness
from mlayout.priors import Beta, Normal, ScaledBeta, Uniform

numbers = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
positive = st.floats(0.05, 50)


@st.composite
def priors(draw):
    kind = draw(st.sampled_from(["uniform", "scaledbeta", "beta", "normal"]))
    lo = draw(st.floats(-100, 100))
    width = draw(st.floats(0.01, 100))
    if kind == "uniform":
        return Uniform(lo, lo + width)
    if kind == "scaledbeta":
        return ScaledBeta(draw(positive), draw(positive), lo, lo + width)
    if kind == "beta":
        return Beta(draw(positive), draw(positive))
    return Normal(draw(numbers), draw(positive))


def expressions(names):
    leaves = st.one_of(st.builds(E.Ref, st.sampled_from(names)), st.builds(E.Const, numbers))

    def extend(children):
        return st.one_of(
            st.builds(E.Add, children, children),
            st.builds(E.Sub, children, children),
            st.builds(E.Mul, children, children),
            st.builds(E.Div, children, children),
            st.builds(E.Neg, children),
            st.builds(E.Logistic, children),
            st.builds(E.Mix, children, children, children),
            st.builds(E.Margin, children, children),
            st.builds(lambda p, xs: E.GenMean(p, tuple(xs)), numbers, st.lists(children, min_size=1, max_size=3)),
        )

    return st.recursive(leaves, extend, max_leaves=12)


_SLOTS = [f"#{k}" for k in range(8)]
_TEMPLATES = expressions(_SLOTS)


def _bind(e, names):
    """Rewrite placeholder refs ``#k`` to ``names[k % len(names)]``."""
    if isinstance(e, E.Ref):
        return E.Ref(names[int(e.name[1:]) % len(names)])
    if isinstance(e, E.Const):
        return e
    if isinstance(e, E.GenMean):
        return E.GenMean(e.exponent, tuple(_bind(o, names) for o in e.operands))
    return type(e)(*(_bind(c, names) for c in e.children()))


@st.composite
def layouts(draw):
    """A random structurally valid layout spec."""
    nodes, names = [], []
    for i in range(draw(st.integers(0, 3))):
        name = f"m{i}"
        if draw(st.booleans()):
            lo = draw(st.floats(-10, 10))
            nodes.append(metafeature(name, lo, lo + draw(st.floats(0.1, 10))))
        else:
            levels = sorted(set(draw(st.lists(st.integers(-3, 3), min_size=1, max_size=4))))
            nodes.append(metafeature(name, levels=tuple(float(v) for v in levels)))
        names.append(name)
    makers = [capability, bias, robustness]
    for i in range(draw(st.integers(1, 3))):
        name = f"p{i}"
        nodes.append(draw(st.sampled_from(makers))(name, draw(priors())))
        names.append(name)
    refs = names + [E.NU]
    for i in range(draw(st.integers(0, 3))):
        name = f"d{i}"
        rng = None
        if draw(st.booleans()):
            lo = draw(st.floats(-5, 5))
            rng = (lo, lo + draw(st.floats(0.1, 5)))
        nodes.append(derived(name, _bind(draw(_TEMPLATES), refs), rng))
        refs = refs + [name]
    obs = _bind(draw(_TEMPLATES), refs)
    # every non-observed node must feed something
    used = set(E.refs(obs)).union(*(E.refs(n.expr) for n in nodes if n.expr is not None))
    for name in refs:
        if name != E.NU and name not in used:
            obs = E.Add(obs, E.Ref(name))
    nodes.append(observed("obs", obs))
    order = draw(st.permutations(nodes))
    return LayoutSpec(draw(st.sampled_from(["rand", "my layout"])), tuple(order))


# -- seeded numpy generators, for timed bulk runs ---------------------------
def _np_prior(rng):
    kind = rng.integers(4)
    lo, width = rng.uniform(-100, 100), rng.uniform(0.01, 100)
    if kind == 0:
        return Uniform(lo, lo + width)
    if kind == 1:
        return ScaledBeta(rng.uniform(0.05, 50), rng.uniform(0.05, 50), lo, lo + width)
    if kind == 2:
        return Beta(rng.uniform(0.05, 50), rng.uniform(0.05, 50))
    return Normal(rng.uniform(-1e6, 1e6), rng.uniform(0.05, 50))


def _np_number(rng):
    return float(rng.choice([rng.uniform(-1e6, 1e6), rng.integers(-5, 6), rng.uniform(-1, 1) * 10.0 ** rng.integers(-8, 8)]))


def random_expr(rng, names, depth=3):
    if depth == 0 or rng.random() < 0.3:
        return E.Ref(str(rng.choice(names))) if rng.random() < 0.7 else E.Const(_np_number(rng))
    sub = lambda: random_expr(rng, names, depth - 1)  # noqa: E731
    k = rng.integers(9)
    if k < 4:
        return (E.Add, E.Sub, E.Mul, E.Div)[k](sub(), sub())
    if k == 4:
        return E.Neg(sub())
    if k == 5:
        return E.Logistic(sub())
    if k == 6:
        return E.Mix(sub(), sub(), sub())
    if k == 7:
        return E.Margin(sub(), sub())
    return E.GenMean(_np_number(rng), tuple(sub() for _ in range(rng.integers(1, 4))))


def random_layout(rng) -> LayoutSpec:
    """Numpy-driven counterpart of :func:`layouts`."""
    nodes, names = [], []
    for i in range(rng.integers(0, 4)):
        name = f"m{i}"
        if rng.random() < 0.5:
            lo = rng.uniform(-10, 10)
            nodes.append(metafeature(name, lo, lo + rng.uniform(0.1, 10)))
        else:
            levels = sorted(set(rng.integers(-3, 4, rng.integers(1, 5)).tolist()))
            nodes.append(metafeature(name, levels=tuple(float(v) for v in levels)))
        names.append(name)
    makers = [capability, bias, robustness]
    for i in range(rng.integers(1, 4)):
        nodes.append(makers[rng.integers(3)](f"p{i}", _np_prior(rng)))
        names.append(f"p{i}")
    refs = names + [E.NU]
    for i in range(rng.integers(0, 4)):
        lo = rng.uniform(-5, 5)
        nodes.append(derived(f"d{i}", random_expr(rng, refs), (lo, lo + rng.uniform(0.1, 5)) if rng.random() < 0.5 else None))
        refs = refs + [f"d{i}"]
    obs = random_expr(rng, refs)
    used = set(E.refs(obs)).union(*(E.refs(n.expr) for n in nodes if n.expr is not None))
    for name in refs:
        if name != E.NU and name not in used:
            obs = E.Add(obs, E.Ref(name))
    nodes.append(observed("obs", obs))
    order = [nodes[i] for i in rng.permutation(len(nodes))]
    return LayoutSpec(str(rng.choice(["rand", "my layout"])), tuple(order))
