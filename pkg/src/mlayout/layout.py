"""In-memory measurement layouts and their structural validation."""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from functools import cached_property

from . import expr as E
from .errors import (
    BadPrior,
    CycleError,
    DerivedLacksExpr,
    DuplicateNode,
    LayoutError,
    MissingObserved,
    MultipleObserved,
    NotALeaf,
    RootHasExpr,
    UnresolvedRef,
)
from .priors import Normal, ScaledBeta, Uniform


class NodeKind(enum.Enum):
    META_FEATURE = "metafeature"
    CAPABILITY = "capability"
    BIAS = "bias"
    ROBUSTNESS = "robustness"
    DERIVED = "node"
    OBSERVED = "observe"

    @property
    def is_root(self) -> bool:
        return self in _ROOTS

    @property
    def is_profile(self) -> bool:
        return self in _PROFILE


_PROFILE = {NodeKind.CAPABILITY, NodeKind.BIAS, NodeKind.ROBUSTNESS}
_ROOTS = _PROFILE | {NodeKind.META_FEATURE}


@dataclass(frozen=True)
class Node:
    """One declaration.

    ``range`` is the declared ``(lo, hi)``; for profile parameters with a
    bounded prior it defaults to the prior support.  ``levels`` holds the
    admissible values of a set-valued meta-feature.
    """

    name: str
    kind: NodeKind
    prior: ScaledBeta | Normal | None = None
    range: tuple[float, float] | None = None
    levels: tuple[float, ...] | None = None
    expr: E.Expr | None = None
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)

    @property
    def bounds(self) -> tuple[float, float]:
        if self.range is not None:
            return self.range
        if self.prior is not None:
            return self.prior.support
        return (-math.inf, math.inf)


# convenience constructors -------------------------------------------------
def metafeature(name, lo=None, hi=None, *, levels=None) -> Node:
    if levels is not None:
        levels = tuple(float(v) for v in levels)
        return Node(name, NodeKind.META_FEATURE, range=(min(levels), max(levels)), levels=levels)
    return Node(name, NodeKind.META_FEATURE, range=(float(lo), float(hi)))


def capability(name, prior, range=None) -> Node:
    return Node(name, NodeKind.CAPABILITY, prior=prior, range=range)


def bias(name, prior, range=None) -> Node:
    return Node(name, NodeKind.BIAS, prior=prior, range=range)


def robustness(name, prior, range=None) -> Node:
    return Node(name, NodeKind.ROBUSTNESS, prior=prior, range=range)


def derived(name, expr, range=None) -> Node:
    return Node(name, NodeKind.DERIVED, expr=E.as_expr(expr), range=range)


def observed(name, expr) -> Node:
    return Node(name, NodeKind.OBSERVED, expr=E.as_expr(expr))


@dataclass(frozen=True)
class LayoutSpec:
    """A (not necessarily valid) measurement layout."""

    name: str
    nodes: tuple[Node, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    def node(self, name: str) -> Node:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def names(self) -> list[str]:
        return [n.name for n in self.nodes]

    def replace_node(self, name: str, new: Node) -> "LayoutSpec":
        return LayoutSpec(self.name, tuple(new if n.name == name else n for n in self.nodes))


@dataclass(frozen=True)
class ValidatedLayout:
    """A layout that passed :func:`validate`, with its evaluation order."""

    spec: LayoutSpec
    order: tuple[str, ...]

    @property
    def name(self) -> str:
        return self.spec.name

    @cached_property
    def by_name(self) -> dict[str, Node]:
        return {n.name: n for n in self.spec.nodes}

    def node(self, name: str) -> Node:
        return self.by_name[name]

    def of_kind(self, *kinds: NodeKind) -> list[Node]:
        return [n for n in self.spec.nodes if n.kind in kinds]

    @property
    def meta_features(self) -> list[Node]:
        return self.of_kind(NodeKind.META_FEATURE)

    @property
    def parameters(self) -> list[Node]:
        return [n for n in self.spec.nodes if n.kind.is_profile]

    @property
    def parameter_names(self) -> list[str]:
        return [n.name for n in self.parameters]

    @property
    def derived(self) -> list[Node]:
        return self.of_kind(NodeKind.DERIVED)

    @property
    def observed(self) -> Node:
        return self.of_kind(NodeKind.OBSERVED)[0]


def _dependencies(node: Node) -> list[str]:
    if node.expr is None:
        return []
    return [r for r in E.refs(node.expr) if r != E.NU]


def validate(spec: LayoutSpec | ValidatedLayout) -> ValidatedLayout:
    """Check every structural invariant and attach a topological order."""
    if isinstance(spec, ValidatedLayout):
        return spec
    seen: dict[str, Node] = {}
    for node in spec.nodes:
        if node.name in seen:
            raise DuplicateNode(f"node {node.name!r} declared twice", node.pos)
        if node.name == E.NU:
            raise LayoutError(f"{E.NU!r} is reserved for the noise-fallback constant", node.pos)
        seen[node.name] = node

    for node in spec.nodes:
        _check_node(node)

    obs = [n for n in spec.nodes if n.kind is NodeKind.OBSERVED]
    if not obs:
        raise MissingObserved("layout declares no observed node")
    if len(obs) > 1:
        raise MultipleObserved(
            "layout declares more than one observed node: " + ", ".join(n.name for n in obs),
            obs[1].pos,
        )

    for node in spec.nodes:
        if node.expr is None:
            continue
        for ref, pos in E.ref_positions(node.expr).items():
            if ref != E.NU and ref not in seen:
                raise UnresolvedRef(ref, node.name, pos or node.pos)

    cycle = _find_cycle(spec)
    if cycle:
        raise CycleError(cycle, seen[cycle[0]].pos)

    consumed = {r for n in spec.nodes for r in _dependencies(n)}
    if obs[0].name in consumed:
        raise NotALeaf(f"observed node {obs[0].name!r} is referenced by another node", obs[0].pos)
    for node in spec.nodes:
        if node.kind is not NodeKind.OBSERVED and node.name not in consumed:
            raise NotALeaf(f"node {node.name!r} is never used", node.pos)

    return ValidatedLayout(spec, tuple(_kahn(spec)))


def _check_node(node: Node) -> None:
    if node.kind.is_root and node.expr is not None:
        raise RootHasExpr(f"{node.kind.value} {node.name!r} cannot carry an expression", node.pos)
    if not node.kind.is_root and node.expr is None:
        raise DerivedLacksExpr(f"{node.kind.value} {node.name!r} needs an expression", node.pos)
    if node.kind.is_profile:
        if not isinstance(node.prior, (ScaledBeta, Normal)):
            raise BadPrior(f"parameter {node.name!r} lacks a valid prior", node.pos)
    elif node.prior is not None:
        raise BadPrior(f"only profile parameters take priors ({node.name!r})", node.pos)
    if node.kind is NodeKind.META_FEATURE:
        if node.range is None:
            raise LayoutError(f"meta-feature {node.name!r} needs a range or a value set", node.pos)
    if node.range is not None:
        lo, hi = node.range
        if not (lo <= hi) or math.isnan(lo) or math.isnan(hi):
            raise LayoutError(f"range of {node.name!r} must satisfy lo <= hi", node.pos)


def _find_cycle(spec: LayoutSpec) -> list[str] | None:
    deps = {n.name: _dependencies(n) for n in spec.nodes}
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {name: WHITE for name in deps}
    for start in deps:
        if colour[start] != WHITE:
            continue
        path = [start]
        colour[start] = GREY
        iters = [iter(deps[start])]
        while iters:
            child = next(iters[-1], None)
            if child is None:
                colour[path.pop()] = BLACK
                iters.pop()
                continue
            if colour[child] == GREY:
                # report the cycle in dependency-flow order: parent -> child
                cyc = path[path.index(child):] + [child]
                return cyc[::-1]
            if colour[child] == WHITE:
                colour[child] = GREY
                path.append(child)
                iters.append(iter(deps[child]))
    return None


def _kahn(spec: LayoutSpec) -> list[str]:
    index = {n.name: i for i, n in enumerate(spec.nodes)}
    deps = {n.name: set(_dependencies(n)) for n in spec.nodes}
    users: dict[str, list[str]] = {name: [] for name in deps}
    for name, ds in deps.items():
        for d in ds:
            users[d].append(name)
    indeg = {name: len(ds) for name, ds in deps.items()}
    heap = [index[name] for name, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    names = [n.name for n in spec.nodes]
    out = []
    while heap:
        name = names[heapq.heappop(heap)]
        out.append(name)
        for u in users[name]:
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(heap, index[u])
    return out


def topo_order(layout: ValidatedLayout) -> list[str]:
    """Node names such that every node follows its dependencies.

    Ties are broken by declaration order, so the result is deterministic.
    """
    return list(validate(layout).order)


def free_parameters(layout: ValidatedLayout) -> list[tuple[str, ScaledBeta | Normal, tuple[float, float]]]:
    """Capability, bias and robustness nodes in declaration order."""
    return [(n.name, n.prior, n.bounds) for n in validate(layout).parameters]


def override_priors(layout: LayoutSpec | ValidatedLayout, priors: dict) -> ValidatedLayout:
    """Copy of ``layout`` with the named parameters' priors replaced."""
    spec = layout.spec if isinstance(layout, ValidatedLayout) else layout
    for name, prior in priors.items():
        node = spec.node(name)
        if not node.kind.is_profile:
            raise BadPrior(f"{name!r} is not a profile parameter")
        spec = spec.replace_node(name, Node(node.name, node.kind, prior, node.range, node.levels,
                                            node.expr, node.pos))
    return validate(spec)


def uniform_over_range(layout: LayoutSpec | ValidatedLayout, names) -> ValidatedLayout:
    """Replace the priors of ``names`` with a uniform over each node's declared range."""
    spec = layout.spec if isinstance(layout, ValidatedLayout) else layout
    priors = {}
    for name in names:
        node = spec.node(name)
        if node.range is None:
            raise BadPrior(f"{name!r} declares no range to spread a uniform prior over")
        priors[name] = Uniform(*node.range)
    return override_priors(spec, priors)
