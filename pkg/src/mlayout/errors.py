"""Exception hierarchy.

Every error raised for bad input or an unsatisfiable request derives from
:class:`MlayoutError`; the CLI maps those to exit code 1.
"""

from __future__ import annotations


class MlayoutError(Exception):
    """Base class for all domain errors."""


# -- layout structure -------------------------------------------------------
class LayoutError(MlayoutError):
    """A layout violates a structural invariant."""

    def __init__(self, message: str, pos: tuple[int, int] | None = None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (line {pos[0]}, col {pos[1]})"
        super().__init__(message)


class CycleError(LayoutError):
    def __init__(self, cycle: list[str], pos=None):
        self.cycle = list(cycle)
        super().__init__("dependency cycle: " + " -> ".join(self.cycle), pos)


class UnresolvedRef(LayoutError):
    def __init__(self, name: str, owner: str | None = None, pos=None):
        self.name = name
        where = f" in node {owner!r}" if owner else ""
        super().__init__(f"unresolved reference {name!r}{where}", pos)


class MultipleObserved(LayoutError):
    pass


class MissingObserved(LayoutError):
    pass


class RootHasExpr(LayoutError):
    pass


class DerivedLacksExpr(LayoutError):
    pass


class BadPrior(LayoutError):
    pass


class DuplicateNode(LayoutError):
    pass


class NotALeaf(LayoutError):
    """A node other than the observed one has no consumers, or the observed
    node is consumed."""


# -- DSL --------------------------------------------------------------------
class DslSyntaxError(LayoutError):
    def __init__(self, message: str, line: int, col: int, expected: str | None = None):
        self.line = line
        self.col = col
        self.expected = expected
        if expected:
            message = f"{message}; expected {expected}"
        super().__init__(message, (line, col))


class UnknownBuiltin(MlayoutError):
    pass


# -- evaluation -------------------------------------------------------------
class NonFiniteNode(MlayoutError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"node {name!r} evaluated to a non-finite value")


class MissingColumn(MlayoutError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"instance table has no column {name!r}")


class ValueOutOfRange(MlayoutError):
    pass


class EmptyOutcomes(MlayoutError):
    pass


# -- sampling ---------------------------------------------------------------
class AllDivergent(MlayoutError):
    pass


class NonFiniteStart(MlayoutError):
    pass


class SingleChain(MlayoutError):
    pass


# -- prediction / evaluation ------------------------------------------------
class LayoutMismatch(MlayoutError):
    pass


class LengthMismatch(MlayoutError):
    pass


class SubsetEmpty(MlayoutError):
    pass


class TooFewInstances(MlayoutError):
    pass


class UnknownDimension(MlayoutError):
    pass


# -- synthetic bench --------------------------------------------------------
class UnknownAgent(MlayoutError):
    pass


class RangeViolation(MlayoutError):
    pass
