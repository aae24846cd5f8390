"""Text format for measurement layouts (``.mlayout`` files).

Grammar::

    layout      := "layout" (IDENT | STRING) "{" decl* "}"
    decl        := metafeature | param | node | observe
    metafeature := "metafeature" IDENT ":" ("real" "in" interval | "set" "{" number ("," number)* "}")
    param       := ("capability" | "bias" | "robustness") IDENT "~" prior ["in" interval]
    prior       := "uniform(a, b)" | "scaledbeta(a, b, lo, hi)" | "normal(mu, sigma)" | "beta(a, b)"
    node        := "node" IDENT ["in" interval] "=" expr
    observe     := "observe" IDENT "~" "bernoulli" "(" expr ")"
    interval    := "[" number "," number "]"
    expr        := term (("+" | "-") term)*
    term        := unary (("*" | "/") unary)*
    unary       := "-" unary | atom
    atom        := NUMBER | IDENT | call | "(" expr ")"
    call        := ("logistic" | "mix" | "margin") "(" expr ("," expr)* ")"
                 | "genmean" "(" number ";" expr ("," expr)* ")"

``#`` starts a comment that runs to the end of the line.  A minus sign written
directly before a numeric literal produces a negative constant; anything else
produces a negation node.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import expr as E
from .errors import DslSyntaxError, LayoutError, UnknownBuiltin
from .layout import LayoutSpec, Node, NodeKind, ValidatedLayout, validate
from .priors import Beta, Normal, ScaledBeta, Uniform

BUILTINS = ("aaio", "op")


@dataclass(frozen=True)
class DslSource:
    text: str
    origin: str = "<string>"


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, NUMBER, STRING, OP, EOF
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<op>[{}()\[\],;:~=+\-*/])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "number":
            tokens.append(Token("NUMBER", lexeme, line, col))
        elif kind == "ident":
            tokens.append(Token("IDENT", lexeme, line, col))
        elif kind == "string":
            tokens.append(Token("STRING", lexeme[1:-1], line, col))
        elif kind == "op":
            tokens.append(Token("OP", lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = pos + lexeme.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


_PRIOR_ARITY = {"uniform": 2, "scaledbeta": 4, "normal": 2, "beta": 2}
_FUNC_ARITY = {"logistic": 1, "mix": 3, "margin": 2}
_PARAM_KINDS = {
    "capability": NodeKind.CAPABILITY,
    "bias": NodeKind.BIAS,
    "robustness": NodeKind.ROBUSTNESS,
}


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.open_parens: list[Token] = []

    # -- token helpers ------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def error(self, expected: str):
        t = self.tok
        if t.kind == "EOF" and self.open_parens:
            o = self.open_parens[-1]
            raise DslSyntaxError(f"unclosed {o.text!r}", o.line, o.col, expected)
        found = "end of input" if t.kind == "EOF" else repr(t.text)
        raise DslSyntaxError(f"unexpected {found}", t.line, t.col, expected)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("OP", "IDENT") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(repr(text))
        t = self.advance()
        if text in "([{":
            self.open_parens.append(t)
        elif text in ")]}":
            self.open_parens.pop()
        return t

    def ident(self) -> Token:
        if self.tok.kind != "IDENT":
            self.error("identifier")
        return self.advance()

    def number(self) -> float:
        sign = 1.0
        if self.at("-"):
            self.advance()
            sign = -1.0
        if self.tok.kind != "NUMBER":
            self.error("number")
        return sign * float(self.advance().text)

    # -- declarations -------------------------------------------------------
    def layout(self) -> LayoutSpec:
        self.expect("layout")
        if self.tok.kind == "STRING":
            name = self.advance().text
        else:
            name = self.ident().text
        self.expect("{")
        nodes = []
        while not self.at("}"):
            nodes.append(self.decl())
        self.expect("}")
        if self.tok.kind != "EOF":
            self.error("end of input")
        return LayoutSpec(name, tuple(nodes))

    def decl(self) -> Node:
        t = self.tok
        if t.kind == "IDENT":
            if t.text == "metafeature":
                return self.metafeature()
            if t.text in _PARAM_KINDS:
                return self.param()
            if t.text == "node":
                return self.node()
            if t.text == "observe":
                return self.observe()
        self.error("declaration (metafeature, capability, bias, robustness, node, observe) or '}'")

    def interval(self) -> tuple[float, float]:
        self.expect("[")
        lo = self.number()
        self.expect(",")
        hi = self.number()
        self.expect("]")
        return (lo, hi)

    def optional_range(self):
        if self.at("in"):
            self.advance()
            return self.interval()
        return None

    def metafeature(self) -> Node:
        self.advance()
        name = self.ident()
        self.expect(":")
        if self.at("real"):
            self.advance()
            self.expect("in")
            return Node(name.text, NodeKind.META_FEATURE, range=self.interval(),
                        pos=(name.line, name.col))
        if self.at("set"):
            self.advance()
            self.expect("{")
            levels = [self.number()]
            while self.at(","):
                self.advance()
                levels.append(self.number())
            self.expect("}")
            return Node(name.text, NodeKind.META_FEATURE, range=(min(levels), max(levels)),
                        levels=tuple(levels), pos=(name.line, name.col))
        self.error("'real' or 'set'")

    def param(self) -> Node:
        kind = _PARAM_KINDS[self.advance().text]
        name = self.ident()
        self.expect("~")
        prior = self.prior()
        rng = self.optional_range()
        return Node(name.text, kind, prior=prior, range=rng, pos=(name.line, name.col))

    def prior(self):
        t = self.tok
        if t.kind != "IDENT" or t.text not in _PRIOR_ARITY:
            self.error("prior (uniform, scaledbeta, normal, beta)")
        self.advance()
        self.expect("(")
        args = [self.number()]
        while self.at(","):
            self.advance()
            args.append(self.number())
        close = self.tok
        self.expect(")")
        if len(args) != _PRIOR_ARITY[t.text]:
            raise DslSyntaxError(
                f"{t.text} takes {_PRIOR_ARITY[t.text]} arguments, got {len(args)}",
                close.line, close.col)
        try:
            return {
                "uniform": lambda a: Uniform(*a),
                "scaledbeta": lambda a: ScaledBeta(*a),
                "normal": lambda a: Normal(*a),
                "beta": lambda a: Beta(*a),
            }[t.text](args)
        except LayoutError as exc:
            raise type(exc)(str(exc), (t.line, t.col)) from None

    def node(self) -> Node:
        self.advance()
        name = self.ident()
        rng = self.optional_range()
        self.expect("=")
        return Node(name.text, NodeKind.DERIVED, range=rng, expr=self.expr(),
                    pos=(name.line, name.col))

    def observe(self) -> Node:
        self.advance()
        name = self.ident()
        self.expect("~")
        self.expect("bernoulli")
        self.expect("(")
        body = self.expr()
        self.expect(")")
        return Node(name.text, NodeKind.OBSERVED, expr=body, pos=(name.line, name.col))

    # -- expressions --------------------------------------------------------
    def expr(self) -> E.Expr:
        left = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            right = self.term()
            left = E.Add(left, right) if op == "+" else E.Sub(left, right)
        return left

    def term(self) -> E.Expr:
        left = self.unary()
        while self.at("*") or self.at("/"):
            op = self.advance().text
            right = self.unary()
            left = E.Mul(left, right) if op == "*" else E.Div(left, right)
        return left

    def unary(self) -> E.Expr:
        if self.at("-"):
            self.advance()
            if self.tok.kind == "NUMBER":
                return E.Const(-float(self.advance().text))
            return E.Neg(self.unary())
        return self.atom()

    def atom(self) -> E.Expr:
        t = self.tok
        if t.kind == "NUMBER":
            self.advance()
            return E.Const(float(t.text))
        if t.kind == "IDENT":
            if self.peek().kind == "OP" and self.peek().text == "(":
                return self.call()
            self.advance()
            return E.Ref(t.text, pos=(t.line, t.col))
        if self.at("("):
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            return inner
        self.error("expression")

    def call(self) -> E.Expr:
        fn = self.advance()
        if fn.text == "genmean":
            self.expect("(")
            p = self.number()
            self.expect(";")
            args = self.arglist()
            self.expect(")")
            return E.GenMean(p, tuple(args))
        if fn.text not in _FUNC_ARITY:
            raise DslSyntaxError(f"unknown function {fn.text!r}", fn.line, fn.col,
                                 "logistic, mix, margin or genmean")
        self.expect("(")
        args = self.arglist()
        close = self.tok
        self.expect(")")
        if len(args) != _FUNC_ARITY[fn.text]:
            raise DslSyntaxError(
                f"{fn.text} takes {_FUNC_ARITY[fn.text]} arguments, got {len(args)}",
                close.line, close.col)
        if fn.text == "logistic":
            return E.Logistic(args[0])
        if fn.text == "mix":
            return E.Mix(*args)
        return E.Margin(*args)

    def arglist(self) -> list[E.Expr]:
        args = [self.expr()]
        while self.at(","):
            self.advance()
            args.append(self.expr())
        return args


def parse(src: DslSource | str, *, check: bool = True) -> ValidatedLayout | LayoutSpec:
    """Parse layout text.

    With ``check`` (the default) the result is validated and returned as a
    :class:`ValidatedLayout`; validation errors carry the offending node's
    source position.
    """
    text = src.text if isinstance(src, DslSource) else src
    spec = _Parser(text).layout()
    return validate(spec) if check else spec


def parse_expr(text: str) -> E.Expr:
    p = _Parser(text)
    e = p.expr()
    if p.tok.kind != "EOF":
        p.error("end of expression")
    return e


# -- printing ---------------------------------------------------------------
def format_number(v: float) -> str:
    r = repr(float(v))
    return r[:-2] if r.endswith(".0") else r


_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def _prec(e: E.Expr) -> int:
    if isinstance(e, (E.Add, E.Sub)):
        return 1
    if isinstance(e, (E.Mul, E.Div)):
        return 2
    if isinstance(e, E.Neg) or (isinstance(e, E.Const) and e.value < 0):
        return 3
    return 4


def format_expr(e: E.Expr, min_prec: int = 0) -> str:
    if isinstance(e, E.Const):
        s = format_number(e.value)
    elif isinstance(e, E.Ref):
        s = e.name
    elif isinstance(e, (E.Add, E.Sub, E.Mul, E.Div)):
        p = _prec(e)
        sym = {E.Add: "+", E.Sub: "-", E.Mul: "*", E.Div: "/"}[type(e)]
        s = f"{format_expr(e.left, p)} {sym} {format_expr(e.right, p + 1)}"
    elif isinstance(e, E.Neg):
        if isinstance(e.operand, E.Const):
            s = f"-({format_expr(e.operand)})"
        else:
            s = "-" + format_expr(e.operand, 3)
    elif isinstance(e, E.Logistic):
        s = f"logistic({format_expr(e.operand)})"
    elif isinstance(e, E.Mix):
        s = f"mix({format_expr(e.weight)}, {format_expr(e.model)}, {format_expr(e.fallback)})"
    elif isinstance(e, E.Margin):
        s = f"margin({format_expr(e.ability)}, {format_expr(e.presence)})"
    elif isinstance(e, E.GenMean):
        s = f"genmean({format_number(e.exponent)}; " + ", ".join(format_expr(o) for o in e.operands) + ")"
    else:
        raise TypeError(f"not an expression: {e!r}")
    return f"({s})" if _prec(e) < min_prec else s


def _interval(r) -> str:
    return f"[{format_number(r[0])}, {format_number(r[1])}]"


def format_layout(layout: LayoutSpec | ValidatedLayout) -> str:
    """Canonical text, one declaration per line."""
    spec = layout.spec if isinstance(layout, ValidatedLayout) else layout
    name = spec.name if _IDENT_RE.match(spec.name) else f'"{spec.name}"'
    lines = [f"layout {name} {{"]
    for n in spec.nodes:
        if n.kind is NodeKind.META_FEATURE:
            if n.levels is not None:
                body = "set {" + ", ".join(format_number(v) for v in n.levels) + "}"
            else:
                body = "real in " + _interval(n.range)
            lines.append(f"  metafeature {n.name} : {body}")
        elif n.kind.is_profile:
            rng = f" in {_interval(n.range)}" if n.range is not None else ""
            lines.append(f"  {n.kind.value} {n.name} ~ {n.prior.dsl(format_number)}{rng}")
        elif n.kind is NodeKind.DERIVED:
            rng = f" in {_interval(n.range)}" if n.range is not None else ""
            lines.append(f"  node {n.name}{rng} = {format_expr(n.expr)}")
        else:
            lines.append(f"  observe {n.name} ~ bernoulli({format_expr(n.expr)})")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- builtins and files -----------------------------------------------------
def builtin(name: str) -> DslSource:
    if name not in BUILTINS:
        raise UnknownBuiltin(f"unknown builtin layout {name!r}; choose from {', '.join(BUILTINS)}")
    text = resources.files("mlayout").joinpath("layouts").joinpath(f"{name}.mlayout").read_text("utf-8")
    return DslSource(text, f"builtin:{name}")


def read_source(path: str | Path) -> DslSource:
    path = Path(path)
    return DslSource(path.read_text("utf-8"), str(path))


def load_layout(ref) -> ValidatedLayout:
    """Resolve a builtin name, a path, a spec or a validated layout."""
    if isinstance(ref, ValidatedLayout):
        return ref
    if isinstance(ref, LayoutSpec):
        return validate(ref)
    if isinstance(ref, DslSource):
        return parse(ref)
    ref = str(ref)
    if ref in BUILTINS:
        return parse(builtin(ref))
    return parse(read_source(ref))
