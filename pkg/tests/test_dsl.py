import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlayout import dsl
from mlayout import expr as E
from mlayout.errors import DslSyntaxError, UnknownBuiltin
from mlayout.layout import NodeKind, validate

from conftest import COIN
from strategies import expressions, layouts


def _spans(text):
    """Token spans as (line, first col, last col), EOF included."""
    return [(t.line, t.col, t.col + max(len(t.text) + (2 if t.kind == "STRING" else 0), 1) - 1)
            for t in dsl.tokenize(text)]


def test_coin_minimal():
    layout = dsl.parse(COIN)
    assert [n.kind for n in layout.spec.nodes] == [NodeKind.CAPABILITY, NodeKind.OBSERVED]
    assert dsl.format_layout(layout) == (
        "layout coin {\n  capability p ~ uniform(0, 1)\n  observe y ~ bernoulli(p)\n}\n")


def test_aaio_linking_function(aaio):
    expected = dsl.parse_expr(
        "logistic(navigationAbility - rewardDistance * (0.5 * rewardBehind + 1) + rightleftEffect)")
    assert aaio.node("navigationPerformance").expr == expected
    a, d, b, r = (E.Ref(n) for n in ("navigationAbility", "rewardDistance", "rewardBehind", "rightleftEffect"))
    assert expected == E.Logistic(a - d * (E.Const(0.5) * b + E.Const(1.0)) + r)


@pytest.mark.parametrize("name, counts", [("aaio", (4, 4, 3)), ("op", (9, 9, 9))])
def test_builtin_counts(name, counts):
    layout = dsl.load_layout(name)
    assert (len(layout.meta_features), len(layout.parameters), len(layout.derived)) == counts
    assert layout.observed.name == "taskPerformance"


def test_unknown_builtin():
    with pytest.raises(UnknownBuiltin):
        dsl.builtin("foo")


@pytest.mark.parametrize("name", ["aaio", "op"])
def test_builtin_round_trip(name):
    layout = dsl.load_layout(name)
    again = dsl.parse(dsl.format_layout(layout))
    assert again.spec == layout.spec


def test_unclosed_paren_points_at_paren():
    with pytest.raises(DslSyntaxError) as err:
        dsl.parse_expr("logistic(")
    assert (err.value.line, err.value.col) == (1, 9)
    src = "layout t {\n  capability a ~ uniform(0, 1)\n  node x = logistic(\n}\n"
    with pytest.raises(DslSyntaxError) as err:
        dsl.parse(src)
    assert (err.value.line, err.value.col) in {(3, 20), (4, 1)}


def test_error_points_at_bad_token():
    with pytest.raises(DslSyntaxError) as err:
        dsl.parse("layout t {\n  capability a ~ gamma(1, 1)\n}")
    assert (err.value.line, err.value.col) == (2, 18)
    with pytest.raises(DslSyntaxError) as err:
        dsl.parse("layout t {\n  capability a ~ uniform(0, 1) $\n}")
    assert (err.value.line, err.value.col) == (2, 32)


def test_negative_numbers_and_precedence():
    assert dsl.parse_expr("-2 * x") == E.Mul(E.Const(-2.0), E.Ref("x"))
    assert dsl.parse_expr("-(x) * 2") == E.Mul(E.Neg(E.Ref("x")), E.Const(2.0))
    assert dsl.parse_expr("a - (b - c)") == E.Sub(E.Ref("a"), E.Sub(E.Ref("b"), E.Ref("c")))
    assert dsl.format_expr(E.Sub(E.Ref("a"), E.Sub(E.Ref("b"), E.Ref("c")))) == "a - (b - c)"
    assert dsl.format_expr(E.Neg(E.Const(3.0))) == "-(3)"


def test_genmean_syntax():
    e = dsl.parse_expr("genmean(-2; a, genmean(0; b, c))")
    assert e == E.GenMean(-2.0, (E.Ref("a"), E.GenMean(0.0, (E.Ref("b"), E.Ref("c")))))
    assert dsl.parse_expr(dsl.format_expr(e)) == e


@settings(max_examples=1000)
@given(layouts())
def test_round_trip_random_layouts(spec):
    text = dsl.format_layout(spec)
    assert dsl.parse(text, check=False) == spec
    assert validate(dsl.parse(text, check=False)).order == validate(spec).order


@settings(max_examples=300)
@given(expressions(["a", "b", E.NU]))
def test_expression_round_trip(e):
    assert dsl.parse_expr(dsl.format_expr(e)) == e


@settings(max_examples=300)
@given(layouts(), st.data())
def test_syntax_error_inside_offending_token(spec, data):
    tokens = dsl.tokenize(dsl.format_layout(spec))[:-1]
    i = data.draw(st.integers(0, len(tokens) - 1))
    junk = data.draw(st.sampled_from([")", "}", "~", "=", ",", "layout"]))
    # rebuild the text with one token replaced
    parts = [t.text if t.kind != "STRING" else f'"{t.text}"' for t in tokens]
    parts[i] = junk
    text = " ".join(parts)
    try:
        dsl.parse(text, check=False)
    except DslSyntaxError as err:
        assert any(line == err.line and lo <= err.col <= hi for line, lo, hi in _spans(text))


@pytest.mark.parametrize("name", ["aaio", "op"])
def test_repo_layout_files_match_builtins(name):
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "layouts" / f"{name}.mlayout"
    assert dsl.load_layout(path).spec == dsl.load_layout(name).spec
