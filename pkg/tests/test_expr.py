"""Parser, calculus, and evaluation tests for the expression DSL."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
import hypothesis.strategies as st

from divkit.expr import (
    EvalDomainError,
    Expr,
    ParseError,
    UnknownIdentifierError,
    const,
    parse_expr,
    var,
)

XY = ("x", "y")


def p(text, variables=XY):
    return parse_expr(text, variables)


# ---------------------------------------------------------------------------
# parsing


def test_parse_builds_expected_tree():
    assert p("x+y*x") == Expr("add", (var("x"), Expr("mul", (var("y"), var("x")))))
    assert p("(x+y)*x") == Expr("mul", (Expr("add", (var("x"), var("y"))), var("x")))
    assert p("sin(x)") == Expr("sin", (var("x"),))
    assert p("2.5e-1") == const(0.25)


def test_precedence_and_associativity():
    assert p("2-3-4").eval({}) == -5.0
    assert p("2/4/2").eval({}) == 0.25
    assert p("2^3^2").eval({}) == 512.0  # right associative
    assert p("-x^2").eval({"x": 3.0}) == -9.0
    assert p("2*x^2").eval({"x": 3.0}) == 18.0
    assert p("x^-1").eval({"x": 4.0}) == 0.25
    assert p("1+2*3^2").eval({}) == 19.0


@pytest.mark.parametrize(
    "text,offset",
    [
        ("x + @", 4),
        ("x +", 3),
        ("(x", 2),
        ("x y", 2),
        ("", 0),
        ("x*()", 3),
    ],
)
def test_parse_error_offsets(text, offset):
    with pytest.raises(ParseError) as exc:
        p(text)
    assert exc.value.offset == offset


def test_unknown_identifiers():
    with pytest.raises(UnknownIdentifierError) as exc:
        p("x + foo")
    assert exc.value.name == "foo"
    assert exc.value.offset == 4
    # unknown name used like a function
    with pytest.raises(UnknownIdentifierError):
        p("f(x)")
    # builtin name not applied to an argument is not a coordinate
    with pytest.raises(UnknownIdentifierError):
        p("sin + 1")


def test_variable_name_validation():
    with pytest.raises(ValueError):
        parse_expr("1", [])
    with pytest.raises(ValueError):
        parse_expr("x", ["x", "x"])
    with pytest.raises(ValueError):
        parse_expr("x", ["2bad"])
    with pytest.raises(ValueError):
        parse_expr("x", ["sin"])


# ---------------------------------------------------------------------------
# evaluation


def test_eval_domain_errors():
    cases = [
        ("log(x)", {"x": 0.0}),
        ("log(x)", {"x": -1.0}),
        ("1/x", {"x": 0.0}),
        ("sqrt(x)", {"x": -1.0}),
        ("x^y", {"x": 0.0, "y": -1.0}),
        ("x^y", {"x": -2.0, "y": 0.5}),
    ]
    for text, point in cases:
        with pytest.raises(EvalDomainError):
            p(text).eval(point)


def test_bump_values():
    b = p("bump(x)")
    assert b.eval({"x": 0.0}) == 0.36787944117144233
    assert b.eval({"x": 0.5}) == 0.26359713811572677
    assert b.eval({"x": 0.9}) == 0.005178924370597747
    assert b.eval({"x": 1.0}) == 0.0
    assert b.eval({"x": -1.0}) == 0.0
    assert b.eval({"x": 17.0}) == 0.0
    assert b.eval({"x": -0.5}) == b.eval({"x": 0.5})


def test_bump_derivative_singular_on_support_edge():
    db = p("bump(x)").diff("x")
    # smooth and odd inside the support
    assert db.eval({"x": 0.0}) == 0.0
    assert db.eval({"x": 0.5}) == pytest.approx(-db.eval({"x": -0.5}), abs=0.0)
    # the rational factor has a pole at |x| = 1 even though bump itself is 0
    for edge in (1.0, -1.0):
        with pytest.raises(EvalDomainError):
            db.eval({"x": edge})
    assert db.eval({"x": 2.0}) == 0.0


def test_eval_is_deterministic():
    e1 = p("sin(x)*exp(y)-x/(y+3)")
    e2 = p("sin(x)*exp(y)-x/(y+3)")
    assert e1 == e2
    pt = {"x": 0.3218, "y": -0.777}
    assert e1.eval(pt) == e2.eval(pt)
    assert e1.eval(pt) == e1.eval(pt)


def test_eval_many_matches_scalar():
    exprs = [
        p("x^2*sin(y)+exp(x*y)"),
        p("bump(x)*bump(y)"),
        p("tanh(x-y)/(2+x^2)"),
        p("sqrt(x^2+y^2+1)"),
    ]
    xs = np.linspace(-2.0, 2.0, 41)
    ys = np.linspace(-1.5, 1.5, 41)
    for e in exprs:
        vec = e.eval_many({"x": xs, "y": ys})
        scl = np.array([e.eval({"x": a, "y": b}) for a, b in zip(xs, ys)])
        # numpy ufuncs and libm may disagree in the last ulp
        np.testing.assert_allclose(vec, scl, rtol=4e-16, atol=0)


def test_eval_many_marks_domain_violations_nonfinite():
    e = p("log(x)")
    out = e.eval_many({"x": np.array([1.0, 0.0, -1.0, math.e])})
    assert out[0] == 0.0
    assert not np.isfinite(out[1])
    assert not np.isfinite(out[2])
    assert out[3] == pytest.approx(1.0, rel=1e-15)


# ---------------------------------------------------------------------------
# differentiation


def _fd(e, name, point, h=1e-6):
    up = dict(point)
    dn = dict(point)
    up[name] += h
    dn[name] -= h
    return (e.eval(up) - e.eval(dn)) / (2 * h)


@pytest.mark.parametrize(
    "text",
    [
        "x^2*y",
        "sin(x)*cos(y)",
        "exp(x*y)-tanh(x)",
        "log(x+3)/sqrt(y+2)",
        "x^y",
        "bump(x*0.7)*y",
        "(x-y)/(x^2+1)",
    ],
)
def test_diff_matches_finite_differences(text):
    e = p(text)
    pts = [
        {"x": 0.4, "y": 0.9},
        {"x": 1.3, "y": 0.2},
        {"x": -0.6, "y": 1.1},
    ]
    for name in XY:
        d = e.diff(name)
        for pt in pts:
            try:
                want = _fd(e, name, pt)
            except EvalDomainError:
                continue  # point outside the expression's domain
            got = d.eval(pt)
            assert got == pytest.approx(want, rel=1e-6, abs=1e-9)


def test_diff_folds_trivial_factors():
    assert p("x*y").diff("x") == var("y")
    assert p("x+y").diff("y") == const(1.0)
    assert p("sin(y)").diff("x") == const(0.0)


def test_diff_known_closed_forms():
    d = p("x^2*y").diff("x")
    for ptx, pty in [(0.5, 2.0), (-1.5, 0.25)]:
        assert d.eval({"x": ptx, "y": pty}) == pytest.approx(2 * ptx * pty, rel=1e-15)
    d2 = p("exp(x^2)").diff("x")
    assert d2.eval({"x": 0.7}) == pytest.approx(1.4 * math.exp(0.49), rel=1e-14)


# ---------------------------------------------------------------------------
# simplify


def test_simplify_rules():
    assert p("0*sin(x)+y").simplify() == var("y")
    assert p("2*3").simplify() == const(6.0)
    assert p("x^1").simplify() == var("x")
    assert p("x-x").simplify() == const(0.0)
    assert p("exp(0)").simplify() == const(1.0)
    assert p("x/1").simplify() == var("x")
    assert p("x^0").simplify() == const(1.0)


def test_simplify_keeps_singular_constants():
    e = p("1/0").simplify()
    assert e.kind == "div"
    with pytest.raises(EvalDomainError):
        e.eval({})


# ---------------------------------------------------------------------------
# printing


def test_printer_inserts_necessary_parens():
    assert str(p("(x+y)*x")) == "(x+y)*x"
    assert str(Expr("sub", (var("x"), Expr("add", (var("y"), var("x")))))) == "x-(y+x)"
    assert str(Expr("pow", (Expr("neg", (var("x"),)), const(2.0)))) == "(-x)^2.0"
    assert str(Expr("pow", (const(-2.0), const(2.0)))) == "(-2.0)^2.0"
    assert str(Expr("sub", (var("x"), Expr("neg", (var("y"),))))) == "x--y"


# ---------------------------------------------------------------------------
# hypothesis strategies and properties

_leaf = st.one_of(
    st.sampled_from(XY).map(var),
    st.floats(min_value=-1.5, max_value=1.5, allow_nan=False).map(
        lambda v: const(round(v, 3))
    ),
)


def _tree(children, funcs, allow_div, allow_pow):
    options = [
        st.tuples(children, children).map(lambda ab: Expr("add", ab)),
        st.tuples(children, children).map(lambda ab: Expr("sub", ab)),
        st.tuples(children, children).map(lambda ab: Expr("mul", ab)),
        children.map(lambda a: Expr("neg", (a,))),
    ]
    for f in funcs:
        options.append(children.map(lambda a, f=f: Expr(f, (a,))))
    if allow_div:
        options.append(st.tuples(children, children).map(lambda ab: Expr("div", ab)))
    if allow_pow:
        options.append(
            st.tuples(children, st.integers(min_value=1, max_value=3)).map(
                lambda ab: Expr("pow", (ab[0], const(ab[1])))
            )
        )
    return st.one_of(*options)


def expr_trees(funcs=("sin", "cos", "tanh", "bump"), allow_div=False, allow_pow=False):
    return st.recursive(
        _leaf,
        lambda c: _tree(c, funcs, allow_div, allow_pow),
        max_leaves=12,
    )


_points = st.fixed_dictionaries(
    {
        "x": st.floats(min_value=-0.9, max_value=0.9, allow_nan=False),
        "y": st.floats(min_value=-0.9, max_value=0.9, allow_nan=False),
    }
)


def _try_eval(e, pt):
    try:
        v = e.eval(pt)
    except EvalDomainError:
        return None
    return v if math.isfinite(v) else None


@settings(max_examples=150, deadline=None)
@given(
    expr_trees(funcs=("sin", "cos", "exp", "tanh", "bump", "sqrt", "log"),
               allow_div=True, allow_pow=True),
    _points,
)
def test_print_parse_round_trip(e, pt):
    a = _try_eval(e, pt)
    assume(a is not None)
    reparsed = parse_expr(str(e), XY)
    b = _try_eval(reparsed, pt)
    assume(b is not None)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@settings(max_examples=150, deadline=None)
@given(expr_trees(allow_pow=True), _points)
def test_mixed_partials_commute(e, pt):
    dxy = e.diff("x").diff("y")
    dyx = e.diff("y").diff("x")
    a = _try_eval(dxy, pt)
    b = _try_eval(dyx, pt)
    assume(a is not None and b is not None)
    assume(abs(a) < 1e4)
    assert abs(a - b) <= 1e-9


@settings(max_examples=150, deadline=None)
@given(
    expr_trees(funcs=("sin", "cos", "exp", "tanh", "bump", "sqrt", "log"),
               allow_div=True, allow_pow=True),
    _points,
)
def test_simplify_preserves_value(e, pt):
    a = _try_eval(e, pt)
    assume(a is not None)
    b = _try_eval(e.simplify(), pt)
    assume(b is not None)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@settings(max_examples=120, deadline=None)
@given(expr_trees(funcs=(), allow_pow=True), _points)
def test_fd_agrees_on_polynomials(e, pt):
    # polynomial-only trees keep third derivatives tame, so a central
    # difference at h=1e-5 is trustworthy to ~1e-8
    d = e.diff("x")
    sym = _try_eval(d, pt)
    assume(sym is not None and abs(sym) < 1e3)
    fd = _fd(e, "x", pt, h=1e-5)
    assert fd == pytest.approx(sym, rel=1e-5, abs=1e-6)
