import math

import numpy as np
import pytest

from torusflow import EvalError, Expr, ParseError, parse
from torusflow.expressions import cos, cosh, sin, sinh, tanh, u, x1


def test_product_rule():
    e = u * cosh(u)
    d = e.diff("u")
    assert d.evaluate(u=0.0) == pytest.approx(1.0)
    # cosh(u) + u sinh(u)
    for v in (0.3, -1.2, 2.0):
        assert d.evaluate(u=v) == pytest.approx(math.cosh(v) + v * math.sinh(v))


def test_eval_sin_at_half_pi():
    assert sin(x1).evaluate(x1=np.pi / 2) == pytest.approx(1.0)


def test_second_derivative_of_cosh():
    d2 = cosh(u).diff("u").diff("u")
    assert d2.evaluate(u=1.0) == pytest.approx(math.cosh(1.0))
    assert d2.evaluate(u=1.0) == pytest.approx(1.5430806348152437)


def test_array_evaluation_broadcasts():
    e = parse("0.3 + 0.1*sin(x1)")
    x = np.linspace(0, 2 * np.pi, 50)
    np.testing.assert_allclose(e.evaluate(x1=x), 0.3 + 0.1 * np.sin(x))


@pytest.mark.parametrize("text,value", [
    ("1 + 2*3", 7.0),
    ("2^3", 8.0),
    ("2**3", 8.0),
    ("-u^2", -4.0),          # unary minus binds looser than power
    ("(1+1)^-1", 0.5),
    ("pi", math.pi),
    ("sin(pi/2)", 1.0),
    ("1 - 2 - 3", -4.0),
    ("12/4/3", 1.0),
    ("tanh(0.5)*cosh(0.5) - sinh(0.5)", 0.0),
    ("exp(log(2.5))", 2.5),
    ("1e-3 + 1E2", 100.001),
])
def test_parse_and_evaluate(text, value):
    assert parse(text).evaluate(u=2.0) == pytest.approx(value, abs=1e-12)


@pytest.mark.parametrize("text", [
    "sin()", "sin(", "2 +", "(1", "bogus(3)", "x3", "1..2", "u ^ x1", "2^3^4", "u @ 2",
])
def test_parse_errors_carry_position(text):
    with pytest.raises(ParseError) as err:
        parse(text)
    assert err.value.line == 1
    assert err.value.column >= 1


def test_eval_errors_name_the_node():
    with pytest.raises(EvalError, match="division by zero"):
        parse("1/(u - 1)").evaluate(u=1.0)
    with pytest.raises(EvalError, match="log"):
        parse("log(u)").evaluate(u=-2.0)
    with pytest.raises(EvalError, match="power"):
        parse("u^-2").evaluate(u=0.0)
    with pytest.raises(EvalError, match="unbound"):
        parse("x1 + u").evaluate(u=1.0)


def test_derivative_matches_finite_differences(rng):
    exprs = [
        parse("u*cosh(u) - sin(x1)"),
        parse("(0.2*sin(x1) - u)/cosh(u)"),
        parse("exp(-u^2) * cos(x1) + tanh(u)"),
        parse("log(2 + sin(u)) + x1*u^3"),
    ]
    step = 1e-5
    for e in exprs:
        de = e.diff("u")
        for _ in range(100):
            xv = rng.uniform(0, 2 * np.pi)
            uv = rng.uniform(-1.5, 1.5)
            fd = (e.evaluate(x1=xv, u=uv + step) - e.evaluate(x1=xv, u=uv - step)) / (2 * step)
            assert de.evaluate(x1=xv, u=uv) == pytest.approx(fd, abs=1e-6)


def test_diff_closed_under_node_set():
    e = parse("tanh(u)^3 / (1 + cosh(x1)) - log(2 + u^2)")
    d = e.diff("u").diff("x1").diff("u")
    # evaluating the triple derivative exercises every produced node kind
    assert np.isfinite(d.evaluate(x1=0.3, u=0.7))


def test_constant_folding():
    assert parse("2*3 + sin(0)").is_const(6.0)
    assert (Expr.const(0) * u).is_const(0.0)
    assert str(u + 0) == "u"


def test_render_round_trip(rng):
    exprs = [
        parse("(0.2*sin(x1) - u)/cosh(u)"),
        parse("-u"),
        parse("u^2 - 3*u + 1"),
        parse("exp(-(u - 1)^2)"),
        parse("x1*x2 + u/(1 + u^2)"),
    ]
    for e in exprs:
        again = parse(str(e))
        for _ in range(20):
            subs = dict(x1=rng.uniform(0, 6), x2=rng.uniform(0, 6), u=rng.uniform(-2, 2))
            assert again.evaluate(**subs) == pytest.approx(e.evaluate(**subs), rel=1e-14)


def test_free_vars():
    assert parse("sin(x1) + u").free_vars() == {"x1", "u"}
    assert parse("1 + 2").free_vars() == set()
