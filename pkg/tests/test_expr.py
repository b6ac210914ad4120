"""Expression parsing, evaluation, and the natural interval extension."""

import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from quantpave import (
    Add,
    Box,
    Const,
    ExprParseError,
    Interval,
    Mul,
    Neg,
    Sub,
    Var,
    VecExpr,
    parse_expr,
    range_over,
)


def frac_eval(e, env):
    """Independent oracle: the natural interval extension computed in
    exact rational arithmetic.  env maps names to (lo, hi) Fractions.
    Returns (lo, hi, scale) where scale is the largest magnitude seen at
    any node (rounding error accumulates at that scale)."""
    if isinstance(e, Const):
        return (e.value, e.value, abs(e.value))
    if isinstance(e, Var):
        lo, hi = env[e.name]
        return (lo, hi, max(abs(lo), abs(hi)))
    if isinstance(e, Neg):
        lo, hi, scale = frac_eval(e.operand, env)
        return (-hi, -lo, scale)
    llo, lhi, lscale = frac_eval(e.lhs, env)
    rlo, rhi, rscale = frac_eval(e.rhs, env)
    if isinstance(e, Add):
        lo, hi = llo + rlo, lhi + rhi
    elif isinstance(e, Sub):
        lo, hi = llo - rhi, lhi - rlo
    else:
        assert isinstance(e, Mul)
        products = (llo * rlo, llo * rhi, lhi * rlo, lhi * rhi)
        lo, hi = min(products), max(products)
    return (lo, hi, max(lscale, rscale, abs(lo), abs(hi)))


class TestParse:
    def test_transition_expression_tree(self):
        e = parse_expr("3*x1*x2 + w*u", ["x1", "x2", "u", "w"])
        assert e == Add(
            Mul(Mul(Const(Fraction(3)), Var("x1")), Var("x2")),
            Mul(Var("w"), Var("u")),
        )

    def test_single_variable(self):
        assert parse_expr("x1", ["x1"]) == Var("x1")

    def test_undeclared_variable(self):
        with pytest.raises(ExprParseError, match="undeclared variable 'y'"):
            parse_expr("2*y", ["x"])

    def test_syntax_error_carries_position(self):
        with pytest.raises(ExprParseError) as exc:
            parse_expr("x + ", ["x"])
        assert exc.value.position == 4

    def test_division_rejected(self):
        with pytest.raises(ExprParseError, match="division"):
            parse_expr("x / 2", ["x"])

    def test_decimal_literals_exact(self):
        e = parse_expr("0.1", [])
        assert e == Const(Fraction(1, 10))

    def test_negative_literal_folds(self):
        assert parse_expr("-3", []) == Const(Fraction(-3))

    def test_parens_and_unary(self):
        e = parse_expr("-(x + 1) * 2", ["x"])
        assert e == Mul(Neg(Add(Var("x"), Const(Fraction(1)))), Const(Fraction(2)))

    def test_subtraction_left_associative(self):
        e = parse_expr("a - b - c", ["a", "b", "c"])
        assert e == Sub(Sub(Var("a"), Var("b")), Var("c"))


class TestEvalPoint:
    def test_product(self):
        e = parse_expr("3*x1*x2", ["x1", "x2"])
        assert e.eval_point({"x1": 0.25, "x2": 0.25}) == 0.1875

    def test_affine(self):
        e = parse_expr("2*x2 + x1", ["x1", "x2"])
        assert e.eval_point({"x1": 0.25, "x2": 0.25}) == 0.75

    def test_negation_mirrors(self):
        e = parse_expr("2*x - 0.5", ["x"])
        for v in (-1.25, 0.0, 3.5):
            assert Neg(e).eval_point({"x": v}) == -e.eval_point({"x": v})

    def test_missing_binding(self):
        with pytest.raises(KeyError):
            parse_expr("x", ["x"]).eval_point({})


SYSTEM_VARS = ["x1", "x2", "u", "w"]
SYSTEM_ENV = {
    "x1": Interval(-1, 1),
    "x2": Interval(-1, 1),
    "u": Interval(-0.5, 0.5),
    "w": Interval(-0.1, 0.1),
}


class TestEvalInterval:
    def test_transition_range(self):
        e = parse_expr("3*x1*x2 + w*u", SYSTEM_VARS)
        r = e.eval_interval(SYSTEM_ENV)
        # Endpoint analysis gives +-(3 + 0.05); outward rounding may add ulps.
        expected = Fraction(3) + Fraction(0.1) * Fraction(0.5)
        assert Fraction(r.lo) <= -expected <= expected <= Fraction(r.hi)
        assert r.lo == pytest.approx(-3.05, abs=1e-12)
        assert r.hi == pytest.approx(3.05, abs=1e-12)

    def test_dependency_overestimation_is_expected(self):
        e = parse_expr("x1 - x1", ["x1"])
        assert e.eval_interval({"x1": Interval(0, 1)}) == Interval(-1, 1)

    def test_constant(self):
        e = parse_expr("5", [])
        assert e.eval_interval({}) == Interval(5, 5)

    def test_range_over_full_domain(self):
        f = VecExpr(
            (
                parse_expr("3*x1*x2 + w*u", SYSTEM_VARS),
                parse_expr("2*x2 + x1", SYSTEM_VARS),
            ),
            ("z1", "z2"),
        )
        box = range_over(f, SYSTEM_ENV)
        assert box.names == ("z1", "z2")
        assert box.intervals[0].lo == pytest.approx(-3.05, abs=1e-12)
        assert box.intervals[0].hi == pytest.approx(3.05, abs=1e-12)
        assert box.intervals[1] == Interval(-3, 3)

    def test_range_over_point_state(self):
        f = VecExpr(
            (
                parse_expr("3*x1*x2 + w*u", SYSTEM_VARS),
                parse_expr("2*x2 + x1", SYSTEM_VARS),
            ),
            ("z1", "z2"),
        )
        env = {
            "x1": Interval(0, 0),
            "x2": Interval(0, 0),
            "u": Interval(0, 0),
            "w": Interval(-0.1, 0.1),
        }
        box = range_over(f, env)
        assert box.intervals[0] == Interval(0, 0)
        assert box.intervals[1] == Interval(0, 0)

    def test_range_inclusion_monotone(self):
        f = parse_expr("3*x1*x2 + w*u", SYSTEM_VARS)
        small = {
            "x1": Interval(-0.5, 0.25),
            "x2": Interval(0.1, 0.9),
            "u": Interval(-0.25, 0),
            "w": Interval(0, 0.05),
        }
        assert f.eval_interval(small).subset_of(f.eval_interval(SYSTEM_ENV))


def random_expr(rng, names, depth):
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.4:
            return Const(Fraction(rng.randint(-40, 40), rng.choice((1, 2, 4, 5, 10))))
        return Var(rng.choice(names))
    kind = rng.randrange(4)
    if kind == 3:
        return Neg(random_expr(rng, names, depth - 1))
    lhs = random_expr(rng, names, depth - 1)
    rhs = random_expr(rng, names, depth - 1)
    return (Add, Sub, Mul)[kind](lhs, rhs)


class TestRandomizedSoundness:
    NAMES = ["a", "b", "c"]

    def test_points_stay_inside_interval_result(self):
        rng = random.Random(7)
        for _ in range(300):
            e = random_expr(rng, self.NAMES, 4)
            bounds = {}
            for n in self.NAMES:
                lo, hi = sorted((rng.uniform(-3, 3), rng.uniform(-3, 3)))
                bounds[n] = Interval(lo, hi)
            r = e.eval_interval(bounds)
            for _ in range(1000 // 300 + 3):
                pt = {
                    n: min(max(rng.uniform(iv.lo, iv.hi), iv.lo), iv.hi)
                    for n, iv in bounds.items()
                }
                v = e.eval_point(pt)
                assert r.lo <= v <= r.hi

    def test_matches_rational_oracle(self):
        rng = random.Random(99)
        for _ in range(200):
            e = random_expr(rng, self.NAMES, 4)
            fenv = {}
            ienv = {}
            for n in self.NAMES:
                lo, hi = sorted((rng.uniform(-3, 3), rng.uniform(-3, 3)))
                ienv[n] = Interval(lo, hi)
                fenv[n] = (Fraction(lo), Fraction(hi))
            exact_lo, exact_hi, scale = frac_eval(e, fenv)
            r = e.eval_interval(ienv)
            assert Fraction(r.lo) <= exact_lo
            assert exact_hi <= Fraction(r.hi)
            # Tight up to one rounding ulp per node at the working scale.
            slack = e.node_count() * math.ulp(max(1.0, float(scale)))
            for got, want in ((r.lo, exact_lo), (r.hi, exact_hi)):
                assert abs(got - float(want)) <= slack

    def test_interval_inclusion_monotonicity(self):
        rng = random.Random(1234)
        for _ in range(200):
            e = random_expr(rng, self.NAMES, 3)
            inner = {}
            outer = {}
            for n in self.NAMES:
                lo, hi = sorted((rng.uniform(-3, 3), rng.uniform(-3, 3)))
                inner[n] = Interval(lo, hi)
                outer[n] = Interval(lo - rng.random(), hi + rng.random())
            assert e.eval_interval(inner).subset_of(e.eval_interval(outer))


@st.composite
def expr_trees(draw, depth=3):
    names = ("p", "q")
    if depth == 0:
        leaf = draw(st.integers(0, 2))
        if leaf == 0:
            num = draw(st.integers(-50, 50))
            den = draw(st.sampled_from((1, 2, 4, 5, 8, 10, 20)))
            return Const(Fraction(num, den))
        return Var(names[leaf - 1])
    kind = draw(st.integers(0, 4))
    if kind == 0:
        return draw(expr_trees(depth=0))
    if kind == 4:
        return Neg(draw(expr_trees(depth=depth - 1)))
    lhs = draw(expr_trees(depth=depth - 1))
    rhs = draw(expr_trees(depth=depth - 1))
    return (Add, Sub, Mul)[kind - 1](lhs, rhs)


class TestPrintRoundtrip:
    @given(expr_trees())
    def test_parse_of_print_is_structurally_equal(self, e):
        text = e.to_text()
        again = parse_expr(text, ["p", "q"])
        assert again == normalize_neg_consts(e)

    def test_examples(self):
        for text in ("3 * x1 * x2 + w * u", "2 * x2 + x1", "-(x1 + 1) * 0.5 - x2"):
            e = parse_expr(text, ["x1", "x2", "u", "w"])
            assert e.to_text() == text


def normalize_neg_consts(e):
    """Parsing folds a unary minus on a literal into the constant; apply
    the same fold to generated trees before comparing round-trips."""
    if isinstance(e, Neg):
        inner = normalize_neg_consts(e.operand)
        if isinstance(inner, Const):
            return Const(-inner.value)
        return Neg(inner)
    if isinstance(e, (Add, Sub, Mul)):
        return type(e)(normalize_neg_consts(e.lhs), normalize_neg_consts(e.rhs))
    return e
