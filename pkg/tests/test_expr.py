import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taydel.expr import (
    TIME,
    Add,
    Const,
    Div,
    EvaluationError,
    Func,
    KnownSeries,
    Mul,
    Neg,
    ParseError,
    Pow,
    StateRef,
    StructureError,
    Sub,
    analyze,
    eval_numeric,
    eval_series,
    iter_refs,
    parse_expression,
    pretty,
    time_series,
)
from taydel.series import Series, SeriesDomainError, exp_linear, monomial

VARS = ("u1", "u2", "u3")


def parse(text, *, variables=VARS, delays=("a1", "a2"), max_deriv=3):
    return parse_expression(text, variables=variables, delays=delays, max_deriv=max_deriv)


class TestParse:
    def test_square_of_state(self):
        assert parse("u2^2") == Pow(StateRef(2, 0, None), 2.0)

    def test_nested_rational_power(self):
        assert parse("(u1^2)^(1/3)") == Pow(Pow(StateRef(1, 0, None), 2.0), 1 / 3)

    def test_exponential_coefficient_folds_constants(self):
        got = parse("exp(5/2*t)*u2")
        assert got == Mul(Func("exp", Mul(Const(2.5), TIME)), StateRef(2, 0, None))

    def test_left_associativity(self):
        assert parse("t - t - t") == Sub(Sub(TIME, TIME), TIME)

    def test_unary_minus_binds_looser_than_power(self):
        assert parse("-t^2") == Neg(Pow(TIME, 2.0))

    def test_division_of_power(self):
        assert parse("t^4/18") == Div(Pow(TIME, 4.0), Const(18.0))

    def test_primes_and_delay(self):
        assert parse("u1'''@a1") == StateRef(1, 3, "a1")
        assert parse("u2''") == StateRef(2, 2, None)

    def test_prime_overflow(self):
        with pytest.raises(ParseError) as excinfo:
            parse("u1''''")
        assert "derivative order 4" in str(excinfo.value)

    def test_unknown_identifier(self):
        with pytest.raises(ParseError) as excinfo:
            parse("w1 + 1")
        assert "unknown identifier 'w1'" in str(excinfo.value)

    def test_unknown_delay(self):
        with pytest.raises(ParseError) as excinfo:
            parse("u1@zz")
        assert "unknown delay 'zz'" in str(excinfo.value)

    def test_syntax_error_has_location(self):
        with pytest.raises(ParseError) as excinfo:
            parse("u1 + * u2")
        assert "column 6" in str(excinfo.value)

    def test_trailing_input(self):
        with pytest.raises(ParseError):
            parse("u1 u2")

    def test_unexpected_character(self):
        with pytest.raises(ParseError):
            parse("u1 $ u2")

    def test_time_only_context_rejects_states(self):
        with pytest.raises(ParseError):
            parse_expression("u1 + t")

    def test_time_only_context_accepts_functions(self):
        got = parse_expression("exp(-t)/2")
        assert got == Div(Func("exp", Neg(TIME)), Const(2.0))

    def test_constant_folding_is_finite_only(self):
        got = parse_expression("1/0")
        assert got == Div(Const(1.0), Const(0.0))


FIXTURE_EXPRESSIONS = [
    "u2^2",
    "1/2 * u1@a1",
    "exp(5/2*t) * u2 + 9 * exp(2*t) * u3@a2",
    "2 * u1@a1 * u2@a2 + u1' - t^4 + 2*t^3 - t^2 - 4*t + 4",
    "u2@a2 * u1@a1 + u2'@a2 - t^4/18 - 2*t + 6",
    "u1'''@a1 * u1@a2 + (u1^2)^(1/3) + u2'@a2",
    "u2'''@a1 + u2'@a2 * u1@a2",
    "2*t - exp(-t)",
    "sin(t) * cos(u1) - ln(u2 + 3)",
]


class TestPretty:
    @pytest.mark.parametrize("text", FIXTURE_EXPRESSIONS)
    def test_round_trip_on_fixture_corpus(self, text):
        tree = parse(text)
        assert parse(pretty(tree, VARS)) == tree

    def test_default_variable_names(self):
        assert pretty(StateRef(2, 1, "a1")) == "u2'@a1"

    def test_known_series_rendering_is_diagnostic(self):
        text = pretty(KnownSeries(Series((1.0, -2.0, 1.0, 0.0, 0.0))))
        assert text.startswith("<series")


def expr_strategy():
    leaves = st.one_of(
        st.builds(Const, st.floats(min_value=-8, max_value=8, allow_nan=False)),
        st.just(TIME),
        st.builds(
            StateRef,
            st.integers(min_value=1, max_value=3),
            st.integers(min_value=0, max_value=2),
            st.sampled_from([None, "a1", "a2"]),
        ),
    )

    def extend(children):
        return st.one_of(
            st.builds(Add, children, children),
            st.builds(Sub, children, children),
            st.builds(Mul, children, children),
            st.builds(Div, children, children),
            st.builds(Neg, children),
            st.builds(Pow, children, st.sampled_from([2.0, 3.0, 0.5, 1 / 3])),
            st.builds(Func, st.sampled_from(["exp", "ln", "sin", "cos"]), children),
        )

    return st.recursive(leaves, extend, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(expr_strategy())
def test_pretty_parse_normalization_is_idempotent(tree):
    once = parse(pretty(tree, VARS))
    twice = parse(pretty(once, VARS))
    assert once == twice


class TestAnalyze:
    def test_proportional_only_system(self):
        eqs = (
            parse("u2^2"),
            parse("1/2 * u1@a1"),
            parse("exp(5/2*t) * u2 + 9 * exp(2*t) * u3@a2"),
        )
        report = analyze(eqs, order=1, num_vars=3, delays={"a1": True, "a2": True})
        assert report.max_deriv_per_delay == {"a1": 0, "a2": 0}
        assert report.max_delayed_deriv == 0
        assert report.total_delayed_derivs == 0
        assert not report.neutral
        assert report.neutral_proportional_refs == ()

    def test_neutral_detection(self):
        eqs = (
            parse("u1'''@a1 * u1@a2 + (u1^2)^(1/3)"),
            parse("u2'''@a2 + u2'@a1 * u1@a2"),
        )
        report = analyze(eqs, order=3, num_vars=3, delays={"a1": False, "a2": True})
        assert report.max_deriv_per_delay == {"a1": 3, "a2": 3}
        assert report.max_delayed_deriv == 3
        assert report.neutral
        assert report.neutral_proportional_refs == ((2, StateRef(2, 3, "a2")),)

    def test_undelayed_system_not_neutral(self):
        report = analyze(
            (parse("u1", max_deriv=1),), order=1, num_vars=1, delays={}
        )
        assert report.max_delayed_deriv == 0
        assert report.total_delayed_derivs == 0
        assert not report.neutral

    def test_total_counts_every_delay(self):
        eqs = (parse("u1'@a1 + u2''@a2 + u1@a1"),)
        report = analyze(eqs, order=3, num_vars=3, delays={"a1": False, "a2": True})
        assert report.total_delayed_derivs == 3
        assert report.ref_count == 3

    def test_is_pure(self):
        eqs = (parse("u1'@a1 + u2*u2"),)
        kwargs = dict(order=2, num_vars=3, delays={"a1": True, "a2": False})
        assert analyze(eqs, **kwargs) == analyze(eqs, **kwargs)

    def test_every_ref_tallied_once(self):
        eqs = tuple(parse(t) for t in FIXTURE_EXPRESSIONS[:5])
        report = analyze(eqs, order=3, num_vars=3, delays={"a1": True, "a2": False})
        assert report.ref_count == sum(len(list(iter_refs(e))) for e in eqs)

    def test_rejects_undelayed_top_order(self):
        with pytest.raises(StructureError):
            analyze((parse("u1'''"),), order=3, num_vars=3, delays={})

    def test_accepts_top_order_under_constant_delay(self):
        report = analyze(
            (parse("u1'''@a1"),), order=3, num_vars=3, delays={"a1": False}
        )
        assert report.max_delayed_deriv == 3
        assert report.neutral
        assert report.neutral_proportional_refs == ()

    def test_rejects_out_of_range_variable(self):
        with pytest.raises(StructureError):
            analyze((parse("u3"),), order=1, num_vars=2, delays={})

    def test_rejects_undeclared_delay(self):
        with pytest.raises(StructureError):
            analyze((parse("u1@a1"),), order=1, num_vars=1, delays={"a2": True})


class TestEvalSeries:
    def test_polynomial_in_time(self):
        got = eval_series(parse_expression("2*t^2 - t + 3"), time_series(4))
        assert got == Series((3.0, -1.0, 2.0, 0.0, 0.0))

    def test_exp_of_scaled_time(self):
        got = eval_series(parse_expression("exp(-t)"), time_series(5))
        assert got == exp_linear(-1.0, 5)

    def test_state_refs_need_resolver(self):
        with pytest.raises(EvaluationError):
            eval_series(parse("u1"), time_series(3))

    def test_resolver_is_used(self):
        got = eval_series(
            parse("u1 * t"), time_series(3), lambda ref: exp_linear(1.0, 3)
        )
        assert got.coeffs == pytest.approx((0.0, 1.0, 1.0, 0.5))

    def test_known_series_truncates_to_working_order(self):
        leaf = KnownSeries(exp_linear(1.0, 8))
        got = eval_series(Mul(leaf, Const(2.0)), time_series(3))
        assert got == 2 * exp_linear(1.0, 3)

    def test_short_known_series_is_an_error(self):
        leaf = KnownSeries(Series((1.0, 1.0)))
        with pytest.raises(Exception):
            eval_series(leaf, time_series(5))

    def test_division_by_zero_series_names_subexpression(self):
        with pytest.raises(SeriesDomainError) as excinfo:
            eval_series(parse_expression("1/t"), time_series(3))
        assert "1 / t" in str(excinfo.value)

    def test_integer_power_of_time(self):
        got = eval_series(parse_expression("t^3"), time_series(5))
        assert got == monomial(3, 5)


class TestEvalNumeric:
    def test_polynomial(self):
        assert eval_numeric(parse_expression("2*t^2 - t + 3"), 2.0) == 9.0

    def test_functions(self):
        import math

        got = eval_numeric(parse_expression("exp(-t)/2"), 0.7)
        assert got == pytest.approx(math.exp(-0.7) / 2)

    def test_division_by_zero(self):
        with pytest.raises(EvaluationError):
            eval_numeric(parse_expression("1/(t - 1)"), 1.0)

    def test_log_domain(self):
        with pytest.raises(EvaluationError):
            eval_numeric(parse_expression("ln(t)"), 0.0)

    def test_fractional_power_of_negative(self):
        with pytest.raises(EvaluationError):
            eval_numeric(parse_expression("(t - 2)^(1/2)"), 1.0)

    def test_state_resolver(self):
        got = eval_numeric(parse("u1' + 1"), 0.0, lambda ref: 41.0)
        assert got == 42.0
