import math

import pytest

from taydel.engine import solve_reduced
from taydel.oracle import (
    OracleError,
    OracleRestriction,
    check_supported,
    compare,
    integrate_reference,
    sample,
)
from taydel.problemfile import load_problem, parse_problem
from taydel.reduce import substitute_history

PLAIN = """
order = 1
vars = u1
eq u1' = {rhs}
init u1 = [{init}]
horizon = {horizon}
taylor_order = 8
"""


def plain_reduced(rhs, init=1.0, horizon=1.0):
    return substitute_history(
        parse_problem(PLAIN.format(rhs=rhs, init=init, horizon=horizon))
    )


class TestIntegrate:
    def test_exponential_growth(self):
        trajectory = integrate_reference(plain_reduced("u1"), 1e-3, 1.0)
        assert trajectory.states[-1][0] == pytest.approx(math.e, abs=1e-10)

    def test_coupled_proportional_system(self, fixtures_dir):
        reduced = substitute_history(load_problem(fixtures_dir / "example1.fde"))
        trajectory = integrate_reference(reduced, 1e-3, 0.5)
        got = sample(trajectory, 0.5, 0)
        expected = (math.exp(0.5), math.exp(0.25), 0.5 * math.exp(1.5))
        for g, e in zip(got, expected):
            assert g == pytest.approx(e, abs=1e-8)

    def test_polynomial_system_on_grid(self, fixtures_dir):
        reduced = substitute_history(load_problem(fixtures_dir / "example2.fde"))
        trajectory = integrate_reference(reduced, 1e-3, 1.0)
        for t, state in zip(trajectory.times, trajectory.states):
            assert state[0] == pytest.approx(2 * t * t, abs=1e-9)
            assert state[2] == pytest.approx(t * t, abs=1e-9)

    def test_order_four_convergence(self):
        errors = []
        for h in (0.02, 0.01):
            trajectory = integrate_reference(plain_reduced("u1"), h, 1.0)
            errors.append(abs(trajectory.states[-1][0] - math.e))
        ratio = errors[0] / errors[1]
        assert 12 <= ratio <= 20

    def test_rejects_unsupported_top_order_terms(self, fixtures_dir):
        reduced = substitute_history(load_problem(fixtures_dir / "example3.fde"))
        with pytest.raises(OracleRestriction) as excinfo:
            integrate_reference(reduced, 1e-3, 0.3)
        assert "u2'''@half" in str(excinfo.value)
        with pytest.raises(OracleRestriction):
            check_supported(reduced)

    def test_rejects_bad_step_and_horizon(self):
        reduced = plain_reduced("u1")
        with pytest.raises(OracleError):
            integrate_reference(reduced, 0.0, 1.0)
        with pytest.raises(OracleError):
            integrate_reference(reduced, 1e-3, 2.0)

    def test_domain_error_carries_time(self):
        # the final stage evaluates at t = 1 exactly, where ln(1 - t) blows up
        reduced = plain_reduced("ln(1 - t) * u1", horizon=1.0)
        with pytest.raises(OracleError) as excinfo:
            integrate_reference(reduced, 1e-2, 1.0)
        assert "t = 1" in str(excinfo.value)

    def test_partial_final_step_lands_on_horizon(self):
        trajectory = integrate_reference(plain_reduced("u1"), 0.3, 1.0)
        assert trajectory.times[-1] == pytest.approx(1.0, abs=1e-12)
        assert trajectory.states[-1][0] == pytest.approx(math.e, abs=1e-3)


class TestSample:
    def test_nodes_are_exact(self):
        trajectory = integrate_reference(plain_reduced("u1"), 0.1, 1.0)
        for i, t in enumerate(trajectory.times):
            assert sample(trajectory, t, 0)[0] == pytest.approx(
                trajectory.states[i][0], rel=1e-15
            )

    def test_cubic_trajectories_interpolate_exactly(self):
        # u' = 3 t^2 integrates to t^3; both the integrator (a cubic
        # quadrature in t) and the interpolant reproduce cubics
        trajectory = integrate_reference(plain_reduced("3*t^2", init=0.0), 0.1, 1.0)
        for i in range(10):
            t = 0.05 + 0.1 * i
            assert sample(trajectory, t, 0)[0] == pytest.approx(t**3, abs=1e-14)

    def test_interior_error_scales_like_fourth_power(self):
        reduced = plain_reduced("cos(t)", init=1.0)  # solution 1 + sin t
        worst = {}
        for h in (2e-2, 1e-2):
            trajectory = integrate_reference(reduced, h, 1.0)
            worst[h] = max(
                abs(sample(trajectory, (i + 0.5) * h, 0)[0] - (1 + math.sin((i + 0.5) * h)))
                for i in range(int(1.0 / h))
            )
        assert worst[1e-2] <= 1e-8
        assert worst[2e-2] / worst[1e-2] == pytest.approx(16, abs=8)

    def test_derivative_orders_within_state(self, fixtures_dir):
        reduced = substitute_history(load_problem(fixtures_dir / "example2.fde"))
        trajectory = integrate_reference(reduced, 1e-2, 1.0)
        values = sample(trajectory, 0.55, 1)
        assert values[0] == pytest.approx(4 * 0.55, abs=1e-8)
        assert values[1] == pytest.approx(2 * 0.55, abs=1e-8)

    def test_range_and_order_checks(self):
        trajectory = integrate_reference(plain_reduced("u1"), 0.1, 1.0)
        with pytest.raises(OracleError):
            sample(trajectory, 1.2, 0)
        with pytest.raises(OracleError):
            sample(trajectory, 0.5, 1)


class TestCompare:
    def test_polynomial_fixture(self, fixtures_dir):
        reduced = substitute_history(load_problem(fixtures_dir / "example2.fde"))
        solution = solve_reduced(reduced)
        trajectory = integrate_reference(reduced, 1e-3, 1.0)
        errors = compare(solution, trajectory, (0.0, 1.0), 200)
        assert all(e <= 1e-9 for e in errors)

    def test_exponential_fixture_interval(self, fixtures_dir):
        problem = load_problem(fixtures_dir / "example1.fde")
        reduced = substitute_history(problem, trunc_order=12)
        solution = solve_reduced(reduced)
        trajectory = integrate_reference(reduced, 1e-3, 0.3)
        errors = compare(solution, trajectory, (0.0, 0.3), 150)
        assert all(e <= 1e-8 for e in errors)

    def test_self_consistency_on_exact_polynomial(self):
        # cubic right-hand side: engine and integrator are both exact, so
        # the comparison bottoms out at round-off
        reduced = plain_reduced("3*t^2", init=0.0)
        solution = solve_reduced(reduced)
        trajectory = integrate_reference(reduced, 1e-2, 1.0)
        errors = compare(solution, trajectory, (0.0, 1.0), 100)
        assert all(e <= 1e-13 for e in errors)

    def test_interval_must_stay_inside_coverage(self, fixtures_dir):
        reduced = substitute_history(load_problem(fixtures_dir / "example2.fde"))
        solution = solve_reduced(reduced)
        trajectory = integrate_reference(reduced, 1e-2, 0.5)
        with pytest.raises(OracleError):
            compare(solution, trajectory, (0.0, 0.9), 50)
        with pytest.raises(OracleError):
            compare(solution, trajectory, (0.4, 0.5), 1)
