"""Coefficient marching: turn a reduced system into Taylor coefficients.

The initial data fixes coefficients 0..n-1 of every variable.  Marching
index k then determines the coefficients at index k+n for all variables
at once: the right-hand side of each equation is expanded over series
arithmetic truncated at order k, where every state reference reads only
already-known coefficients (a reference with d primes at output order k
reads input order at most k+n-1).

Equations whose own top derivative appears under a proportional delay
need one extra move: that occurrence references the unknown coefficient
itself, scaled by a pivot factor.  When the occurrence is linear with a
state-free coefficient the pivot is extracted and divided out; anything
else is rejected.  A vanishing pivot either contradicts the remaining
terms (no compatible analytic solution) or leaves the coefficient
undetermined, and both cases are reported as distinct errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import expr as ex
from .problem import CauchyProblem, ProblemError, ProportionalDelay, ValidityInterval, check_h2
from .reduce import ReducedSystem, substitute_history
from .series import Series, SeriesError, monomial

PIVOT_TOLERANCE = 1e-12
RESIDUAL_TOLERANCE = 1e-9


class EngineError(Exception):
    """Base class for marching failures."""


class EvalFailure(EngineError):
    """Series-domain error while expanding a right-hand side."""

    def __init__(self, var: int, k: int, message: str):
        super().__init__(
            f"equation {var}, marching index {k}: {message}"
        )
        self.var = var
        self.k = k


class NonlinearNeutral(EngineError):
    """A top-order proportionally delayed reference occurs outside the
    supported linear pattern."""

    def __init__(self, var: int, detail: str):
        super().__init__(f"equation {var}: {detail}")
        self.var = var


class ZeroPivot(EngineError):
    def __init__(
        self,
        var: int,
        k: int,
        pivot: float,
        residual: float,
        kind: str,
        label: str | None = None,
    ):
        super().__init__(
            f"equation {label or var}, marching index k={k}: zero pivot "
            f"({kind}); pivot = {pivot:.6g}, residual = {residual:.6g}"
        )
        self.var = var
        self.k = k
        self.pivot = pivot
        self.residual = residual
        self.partial_coeffs: tuple[tuple[float, ...], ...] | None = None
        self.var_names: tuple[str, ...] | None = None


class ZeroPivotInconsistent(ZeroPivot):
    """Pivot vanished while the remaining terms do not: the problem admits
    no analytic solution consistent with the data at this order."""

    def __init__(self, var, k, pivot, residual, label=None):
        super().__init__(var, k, pivot, residual, "inconsistent", label)


class ZeroPivotUnderdetermined(ZeroPivot):
    """Pivot and remaining terms both vanished: the recurrence does not
    determine this coefficient."""

    def __init__(self, var, k, pivot, residual, label=None):
        super().__init__(var, k, pivot, residual, "underdetermined", label)


class ValidityError(ValueError):
    """Evaluation outside the validity interval in strict mode."""


@dataclass(frozen=True)
class ErrorEstimate:
    """Heuristic truncation-error bound on [0, delta].

    Per variable, the first truncated coefficient a = |U(N+1)| is inflated
    by a geometric-tail guard based on the last observed coefficient ratio
    rho = |U(N+1)|/|U(N)|: bound = a * delta**(N+1) / (1 - rho*delta).
    The guard dominates the true tail whenever coefficient ratios keep
    shrinking (factorial-type series).  ``None`` entries mean the ratio
    was unavailable or too large to certify anything.
    """

    trunc_order: int
    delta: float
    k_hat: tuple[float | None, ...]
    bound: tuple[float | None, ...]


@dataclass(frozen=True)
class PivotEntry:
    var: int
    k: int
    pivot: float


@dataclass(frozen=True)
class TaylorSolution:
    var_names: tuple[str, ...]
    series: tuple[Series, ...]
    tail: tuple[float, ...]
    validity: ValidityInterval
    pivot_log: tuple[PivotEntry, ...] = ()
    error_estimate: ErrorEstimate | None = None

    @property
    def trunc_order(self) -> int:
        return self.series[0].trunc_order


# equation planning -------------------------------------------------------------

@dataclass(frozen=True)
class _NeutralTerm:
    sign: float
    coefficient: ex.Expr  # state-free factor product, Const(1) when bare
    ratio: float
    delay: str


@dataclass(frozen=True)
class _EquationPlan:
    plain_terms: tuple[tuple[float, ex.Expr], ...]
    neutral_terms: tuple[_NeutralTerm, ...]


def _additive_terms(node: ex.Expr, sign: float = 1.0):
    if isinstance(node, ex.Add):
        yield from _additive_terms(node.left, sign)
        yield from _additive_terms(node.right, sign)
    elif isinstance(node, ex.Sub):
        yield from _additive_terms(node.left, sign)
        yield from _additive_terms(node.right, -sign)
    elif isinstance(node, ex.Neg):
        yield from _additive_terms(node.operand, -sign)
    else:
        yield sign, node


def _product_factors(node: ex.Expr, sign: float = 1.0):
    """Flatten a product into (sign, numerator factors, denominator factors)."""
    if isinstance(node, ex.Mul):
        s1, num1, den1 = _product_factors(node.left, sign)
        s2, num2, den2 = _product_factors(node.right, 1.0)
        return s1 * s2, num1 + num2, den1 + den2
    if isinstance(node, ex.Div):
        s1, num1, den1 = _product_factors(node.left, sign)
        return s1, num1, den1 + [node.right]
    if isinstance(node, ex.Neg):
        return _product_factors(node.operand, -sign)
    return sign, [node], []


def _is_neutral_ref(node: ex.Expr, order: int, ratios: dict[str, float]) -> bool:
    return (
        isinstance(node, ex.StateRef)
        and node.deriv == order
        and node.delay in ratios
    )


def _contains_neutral(node: ex.Expr, order: int, ratios: dict[str, float]) -> bool:
    return any(
        ref.deriv == order and ref.delay in ratios for ref in ex.iter_refs(node)
    )


def _contains_state(node: ex.Expr) -> bool:
    return any(True for _ in ex.iter_refs(node))


def _plan_equation(reduced: ReducedSystem, var: int) -> _EquationPlan:
    """Split one right-hand side into ordinary terms and linear
    neutral-proportional terms, rejecting unsupported shapes."""
    n = reduced.order
    ratios = {
        d.id: d.law.ratio
        for d in reduced.delays
        if isinstance(d.law, ProportionalDelay)
    }
    equation = reduced.equations[var - 1]
    plain: list[tuple[float, ex.Expr]] = []
    neutral: list[_NeutralTerm] = []
    for sign, term in _additive_terms(equation):
        if not _contains_neutral(term, n, ratios):
            plain.append((sign, term))
            continue
        fsign, numerators, denominators = _product_factors(term, sign)
        for den in denominators:
            if _contains_neutral(den, n, ratios):
                raise NonlinearNeutral(
                    var,
                    "top-order delayed reference inside a denominator: "
                    f"{ex.pretty(term, reduced.var_names)}",
                )
        refs = [f for f in numerators if _is_neutral_ref(f, n, ratios)]
        rest = [f for f in numerators if not _is_neutral_ref(f, n, ratios)]
        if len(refs) != 1 or any(_contains_neutral(f, n, ratios) for f in rest):
            raise NonlinearNeutral(
                var,
                "top-order delayed reference in a nonlinear position: "
                f"{ex.pretty(term, reduced.var_names)}",
            )
        if any(_contains_state(f) for f in rest + denominators):
            raise NonlinearNeutral(
                var,
                "top-order delayed reference multiplied by a state-dependent "
                f"factor: {ex.pretty(term, reduced.var_names)}",
            )
        ref = refs[0]
        if ref.var != var:
            raise NonlinearNeutral(
                var,
                f"top-order reference to another variable "
                f"({ex.pretty(ref, reduced.var_names)}) under a proportional "
                "delay",
            )
        # rebuild the state-free coefficient as a plain product/quotient
        coefficient: ex.Expr = ex.Const(1.0)
        for f in rest:
            coefficient = ex.Mul(coefficient, f)
        for den in denominators:
            coefficient = ex.Div(coefficient, den)
        neutral.append(
            _NeutralTerm(
                sign=fsign,
                coefficient=coefficient,
                ratio=ratios[ref.delay],
                delay=ref.delay,
            )
        )
    return _EquationPlan(plain_terms=tuple(plain), neutral_terms=tuple(neutral))


# marching ------------------------------------------------------------------------

def transform_initial_conditions(problem: CauchyProblem | ReducedSystem) -> list[list[float]]:
    """Seed the coefficient table: index k holds the k-th derivative value
    divided by k! for k below the system order."""
    return [
        [value / math.factorial(k) for k, value in enumerate(row)]
        for row in problem.init
    ]


def _marching_resolver(reduced: ReducedSystem, var: int, k: int, table):
    """Resolve state references at working order k, reading only
    coefficients of index at most k+n-1."""
    n = reduced.order
    specs = reduced.delay_map()

    def resolve(ref: ex.StateRef) -> Series:
        if ref.delay is not None and not specs[ref.delay].proportional:
            raise EngineError(
                f"unreduced delayed reference {ex.pretty(ref, reduced.var_names)}"
            )
        if ref.deriv >= n:
            raise NonlinearNeutral(
                var,
                "top-order delayed reference in a nonlinear position: "
                f"{ex.pretty(ref, reduced.var_names)}",
            )
        prefix = Series(tuple(table[ref.var - 1][: k + ref.deriv + 1]))
        out = prefix.differentiate(ref.deriv)
        if ref.delay is not None:
            out = out.scale_arg(specs[ref.delay].law.ratio)
        return out

    return resolve


def _rhs_from_plan(
    reduced: ReducedSystem,
    plan: _EquationPlan,
    var: int,
    k: int,
    table,
) -> tuple[float, float | None]:
    """Coefficient of t**k of the right-hand side of one equation; for
    neutral equations also the pivot multiplying the unknown coefficient.
    Contributions of neutral terms that reference known coefficients are
    folded into the returned value."""
    n = reduced.order
    t_k = monomial(1, k)
    resolve = _marching_resolver(reduced, var, k, table)
    value = 0.0
    try:
        for sign, term in plan.plain_terms:
            value += sign * ex.eval_series(term, t_k, resolve).coeffs[k]
    except SeriesError as exc:
        raise EvalFailure(var, k, str(exc)) from None
    if not plan.neutral_terms:
        return value, None
    pivot = 1.0
    for term in plan.neutral_terms:
        try:
            coeff = ex.eval_series(term.coefficient, t_k, resolve)
        except SeriesError as exc:
            raise EvalFailure(var, k, str(exc)) from None
        q_power = term.ratio**k
        pivot -= term.sign * coeff.coeffs[0] * q_power
        # contributions of already-known coefficients of the same variable
        for l in range(1, k + 1):
            value += (
                term.sign
                * coeff.coeffs[l]
                * term.ratio ** (k - l)
                * math.perm(k - l + n, n)
                * table[var - 1][k - l + n]
            )
    return value, pivot


def rhs_coefficient(
    reduced: ReducedSystem, var: int, k: int, table
) -> tuple[float, float | None]:
    """Public entry point: plan the equation and return (value, pivot)."""
    return _rhs_from_plan(reduced, _plan_equation(reduced, var), var, k, table)


def step(reduced: ReducedSystem, k: int, table, plans=None, pivot_log=None) -> list[float]:
    """Compute the coefficients at index k+n for all variables."""
    n = reduced.order
    if plans is None:
        plans = [_plan_equation(reduced, var) for var in range(1, reduced.num_vars + 1)]
    scale = math.perm(k + n, n)
    new = []
    for var in range(1, reduced.num_vars + 1):
        value, pivot = _rhs_from_plan(reduced, plans[var - 1], var, k, table)
        if pivot is None:
            new.append(value / scale)
            continue
        if pivot_log is not None:
            pivot_log.append(PivotEntry(var=var, k=k, pivot=pivot))
        if abs(pivot) < PIVOT_TOLERANCE:
            label = reduced.var_names[var - 1]
            if abs(value) > RESIDUAL_TOLERANCE:
                raise ZeroPivotInconsistent(var, k, pivot, value, label)
            raise ZeroPivotUnderdetermined(var, k, pivot, value, label)
        new.append(value / (scale * pivot))
    return new


def solve(problem: CauchyProblem, *, trunc_order: int | None = None) -> TaylorSolution:
    """Full pipeline: structural checks, history substitution, coefficient
    marching, one extra coefficient for error estimation.

    On a marching failure the raised error carries the coefficients
    computed so far.
    """
    structure = problem.structure()
    h2 = check_h2(problem, structure)
    if not h2.ok:
        first = h2.violations[0]
        raise ProblemError(
            f"equation {first.equation} references the top derivative of "
            f"variable {first.variable} through proportional delay "
            f"{first.delay!r}; cross-variable top-order delayed references "
            "are unsupported"
        )
    target = trunc_order if trunc_order is not None else problem.trunc_order
    reduced = substitute_history(problem, trunc_order=target)
    return solve_reduced(reduced)


def solve_reduced(reduced: ReducedSystem) -> TaylorSolution:
    """March an already-reduced system."""
    n = reduced.order
    target = reduced.trunc_order
    internal = target + 1
    table = transform_initial_conditions(reduced)
    plans = [
        _plan_equation(reduced, var) for var in range(1, reduced.num_vars + 1)
    ]
    pivot_log: list[PivotEntry] = []
    try:
        for k in range(internal - n + 1):
            for var0, value in enumerate(step(reduced, k, table, plans, pivot_log)):
                table[var0].append(value)
    except ZeroPivot as exc:
        exc.partial_coeffs = tuple(tuple(row) for row in table)
        exc.var_names = reduced.var_names
        raise
    return TaylorSolution(
        var_names=reduced.var_names,
        series=tuple(Series(tuple(row[: target + 1])) for row in table),
        tail=tuple(row[target + 1] for row in table),
        validity=reduced.validity,
        pivot_log=tuple(pivot_log),
    )


def estimate_error(solution: TaylorSolution, delta: float) -> ErrorEstimate:
    """Attachable truncation-error estimate; see ErrorEstimate."""
    if not 0 < delta <= solution.validity.upper:
        raise ValueError(
            f"delta must lie in (0, {solution.validity.upper:g}], got {delta!r}"
        )
    target = solution.trunc_order
    k_hats: list[float | None] = []
    bounds: list[float | None] = []
    for series, tail in zip(solution.series, solution.tail):
        first_truncated = abs(tail)
        if first_truncated == 0.0:
            k_hats.append(0.0)
            bounds.append(0.0)
            continue
        last_kept = abs(series.coeffs[target])
        if last_kept == 0.0:
            k_hats.append(None)
            bounds.append(None)
            continue
        ratio = first_truncated / last_kept
        if ratio * delta >= 1.0:
            k_hats.append(None)
            bounds.append(None)
            continue
        guard = 1.0 / (1.0 - ratio * delta)
        k_hats.append(math.factorial(target + 1) * first_truncated * guard)
        bounds.append(first_truncated * guard * delta ** (target + 1))
    return ErrorEstimate(
        trunc_order=target, delta=delta, k_hat=tuple(k_hats), bound=tuple(bounds)
    )


def with_error_estimate(solution: TaylorSolution, delta: float) -> TaylorSolution:
    return replace(solution, error_estimate=estimate_error(solution, delta))


def evaluate_solution(
    solution: TaylorSolution, t: float, *, unchecked: bool = False
) -> tuple[float, ...]:
    """Value of every variable's truncated polynomial at t.  Strict mode
    refuses points outside [0, validity.upper]."""
    if not unchecked and not 0.0 <= t <= solution.validity.upper:
        raise ValidityError(
            f"t = {t:g} lies outside the validity interval "
            f"[0, {solution.validity.upper:g}]"
        )
    return tuple(s.evaluate(t) for s in solution.series)


def residual_coefficients(
    reduced: ReducedSystem, solution: TaylorSolution
) -> tuple[Series, ...]:
    """Left-hand side minus right-hand side of every equation, expanded
    over series arithmetic with the computed solution substituted.  All
    references (including top-order delayed ones) are served from the
    computed coefficients."""
    n = reduced.order
    target = solution.trunc_order
    if target < n:
        raise ValueError("solution is too short to form a residual")
    order = target - n
    specs = reduced.delay_map()
    t_r = monomial(1, order)

    def resolve(ref: ex.StateRef) -> Series:
        prefix = solution.series[ref.var - 1].truncated(order + ref.deriv)
        out = prefix.differentiate(ref.deriv)
        if ref.delay is not None:
            out = out.scale_arg(specs[ref.delay].law.ratio)
        return out

    residuals = []
    for var in range(1, reduced.num_vars + 1):
        lhs = solution.series[var - 1].differentiate(n)
        rhs = ex.eval_series(reduced.equations[var - 1], t_r, resolve)
        residuals.append(lhs - rhs)
    return tuple(residuals)
