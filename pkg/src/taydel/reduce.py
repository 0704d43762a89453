"""History substitution: eliminate constant and time-dependent delays.

On the first interval every state reference whose delayed argument still
points into the history can be replaced by the history function itself.
This module performs that replacement at the series level: each such
reference becomes a known-series leaf holding the expansion of
``phi_j^(d)(alpha(t))`` about 0, leaving a system whose only remaining
delays are proportional.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import expr as ex
from .problem import (
    CauchyProblem,
    ConstantDelay,
    DelaySpec,
    ProblemError,
    ProportionalDelay,
    TimeVaryingDelay,
    ValidityInterval,
    compute_validity,
)
from .series import Series, compose_polynomial, monomial


@dataclass(frozen=True)
class ReducedSystem:
    """System with proportional delays only; former constant and
    time-dependent delayed terms are known-series leaves built to order
    ``trunc_order + order`` at least, leaving headroom for derivative
    shifts during coefficient marching."""

    order: int
    var_names: tuple[str, ...]
    equations: tuple[ex.Expr, ...]
    delays: tuple[DelaySpec, ...]
    init: tuple[tuple[float, ...], ...]
    trunc_order: int
    validity: ValidityInterval

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    def delay_map(self) -> dict[str, DelaySpec]:
        return {d.id: d for d in self.delays}


def delay_argument_series(spec: DelaySpec, order: int) -> Series:
    """Expansion of the delayed argument t - lag about 0."""
    law = spec.law
    if isinstance(law, ConstantDelay):
        coeffs = [0.0] * (order + 1)
        coeffs[0] = -law.tau
        if order >= 1:
            coeffs[1] = 1.0
        return Series(tuple(coeffs))
    if isinstance(law, TimeVaryingDelay):
        return monomial(1, order) - ex.eval_series(law.lag, ex.time_series(order))
    raise ProblemError(
        f"delay {spec.id!r} is proportional; its argument needs no expansion"
    )


def history_leaf(phi: ex.Expr, deriv: int, argument: Series, order: int) -> Series:
    """Series of the deriv-th derivative of the history function evaluated
    along the delayed argument.

    Built in two stages: first the history is expanded about the
    argument's value at t = 0 (substituting ``t -> a0 + s``), then the
    derivative is taken on that expansion and ``s`` is substituted by the
    argument series minus ``a0``, whose zero constant term makes the
    polynomial composition exact through the truncation order.  This
    avoids differentiating user expressions symbolically.
    """
    a0 = argument.coeffs[0]
    stage_order = order + deriv
    about = Series((a0, 1.0) + (0.0,) * (stage_order - 1))
    expanded = ex.eval_series(phi, about)
    shifted = expanded.differentiate(deriv)
    inner = argument.truncated(order) - Series.constant(a0, order)
    return compose_polynomial(shifted.coeffs, inner)


def substitute_history(
    problem: CauchyProblem,
    *,
    trunc_order: int | None = None,
    validity: ValidityInterval | None = None,
) -> ReducedSystem:
    """Replace every constant/time-dependent delayed reference by the
    matching history-series leaf.  Proportional references and undelayed
    references pass through unchanged."""
    n = problem.order
    target = trunc_order if trunc_order is not None else problem.trunc_order
    leaf_order = target + 2 * n + 2
    validity = validity or compute_validity(problem)
    specs = problem.delay_map()
    argument_cache: dict[str, Series] = {}
    leaf_cache: dict[tuple[int, int, str], ex.KnownSeries] = {}

    def leaf(ref: ex.StateRef) -> ex.KnownSeries:
        key = (ref.var, ref.deriv, ref.delay)
        if key not in leaf_cache:
            if problem.phi is None:
                raise ProblemError(
                    "history function required to substitute "
                    f"{ex.pretty(ref, problem.var_names)}"
                )
            if ref.delay not in argument_cache:
                argument_cache[ref.delay] = delay_argument_series(
                    specs[ref.delay], leaf_order
                )
            leaf_cache[key] = ex.KnownSeries(
                history_leaf(
                    problem.phi[ref.var - 1],
                    ref.deriv,
                    argument_cache[ref.delay],
                    leaf_order,
                )
            )
        return leaf_cache[key]

    def walk(node: ex.Expr) -> ex.Expr:
        if isinstance(node, ex.StateRef):
            if node.delay is None or specs[node.delay].proportional:
                return node
            return leaf(node)
        if isinstance(node, (ex.Add, ex.Sub, ex.Mul, ex.Div)):
            return type(node)(walk(node.left), walk(node.right))
        if isinstance(node, ex.Neg):
            return ex.Neg(walk(node.operand))
        if isinstance(node, ex.Pow):
            return ex.Pow(walk(node.base), node.exponent)
        if isinstance(node, ex.Func):
            return ex.Func(node.fn, walk(node.arg))
        return node

    return ReducedSystem(
        order=n,
        var_names=problem.var_names,
        equations=tuple(walk(eq) for eq in problem.equations),
        delays=tuple(d for d in problem.delays if d.proportional),
        init=problem.init,
        trunc_order=target,
        validity=validity,
    )
