"""Independent numerical reference: fixed-step RK4 with cubic-Hermite
dense output.

The reduced system is converted to first order; the state vector stacks,
per variable, the value and derivatives up to order n-1.  Proportional
lookups u^(d)(q*t) with d <= n-1 are served from the dense trajectory
already computed (they always point backwards since q < 1), so the
integrator needs no knowledge of the recurrence solver it validates.
Top-order references under a proportional delay are outside this
integrator's scope and are rejected up front.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field

from . import expr as ex
from .engine import TaylorSolution, evaluate_solution
from .reduce import ReducedSystem

logger = logging.getLogger(__name__)


class OracleError(Exception):
    """Integration failure (domain error in the right-hand side, lookup
    ahead of the computed history)."""


class OracleRestriction(OracleError):
    """The system contains a term the reference integrator cannot handle."""


@dataclass(frozen=True)
class DenseTrajectory:
    """Grid solution with enough node data for cubic-Hermite evaluation
    anywhere in [0, T]: state vectors and their time derivatives at the
    nodes.  Immutable once built; sampling is thread-safe."""

    order: int
    var_names: tuple[str, ...]
    step_size: float
    times: tuple[float, ...]
    states: tuple[tuple[float, ...], ...]
    derivs: tuple[tuple[float, ...], ...]
    extrapolated_lookups: int = 0
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def horizon(self) -> float:
        return self.times[-1]

    @property
    def num_vars(self) -> int:
        return len(self.var_names)


def _hermite(t0, h, y0, d0, y1, d1, t):
    s = (t - t0) / h
    s2 = s * s
    s3 = s2 * s
    return (
        (2 * s3 - 3 * s2 + 1) * y0
        + (s3 - 2 * s2 + s) * h * d0
        + (-2 * s3 + 3 * s2) * y1
        + (s3 - s2) * h * d1
    )


def check_supported(reduced: ReducedSystem) -> None:
    n = reduced.order
    specs = reduced.delay_map()
    for var, equation in enumerate(reduced.equations, start=1):
        for ref in ex.iter_refs(equation):
            if ref.delay is not None and not specs[ref.delay].proportional:
                raise OracleRestriction(
                    f"equation {var}: unreduced delayed reference "
                    f"{ex.pretty(ref, reduced.var_names)}"
                )
            if ref.deriv >= n:
                raise OracleRestriction(
                    f"equation {var}: top-order delayed reference "
                    f"{ex.pretty(ref, reduced.var_names)} is outside the "
                    "reference integrator's scope"
                )


def integrate_reference(
    reduced: ReducedSystem, step_size: float, horizon: float
) -> DenseTrajectory:
    """March the first-order form of the system with classical RK4.

    Proportional lookups landing inside the step currently being computed
    use the previous step's Hermite polynomial, extrapolated; this happens
    only for ratios close to 1 and keeps the O(h^4) error budget.  The
    very first step has no predecessor, so it is computed three times,
    feeding each pass's Hermite polynomial to the next (the fixed point of
    that iteration has full order).
    """
    if step_size <= 0:
        raise OracleError(f"step size must be positive, got {step_size!r}")
    if not 0 < horizon <= reduced.validity.upper + 1e-12:
        raise OracleError(
            f"horizon must lie in (0, {reduced.validity.upper:g}], "
            f"got {horizon!r}"
        )
    check_supported(reduced)
    n = reduced.order
    p = reduced.num_vars
    dim = n * p
    specs = reduced.delay_map()

    times: list[float] = [0.0]
    states: list[tuple[float, ...]] = [
        tuple(reduced.init[j][d] for j in range(p) for d in range(n))
    ]
    derivs: list[tuple[float, ...]] = []
    extrapolations = 0
    # Hermite data of the step in progress, for lookups beyond the front:
    # (t0, h, y0, d0, y1, d1) or None
    inflight: list[tuple] = [None]

    def lookup(var: int, deriv: int, s: float, stage_limit: float):
        nonlocal extrapolations
        if s > stage_limit + 1e-9 * max(1.0, stage_limit):
            raise OracleError(
                f"lookup at t = {s:g} is ahead of the computed history "
                f"(front {stage_limit:g})"
            )
        component = (var - 1) * n + deriv
        front = times[-1]
        if s <= front:
            i = bisect.bisect_right(times, s) - 1
            if i >= len(times) - 1:
                return states[-1][component]
            t0, t1 = times[i], times[i + 1]
            return _hermite(
                t0,
                t1 - t0,
                states[i][component],
                derivs[i][component],
                states[i + 1][component],
                derivs[i + 1][component],
                s,
            )
        data = inflight[0]
        if data is None:
            raise OracleError(
                f"lookup at t = {s:g} beyond the front with no step in "
                "progress"
            )
        extrapolations += 1
        logger.debug("extrapolated lookup at t=%g beyond front %g", s, front)
        t0, h, y0, d0, y1, d1 = data
        return _hermite(t0, h, y0[component], d0[component], y1[component], d1[component], s)

    def rhs(t: float, y: tuple[float, ...], stage_limit: float) -> tuple[float, ...]:
        def resolve(ref: ex.StateRef) -> float:
            if ref.delay is None:
                return y[(ref.var - 1) * n + ref.deriv]
            ratio = specs[ref.delay].law.ratio
            return lookup(ref.var, ref.deriv, ratio * t, stage_limit)

        out = [0.0] * dim
        for j in range(p):
            base = j * n
            for d in range(n - 1):
                out[base + d] = y[base + d + 1]
            try:
                out[base + n - 1] = ex.eval_numeric(
                    reduced.equations[j], t, resolve
                )
            except ex.EvaluationError as exc:
                raise OracleError(f"equation {j + 1} at t = {t:g}: {exc}") from None
        return tuple(out)

    def rk4_step(t0: float, y0: tuple[float, ...], h: float, k1):
        limit = t0 + h
        k2 = rhs(t0 + h / 2, tuple(y + h / 2 * k for y, k in zip(y0, k1)), limit)
        k3 = rhs(t0 + h / 2, tuple(y + h / 2 * k for y, k in zip(y0, k2)), limit)
        k4 = rhs(t0 + h, tuple(y + h * k for y, k in zip(y0, k3)), limit)
        return tuple(
            y + h / 6 * (a + 2 * b + 2 * c + d)
            for y, a, b, c, d in zip(y0, k1, k2, k3, k4)
        )

    steps = max(1, math.ceil(round(horizon / step_size, 9)))
    for i in range(steps):
        t0 = i * step_size
        h = min(step_size, horizon - t0)
        if h <= 0:
            break
        y0 = states[-1]
        if i == 0:
            # no previous step to extrapolate from: iterate the step,
            # feeding each pass's Hermite polynomial to the next (the
            # fixed point of this map has the integrator's full order)
            d0 = rhs(0.0, y0, h)
            y1 = tuple(y + h * d for y, d in zip(y0, d0))  # Euler predictor
            d1 = d0
            for _ in range(3):
                inflight[0] = (0.0, h, y0, d0, y1, d1)
                y1 = rk4_step(0.0, y0, h, d0)
                d1 = rhs(h, y1, h)
            derivs.append(d0)
        else:
            inflight[0] = (
                times[-2],
                times[-1] - times[-2],
                states[-2],
                derivs[-2],
                states[-1],
                derivs[-1],
            )
            y1 = rk4_step(t0, y0, h, derivs[-1])
            d1 = rhs(t0 + h, y1, t0 + h)
        times.append(t0 + h)
        states.append(y1)
        derivs.append(d1)
        inflight[0] = None

    return DenseTrajectory(
        order=n,
        var_names=reduced.var_names,
        step_size=step_size,
        times=tuple(times),
        states=tuple(states),
        derivs=tuple(derivs),
        extrapolated_lookups=extrapolations,
    )


def sample(traj: DenseTrajectory, t: float, deriv: int = 0) -> tuple[float, ...]:
    """Per-variable value of the deriv-th derivative at t, by cubic-Hermite
    interpolation within the enclosing step.  Derivatives up to order n-1
    are state components; their node slopes come from the stored
    right-hand-side evaluations."""
    if deriv < 0 or deriv >= traj.order:
        raise OracleError(
            f"derivative order must lie in 0..{traj.order - 1}, got {deriv}"
        )
    if not 0.0 <= t <= traj.horizon + 1e-12:
        raise OracleError(
            f"t = {t:g} outside the integrated range [0, {traj.horizon:g}]"
        )
    times = traj.times
    i = bisect.bisect_right(times, t) - 1
    if i >= len(times) - 1:
        i = len(times) - 2
    t0, t1 = times[i], times[i + 1]
    out = []
    n = traj.order
    for j in range(traj.num_vars):
        component = j * n + deriv
        out.append(
            _hermite(
                t0,
                t1 - t0,
                traj.states[i][component],
                traj.derivs[i][component],
                traj.states[i + 1][component],
                traj.derivs[i + 1][component],
                t,
            )
        )
    return tuple(out)


def compare(
    solution: TaylorSolution,
    traj: DenseTrajectory,
    interval: tuple[float, float],
    samples: int,
) -> tuple[float, ...]:
    """Maximum absolute difference per variable between the truncated
    polynomial solution and the dense reference over an equidistant grid."""
    a, b = interval
    if not (0.0 <= a < b <= min(traj.horizon, solution.validity.upper) + 1e-12):
        raise OracleError(
            f"comparison interval [{a:g}, {b:g}] must lie inside "
            f"[0, {min(traj.horizon, solution.validity.upper):g}]"
        )
    if samples < 2:
        raise OracleError(f"need at least 2 samples, got {samples}")
    worst = [0.0] * traj.num_vars
    for i in range(samples):
        t = a + (b - a) * i / (samples - 1)
        engine_values = evaluate_solution(solution, t, unchecked=True)
        oracle_values = sample(traj, t, 0)
        for j, (u, v) in enumerate(zip(engine_values, oracle_values)):
            worst[j] = max(worst[j], abs(u - v))
    return tuple(worst)
