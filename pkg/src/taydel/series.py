"""Truncated power-series arithmetic about t = 0.

A series ``[c0, c1, ..., cN]`` represents ``c0 + c1*t + ... + cN*t**N``;
index k holds the k-th Taylor coefficient.  All binary operations require
operands of identical truncation order.  Mixing orders is a hard error,
never a silent re-truncation, so bookkeeping mistakes in recurrence code
surface immediately.

Coefficients are double-precision floats.  Values are immutable after
construction and every operation is a pure function, so series are safe
to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable


class SeriesError(ValueError):
    """Truncation-order mismatch or malformed coefficient data."""


class SeriesDomainError(SeriesError):
    """An elementary function was applied outside its domain."""


@dataclass(frozen=True)
class Series:
    """Immutable truncated Taylor series."""

    coeffs: tuple[float, ...]

    def __post_init__(self) -> None:
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs:
            raise SeriesError("a series needs at least its constant coefficient")
        for k, c in enumerate(coeffs):
            if not math.isfinite(c):
                raise SeriesError(f"non-finite coefficient {c!r} at index {k}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def trunc_order(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def constant(cls, value: float, order: int) -> "Series":
        return cls((float(value),) + (0.0,) * order)

    def truncated(self, order: int) -> "Series":
        """Prefix of this series.  Extending (padding) is refused: the
        missing coefficients are unknown, not zero."""
        if order < 0 or order > self.trunc_order:
            raise SeriesError(
                f"cannot truncate order-{self.trunc_order} series to order {order}"
            )
        return Series(self.coeffs[: order + 1])

    # elementwise arithmetic -------------------------------------------------

    def _matched(self, other: "Series", op: str) -> None:
        if self.trunc_order != other.trunc_order:
            raise SeriesError(
                f"{op}: truncation orders differ "
                f"({self.trunc_order} vs {other.trunc_order})"
            )

    def __add__(self, other: "Series") -> "Series":
        if not isinstance(other, Series):
            return NotImplemented
        self._matched(other, "add")
        return Series(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "Series") -> "Series":
        if not isinstance(other, Series):
            return NotImplemented
        self._matched(other, "sub")
        return Series(tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "Series":
        return Series(tuple(-a for a in self.coeffs))

    def __mul__(self, other):
        if isinstance(other, Series):
            self._matched(other, "mul")
            a, b = self.coeffs, other.coeffs
            return Series(
                tuple(
                    sum(a[l] * b[k - l] for l in range(k + 1))
                    for k in range(len(a))
                )
            )
        if isinstance(other, (int, float)):
            return Series(tuple(float(other) * c for c in self.coeffs))
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return self.__mul__(other)
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, Series):
            self._matched(other, "div")
            return self * compose_elementary("reciprocal", other)
        if isinstance(other, (int, float)):
            if other == 0:
                raise SeriesDomainError("division of a series by scalar zero")
            return Series(tuple(c / float(other) for c in self.coeffs))
        return NotImplemented

    # argument transforms ----------------------------------------------------

    def scale_arg(self, q: float) -> "Series":
        """Coefficients of u(q*t): index k is scaled by q**k.

        q must lie in (0, 1]; proportional delays contract the argument,
        and q = 1 is the identity.
        """
        if not 0.0 < q <= 1.0:
            raise SeriesError(f"argument scale must be in (0, 1], got {q!r}")
        out = []
        qk = 1.0
        for c in self.coeffs:
            out.append(qk * c)
            qk *= q
        return Series(tuple(out))

    def differentiate(self, m: int = 1) -> "Series":
        """m-th derivative: index k becomes (k+m)!/k! * coeffs[k+m].

        The truncation order drops by m; a padded tail would silently
        claim unknown coefficients are zero.
        """
        if m < 0:
            raise SeriesError(f"derivative order must be nonnegative, got {m}")
        if m > self.trunc_order:
            raise SeriesError(
                f"cannot take derivative of order {m} of an order-"
                f"{self.trunc_order} series"
            )
        return Series(
            tuple(
                math.perm(k + m, m) * self.coeffs[k + m]
                for k in range(self.trunc_order - m + 1)
            )
        )

    def evaluate(self, t: float) -> float:
        """Horner evaluation of the truncated polynomial."""
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * t + c
        return acc


def monomial(degree: int, order: int) -> Series:
    """The series of t**degree, all zeros when degree exceeds the order."""
    if degree < 0:
        raise SeriesError(f"monomial degree must be nonnegative, got {degree}")
    if order < 0:
        raise SeriesError(f"truncation order must be nonnegative, got {order}")
    coeffs = [0.0] * (order + 1)
    if degree <= order:
        coeffs[degree] = 1.0
    return Series(tuple(coeffs))


def exp_linear(rate: float, order: int) -> Series:
    """The series of exp(rate * t): coefficient k is rate**k / k!."""
    if order < 0:
        raise SeriesError(f"truncation order must be nonnegative, got {order}")
    return Series(tuple(rate**k / math.factorial(k) for k in range(order + 1)))


def _int_power(u: Series, m: int) -> Series:
    """u**m for integer m >= 0 by binary exponentiation (no domain limits)."""
    result = Series.constant(1.0, u.trunc_order)
    base = u
    while m > 0:
        if m & 1:
            result = result * base
        m >>= 1
        if m:
            base = base * base
    return result


def compose_elementary(tag: str, u: Series, exponent: float | None = None) -> Series:
    """Coefficients of f(u(t)) for an elementary function f.

    Supported tags: ``exp``, ``ln``, ``sin``, ``cos``, ``reciprocal`` and
    ``pow`` (which takes ``exponent``).  Each case uses the classical
    first-order recurrence (w' = u'*w for exp, u*w' = rho*u'*w for powers,
    the coupled pair for sin/cos), so result[k] depends on u[0..k] only.

    Integer exponents are expanded by repeated multiplication and place no
    restriction on the constant term; fractional exponents and ``ln``
    require u[0] > 0, ``reciprocal`` requires u[0] != 0.
    """
    c = u.coeffs
    n = u.trunc_order
    if tag == "pow":
        if exponent is None:
            raise SeriesError("pow requires an exponent")
        rho = float(exponent)
        if rho.is_integer():
            m = int(rho)
            if m >= 0:
                return _int_power(u, m)
            if c[0] == 0.0:
                raise SeriesDomainError(
                    f"pow({rho:g}) requires a nonzero constant term, got 0"
                )
            return compose_elementary("reciprocal", _int_power(u, -m))
        if c[0] <= 0.0:
            raise SeriesDomainError(
                f"pow({rho:g}) requires a positive constant term, got {c[0]!r}"
            )
        w = [0.0] * (n + 1)
        w[0] = c[0] ** rho
        for k in range(1, n + 1):
            acc = 0.0
            for j in range(1, k + 1):
                acc += ((rho + 1.0) * j - k) * c[j] * w[k - j]
            w[k] = acc / (k * c[0])
        return Series(tuple(w))

    if exponent is not None:
        raise SeriesError(f"{tag} takes no exponent")

    if tag == "exp":
        w = [0.0] * (n + 1)
        w[0] = math.exp(c[0])
        for k in range(1, n + 1):
            acc = 0.0
            for j in range(1, k + 1):
                acc += j * c[j] * w[k - j]
            w[k] = acc / k
        return Series(tuple(w))

    if tag == "ln":
        if c[0] <= 0.0:
            raise SeriesDomainError(
                f"ln requires a positive constant term, got {c[0]!r}"
            )
        w = [0.0] * (n + 1)
        w[0] = math.log(c[0])
        for k in range(1, n + 1):
            acc = 0.0
            for j in range(1, k):
                acc += j * w[j] * c[k - j]
            w[k] = (c[k] - acc / k) / c[0]
        return Series(tuple(w))

    if tag in ("sin", "cos"):
        s = [0.0] * (n + 1)
        co = [0.0] * (n + 1)
        s[0] = math.sin(c[0])
        co[0] = math.cos(c[0])
        for k in range(1, n + 1):
            acc_s = 0.0
            acc_c = 0.0
            for j in range(1, k + 1):
                acc_s += j * c[j] * co[k - j]
                acc_c += j * c[j] * s[k - j]
            s[k] = acc_s / k
            co[k] = -acc_c / k
        return Series(tuple(s if tag == "sin" else co))

    if tag == "reciprocal":
        if c[0] == 0.0:
            raise SeriesDomainError(
                "reciprocal requires a nonzero constant term, got 0"
            )
        w = [0.0] * (n + 1)
        w[0] = 1.0 / c[0]
        for k in range(1, n + 1):
            acc = 0.0
            for j in range(1, k + 1):
                acc += c[j] * w[k - j]
            w[k] = -acc / c[0]
        return Series(tuple(w))

    raise SeriesError(f"unknown elementary function tag {tag!r}")


def compose_polynomial(outer: Iterable[float], inner: Series) -> Series:
    """Series of P(inner(t)) for a polynomial P given by its coefficients.

    ``inner`` must have a zero constant term; the composition is then exact
    through the truncation order.  Powers of ``inner`` are accumulated
    bottom-up (increasing degree) so that low-index output coefficients do
    not depend on the truncation order, which keeps solver output prefixes
    bit-identical across different truncation orders.
    """
    if inner.coeffs[0] != 0.0:
        raise SeriesError(
            "polynomial composition requires a zero constant term in the "
            f"inner series, got {inner.coeffs[0]!r}"
        )
    order = inner.trunc_order
    out = [0.0] * (order + 1)
    power = Series.constant(1.0, order)
    for k, coeff in enumerate(outer):
        if k > order:
            break
        if k > 0:
            power = power * inner
        for i, p in enumerate(power.coeffs):
            out[i] += coeff * p
    return Series(tuple(out))
