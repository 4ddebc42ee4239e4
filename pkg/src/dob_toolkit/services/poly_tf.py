"""
Real-coefficient polynomial and rational transfer-function algebra.

Coefficients are stored in ascending powers of s. Nothing here ever cancels
common factors; stability questions are answered through root finding or the
Routh table.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import matrix_balance

from dob_toolkit.domain.errors import (
    ConstantPolynomial,
    ImproperTransferFunction,
    PoleOnAxis,
    ZeroPolynomial,
)

# replaces a zero first-column Routh element
ROUTH_EPSILON = 1e-30
# pole at the origin when |den(0)| <= ORIGIN_TOL * max|den coeff|
ORIGIN_TOL = 1e-9
RESIDUAL_TOL = 1e-8
# |den(jw)| below this (relative to sum |c_i| w^i) counts as a pole on the axis
AXIS_TOL = 1e-12

Number = Union[int, float]


@dataclass(frozen=True)
class Polynomial:
    """Polynomial in s with real coefficients, ascending powers."""
    coeffs: Tuple[float, ...]

    def __post_init__(self):
        values = [float(c) for c in self.coeffs]
        while len(values) > 1 and values[-1] == 0.0:
            values.pop()
        if not values:
            values = [0.0]
        object.__setattr__(self, "coeffs", tuple(values))

    @classmethod
    def constant(cls, value: Number) -> "Polynomial":
        return cls((value,))

    @classmethod
    def s(cls) -> "Polynomial":
        return cls((0.0, 1.0))

    @classmethod
    def from_roots(cls, roots: Iterable[complex], gain: float = 1.0) -> "Polynomial":
        coeffs = np.polynomial.polynomial.polyfromroots(list(roots))
        return cls(tuple(float(gain) * np.real(coeffs)))

    @classmethod
    def from_descending(cls, coeffs: Sequence[float]) -> "Polynomial":
        return cls(tuple(reversed([float(c) for c in coeffs])))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    @property
    def leading(self) -> float:
        return self.coeffs[-1]

    @property
    def scale(self) -> float:
        return max(abs(c) for c in self.coeffs)

    def descending(self) -> np.ndarray:
        return np.array(self.coeffs[::-1], dtype=float)

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial.constant(0.0)
        return Polynomial(tuple(i * c for i, c in enumerate(self.coeffs) if i))

    def __call__(self, s: complex) -> complex:
        return poly_eval(self, s)

    def __add__(self, other: Union["Polynomial", Number]) -> "Polynomial":
        other = _as_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0.0,) * (n - len(self.coeffs))
        b = other.coeffs + (0.0,) * (n - len(other.coeffs))
        return Polynomial(tuple(x + y for x, y in zip(a, b)))

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(tuple(-c for c in self.coeffs))

    def __sub__(self, other: Union["Polynomial", Number]) -> "Polynomial":
        return self + (-_as_poly(other))

    def __rsub__(self, other: Number) -> "Polynomial":
        return _as_poly(other) - self

    def __mul__(self, other: Union["Polynomial", Number]) -> "Polynomial":
        return poly_mul(self, _as_poly(other))

    __rmul__ = __mul__

    def __str__(self) -> str:
        terms = []
        for power, c in enumerate(self.coeffs):
            if c == 0.0 and self.degree:
                continue
            terms.append(f"{c:.9g}" + ("" if power == 0 else "*s" if power == 1 else f"*s^{power}"))
        return " + ".join(terms) if terms else "0"


def _as_poly(value: Union[Polynomial, Number]) -> Polynomial:
    if isinstance(value, Polynomial):
        return value
    return Polynomial.constant(value)


def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    return Polynomial(tuple(np.convolve(a.coeffs, b.coeffs)))


def poly_eval(p: Polynomial, s: complex) -> complex:
    """Horner evaluation."""
    acc = 0.0
    for c in reversed(p.coeffs):
        acc = acc * s + c
    return acc


def _polish(p: Polynomial, dp: Polynomial, root: complex) -> complex:
    value = poly_eval(p, root)
    slope = poly_eval(dp, root)
    if slope == 0:
        return root
    candidate = root - value / slope
    if not (math.isfinite(candidate.real) and math.isfinite(candidate.imag)):
        return root
    if abs(poly_eval(p, candidate)) <= abs(value):
        return candidate
    logging.debug("Newton polish rejected for root %s of %s", root, p)
    return root


def poly_roots(p: Polynomial) -> Tuple[complex, ...]:
    """Roots with multiplicity, from the balanced companion matrix plus one Newton step each.

    Complex roots come out in exact conjugate pairs and the result is sorted by
    (real, imag) so repeated calls are reproducible.
    """
    if p.is_zero:
        raise ZeroPolynomial("cannot take roots of the zero polynomial")
    if p.degree == 0:
        raise ConstantPolynomial("a constant polynomial has no roots")

    n = p.degree
    monic = np.array(p.coeffs[:-1]) / p.leading
    companion = np.zeros((n, n))
    if n > 1:
        companion[1:, :-1] = np.eye(n - 1)
    companion[:, -1] = -monic
    balanced, _ = matrix_balance(companion)
    eigenvalues = np.linalg.eigvals(balanced).astype(complex)

    dp = p.derivative()
    roots = []
    for r in eigenvalues:
        if r.imag == 0.0:
            polished = _polish(p, dp, complex(r.real, 0.0))
            roots.append(complex(polished.real, 0.0))
        elif r.imag > 0.0:
            polished = _polish(p, dp, complex(r))
            if polished.imag <= 0.0:
                polished = complex(r)
            roots.append(polished)
            roots.append(polished.conjugate())
    return tuple(sorted(roots, key=lambda z: (z.real, z.imag)))


def root_residual(p: Polynomial, roots: Sequence[complex]) -> float:
    """Largest scaled residual |p(r)| / (sum|c| * max(1,|r|)^deg) over the roots."""
    total = sum(abs(c) for c in p.coeffs)
    worst = 0.0
    for r in roots:
        worst = max(worst, abs(poly_eval(p, r)) / (total * max(1.0, abs(r)) ** p.degree))
    return worst


class StabilityClass(str, Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"


@dataclass(frozen=True)
class StabilityVerdict:
    stability: StabilityClass
    rhp_count: int
    first_column: Tuple[float, ...]
    degenerate: bool

    @property
    def is_stable(self) -> bool:
        return self.stability == StabilityClass.STABLE


def _routh_repair(table: list, i: int, n: int) -> bool:
    """Fix row i in place (all-zero row or zero pivot). Returns True when degenerate."""
    row = table[i]
    degenerate = False
    if not np.any(row):
        # auxiliary polynomial from the row above, power n - i + 1, differentiated
        power = n - i + 1
        above = table[i - 1]
        for j in range(len(row)):
            row[j] = above[j] * max(power - 2 * j, 0)
        degenerate = True
    if row[0] == 0.0:
        row[0] = ROUTH_EPSILON
        degenerate = True
    return degenerate


def routh_verdict(p: Polynomial) -> StabilityVerdict:
    if p.is_zero:
        raise ZeroPolynomial("Routh table of the zero polynomial")
    if p.degree == 0:
        raise ConstantPolynomial("Routh table needs degree >= 1")

    c = p.descending()
    if c[0] < 0:
        c = -c
    n = p.degree
    width = n // 2 + 2
    row0 = np.zeros(width)
    row1 = np.zeros(width)
    row0[: len(c[0::2])] = c[0::2]
    row1[: len(c[1::2])] = c[1::2]
    table = [row0, row1]
    degenerate = _routh_repair(table, 1, n)

    for i in range(2, n + 1):
        above, pivot_row = table[i - 2], table[i - 1]
        row = np.zeros(width)
        for j in range(width - 1):
            row[j] = (pivot_row[0] * above[j + 1] - above[0] * pivot_row[j + 1]) / pivot_row[0]
        table.append(row)
        degenerate = _routh_repair(table, i, n) or degenerate

    first_column = tuple(float(r[0]) for r in table)
    signs = np.sign(first_column)
    rhp_count = int(np.sum(signs[1:] != signs[:-1]))
    if rhp_count:
        stability = StabilityClass.UNSTABLE
    elif degenerate:
        stability = StabilityClass.MARGINAL
    else:
        stability = StabilityClass.STABLE
    return StabilityVerdict(stability, rhp_count, first_column, degenerate)


@dataclass(frozen=True)
class RationalTF:
    """num(s)/den(s). Improper ratios are rejected unless allow_improper is set."""
    num: Polynomial
    den: Polynomial
    allow_improper: bool = False

    def __post_init__(self):
        if self.den.is_zero:
            raise ZeroPolynomial("transfer function denominator is zero")
        if not self.allow_improper and not self.num.is_zero and self.num.degree > self.den.degree:
            raise ImproperTransferFunction(
                f"numerator degree {self.num.degree} exceeds denominator degree {self.den.degree}"
            )

    @classmethod
    def from_coeffs(cls, num: Sequence[float], den: Sequence[float], **kwargs) -> "RationalTF":
        return cls(Polynomial(tuple(num)), Polynomial(tuple(den)), **kwargs)

    @property
    def relative_degree(self) -> int:
        return self.den.degree - self.num.degree

    def __call__(self, s: complex) -> complex:
        return poly_eval(self.num, s) / poly_eval(self.den, s)

    def __mul__(self, other: Union["RationalTF", Number]) -> "RationalTF":
        if isinstance(other, RationalTF):
            return RationalTF(
                self.num * other.num,
                self.den * other.den,
                allow_improper=self.allow_improper or other.allow_improper,
            )
        return RationalTF(self.num * other, self.den, allow_improper=self.allow_improper)

    __rmul__ = __mul__

    def characteristic(self, gain: float = 1.0) -> Polynomial:
        """den + gain * num: the closed-loop characteristic polynomial of 1 + gain*L."""
        return self.den + self.num * gain

    def closed_loop(self) -> "RationalTF":
        return RationalTF(self.num, self.characteristic(), allow_improper=self.allow_improper)


@dataclass(frozen=True)
class TFProps:
    poles: Tuple[complex, ...]
    zeros: Tuple[complex, ...]
    relative_degree: int
    dc_gain: float
    dc_infinite: bool
    pole_at_origin: bool


def tf_props(tf: RationalTF) -> TFProps:
    poles = poly_roots(tf.den) if tf.den.degree >= 1 else ()
    zeros = poly_roots(tf.num) if tf.num.degree >= 1 else ()
    den0 = tf.den.coeffs[0]
    pole_at_origin = abs(den0) <= ORIGIN_TOL * tf.den.scale
    if pole_at_origin:
        dc_gain = math.inf
    else:
        dc_gain = tf.num.coeffs[0] / den0
    return TFProps(
        poles=poles,
        zeros=zeros,
        relative_degree=tf.relative_degree,
        dc_gain=dc_gain,
        dc_infinite=pole_at_origin,
        pole_at_origin=pole_at_origin,
    )


def tf_freq(tf: RationalTF, omega: float) -> complex:
    s = 1j * omega
    den = poly_eval(tf.den, s)
    w = abs(omega)
    reference = sum(abs(c) * w ** i for i, c in enumerate(tf.den.coeffs))
    if abs(den) <= AXIS_TOL * reference:
        raise PoleOnAxis(omega)
    return poly_eval(tf.num, s) / den


def max_real_part(p: Polynomial) -> float:
    return max(r.real for r in poly_roots(p))


def normalized(p: Polynomial, reference: Optional[float] = None) -> Polynomial:
    """Scale p so its leading coefficient (or `reference`) is one."""
    divisor = p.leading if reference is None else reference
    return Polynomial(tuple(c / divisor for c in p.coeffs))
