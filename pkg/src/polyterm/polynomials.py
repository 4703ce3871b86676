"""Dense univariate polynomials with exact and floating backends.

A :class:`Polynomial` is an immutable coefficient vector indexed by power.
Coefficients may be ``int``/``fractions.Fraction`` (exact mode, used for the
no-arbitrage constraint checks, which are identities and must be tested as
exact zeros) or ``float`` (used on the pricing/simulation path).  Arithmetic
preserves the backend of its inputs: exact in, exact out.

Trailing zero coefficients are stripped on construction so that ``degree`` is
well defined.  The zero polynomial has degree ``-inf`` (a sentinel that never
passes ``in_Fk(k)`` for ``k < 0`` but passes for every ``k >= 0``, matching
the convention that the zero polynomial belongs to every F_k).
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence, Union

Coeff = Union[int, float, Fraction]

__all__ = ["Polynomial", "ZERO", "ONE", "X"]


class Polynomial:
    """Real polynomial sum_i coeffs[i] * z**i in canonical (stripped) form."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[Coeff] = ()):
        c = list(coeffs)
        while c and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)

    # -- constructors ----------------------------------------------------

    @classmethod
    def monomial(cls, power: int, coeff: Coeff = 1) -> "Polynomial":
        if power < 0:
            raise ValueError("power must be non-negative")
        return cls([0] * power + [coeff])

    # -- basic queries ---------------------------------------------------

    @property
    def degree(self) -> float:
        """Degree, with -inf for the zero polynomial."""
        return len(self.coeffs) - 1 if self.coeffs else -math.inf

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, i: int):
        """Coefficient of z**i; zero beyond the stored range."""
        if 0 <= i < len(self.coeffs):
            return self.coeffs[i]
        return 0

    def in_Fk(self, k: int) -> bool:
        """Membership in F_k, the space of polynomials of degree <= k."""
        return self.degree <= k

    # -- evaluation and calculus ----------------------------------------

    def __call__(self, z):
        """Horner evaluation at z (scalar, Fraction, or numpy array)."""
        acc = 0 * z
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    def derivative(self, order: int = 1) -> "Polynomial":
        """Formal derivative of the given order (order >= 0)."""
        if order < 0:
            raise ValueError("order must be non-negative")
        c = list(self.coeffs)
        for _ in range(order):
            c = [i * c[i] for i in range(1, len(c))]
        return Polynomial(c)

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other) -> "Polynomial":
        other = _coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return Polynomial(
            [self.coeff(i) + other.coeff(i) for i in range(n)]
        )

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial([-c for c in self.coeffs])

    def __sub__(self, other) -> "Polynomial":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return _coerce(other) + (-self)

    def __mul__(self, other) -> "Polynomial":
        other = _coerce(other)
        if self.is_zero or other.is_zero:
            return Polynomial()
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial(out)

    __rmul__ = __mul__

    def shift(self, powers: int) -> "Polynomial":
        """Multiply by z**powers."""
        if self.is_zero:
            return self
        return Polynomial((0,) * powers + self.coeffs)

    # -- backend conversion ---------------------------------------------

    def as_fraction(self) -> "Polynomial":
        """Exact copy; floats converted via their exact binary value."""
        return Polynomial([Fraction(c) for c in self.coeffs])

    def as_float(self) -> "Polynomial":
        return Polynomial([float(c) for c in self.coeffs])

    # -- dunder plumbing -------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, (Polynomial, int, float, Fraction)):
            return NotImplemented
        return self.coeffs == _coerce(other).coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        return f"Polynomial({list(self.coeffs)!r})"


def _coerce(value) -> Polynomial:
    if isinstance(value, Polynomial):
        return value
    if isinstance(value, (int, float, Fraction)):
        return Polynomial([value])
    raise TypeError(f"cannot interpret {value!r} as a polynomial")


ZERO = Polynomial()
ONE = Polynomial([1])
X = Polynomial([0, 1])
