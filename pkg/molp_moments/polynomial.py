"""Sparse multivariate polynomials with exact rational coefficients."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union

from molp_moments.errors import NonAffineReplacementError, UnassignedVariableError

# A monomial is a sorted tuple of (variable, exponent) pairs, exponents > 0.
Monomial = tuple[tuple[str, int], ...]
Scalar = Union[int, Fraction]

ONE: Monomial = ()


def monomial(**powers: int) -> Monomial:
    return tuple(sorted((v, e) for v, e in powers.items() if e))


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    merged = dict(a)
    for var, exp in b:
        merged[var] = merged.get(var, 0) + exp
    return tuple(sorted(merged.items()))


def mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


class Polynomial:
    """Immutable sparse polynomial: Monomial -> nonzero Fraction."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Optional[Mapping[Monomial, Scalar]] = None):
        clean: dict[Monomial, Fraction] = {}
        for mono, coef in (terms or {}).items():
            coef = Fraction(coef)
            if coef:
                clean[tuple(sorted((v, e) for v, e in mono if e))] = coef
        self._terms = clean

    @classmethod
    def constant(cls, value: Scalar) -> "Polynomial":
        return cls({ONE: value})

    @classmethod
    def variable(cls, name: str) -> "Polynomial":
        return cls({((name, 1),): 1})

    @classmethod
    def linear(cls, coeffs: Mapping[str, Scalar], constant: Scalar = 0) -> "Polynomial":
        terms: dict[Monomial, Scalar] = {((v, 1),): c for v, c in coeffs.items()}
        terms[ONE] = constant
        return cls(terms)

    # -- inspection --------------------------------------------------------

    @property
    def terms(self) -> dict[Monomial, Fraction]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        return max((mono_degree(m) for m in self._terms), default=0)

    def variables(self) -> set[str]:
        return {v for m in self._terms for v, _ in m}

    def coefficient(self, mono: Monomial) -> Fraction:
        return self._terms.get(mono, Fraction(0))

    def max_abs_coefficient(self) -> Fraction:
        return max((abs(c) for c in self._terms.values()), default=Fraction(0))

    # -- arithmetic --------------------------------------------------------

    @staticmethod
    def _lift(other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        return Polynomial.constant(other)

    def __add__(self, other) -> "Polynomial":
        other = self._lift(other)
        out = dict(self._terms)
        for mono, coef in other._terms.items():
            out[mono] = out.get(mono, Fraction(0)) + coef
        return Polynomial(out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial({m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "Polynomial":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "Polynomial":
        return self._lift(other) - self

    def __mul__(self, other) -> "Polynomial":
        other = self._lift(other)
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                mono = mono_mul(m1, m2)
                out[mono] = out.get(mono, Fraction(0)) + c1 * c2
        return Polynomial(out)

    __rmul__ = __mul__

    def __pow__(self, exp: int) -> "Polynomial":
        result = Polynomial.constant(1)
        for _ in range(exp):
            result = result * self
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        return self._terms == other._terms

    def __hash__(self) -> int:
        return hash(frozenset(self._terms.items()))

    # -- evaluation and substitution --------------------------------------

    def evaluate(self, point: Mapping[str, Scalar]) -> Fraction:
        total = Fraction(0)
        for mono, coef in self._terms.items():
            value = coef
            for var, exp in mono:
                if var not in point:
                    raise UnassignedVariableError(f"variable {var} has no value")
                value *= Fraction(point[var]) ** exp
            total += value
        return total

    def substitute(self, var: str, replacement: "Polynomial") -> "Polynomial":
        if var not in self.variables():
            return self
        powers = {0: Polynomial.constant(1)}
        out = Polynomial()
        for mono, coef in self._terms.items():
            exp = dict(mono).get(var, 0)
            if exp not in powers:
                powers[exp] = replacement ** exp
            rest = Polynomial({tuple((v, e) for v, e in mono if v != var): coef})
            out = out + rest * powers[exp]
        return out

    def scaled_variables(self, scales: Mapping[str, Scalar]) -> "Polynomial":
        """Rewrite in v' with v = scale * v'."""
        out = {}
        for mono, coef in self._terms.items():
            factor = Fraction(1)
            for var, exp in mono:
                factor *= Fraction(scales.get(var, 1)) ** exp
            out[mono] = coef * factor
        return Polynomial(out)

    # -- text ----------------------------------------------------------------

    def to_text(self, order: Optional[Iterable[str]] = None) -> str:
        if not self._terms:
            return "0"
        rank = {v: i for i, v in enumerate(order)} if order is not None else {}

        def key(mono: Monomial):
            return (-mono_degree(mono), [(rank.get(v, len(rank)), v, -e) for v, e in mono])

        parts = []
        for mono in sorted(self._terms, key=key):
            coef = self._terms[mono]
            body = "*".join(v if e == 1 else f"{v}^{e}" for v, e in mono)
            mag = abs(coef)
            if not body:
                text = str(mag)
            elif mag == 1:
                text = body
            else:
                text = f"{mag}*{body}"
            sign = "-" if coef < 0 else "+"
            parts.append((sign, text))
        first_sign, first_text = parts[0]
        out = ("-" if first_sign == "-" else "") + first_text
        for sign, text in parts[1:]:
            out += f" {sign} {text}"
        return out

    def __repr__(self) -> str:
        return f"Polynomial({self.to_text()})"


def evaluate(p: Polynomial, point: Mapping[str, Scalar]) -> Fraction:
    return p.evaluate(point)


def grid_polynomial(var: str, K: int) -> Polynomial:
    """prod_{l=0..K} (v - l): vanishes exactly on {0, ..., K}."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    v = Polynomial.variable(var)
    result = Polynomial.constant(1)
    for ell in range(K + 1):
        result = result * (v - ell)
    return result


def check_affine(var: str, replacement: Polynomial) -> None:
    if replacement.degree > 1:
        raise NonAffineReplacementError(f"replacement for {var} has degree {replacement.degree}")
    if var in replacement.variables():
        raise NonAffineReplacementError(f"replacement for {var} contains {var}")
