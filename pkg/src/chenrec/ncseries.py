"""Truncated power series in non-commuting letters with complex coefficients.

A series lives in C<<A_1,...,A_n>> truncated at a fixed word length N.
Words are tuples of letter indices in 1..n; the empty tuple is the unit
word.  Storage is sparse (missing word = coefficient 0), so the algebra
itself is exact: all numerical error enters through the coefficients.
"""

from __future__ import annotations

import math
from itertools import product as _iterproduct
from typing import Iterable, Iterator, Mapping

Word = tuple[int, ...]

EMPTY_WORD: Word = ()


def check_word(word: Word, alphabet_size: int, truncation: int) -> None:
    if len(word) > truncation:
        raise ValueError(f"word {word} longer than truncation {truncation}")
    for letter in word:
        if not 1 <= letter <= alphabet_size:
            raise ValueError(
                f"letter {letter} outside alphabet 1..{alphabet_size}"
            )


def all_words(alphabet_size: int, max_len: int) -> Iterator[Word]:
    """Yield every word of length 0..max_len, shortest first."""
    for length in range(max_len + 1):
        for word in _iterproduct(range(1, alphabet_size + 1), repeat=length):
            yield word


class NCSeries:
    """Sparse truncated series: dict word -> complex coefficient.

    Instances are immutable by convention; every operation returns a new
    series.  Alphabet size and truncation degree must agree for binary
    operations.
    """

    __slots__ = ("alphabet_size", "truncation", "_coeffs")

    def __init__(
        self,
        alphabet_size: int,
        truncation: int,
        coeffs: Mapping[Word, complex] | None = None,
    ):
        if alphabet_size < 1:
            raise ValueError("alphabet_size must be >= 1")
        if truncation < 0:
            raise ValueError("truncation must be >= 0")
        self.alphabet_size = alphabet_size
        self.truncation = truncation
        data: dict[Word, complex] = {}
        if coeffs:
            for word, value in coeffs.items():
                word = tuple(word)
                check_word(word, alphabet_size, truncation)
                value = complex(value)
                if value != 0:
                    data[word] = value
        self._coeffs = data

    # -- constructors -------------------------------------------------

    @classmethod
    def unit(cls, alphabet_size: int, truncation: int) -> "NCSeries":
        return cls(alphabet_size, truncation, {EMPTY_WORD: 1.0})

    @classmethod
    def zero(cls, alphabet_size: int, truncation: int) -> "NCSeries":
        return cls(alphabet_size, truncation)

    @classmethod
    def letter(
        cls, index: int, alphabet_size: int, truncation: int, coeff: complex = 1.0
    ) -> "NCSeries":
        return cls(alphabet_size, truncation, {(index,): coeff})

    # -- basic access -------------------------------------------------

    def coeff(self, word: Iterable[int]) -> complex:
        return self._coeffs.get(tuple(word), 0.0 + 0.0j)

    def items(self) -> Iterator[tuple[Word, complex]]:
        return iter(sorted(self._coeffs.items(), key=lambda kv: (len(kv[0]), kv[0])))

    def words(self) -> list[Word]:
        return sorted(self._coeffs, key=lambda w: (len(w), w))

    def degree_slice(self, degree: int) -> dict[Word, complex]:
        return {w: c for w, c in self._coeffs.items() if len(w) == degree}

    @property
    def constant_term(self) -> complex:
        return self.coeff(EMPTY_WORD)

    def max_abs(self, degree: int | None = None) -> float:
        vals = [
            abs(c)
            for w, c in self._coeffs.items()
            if degree is None or len(w) == degree
        ]
        return max(vals, default=0.0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NCSeries):
            return NotImplemented
        return (
            self.alphabet_size == other.alphabet_size
            and self.truncation == other.truncation
            and self._coeffs == other._coeffs
        )

    def __repr__(self) -> str:
        terms = []
        for word, value in list(self.items())[:8]:
            name = "1" if not word else "".join(f"A{i}" for i in word)
            terms.append(f"{value:.6g}*{name}")
        body = " + ".join(terms) if terms else "0"
        if len(self._coeffs) > 8:
            body += " + ..."
        return f"NCSeries(n={self.alphabet_size}, N={self.truncation}: {body})"

    # -- linear structure ----------------------------------------------

    def _check_compatible(self, other: "NCSeries") -> None:
        if (
            self.alphabet_size != other.alphabet_size
            or self.truncation != other.truncation
        ):
            raise ValueError(
                "alphabet/truncation mismatch: "
                f"({self.alphabet_size},{self.truncation}) vs "
                f"({other.alphabet_size},{other.truncation})"
            )

    def add(self, other: "NCSeries") -> "NCSeries":
        self._check_compatible(other)
        data = dict(self._coeffs)
        for word, value in other._coeffs.items():
            data[word] = data.get(word, 0.0) + value
        return NCSeries(self.alphabet_size, self.truncation, data)

    def scale(self, factor: complex) -> "NCSeries":
        return NCSeries(
            self.alphabet_size,
            self.truncation,
            {w: factor * c for w, c in self._coeffs.items()},
        )

    def sub(self, other: "NCSeries") -> "NCSeries":
        return self.add(other.scale(-1.0))

    def __add__(self, other: "NCSeries") -> "NCSeries":
        return self.add(other)

    def __sub__(self, other: "NCSeries") -> "NCSeries":
        return self.sub(other)

    def __mul__(self, other: "NCSeries") -> "NCSeries":
        return concat_mul(self, other)


def concat_mul(a: NCSeries, b: NCSeries) -> NCSeries:
    """Concatenation product: coefficient of w is sum over splittings
    w = uv of a(u) * b(v).  Words longer than the truncation are dropped."""
    a._check_compatible(b)
    data: dict[Word, complex] = {}
    for u, cu in a._coeffs.items():
        for v, cv in b._coeffs.items():
            if len(u) + len(v) > a.truncation:
                continue
            w = u + v
            data[w] = data.get(w, 0.0) + cu * cv
    return NCSeries(a.alphabet_size, a.truncation, data)


def concat_product(factors: Iterable[NCSeries]) -> NCSeries:
    """Left-to-right product of several series; order is significant."""
    result: NCSeries | None = None
    for factor in factors:
        result = factor if result is None else concat_mul(result, factor)
    if result is None:
        raise ValueError("empty product")
    return result


def inverse(a: NCSeries) -> NCSeries:
    """Multiplicative inverse in the truncated algebra.

    Requires constant term exactly 1.  With a = 1 + p (p of positive
    degree), the Neumann series 1 - p + p^2 - ... terminates at the
    truncation degree, so concat_mul(a, inverse(a)) = 1 exactly.
    """
    if a.constant_term != 1:
        raise ValueError(
            f"series not invertible: constant term {a.constant_term} != 1"
        )
    plus = NCSeries(
        a.alphabet_size,
        a.truncation,
        {w: c for w, c in a._coeffs.items() if w != EMPTY_WORD},
    )
    result = NCSeries.unit(a.alphabet_size, a.truncation)
    power = NCSeries.unit(a.alphabet_size, a.truncation)
    sign = 1.0
    for _ in range(a.truncation):
        power = concat_mul(power, plus)
        sign = -sign
        result = result.add(power.scale(sign))
    return result


def reverse_antipode(a: NCSeries) -> NCSeries:
    """Series of the reversed path: coeff(w) -> (-1)^|w| * coeff(reversed w)."""
    data = {w[::-1]: ((-1) ** len(w)) * c for w, c in a._coeffs.items()}
    return NCSeries(a.alphabet_size, a.truncation, data)


def plus_part(a: NCSeries) -> NCSeries:
    """Drop the constant term."""
    return NCSeries(
        a.alphabet_size,
        a.truncation,
        {w: c for w, c in a._coeffs.items() if w != EMPTY_WORD},
    )


def shuffle_words(u: Word, v: Word) -> list[Word]:
    """All shuffles of u and v as a multiset (list) of words.

    A shuffle interleaves the letters of u and v keeping the internal
    order of each; there are binomial(|u|+|v|, |u|) of them, counted
    with multiplicity.
    """
    u = tuple(u)
    v = tuple(v)
    if not u:
        return [v]
    if not v:
        return [u]
    return [
        (u[0],) + rest for rest in shuffle_words(u[1:], v)
    ] + [
        (v[0],) + rest for rest in shuffle_words(u, v[1:])
    ]


def grouplike_defect(a: NCSeries, include_empty: bool = False) -> float:
    """Worst violation of the shuffle relations.

    For each word pair (u, v) with |u| + |v| <= truncation returns the
    max of |a(u) a(v) - sum_{w in shuffles(u,v)} a(w)|.  A generating
    series of iterated integrals of a single path satisfies all shuffle
    relations, so the defect is 0 up to integration error.
    """
    if a.constant_term != 1:
        raise ValueError("grouplike_defect expects constant term 1")
    n, N = a.alphabet_size, a.truncation
    worst = 0.0
    min_len = 0 if include_empty else 1
    for u in all_words(n, N - min_len):
        if len(u) < min_len:
            continue
        for v in all_words(n, N - len(u)):
            if len(v) < min_len:
                continue
            lhs = a.coeff(u) * a.coeff(v)
            rhs = sum(a.coeff(w) for w in shuffle_words(u, v))
            worst = max(worst, abs(lhs - rhs))
    return worst


def exp_letter(
    index: int, alphabet_size: int, truncation: int, coeff: complex
) -> NCSeries:
    """exp(coeff * A_index) truncated: the grouplike series of one letter."""
    data: dict[Word, complex] = {}
    for r in range(truncation + 1):
        data[(index,) * r] = coeff**r / math.factorial(r)
    return NCSeries(alphabet_size, truncation, data)


def exp_linear(
    coeffs: Mapping[int, complex], alphabet_size: int, truncation: int
) -> NCSeries:
    """exp of a degree-1 element sum_i coeffs[i] * A_i in the free algebra.

    Coefficient of the word (i_1..i_r) is prod_j coeffs[i_j] / r!.
    """
    data: dict[Word, complex] = {EMPTY_WORD: 1.0}
    for r in range(1, truncation + 1):
        fact = math.factorial(r)
        for word in _iterproduct(sorted(coeffs), repeat=r):
            value = 1.0 + 0.0j
            for letter in word:
                value *= coeffs[letter]
            if value != 0:
                data[word] = value / fact
    return NCSeries(alphabet_size, truncation, data)
