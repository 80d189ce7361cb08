"""Iterated integrals of modular 1-forms along vertical paths.

Letters are either a q-expansion form f(z) dz with f = sum a_n q^n,
q = exp(2*pi*i*z), or the coordinate form dz.  Along a vertical segment
every partial iterated integral is a finite sum of terms
c * exp(2*pi*i*n*z) * z^k, and this class of functions is closed under
multiplication by letters and under antidifferentiation, so word
coefficients are computed exactly up to the q-series cutoff.

Regularization at the cusp i*infinity extracts the constant part of the
antiderivative there: pure powers of z (which only a_0 terms produce)
are the divergent directions and are discarded, leaving the finite
value with the constant-term contribution removed.  The residual
structure at the cusp is the exponential of the linear element
sum_i a_0(i) * A_i (the horocycle loop integral of each letter).

L-values of a cusp form arise as moments: with Lambda(s) the completed
L-function,

    (n+1)! * int_{i inf}^{0} f dz o dz^(o n) = (n+1) * (-i)^(n+1) * Lambda(f, n+1),

which the independent incomplete-gamma oracle cross-checks.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaincc, gamma as gamma_fn

from .ncseries import NCSeries, Word, all_words, concat_product, exp_linear

INF = float("inf")
TWO_PI = 2.0 * math.pi


class ModularError(ValueError):
    pass


class DivergentWordError(ModularError):
    pass


# ---------------------------------------------------------------------------
# q-expansions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QExpansion:
    """Fourier coefficients a_0..a_M of a weight-k form."""

    weight: int
    coefficients: tuple[complex, ...]
    label: str = ""

    def __post_init__(self):
        if self.weight % 2 != 0 or self.weight < 0:
            raise ModularError("weight must be a nonnegative even integer")
        if len(self.coefficients) < 2:
            raise ModularError("need coefficients at least through a_1")

    @property
    def cutoff(self) -> int:
        return len(self.coefficients) - 1

    @property
    def a0(self) -> complex:
        return self.coefficients[0]

    @property
    def is_cusp(self) -> bool:
        return self.a0 == 0

    def coefficient(self, n: int) -> complex:
        return self.coefficients[n] if n <= self.cutoff else 0.0

    def tail_bound(self, y: float) -> float:
        """|a_M| e^(-2 pi M y): size of the first dropped term at height y."""
        return abs(self.coefficients[-1]) * math.exp(-TWO_PI * self.cutoff * y)

    def check_cutoff(self, y_min: float, tol: float = 1e-16) -> None:
        if self.tail_bound(y_min) > tol:
            raise ModularError(
                f"cutoff {self.cutoff} insufficient at height {y_min}: "
                f"tail {self.tail_bound(y_min):.2e} > {tol:g}"
            )

    def scaled(self, factor: complex) -> "QExpansion":
        return QExpansion(
            self.weight,
            tuple(factor * c for c in self.coefficients),
            label=f"{factor}*{self.label}",
        )


def _poly_mul_trunc(a: list[int], b: list[int], m: int) -> list[int]:
    out = [0] * (m + 1)
    for i, ai in enumerate(a):
        if ai == 0 or i > m:
            continue
        for j, bj in enumerate(b):
            if i + j > m:
                break
            out[i + j] += ai * bj
    return out


def _euler_product(m: int) -> list[int]:
    """prod_{n>=1} (1 - q^n) mod q^(m+1) by the pentagonal number series."""
    out = [0] * (m + 1)
    out[0] = 1
    k = 1
    while True:
        g1 = k * (3 * k - 1) // 2
        g2 = k * (3 * k + 1) // 2
        if g1 > m and g2 > m:
            break
        sign = -1 if k % 2 == 1 else 1
        if g1 <= m:
            out[g1] += sign
        if g2 <= m:
            out[g2] += sign
        k += 1
    return out


def delta_qexp(cutoff: int) -> QExpansion:
    """The weight-12 cusp form q * prod (1-q^n)^24, normalized tau(1)=1.

    Exact integer coefficients via the pentagonal-number expansion of
    the Euler product and repeated squaring.
    """
    if cutoff < 2:
        raise ModularError("cutoff must be at least 2")
    m = cutoff - 1  # one power of q is factored out in front
    p = _euler_product(m)
    p2 = _poly_mul_trunc(p, p, m)
    p4 = _poly_mul_trunc(p2, p2, m)
    p8 = _poly_mul_trunc(p4, p4, m)
    p16 = _poly_mul_trunc(p8, p8, m)
    p24 = _poly_mul_trunc(p16, p8, m)
    coeffs = [0] + p24  # shift by the leading q
    return QExpansion(12, tuple(complex(c) for c in coeffs), label="delta")


def _divisor_power_sums(power: int, m: int) -> list[int]:
    sums = [0] * (m + 1)
    for d in range(1, m + 1):
        dp = d**power
        for n in range(d, m + 1, d):
            sums[n] += dp
    return sums


_EISENSTEIN_FACTOR = {4: 240, 6: -504, 8: 480, 10: -264, 14: -24}


def eisenstein_qexp(weight: int, cutoff: int) -> QExpansion:
    """Level-one Eisenstein series normalized to a_0 = 1."""
    if weight not in _EISENSTEIN_FACTOR:
        raise ModularError(f"unsupported Eisenstein weight {weight}")
    sig = _divisor_power_sums(weight - 1, cutoff)
    factor = _EISENSTEIN_FACTOR[weight]
    coeffs = [1.0] + [complex(factor * sig[n]) for n in range(1, cutoff + 1)]
    return QExpansion(weight, tuple(coeffs), label=f"E{weight}")


def save_qexp(q: QExpansion, path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"weight {q.weight} cutoff {q.cutoff}\n")
        for n, c in enumerate(q.coefficients):
            if c.imag == 0:
                fh.write(f"{n} {c.real!r}\n")
            else:
                fh.write(f"{n} {c.real!r}+{c.imag!r}j\n")


def load_qexp(path: str) -> QExpansion:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "weight" or header[2] != "cutoff":
            raise ModularError(f"bad q-expansion header in {path}")
        weight, cutoff = int(header[1]), int(header[3])
        coeffs = [0.0 + 0.0j] * (cutoff + 1)
        for line in fh:
            if not line.strip():
                continue
            n_str, value = line.split(maxsplit=1)
            coeffs[int(n_str)] = complex(value.strip())
    return QExpansion(weight, tuple(coeffs))


# ---------------------------------------------------------------------------
# letters and paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModularLetter:
    """Either a q-expansion 1-form f dz or the plain coordinate form dz."""

    qexp: QExpansion | None = None  # None = the dz letter

    @property
    def is_dz(self) -> bool:
        return self.qexp is None

    @property
    def a0(self) -> complex:
        return 1.0 + 0.0j if self.is_dz else self.qexp.a0

    def singular_at_upper_cusp(self) -> bool:
        """Does the plain integral toward i*infinity diverge?"""
        return self.a0 != 0

    def singular_at_zero_cusp(self) -> bool:
        """The pullback under z -> -1/z carries w^(weight-2) a_0 terms,
        divergent for every modular weight; the dz letter pulls back to
        w^(-2) dw, which is integrable toward the cusp."""
        return (not self.is_dz) and self.a0 != 0

    def terms(self) -> list[tuple[int, complex]]:
        if self.is_dz:
            return [(0, 1.0 + 0.0j)]
        return [
            (n, c)
            for n, c in enumerate(self.qexp.coefficients)
            if c != 0
        ]


def dz_letter() -> ModularLetter:
    return ModularLetter(None)


def form_letter(q: QExpansion) -> ModularLetter:
    return ModularLetter(q)


@dataclass(frozen=True)
class VerticalPath:
    """Directed vertical segment i*y0 -> i*y1; either endpoint may be
    infinite (integration anchored at the cusp), but not both."""

    y0: float
    y1: float

    def __post_init__(self):
        if self.y0 <= 0 or self.y1 <= 0:
            raise ModularError("endpoints must have positive height")
        if math.isinf(self.y0) and math.isinf(self.y1):
            raise ModularError("both endpoints at the cusp")

    @property
    def min_height(self) -> float:
        return min(self.y0, self.y1)

    @property
    def touches_cusp(self) -> bool:
        return math.isinf(self.y0) or math.isinf(self.y1)


# ---------------------------------------------------------------------------
# the exponential-polynomial engine
# ---------------------------------------------------------------------------


class _ExpPoly:
    """Finite sum of c * exp(2*pi*i*n*z) * z^k with n >= 0, k >= 0."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[tuple[int, int], complex] | None = None):
        self.terms = terms or {}

    @classmethod
    def one(cls) -> "_ExpPoly":
        return cls({(0, 0): 1.0 + 0.0j})

    def times_letter(
        self, letter: Sequence[tuple[int, complex]], freq_cap: int
    ) -> "_ExpPoly":
        out: dict[tuple[int, int], complex] = {}
        for (n, k), c in self.terms.items():
            for m, a in letter:
                freq = n + m
                if freq > freq_cap:
                    continue
                key = (freq, k)
                out[key] = out.get(key, 0.0) + c * a
        return _ExpPoly(out)

    def antiderivative(self) -> "_ExpPoly":
        out: dict[tuple[int, int], complex] = {}

        def add(key, val):
            out[key] = out.get(key, 0.0) + val

        for (n, k), c in self.terms.items():
            if n == 0:
                add((0, k + 1), c / (k + 1))
                continue
            a = TWO_PI * 1j * n
            # int e^{az} z^k dz = e^{az} sum_j b_j z^j, built downward
            b = c / a
            add((n, k), b)
            for j in range(k, 0, -1):
                b = -j * b / a
                add((n, j - 1), b)
        return _ExpPoly(out)

    def eval_at_height(self, y: float) -> complex:
        z = 1j * y
        total = 0.0 + 0.0j
        for (n, k), c in self.terms.items():
            total += c * cmath.exp(TWO_PI * 1j * n * z) * z**k
        return total

    def constant_at_infinity(self) -> tuple[complex, bool]:
        """Limit toward i*infinity with the pure-power divergences
        discarded; the flag reports whether any were present."""
        const = self.terms.get((0, 0), 0.0 + 0.0j)
        divergent = any(
            n == 0 and k >= 1 and abs(c) > 1e-300
            for (n, k), c in self.terms.items()
        )
        return const, divergent

    def shift_constant(self, c: complex) -> "_ExpPoly":
        terms = dict(self.terms)
        terms[(0, 0)] = terms.get((0, 0), 0.0) - c
        return _ExpPoly(terms)


@dataclass
class _WordValue:
    value: complex
    regularized: bool  # a divergent direction was discarded somewhere


def _segment_values(
    letters: Sequence[ModularLetter],
    words: Sequence[Word],
    y_start: float,
    y_end: float,
    freq_cap: int,
) -> dict[Word, _WordValue]:
    """Iterated-integral values for a prefix-closed word list along the
    segment i*y_start -> i*y_end (either endpoint may be infinite only
    at y_end; start at infinity is handled by anchoring constants
    there)."""
    start_at_inf = math.isinf(y_start)
    end_at_inf = math.isinf(y_end)
    states: dict[Word, tuple[_ExpPoly, bool]] = {(): (_ExpPoly.one(), False)}
    values: dict[Word, _WordValue] = {(): _WordValue(1.0 + 0.0j, False)}
    for w in words:
        if not w:
            continue
        parent = states.get(w[:-1])
        if parent is None:
            raise ValueError(f"word list not prefix closed at {w}")
        parent_poly, parent_reg = parent
        letter = letters[w[-1] - 1]
        anti = parent_poly.times_letter(
            letter.terms(), freq_cap
        ).antiderivative()
        if start_at_inf:
            const, diverged = anti.constant_at_infinity()
        else:
            const, diverged = anti.eval_at_height(y_start), False
        poly = anti.shift_constant(const)
        reg = parent_reg or diverged
        states[w] = (poly, reg)
        if end_at_inf:
            val, div_end = poly.constant_at_infinity()
            reg_here = reg or div_end
        else:
            val, reg_here = poly.eval_at_height(y_end), reg
        values[w] = _WordValue(val, reg_here)
    return values


def _freq_cap(letters: Sequence[ModularLetter]) -> int:
    cut = [l.qexp.cutoff for l in letters if not l.is_dz]
    return max(cut) if cut else 1


def vertical_series(
    letters: Sequence[ModularLetter],
    path: VerticalPath,
    truncation: int,
    words: Sequence[Word] | None = None,
    tol: float = 1e-12,
    strict: bool = True,
) -> tuple[NCSeries, set[Word]]:
    """Generating series along a vertical path.

    Returns the series and the set of words whose value required
    discarding a divergent direction at i*infinity; with strict=True
    such words raise instead.
    """
    for letter in letters:
        if not letter.is_dz:
            letter.qexp.check_cutoff(path.min_height, tol=tol * 1e-3)
    n = len(letters)
    word_list = list(words) if words is not None else list(
        all_words(n, truncation)
    )
    vals = _segment_values(
        letters, word_list, path.y0, path.y1, _freq_cap(letters)
    )
    regularized = {w for w, v in vals.items() if v.regularized}
    if strict and regularized:
        raise DivergentWordError(
            f"divergent words toward the cusp: {sorted(regularized)[:4]} ..."
        )
    series = NCSeries(
        n, truncation, {w: v.value for w, v in vals.items()}
    )
    return series, regularized


def vertical_transport(
    f: QExpansion,
    path: VerticalPath,
    word: Iterable[str],
    tol: float = 1e-12,
) -> complex:
    """Single iterated integral of a word over the letters {f dz, dz};
    word tokens are "f" and "dz"."""
    tokens = list(word)
    letters = (form_letter(f), dz_letter())
    index = {"f": 1, "dz": 2}
    try:
        letter_word = tuple(index[t] for t in tokens)
    except KeyError as exc:
        raise ModularError(f"unknown letter token {exc}") from exc
    prefixes = [letter_word[:k] for k in range(len(letter_word) + 1)]
    series, _ = vertical_series(
        letters, path, len(tokens), words=prefixes, tol=tol, strict=True
    )
    return series.coeff(letter_word)


# ---------------------------------------------------------------------------
# L-values
# ---------------------------------------------------------------------------


def _suffix_closure(word: Word) -> list[Word]:
    """All prefixes of all suffixes (prefix-closed list for splits)."""
    out: set[Word] = {()}
    for start in range(len(word) + 1):
        suffix = word[start:]
        for k in range(len(suffix) + 1):
            out.add(suffix[:k])
    return sorted(out, key=lambda w: (len(w), w))


def _lvalue_word(packed: Sequence[int]) -> Word:
    """(n_1, .., n_k) -> the word f dz^(n_1) f dz^(n_2) .. as letters."""
    word: list[int] = []
    for n in packed:
        word.append(1)
        word.extend([2] * n)
    return tuple(word)


def iterated_to_zero(
    f: QExpansion,
    word_ns: Sequence[int],
    tol: float = 1e-12,
    split_height: float = 1.0,
    floor_height: float = 0.1,
) -> complex:
    """Iterated integral of f dz o dz^(n_1) o f dz o ... from i*infinity
    down to 0.

    The path splits at i*split_height; the final dive below
    i*floor_height contributes only through pure-dz words (exactly
    integrable), because every f-containing piece is bounded by the
    sup of |f| there, which the weight-k transformation law makes
    smaller than e^(-2 pi / floor) / floor^k.
    """
    if not f.is_cusp:
        raise ModularError("L-value route requires a cusp form")
    word = _lvalue_word(word_ns)
    truncation = len(word)
    letters = (form_letter(f), dz_letter())
    needed = _suffix_closure(word)
    upper, reg_upper = vertical_series(
        letters,
        VerticalPath(INF, split_height),
        truncation,
        words=needed,
        tol=tol,
        strict=False,
    )
    # prefixes of an L-word start with the cusp-form letter, so none of
    # them needs the cusp regularization
    for u in _prefixes(word):
        if u and u in reg_upper:
            raise DivergentWordError(f"unexpected divergent prefix {u}")
    lower, _ = vertical_series(
        letters,
        VerticalPath(split_height, floor_height),
        truncation,
        words=needed,
        tol=tol,
        strict=True,
    )
    # exact pure-dz factor for the last stretch i*floor -> 0; words with
    # another cusp-form letter below the floor are bounded by
    # sup |f| <= e^(-2 pi / floor) / floor^weight and dropped
    dive = NCSeries(
        2,
        truncation,
        {
            (2,) * m: (-1j * floor_height) ** m / math.factorial(m)
            for m in range(truncation + 1)
        },
    )
    total = concat_product([upper, lower, dive])
    return total.coeff(word)


def _prefixes(word: Word) -> list[Word]:
    return [word[:k] for k in range(len(word) + 1)]


def lvalue_iterated(
    f: QExpansion, n: int, tol: float = 1e-10
) -> complex:
    """(n+1)! times the regularized iterated integral of
    f dz o dz^(o n) from i*infinity to 0."""
    if n < 1:
        raise ModularError("n must be a positive integer")
    value = iterated_to_zero(f, [n], tol=tol)
    return math.factorial(n + 1) * value


def lvalue_multiple(
    f: QExpansion, ns: Sequence[int], tol: float = 1e-10
) -> complex:
    """prod_j (n_j + 1)! times the iterated integral with k cusp-form
    letters interleaved by dz blocks."""
    if not ns or any(n < 1 for n in ns):
        raise ModularError("orders must be positive integers")
    value = iterated_to_zero(f, list(ns), tol=tol)
    scale = 1
    for n in ns:
        scale *= math.factorial(n + 1)
    return scale * value


def lvalue_oracle(
    f: QExpansion,
    s: float,
    tol: float = 1e-10,
    split: float = 1.25,
) -> complex:
    """Completed L-value Lambda(f, s) = int_0^inf f(iy) y^(s-1) dy by
    incomplete-gamma summation of both halves of the split integral,
    using the weight-k transformation law for the lower half:

        Lambda(s) = sum_n a_n (2 pi n)^(-s)   Gamma(s,   2 pi n y0)
                  + i^k sum_n a_n (2 pi n)^(s-k) Gamma(k-s, 2 pi n / y0).

    The split-height independence |Lambda_{y0}(s) - i^k Lambda_{y0}(k-s)|
    is the functional-equation self-check; it is reported and enforced
    against tol.
    """
    if not f.is_cusp:
        raise ModularError("oracle defined for cusp forms")
    k = f.weight
    if not 0 < s < k:
        raise ModularError(f"s must lie in (0, {k})")
    root_sign = 1j**k

    def half(sigma: float, y0: float) -> complex:
        total = 0.0 + 0.0j
        for n in range(1, f.cutoff + 1):
            a = f.coefficient(n)
            if a == 0:
                continue
            x = TWO_PI * n * y0
            total += a * (TWO_PI * n) ** (-sigma) * gammaincc(sigma, x) * gamma_fn(sigma)
        return total

    def completed(sigma: float, y0: float) -> complex:
        return half(sigma, y0) + root_sign * half(k - sigma, 1.0 / y0)

    value = completed(s, split)
    mirrored = root_sign * completed(k - s, split)
    self_check = abs(value - mirrored)
    if self_check > tol:
        raise ModularError(
            f"functional-equation self-check failed: {self_check:.3e}"
        )
    return value


def lvalue_moment_reference(f: QExpansion, n: int, tol: float = 1e-10) -> complex:
    """The value the iterated route must reproduce, from the oracle:
    (n+1) * (-i)^(n+1) * Lambda(f, n+1)."""
    lam = lvalue_oracle(f, float(n + 1), tol=tol)
    return (n + 1) * (-1j) ** (n + 1) * lam


# ---------------------------------------------------------------------------
# regularized symbols at the cusp
# ---------------------------------------------------------------------------


def jsymbol_reg(
    letters: Sequence[ModularLetter],
    path: VerticalPath,
    truncation: int,
    tol: float = 1e-12,
) -> NCSeries:
    """Regularized generating series along a vertical path with the
    cusp i*infinity as an endpoint: divergent pure-power directions at
    the cusp are discarded (constant-part extraction), which is a no-op
    when every letter is cuspidal."""
    if not (math.isinf(path.y1) or math.isinf(path.y0)):
        raise ModularError("path must reach the cusp at i*infinity")
    series, _ = vertical_series(
        letters, path, truncation, tol=tol, strict=False
    )
    return series


def jsymbol_residual(
    letters: Sequence[ModularLetter], truncation: int
) -> NCSeries:
    """Residual series at the cusp: exponential of the linear element
    whose letter coefficients are the horocycle loop integrals a_0."""
    coeffs = {
        i: letter.a0
        for i, letter in enumerate(letters, start=1)
        if letter.a0 != 0
    }
    return exp_linear(coeffs, len(letters), truncation)
