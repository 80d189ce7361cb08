"""Transport of generating series along paths.

The coefficient of the word (i_1..i_k) in the generating series solves
the triangular system

    d I_w / dt = I_{w minus last letter}(t) * g_{last}(z(t)) * z'(t),

one equation per word up to the truncation degree, integrated per
segment with an adaptive embedded Dormand-Prince 5(4) scheme and
composed across segments with concat_mul.  ``simplex_oracle`` is a
deliberately independent second route: direct nested Gauss-Legendre
quadrature over the ordered simplex, sharing no stepping code with the
solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .forms import Lattice, MeromorphicForm, PoleProximityError
from .geometry import Path
from .ncseries import NCSeries, Word, all_words, concat_mul

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_ERR = np.array(
    [
        71 / 57600,
        0.0,
        -71 / 16695,
        71 / 1920,
        -17253 / 339200,
        22 / 525,
        -1 / 40,
    ]
)

STEP_FLOOR = 1e-12
MAX_STEPS_PER_SEGMENT = 200_000
POLE_CLEARANCE = 1e-9  # 10x the step-size floor units of path scale
ERROR_SAFETY = 10.0


class TransportError(RuntimeError):
    pass


@dataclass(frozen=True)
class FormAssignment:
    """Letter i (1-based) carries the 1-form forms[i-1]."""

    forms: tuple[MeromorphicForm, ...]
    lattice: Lattice | None = None

    def __post_init__(self):
        if not self.forms:
            raise ValueError("need at least one form")

    @property
    def alphabet_size(self) -> int:
        return len(self.forms)

    def letter_values(self, z) -> np.ndarray:
        return np.array([f.eval(z) for f in self.forms], dtype=complex)


def min_pole_distance(assignment: FormAssignment, path: Path) -> float:
    """Smallest distance from the path to any pole of the assignment,
    lattice-translate aware for elliptic forms."""
    best = math.inf
    lattice = assignment.lattice
    plain: set[complex] = set()
    periodic: set[complex] = set()
    for form in assignment.forms:
        target = periodic if (lattice is not None and _is_periodic(form)) else plain
        for p in form.finite_poles():
            target.add(complex(p))
    for p in plain:
        best = min(best, path.min_distance(p))
    if periodic:
        ts = np.linspace(0.0, 1.0, 513)
        zs = path.point_vec(ts)
        for p in periodic:
            best = min(best, float(np.min(lattice.reduced_abs(zs - p))))
    return best


def _is_periodic(form: MeromorphicForm) -> bool:
    return hasattr(form, "lattice")


def check_pole_clearance(
    assignment: FormAssignment, path: Path, clearance: float = POLE_CLEARANCE
) -> None:
    d = min_pole_distance(assignment, path)
    if d < clearance:
        raise PoleProximityError(
            f"path approaches a pole to within {d:.3e} (< {clearance:.1e})"
        )


@dataclass
class WordSystem:
    """Index layout of the triangular ODE: words, prefix and letter maps."""

    words: list[Word]
    index: dict[Word, int]
    prefix_idx: np.ndarray  # for words[1:]
    letter_idx: np.ndarray  # 0-based letters, for words[1:]
    degrees: np.ndarray

    @classmethod
    def full(cls, alphabet_size: int, truncation: int) -> "WordSystem":
        words = list(all_words(alphabet_size, truncation))
        return cls.from_words(words)

    @classmethod
    def chain(cls, letters: Sequence[int]) -> "WordSystem":
        """Only the prefixes of one target word."""
        words = [tuple(letters[:k]) for k in range(len(letters) + 1)]
        return cls.from_words(words)

    @classmethod
    def from_words(cls, words: list[Word]) -> "WordSystem":
        index = {w: i for i, w in enumerate(words)}
        if () not in index:
            raise ValueError("word system must contain the empty word")
        prefix, letter = [], []
        for w in words[1:]:
            if w[:-1] not in index:
                raise ValueError(f"word system not prefix closed at {w}")
            prefix.append(index[w[:-1]])
            letter.append(w[-1] - 1)
        return cls(
            words=words,
            index=index,
            prefix_idx=np.array(prefix, dtype=int),
            letter_idx=np.array(letter, dtype=int),
            degrees=np.array([len(w) for w in words], dtype=int),
        )


@dataclass
class TransportResult:
    series: NCSeries
    estimated_error: list[float]  # per degree 0..N
    path: Path

    def error_bound(self, degree: int) -> float:
        if degree < len(self.estimated_error):
            return self.estimated_error[degree]
        return 0.0


def integrate_segment_states(
    system: WordSystem,
    assignment: FormAssignment,
    segment,
    tol: float,
    checkpoints: Sequence[float] | None = None,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """DP5(4) over one segment.

    Returns the state vector and accumulated per-word local error
    estimate at each checkpoint parameter (default: only at t = 1).
    The stepper lands exactly on every checkpoint, so a whole ladder of
    partial transports costs one pass."""

    cps = sorted(checkpoints) if checkpoints is not None else [1.0]
    if not cps or cps[0] <= 0.0 or cps[-1] > 1.0 + 1e-12:
        raise ValueError("checkpoints must lie in (0, 1]")

    nwords = len(system.words)
    y = np.zeros(nwords, dtype=complex)
    y[0] = 1.0

    def rhs(t: float, state: np.ndarray) -> np.ndarray:
        z = segment.point(t)
        zp = segment.velocity(t)
        fvals = assignment.letter_values(z) * zp
        out = np.zeros_like(state)
        out[1:] = state[system.prefix_idx] * fvals[system.letter_idx]
        return out

    atol = max(tol * 1e-2, 1e-14)
    rtol = atol
    err_acc = np.zeros(nwords)
    out: list[tuple[np.ndarray, np.ndarray]] = []
    t = 0.0
    h = 0.05
    k1 = rhs(t, y)
    steps = 0
    cp_index = 0
    while cp_index < len(cps):
        steps += 1
        if steps > MAX_STEPS_PER_SEGMENT:
            raise TransportError("step budget exhausted")
        target = cps[cp_index]
        h = min(h, target - t)
        if h < STEP_FLOOR:
            raise TransportError("step size underflow near a singularity")
        ks = [k1]
        for stage in range(1, 7):
            ti = t + _DP_C[stage] * h
            yi = y + h * sum(a * k for a, k in zip(_DP_A[stage], ks))
            ks.append(rhs(ti, yi))
        y5 = y + h * sum(b * k for b, k in zip(_DP_B5, ks) if b != 0.0)
        err_vec = h * sum(e * k for e, k in zip(_DP_ERR, ks) if e != 0.0)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err_norm = float(np.max(np.abs(err_vec) / scale))
        if err_norm <= 1.0:
            t += h
            y = y5
            # local truncation estimate plus a roundoff floor per step
            err_acc += np.abs(err_vec) + 5e-16 * np.abs(y5)
            k1 = ks[6]  # FSAL
            while cp_index < len(cps) and t >= cps[cp_index] - 1e-15:
                snap = y.copy()
                snap[0] = 1.0
                out.append((snap, err_acc.copy()))
                cp_index += 1
        factor = 0.9 * (err_norm ** -0.2) if err_norm > 0 else 5.0
        h *= min(5.0, max(0.2, factor))
    return out


def _integrate_segment(
    system: WordSystem,
    assignment: FormAssignment,
    segment,
    tol: float,
) -> tuple[np.ndarray, np.ndarray]:
    return integrate_segment_states(system, assignment, segment, tol)[0]


def _combine_errors(
    mag_a: list[float], err_a: list[float], mag_b: list[float], err_b: list[float]
) -> list[float]:
    n = len(err_a)
    out = [0.0] * n
    for d in range(n):
        out[d] = sum(
            err_a[i] * mag_b[d - i] + mag_a[i] * err_b[d - i] for i in range(d + 1)
        )
    return out


def _degree_mags(series: NCSeries) -> list[float]:
    return [max(1.0, series.max_abs(d)) if d == 0 else series.max_abs(d)
            for d in range(series.truncation + 1)]


def transport_series(
    assignment: FormAssignment,
    path: Path,
    truncation: int,
    tol: float = 1e-9,
    word_system: WordSystem | None = None,
    check_poles: bool = True,
) -> TransportResult:
    """Generating series of iterated integrals of the assignment along
    the path, truncated at the given degree."""
    if check_poles:
        check_pole_clearance(assignment, path)
    system = word_system or WordSystem.full(assignment.alphabet_size, truncation)
    n = assignment.alphabet_size

    result: NCSeries | None = None
    errors: list[float] | None = None
    for segment in path.segments:
        y, err_acc = _integrate_segment(system, assignment, segment, tol)
        coeffs = {w: y[i] for i, w in enumerate(system.words) if y[i] != 0}
        coeffs[()] = 1.0
        seg_series = NCSeries(n, truncation, coeffs)
        seg_err = [0.0] * (truncation + 1)
        for i, w in enumerate(system.words):
            d = len(w)
            seg_err[d] = max(seg_err[d], ERROR_SAFETY * float(err_acc[i]))
        if result is None:
            result, errors = seg_series, seg_err
        else:
            errors = _combine_errors(
                _degree_mags(result), errors, _degree_mags(seg_series), seg_err
            )
            result = concat_mul(result, seg_series)
    assert result is not None and errors is not None
    # constant term is exactly 1 by construction
    return TransportResult(series=result, estimated_error=errors, path=path)


def iterated_integral(
    forms: Sequence[MeromorphicForm],
    path: Path,
    tol: float = 1e-9,
    lattice: Lattice | None = None,
) -> complex:
    """Single iterated integral of the given forms, in order, along the
    path: the chain of prefixes is transported with a minimal alphabet."""
    assignment = FormAssignment(tuple(forms), lattice=lattice)
    letters = list(range(1, len(forms) + 1))
    system = WordSystem.chain(letters)
    result = transport_series(
        assignment, path, len(forms), tol=tol, word_system=system
    )
    return result.series.coeff(tuple(letters))


@dataclass(frozen=True)
class OracleValue:
    value: complex
    error_estimate: float


def _gl_nodes(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _simplex_gl(
    fvals_at,  # callable: (j, np.ndarray of t) -> integrand values
    depth: int,
    m: int,
) -> complex:
    nodes, weights = _gl_nodes(m)

    def level(j: int, uppers: np.ndarray) -> np.ndarray:
        if j == 0:
            return np.ones_like(uppers, dtype=complex)
        ts = np.multiply.outer(uppers, nodes).reshape(-1)
        inner = level(j - 1, ts).reshape(len(uppers), m)
        fv = fvals_at(j - 1, ts).reshape(len(uppers), m)
        return uppers * np.sum(weights * inner * fv, axis=1)

    return complex(level(depth, np.array([1.0]))[0])


def simplex_oracle(
    forms: Sequence[MeromorphicForm],
    path: Path,
    order: int = 32,
    check_poles: bool = True,
    lattice: Lattice | None = None,
) -> OracleValue:
    """Brute-force nested Gauss-Legendre quadrature over the ordered
    simplex 0 <= t_1 <= ... <= t_k <= 1.  Cost grows like order^k, so
    word length is capped at 4.  The returned error estimate compares
    two quadrature orders."""
    k = len(forms)
    if k == 0:
        return OracleValue(1.0 + 0.0j, 0.0)
    if k > 4:
        raise ValueError("simplex oracle limited to words of length <= 4")
    if check_poles:
        check_pole_clearance(FormAssignment(tuple(forms), lattice=lattice), path)

    def fvals_at(j: int, ts: np.ndarray) -> np.ndarray:
        zs = path.point_vec(ts)
        vs = path.velocity_vec(ts)
        return np.asarray(forms[j].eval(zs), dtype=complex) * vs

    coarse = _simplex_gl(fvals_at, k, order)
    fine = _simplex_gl(fvals_at, k, int(math.ceil(order * 1.5)))
    return OracleValue(fine, abs(fine - coarse))
