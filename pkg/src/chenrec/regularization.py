"""Regularized series at poles and the pro-unipotent tame symbol.

Approaching a pole Q along a ray, every word coefficient expands as a
polynomial in log(eps) plus terms carrying positive powers of eps; the
regularized series keeps the constant term of each.  The log-polynomial
part is not fitted freely: each word's divergent coefficients are the
residue-weighted log-antiderivative of its parent word's, so they are
subtracted recursively and only the constant plus eps^m log^l blocks
remain in the least-squares basis (fitting the log columns directly is
an ill-conditioned extrapolation that amplifies integrator noise by
several orders of magnitude).

The residual part around a small circle at Q is exact: the exponential
of the linear element sum_i 2*pi*i*Res_Q(w_i) A_i, so a length-r word
of pole letters carries (2*pi*i)^r / r! times the product of residues.
The tame symbol assembles the two:

    1 + F_reg * (F_res - 1) * reverse_antipode(F_reg).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forms import MeromorphicForm, PolePoint
from .geometry import (
    KeyholeSpec,
    LineSegment,
    Path,
    keyhole_loop,
)
from .ncseries import (
    NCSeries,
    Word,
    concat_mul,
    concat_product,
    exp_linear,
    reverse_antipode,
)
from .transport import FormAssignment, check_pole_clearance, transport_series

TWO_PI_I = 2j * math.pi


class RegularizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EpsilonLadder:
    """Geometric ladder eps0 * factor^k, k = 0..count-1.

    The default runs deep (24 halvings): the constant-term fit uses the
    tail of the ladder, where the eps^m log^l contamination beyond the
    modeled blocks sits below 1e-7."""

    eps0: float
    count: int = 24
    factor: float = 0.5

    def values(self) -> np.ndarray:
        return self.eps0 * self.factor ** np.arange(self.count)

    @classmethod
    def default_for(cls, base: complex, pole: complex) -> "EpsilonLadder":
        return cls(eps0=abs(base - pole) / 8.0)


@dataclass
class ResidualSeries:
    """Pure-residue part of the loop series around one pole."""

    series: NCSeries
    pole: PolePoint
    pole_letters: tuple[int, ...]  # 1-based letters singular at the pole


@dataclass
class RegularizedSeries:
    """Limit series along a ray into a pole: every word coefficient is
    the constant term of its log(eps)-polynomial expansion.

    Constant extraction is multiplicative on the eps^k log^l cone
    (k >= 0), so the reversal identity

        series * reverse_antipode(series) = 1

    holds exactly: the regularized series of the reversed ray is the
    multiplicative inverse.  Note that words ending in a pole letter
    can still carry nonzero (finite) constants; dropping them outright
    breaks the loop factorization by whole multiples of 2*pi*i at mixed
    degree-3 words, which the keyhole cross-check detects.
    """

    series: NCSeries
    pole: complex
    ladder: np.ndarray
    fit_constants: dict[Word, complex]
    fit_residuals: dict[Word, float]

    @property
    def worst_fit_residual(self) -> float:
        return max(self.fit_residuals.values(), default=0.0)


def pole_letters_of(
    assignment: FormAssignment, pole: PolePoint
) -> tuple[int, ...]:
    lattice = assignment.lattice
    out = []
    for i, form in enumerate(assignment.forms, start=1):
        if form.has_pole_at(pole, lattice=lattice):
            out.append(i)
    return tuple(out)


def residual_series(
    assignment: FormAssignment, pole: PolePoint, truncation: int
) -> ResidualSeries:
    """exp(sum over pole letters of 2*pi*i*Res_Q(w_i) * A_i)."""
    letters = pole_letters_of(assignment, pole)
    coeffs = {
        i: TWO_PI_I * assignment.forms[i - 1].residue_at(pole) for i in letters
    }
    series = exp_linear(coeffs, assignment.alphabet_size, truncation)
    return ResidualSeries(series=series, pole=pole, pole_letters=letters)


def _truncated_ray(path: Path, pole: complex, eps: float) -> Path:
    """Shorten a path whose last segment is a straight run into the pole."""
    last = path.segments[-1]
    if not isinstance(last, LineSegment):
        raise RegularizationError("approach path must end with a straight segment")
    if abs(last.z1 - pole) > 1e-12 * max(1.0, abs(pole)):
        raise RegularizationError(f"path must end at the pole {pole}")
    length = abs(last.z1 - last.z0)
    if eps >= length:
        raise RegularizationError(f"ladder eps {eps} exceeds final segment length")
    u = (last.z0 - pole) / abs(last.z0 - pole)
    stop = pole + eps * u
    return Path(path.segments[:-1] + (LineSegment(last.z0, stop),))


def _trailing_pole_count(word: Word, pole_letters: tuple[int, ...]) -> int:
    count = 0
    for letter in reversed(word):
        if letter in pole_letters:
            count += 1
        else:
            break
    return count


def _ladder_series(
    assignment: FormAssignment,
    deepest: Path,
    eps: np.ndarray,
    truncation: int,
    tol: float,
) -> list[NCSeries]:
    """Series of every truncated ray in one integration pass: transport
    the shared prefix once, then sweep the final straight segment with a
    checkpoint at each ladder depth."""
    from .transport import WordSystem, integrate_segment_states

    n = assignment.alphabet_size
    system = WordSystem.full(n, truncation)
    last = deepest.segments[-1]
    prefix_series = None
    if len(deepest.segments) > 1:
        prefix_series = transport_series(
            assignment,
            Path(deepest.segments[:-1]),
            truncation,
            tol=tol,
            check_poles=False,
        ).series
    seg_len = abs(last.z1 - last.z0)
    eps_min = float(eps[-1])
    # |z0 - pole| = seg_len + eps_min; checkpoint for depth e sits at
    # t = (|z0-pole| - e) / seg_len, increasing as e decreases
    depth0 = seg_len + eps_min
    cps = [(depth0 - float(e)) / seg_len for e in eps]
    states = integrate_segment_states(
        system, assignment, last, tol, checkpoints=cps
    )
    out = []
    for y, _err in states:
        coeffs = {w: y[i] for i, w in enumerate(system.words) if y[i] != 0}
        coeffs[()] = 1.0
        series = NCSeries(n, truncation, coeffs)
        if prefix_series is not None:
            series = concat_mul(prefix_series, series)
        out.append(series)
    return out


def _fit_constant(
    eps: np.ndarray,
    values: np.ndarray,
    log_tail: list[complex],
    total_pole_letters: int,
) -> tuple[complex, float]:
    """Constant-term extraction after removing the known log-divergence.

    log_tail holds the coefficients [c_1 .. c_d] of log^l(eps); these
    are determined recursively by shorter words (each word's log
    polynomial is the residue-weighted antiderivative of its parent's),
    so only the constant and the eps^m log^l(eps) blocks remain free.
    Fitting without the log columns avoids the badly conditioned
    extrapolation from log(eps) in [-15, -6] down to 0.
    """
    logs = np.log(eps)
    reduced = values.astype(complex).copy()
    for l, c in enumerate(log_tail, start=1):
        reduced -= c * logs**l
    columns = [np.ones_like(logs)]
    mixed_l = min(total_pole_letters, 2)
    for m in (1, 2, 3):
        for l in range(mixed_l + 1):
            columns.append(eps**m * logs**l)
    design = np.stack(columns, axis=1)
    norms = np.max(np.abs(design), axis=0)
    solution, *_ = np.linalg.lstsq(design / norms, reduced, rcond=None)
    solution = solution / norms
    fitted = design @ solution
    residual = float(np.max(np.abs(fitted - reduced)))
    return complex(solution[0]), residual


def regularized_transport(
    assignment: FormAssignment,
    gamma: Path,
    truncation: int,
    tol: float = 1e-8,
    ladder: EpsilonLadder | None = None,
    fit_window: int = 12,
) -> RegularizedSeries:
    """Regularized generating series along a path ending at a pole.

    Transports along the eps-ladder of truncated paths and extracts the
    constant term of every word coefficient.  A fit residual above tol
    is a regularization failure.
    """
    pole = complex(gamma.end)
    letters = pole_letters_of(assignment, pole)
    if ladder is None:
        ladder = EpsilonLadder.default_for(gamma.start, pole)
    eps = ladder.values()
    # the deepest truncated ray still clears every pole: it stops a
    # distance eps_min short of the target pole by construction
    deepest = _truncated_ray(gamma, pole, float(eps[-1]))
    check_pole_clearance(assignment, deepest)
    runs = _ladder_series(assignment, deepest, eps, truncation, tol * 1e-2)

    window = slice(max(0, len(eps) - fit_window), len(eps))
    eps_used = eps[window]
    residues = {
        i: assignment.forms[i - 1].residue_at(pole) for i in letters
    }
    word_set = {w for run in runs for w in run.words()}
    words = sorted(word_set, key=lambda w: (len(w), w))

    constants: dict[Word, complex] = {(): 1.0 + 0.0j}
    residuals: dict[Word, float] = {}
    # full log polynomial [c_0, c_1, ..] per word, built shortest first
    log_polys: dict[Word, list[complex]] = {(): [1.0 + 0.0j]}
    for w in words:
        if not w:
            continue
        values = np.array([run.coeff(w) for run in runs])[window]
        trailing = _trailing_pole_count(w, letters)
        total = sum(1 for letter in w if letter in letters)
        # log^l coefficient of w = (residue of last letter / l) times the
        # log^(l-1) coefficient of its parent word
        log_tail: list[complex] = []
        if trailing > 0:
            rho = residues[w[-1]]
            parent = log_polys.get(w[:-1], [0.0 + 0.0j])
            for l in range(1, trailing + 1):
                prev = parent[l - 1] if l - 1 < len(parent) else 0.0
                log_tail.append(rho * prev / l)
        constant, residual = _fit_constant(eps_used, values, log_tail, total)
        constants[w] = constant
        residuals[w] = residual
        log_polys[w] = [constant] + log_tail
        if residual > max(tol, 1e-12) * max(1.0, float(np.max(np.abs(values)))):
            raise RegularizationError(
                f"regularization fit residual {residual:.3e} for word {w}"
            )
    series = NCSeries(assignment.alphabet_size, truncation, constants)
    return RegularizedSeries(
        series=series,
        pole=pole,
        ladder=eps,
        fit_constants=constants,
        fit_residuals=residuals,
    )


def lemma_inverse_defect(reg: RegularizedSeries) -> float:
    """Max coefficient of (F_reg * antipode(F_reg) - 1): the regularized
    series of the reversed ray is both the path reversal image and the
    multiplicative inverse of F_reg."""
    prod = concat_mul(reg.series, reverse_antipode(reg.series))
    defect = 0.0
    for w, c in prod.items():
        target = 1.0 if not w else 0.0
        defect = max(defect, abs(c - target))
    return defect


def tame_symbol(
    assignment: FormAssignment,
    base: complex,
    pole: complex,
    truncation: int,
    tol: float = 1e-8,
    epsilon: float | None = None,
    ladder: EpsilonLadder | None = None,
    validate: bool = True,
) -> NCSeries:
    """Loop series around one pole assembled from its regularized and
    residual parts:  1 + F_reg * (F_res - 1) * antipode(F_reg)."""
    ray = Path.line(base, pole)
    if ladder is None and epsilon is not None:
        ladder = EpsilonLadder(eps0=max(epsilon, abs(base - pole) / 64.0))
    reg = regularized_transport(
        assignment, ray, truncation, tol=tol, ladder=ladder
    )
    if validate:
        defect = lemma_inverse_defect(reg)
        if defect > max(1e-4, 100 * tol):
            raise RegularizationError(
                f"regularized series fails inverse identity by {defect:.3e}"
            )
    res = residual_series(assignment, pole, truncation)
    unit = NCSeries.unit(assignment.alphabet_size, truncation)
    res_plus = res.series.sub(unit)
    inner = concat_product(
        [reg.series, res_plus, reverse_antipode(reg.series)]
    )
    return unit.add(inner)


@dataclass
class KeyholeCheckReport:
    epsilons: list[float]
    partial_defects: list[float]  # finite-eps factorization vs direct
    assembled_defects: list[float]  # eps-independent symbol vs direct
    tol: float

    @property
    def decreasing(self) -> bool:
        return all(
            b <= a * 1.05 for a, b in zip(self.partial_defects, self.partial_defects[1:])
        )

    @property
    def passed(self) -> bool:
        below = max(self.partial_defects) < self.tol
        return (self.decreasing or below) and min(self.assembled_defects) < self.tol


def _max_coeff_diff(a: NCSeries, b: NCSeries) -> float:
    words = set(a.words()) | set(b.words())
    return max((abs(a.coeff(w) - b.coeff(w)) for w in words), default=0.0)


def keyhole_direct_check(
    assignment: FormAssignment,
    spec: KeyholeSpec,
    truncation: int,
    tol: float = 1e-5,
    ladder_steps: int = 5,
) -> KeyholeCheckReport:
    """Cross-check of the loop factorization on an eps-ladder.

    For each eps, compares the direct transport around the keyhole with
    the finite-eps assembly F_{ray_eps} * F_res * F_{ray_eps}^{-1}
    (replacing the small circle with its limit), whose defect shrinks
    with eps, and with the fully assembled eps-independent tame symbol.
    """
    symbol = tame_symbol(
        assignment, spec.base, spec.pole, truncation, tol=tol * 1e-2
    )
    res = residual_series(assignment, spec.pole, truncation)
    epsilons = [spec.epsilon * 0.5**k for k in range(ladder_steps)]
    partial, assembled = [], []
    for e in epsilons:
        kh = keyhole_loop(KeyholeSpec(spec.base, spec.pole, e))
        direct = transport_series(
            assignment, kh, truncation, tol=tol * 1e-3, check_poles=False
        ).series
        ray = _truncated_ray(Path.line(spec.base, spec.pole), spec.pole, e)
        f_ray = transport_series(
            assignment, ray, truncation, tol=tol * 1e-3, check_poles=False
        ).series
        approx = concat_product([f_ray, res.series, reverse_antipode(f_ray)])
        partial.append(_max_coeff_diff(direct, approx))
        assembled.append(_max_coeff_diff(direct, symbol))
    report = KeyholeCheckReport(
        epsilons=epsilons,
        partial_defects=partial,
        assembled_defects=assembled,
        tol=tol,
    )
    if not report.passed:
        raise RegularizationError(
            f"keyhole defect not decreasing and above tolerance: {partial}"
        )
    return report
