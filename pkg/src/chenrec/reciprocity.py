"""Reciprocity laws on genus-0 and genus-1 surfaces.

The global law multiplies one tame symbol per pole, counterclockwise as
seen from the base point, times (on the torus) a commutator factor for
the two cycle loops; the product of all factors is the unit series.
Degree-1 coefficients recover the residue theorem, degree-2 the
bilinear relation for a pair of third-kind forms, and degree-3 the
three-form law.

Conventions pinned here (verified numerically by the acceptance suite):

* keyhole loops are counterclockwise and ordered by ray angle from the
  base point; the point at infinity on the sphere chart enters through
  the substitution w = 1/z with its ray pointing away from the origin;
* on the torus the loops are the cover segments alpha: p0 -> p0+1 and
  beta: p0 -> p0+tau, and the boundary of the fundamental cell
  (counterclockwise for Im tau > 0) is the based commutator
  alpha beta alpha^-1 beta^-1, so the global product carries the factor
  F_beta F_alpha F_beta^-1 F_alpha^-1, the series of its inverse.
"""

from __future__ import annotations

import cmath
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .forms import (
    INFINITY,
    DlogForm,
    Lattice,
    MeromorphicForm,
    PolePoint,
    check_disjoint_poles,
    pole_set,
)
from .geometry import (
    Path,
    angular_order,
    circle_loop,
    compose_many,
    keyhole_loop,
    KeyholeSpec,
    reverse_path,
    torus_alpha,
    torus_beta,
    torus_commutator_rectangle,
    winding_number,
)
from .ncseries import (
    NCSeries,
    concat_mul,
    concat_product,
    grouplike_defect,
    inverse,
    plus_part,
    reverse_antipode,
)
from .regularization import tame_symbol
from .transport import FormAssignment, iterated_integral, transport_series

TWO_PI_I = 2j * math.pi


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class SurfaceScene:
    """A verification scene: forms, base point, surface data."""

    forms: tuple[MeromorphicForm, ...]
    base: complex
    genus: int = 0
    lattice: Lattice | None = None
    truncation: int = 3
    keyhole_epsilon: float = 1e-2

    def __post_init__(self):
        if self.genus not in (0, 1):
            raise SceneError("genus must be 0 or 1")
        if self.genus == 1 and self.lattice is None:
            raise SceneError("genus 1 scene needs a lattice")
        if not self.forms:
            raise SceneError("scene needs at least one form")

    @property
    def assignment(self) -> FormAssignment:
        return FormAssignment(self.forms, lattice=self.lattice)

    def poles(self) -> list[tuple[PolePoint, list[complex]]]:
        return pole_set(
            self.forms,
            lattice=self.lattice,
            include_infinity=(self.genus == 0),
        )

    def ordered_poles(self) -> list[PolePoint]:
        """Counterclockwise by ray angle from the base point; the ray to
        infinity points radially away from the origin."""
        entries = self.poles()
        points = [p for p, _ in entries]

        def angle(p: PolePoint) -> float:
            if p is INFINITY:
                return cmath.phase(self.base) % (2 * math.pi)
            return cmath.phase(p - self.base) % (2 * math.pi)

        return sorted(points, key=angle)

    def owner_form(self, pole: PolePoint) -> int:
        """Index (0-based) of the unique form with nonzero residue."""
        for point, residues in self.poles():
            if point is pole or (
                point is not INFINITY
                and pole is not INFINITY
                and self._same(point, pole)
            ):
                owners = [i for i, r in enumerate(residues) if abs(r) > 1e-12]
                if len(owners) != 1:
                    raise SceneError(f"pole {point} not owned by one form")
                return owners[0]
        raise SceneError(f"{pole} is not a pole of the scene")

    def _same(self, a: complex, b: complex) -> bool:
        if self.lattice is not None:
            return self.lattice.same_point(a, b)
        return abs(a - b) < 1e-8


def validate_scene(scene: SurfaceScene) -> None:
    """Layout checks: separated poles, distinct non-crossing rays,
    poles inside the fundamental cell for genus 1, and winding balance
    of the composed keyhole loops."""
    entries = scene.poles()
    finite = [p for p, _ in entries if p is not INFINITY]
    if scene.genus == 0 and any(p is INFINITY for p, _ in entries):
        if abs(scene.base) < 1e-9:
            raise SceneError("base point 0 invalid for a scene with a pole at infinity")
    for i in range(len(finite)):
        if abs(finite[i] - scene.base) < 4 * scene.keyhole_epsilon:
            raise SceneError(f"pole {finite[i]} too close to the base point")
        for j in range(i + 1, len(finite)):
            if abs(finite[i] - finite[j]) < 4 * scene.keyhole_epsilon:
                raise SceneError(
                    f"poles {finite[i]} and {finite[j]} closer than keyhole size"
                )
    # each straight ray must clear every other pole
    for p in finite:
        ray = Path.line(scene.base, p)
        for q in finite:
            if q is p:
                continue
            if ray.min_distance(q) < 2 * scene.keyhole_epsilon:
                raise SceneError(f"ray to {p} passes too close to pole {q}")
    if scene.genus == 1:
        tau = scene.lattice.tau
        for p in finite:
            rel = p - scene.base
            # cell coordinates rel = x + y*tau
            y = rel.imag / tau.imag
            x = (rel - y * tau).real
            margin = 2 * scene.keyhole_epsilon
            if not (margin < x < 1 - margin and margin < y < 1 - margin):
                raise SceneError(
                    f"pole {p} not inside the fundamental cell at {scene.base}"
                )
    else:
        # composed finite keyholes + inverted loop at infinity wind zero
        loops = [
            keyhole_loop(KeyholeSpec(scene.base, p, scene.keyhole_epsilon))
            for p in finite
        ]
        if any(p is INFINITY for p, _ in entries):
            radius = max(abs(p - scene.base) for p in finite) * 50 + 10
            u = scene.base / abs(scene.base)
            far = scene.base + u * radius
            theta = cmath.phase(u)
            loops.append(
                compose_many(
                    [
                        Path.line(scene.base, far),
                        reverse_path(
                            circle_loop(scene.base, radius, theta)
                        ),
                        Path.line(far, scene.base),
                    ]
                )
            )
        if loops:
            total = compose_many(loops)
            for p in finite:
                w = winding_number(total, p)
                expected = 0 if any(q is INFINITY for q, _ in entries) else 1
                if w != expected:
                    raise SceneError(
                        f"composite loop winds {w} (expected {expected}) about {p}"
                    )


def commutator_series(f_alpha: NCSeries, f_beta: NCSeries) -> NCSeries:
    """Six-term expansion of F_alpha F_beta F_alpha^-1 F_beta^-1 using
    multiplicative inverses; exact in the truncated algebra."""
    a_plus = plus_part(f_alpha)
    b_plus = plus_part(f_beta)
    ai_plus = plus_part(inverse(f_alpha))
    bi_plus = plus_part(inverse(f_beta))
    unit = NCSeries.unit(f_alpha.alphabet_size, f_alpha.truncation)
    out = unit
    out = out.add(concat_mul(b_plus, ai_plus))
    out = out.sub(concat_mul(a_plus, bi_plus))
    out = out.add(concat_product([a_plus, b_plus, ai_plus]))
    out = out.add(concat_product([b_plus, ai_plus, bi_plus]))
    out = out.add(concat_product([a_plus, b_plus, ai_plus, bi_plus]))
    return out


@dataclass
class DefectReport:
    name: str
    per_word: dict[tuple[int, ...], float]
    max_per_degree: list[float]
    tol: float
    details: dict = field(default_factory=dict)

    @property
    def defect(self) -> float:
        return max(self.max_per_degree[1:], default=0.0)

    @property
    def passed(self) -> bool:
        return self.defect < self.tol


@dataclass
class CheckResult:
    name: str
    defect: float
    tol: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.defect < self.tol


# ---------------------------------------------------------------------------
# tame symbols per scene pole
# ---------------------------------------------------------------------------


def scene_tame_symbol(
    scene: SurfaceScene, pole: PolePoint, tol: float = 1e-7
) -> NCSeries:
    if pole is INFINITY:
        wforms = tuple(f.pullback_inverse() for f in scene.forms)
        wassignment = FormAssignment(wforms)
        return tame_symbol(
            wassignment, 1.0 / scene.base, 0.0, scene.truncation, tol=tol
        )
    return tame_symbol(
        scene.assignment, scene.base, complex(pole), scene.truncation, tol=tol
    )


def _cycle_series(scene: SurfaceScene, tol: float) -> tuple[NCSeries, NCSeries]:
    alpha = torus_alpha(scene.base)
    beta = torus_beta(scene.base, scene.lattice.tau)
    f_alpha = transport_series(
        scene.assignment, alpha, scene.truncation, tol=tol
    ).series
    f_beta = transport_series(
        scene.assignment, beta, scene.truncation, tol=tol
    ).series
    return f_alpha, f_beta


def commutator_factor(scene: SurfaceScene, tol: float = 1e-9) -> NCSeries:
    """Series of the inverse boundary commutator, the factor that closes
    the global product on the torus: F_beta F_alpha F_beta^-1 F_alpha^-1."""
    f_alpha, f_beta = _cycle_series(scene, tol)
    return commutator_series(f_beta, f_alpha)


# ---------------------------------------------------------------------------
# connector integrals
# ---------------------------------------------------------------------------


def _connector_integral(
    scene: SurfaceScene,
    pole: PolePoint,
    forms: Sequence[MeromorphicForm],
    reverse: bool = False,
    tol: float = 1e-10,
) -> complex:
    """Iterated integral of `forms` along the straight ray from the base
    point to the pole (or its reverse), in the inverted chart when the
    pole is at infinity."""
    if pole is INFINITY:
        use = [f.pullback_inverse() for f in forms]
        ray = Path.line(1.0 / scene.base, 0.0)
        lattice = None
    else:
        use = list(forms)
        ray = Path.line(scene.base, complex(pole))
        lattice = scene.lattice
    if reverse:
        ray = reverse_path(ray)
    return iterated_integral(use, ray, tol=tol, lattice=lattice)


def _check_grouped_order(scene: SurfaceScene) -> None:
    """The closed-form laws need the counterclockwise pole order to be
    groupable by owning form (up to cyclic rotation)."""
    order = scene.ordered_poles()
    owners = [scene.owner_form(p) for p in order]
    n = len(owners)
    for shift in range(n):
        rotated = owners[shift:] + owners[:shift]
        seen: list[int] = []
        ok = True
        for o in rotated:
            if seen and o == seen[-1]:
                continue
            if o in seen:
                ok = False
                break
            seen.append(o)
        if ok:
            return
    raise SceneError(
        "pole order cannot be grouped by form; move the base point or poles"
    )


# ---------------------------------------------------------------------------
# the laws
# ---------------------------------------------------------------------------


def residue_linear_check(scene: SurfaceScene, tol: float = 1e-12) -> CheckResult:
    """Degree-1 law: the residues of each form sum to zero."""
    defects = []
    for i, form in enumerate(scene.forms):
        total = sum(res[i] for _, res in scene.poles())
        defects.append(abs(total))
    return CheckResult(
        name="residue",
        defect=max(defects),
        tol=tol,
        details={"per_form": defects},
    )


def global_reciprocity(
    scene: SurfaceScene, tol: float = 1e-6, symbol_tol: float = 1e-8
) -> DefectReport:
    """Product of all tame symbols (counterclockwise) and, on the torus,
    the inverse boundary commutator; defect per word against 1."""
    validate_scene(scene)
    factors = [
        scene_tame_symbol(scene, p, tol=symbol_tol)
        for p in scene.ordered_poles()
    ]
    if scene.genus == 1:
        factors.append(commutator_factor(scene, tol=symbol_tol * 1e-1))
    product = concat_product(factors)
    per_word: dict[tuple[int, ...], float] = {}
    max_per_degree = [0.0] * (scene.truncation + 1)
    for w in product.words():
        target = 1.0 if not w else 0.0
        d = abs(product.coeff(w) - target)
        per_word[w] = d
        max_per_degree[len(w)] = max(max_per_degree[len(w)], d)
    # words entirely absent from the product have defect 0, already covered
    return DefectReport(
        name="global",
        per_word=per_word,
        max_per_degree=max_per_degree,
        tol=tol,
        details={"factors": len(factors)},
    )


def riemann_bilinear_check(
    scene: SurfaceScene, tol: float = 1e-6, require_grouped: bool = True
) -> CheckResult:
    """Degree-2 law for two third-kind forms without common poles:

        sum over poles P of w1 of 2*pi*i * Res_P(w1) * int_{ray_P^-1} w2
      + sum over poles Q of w2 of 2*pi*i * Res_Q(w2) * int_{ray_Q} w1
      + (cycle terms on the torus) = 0,

    the cycle terms being the two-letter coefficient of the commutator
    factor, i.e. the antisymmetrized period products.

    The vanishing needs the counterclockwise pole order to group by
    form; with require_grouped=False the sum is still computed (it is
    then only determined up to (2*pi*i)^2 integers, which suffices for
    the exponentiated Weil cross-check)."""
    if len(scene.forms) != 2:
        raise SceneError("bilinear law needs exactly two forms")
    check_disjoint_poles(scene.forms, lattice=scene.lattice)
    if require_grouped:
        _check_grouped_order(scene)
    w1, w2 = scene.forms
    total = 0.0 + 0.0j
    terms: dict[str, complex] = {}
    for pole, residues in scene.poles():
        r1, r2 = residues
        if abs(r1) > 1e-12:
            val = _connector_integral(scene, pole, [w2], reverse=True)
            term = TWO_PI_I * r1 * val
            terms[f"P{pole}"] = term
            total += term
        elif abs(r2) > 1e-12:
            val = _connector_integral(scene, pole, [w1], reverse=False)
            term = TWO_PI_I * r2 * val
            terms[f"Q{pole}"] = term
            total += term
    if scene.genus == 1:
        f_alpha, f_beta = _cycle_series(scene, tol=1e-10)
        k = commutator_series(f_beta, f_alpha)
        cycle = k.coeff((1, 2))
        terms["cycle"] = cycle
        total += cycle
    return CheckResult(
        name="riemann",
        defect=abs(total),
        tol=tol,
        details={"sum": total, "terms": terms},
    )


def triple_check(scene: SurfaceScene, tol: float = 1e-6) -> CheckResult:
    """Degree-3 law for three third-kind forms with pairwise disjoint
    poles: residue terms carry the connector integrals

        poles of w1:  2*pi*i * Res * int_{ray^-1} w2 o w3
        poles of w2:  2*pi*i * Res * int_{ray} w1 * int_{ray^-1} w3
        poles of w3:  2*pi*i * Res * int_{ray} w1 o w2

    plus, on the torus, the three-letter coefficient of the commutator
    factor."""
    if len(scene.forms) != 3:
        raise SceneError("triple law needs exactly three forms")
    check_disjoint_poles(scene.forms, lattice=scene.lattice)
    _check_grouped_order(scene)
    w1, w2, w3 = scene.forms
    total = 0.0 + 0.0j
    terms: dict[str, complex] = {}
    for pole, residues in scene.poles():
        r1, r2, r3 = residues
        if abs(r1) > 1e-12:
            val = _connector_integral(scene, pole, [w2, w3], reverse=True)
            term = TWO_PI_I * r1 * val
        elif abs(r2) > 1e-12:
            fwd = _connector_integral(scene, pole, [w1], reverse=False)
            rev = _connector_integral(scene, pole, [w3], reverse=True)
            term = TWO_PI_I * r2 * fwd * rev
        elif abs(r3) > 1e-12:
            val = _connector_integral(scene, pole, [w1, w2], reverse=False)
            term = TWO_PI_I * r3 * val
        else:
            continue
        terms[str(pole)] = term
        total += term
    if scene.genus == 1:
        f_alpha, f_beta = _cycle_series(scene, tol=1e-10)
        k = commutator_series(f_beta, f_alpha)
        cycle = k.coeff((1, 2, 3))
        terms["cycle"] = cycle
        total += cycle
    return CheckResult(
        name="triple",
        defect=abs(total),
        tol=tol,
        details={"sum": total, "terms": terms},
    )


def cycle_pair_products(scene: SurfaceScene, tol: float = 1e-10) -> complex:
    """Antisymmetrized degree-1 period products
    int_alpha w1 * int_beta w2 - int_beta w1 * int_alpha w2."""
    f_alpha, f_beta = _cycle_series(scene, tol=tol)
    a1, a2 = f_alpha.coeff((1,)), f_alpha.coeff((2,))
    b1, b2 = f_beta.coeff((1,)), f_beta.coeff((2,))
    return a1 * b2 - b1 * a2


def weil_check(
    f: DlogForm,
    g: DlogForm,
    tol: float = 1e-10,
    cross_validate_base: complex | None = None,
) -> CheckResult:
    """Weil reciprocity: prod g(P_i)^(-a_i) * prod f(Q_j)^(b_j) = 1 for
    rational functions with disjoint divisors, evaluated exactly on the
    divisor points (infinity included via leading coefficients)."""
    div_f = f.divisor
    div_g = g.divisor
    for p, _ in div_f:
        for q, _ in div_g:
            same = (p is INFINITY and q is INFINITY) or (
                p is not INFINITY
                and q is not INFINITY
                and abs(p - q) < 1e-8
            )
            if same:
                raise SceneError(f"divisors are not disjoint at {p}")
    product = 1.0 + 0.0j
    for p, a in div_f:
        product *= g.value(p) ** (-a)
    for q, b in div_g:
        product *= f.value(q) ** b
    details: dict = {"product": product}
    if cross_validate_base is not None:
        scene = SurfaceScene(
            forms=(f, g), base=cross_validate_base, genus=0, truncation=2
        )
        # branch integers shift the sum by multiples of (2*pi*i)^2, so
        # the exponential comparison needs no grouped layout
        bilinear = riemann_bilinear_check(scene, tol=1.0, require_grouped=False)
        expo = cmath.exp(bilinear.details["sum"] / TWO_PI_I)
        details["bilinear_exponentiated"] = expo
        details["cross_defect"] = abs(expo - product)
    return CheckResult(
        name="weil", defect=abs(product - 1.0), tol=tol, details=details
    )


def shuffle_check(scene: SurfaceScene, tol: float = 1e-8) -> CheckResult:
    """Grouplike (shuffle) defect of the transported series around each
    pole's keyhole loop."""
    worst = 0.0
    for pole, _ in scene.poles():
        if pole is INFINITY:
            assignment = FormAssignment(
                tuple(f.pullback_inverse() for f in scene.forms)
            )
            base = 1.0 / scene.base
            target = 0.0
        else:
            assignment = scene.assignment
            base = scene.base
            target = complex(pole)
        spec = KeyholeSpec(base, target, scene.keyhole_epsilon)
        res = transport_series(
            assignment,
            keyhole_loop(spec),
            scene.truncation,
            tol=tol * 1e-2,
            check_poles=False,
        )
        worst = max(worst, grouplike_defect(res.series))
    return CheckResult(name="shuffle", defect=worst, tol=tol)
