"""Meromorphic 1-forms with simple poles.

Three concrete kinds:

* ``RationalForm``     -- (num/den)(z) dz on the sphere chart,
* ``DlogForm``         -- df/f for a rational function f,
* ``EllipticThirdKindForm`` -- (zeta(z-a) - zeta(z-b)) dz on C/(Z + tau Z),

plus the ``Lattice`` carrying the Weierstrass zeta evaluator and its
quasi-periods.  Only simple poles are admitted anywhere: rational forms
reject repeated denominator roots at construction, and the residue at
infinity is computed analytically on the coefficient representation.
"""

from __future__ import annotations

import cmath
import math
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

POLE_MATCH_TOL = 1e-8  # identify a query point with a pole
EVAL_CLEARANCE = 1e-9  # minimum distance for coefficient evaluation


class HigherOrderPoleError(ValueError):
    pass


class PoleProximityError(ValueError):
    pass


class _Infinity:
    """Sentinel for the point at infinity on the sphere chart."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "infinity"


INFINITY = _Infinity()

PolePoint = complex | _Infinity


def _trim(coeffs: Iterable[complex]) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(list(coeffs), dtype=complex))
    return npoly.polytrim(arr, tol=0.0)


def _poly_deg(coeffs: np.ndarray) -> int:
    nz = np.nonzero(coeffs)[0]
    return int(nz[-1]) if nz.size else -1


# ---------------------------------------------------------------------------
# Lattice and Weierstrass zeta
# ---------------------------------------------------------------------------


class Lattice:
    """The lattice Z + tau*Z with Im(tau) > 0.

    zeta is evaluated through the Fourier expansion in the reduced strip

        zeta(z) = eta1*z + pi*cot(pi*z)
                  + 4*pi*sum_{n>=1} qbar^n/(1-qbar^n) * sin(2*pi*n*z),

    qbar = exp(2*pi*i*tau), valid for |Im z| < Im tau, combined with the
    quasi-periodicity zeta(z + m + n*tau) = zeta(z) + m*eta1 + n*eta2.
    eta1 comes from the weight-2 Eisenstein q-series and eta2 from
    2*zeta(tau/2); the Legendre relation eta1*tau - eta2 = 2*pi*i is
    asserted to 1e-10 at construction.
    """

    def __init__(self, tau: complex, tol: float = 1e-10):
        tau = complex(tau)
        if tau.imag <= 0:
            raise ValueError(f"Im(tau) must be positive, got {tau}")
        self.tau = tau
        self.qbar = cmath.exp(2j * math.pi * tau)
        # term bound 4*pi*exp(-pi*n*Im tau); stop below 1e-18
        self.n_terms = max(8, int(math.ceil(44.0 / (math.pi * tau.imag))))
        n = np.arange(1, self.n_terms + 1)
        qn = self.qbar**n
        self._fourier_n = n
        self._fourier_c = 4.0 * math.pi * qn / (1.0 - qn)
        self._fourier_scalar = [
            (int(k), complex(c)) for k, c in zip(n, self._fourier_c)
        ]
        self.eta1 = (math.pi**2 / 3.0) * self._eisenstein2()
        self.eta2 = 2.0 * self._zeta_reduced(np.asarray(tau / 2.0))[()]
        legendre = self.eta1 * tau - self.eta2 - 2j * math.pi
        if abs(legendre) > tol:
            raise ValueError(
                f"Legendre relation violated by {abs(legendre):.3e} "
                f"for tau={tau}"
            )

    def _eisenstein2(self) -> complex:
        """E2(tau) = 1 - 24 sum sigma_1(n) qbar^n."""
        m = self.n_terms + 16
        sigma1 = np.zeros(m + 1)
        for d in range(1, m + 1):
            sigma1[d::d] += d
        n = np.arange(1, m + 1)
        return 1.0 - 24.0 * complex(np.sum(sigma1[1:] * self.qbar**n))

    def reduce(self, z):
        """Split z = z0 + m + n*tau with z0 in the centered cell."""
        z = np.asarray(z, dtype=complex)
        n = np.round(z.imag / self.tau.imag).astype(int)
        zp = z - n * self.tau
        m = np.round(zp.real).astype(int)
        return zp - m, m, n

    def reduced_abs(self, z) -> np.ndarray:
        """Distance from z to the nearest lattice point."""
        z0, _, _ = self.reduce(z)
        cands = [abs(z0 + dm + dn * self.tau)
                 for dm in (-1, 0, 1) for dn in (-1, 0, 1)]
        return np.min(np.stack(cands), axis=0)

    def same_point(self, a: complex, b: complex, tol: float = POLE_MATCH_TOL) -> bool:
        return bool(self.reduced_abs(np.asarray(a - b)) < tol)

    def _zeta_reduced(self, z0: np.ndarray) -> np.ndarray:
        z0 = np.asarray(z0, dtype=complex)
        out = self.eta1 * z0 + math.pi / np.tan(math.pi * z0)
        phases = np.sin(
            2.0 * math.pi * np.multiply.outer(self._fourier_n, z0)
        )
        out = out + np.tensordot(self._fourier_c, phases, axes=(0, 0))
        return out

    def zeta(self, z):
        """Weierstrass zeta; accepts scalars or arrays, raises on lattice
        points."""
        if isinstance(z, (complex, float, int)):
            return self._zeta_scalar(complex(z))
        z_arr = np.asarray(z, dtype=complex)
        z0, m, n = self.reduce(z_arr)
        if np.any(np.abs(z0) < 1e-13):
            raise ZeroDivisionError("zeta evaluated on a lattice point")
        vals = self._zeta_reduced(z0) + m * self.eta1 + n * self.eta2
        if z_arr.shape == ():
            return complex(vals)
        return vals

    def _zeta_scalar(self, z: complex) -> complex:
        n = round(z.imag / self.tau.imag)
        zp = z - n * self.tau
        m = round(zp.real)
        z0 = zp - m
        if abs(z0) < 1e-13:
            raise ZeroDivisionError("zeta evaluated on a lattice point")
        out = self.eta1 * z0 + math.pi / cmath.tan(math.pi * z0)
        two_pi_z = 2.0 * math.pi * z0
        for k, c in self._fourier_scalar:
            out += c * cmath.sin(k * two_pi_z)
        return out + m * self.eta1 + n * self.eta2

    def zeta_lattice_sum(self, z: complex, shells: int = 400,
                         rtol: float = 1e-7) -> complex:
        """Slow direct oracle: 1/z + sum over lattice points of
        1/(z-w) + 1/w + z/w^2, summed over square shells until the
        shell-to-shell change drops below rtol."""
        z = complex(z)
        total = 1.0 / z
        prev = total
        for k in range(1, shells + 1):
            ms = np.arange(-k, k + 1)
            edge = [np.stack([ms, np.full_like(ms, k)], 1),
                    np.stack([ms, np.full_like(ms, -k)], 1)]
            inner = np.arange(-k + 1, k)
            edge.append(np.stack([np.full_like(inner, k), inner], 1))
            edge.append(np.stack([np.full_like(inner, -k), inner], 1))
            mn = np.concatenate(edge)
            w = mn[:, 0] + mn[:, 1] * self.tau
            total += complex(np.sum(1.0 / (z - w) + 1.0 / w + z / w**2))
            if k > 4 and abs(total - prev) < rtol * max(1.0, abs(total)):
                return total
            prev = total
        return total


# ---------------------------------------------------------------------------
# Forms
# ---------------------------------------------------------------------------


class MeromorphicForm:
    """Interface: coefficient function g with omega = g(z) dz."""

    def eval(self, z: complex) -> complex:
        raise NotImplementedError

    def residue_at(self, p: PolePoint) -> complex:
        raise NotImplementedError

    def finite_poles(self) -> list[complex]:
        raise NotImplementedError

    def has_pole_at(self, p: PolePoint, lattice: Lattice | None = None) -> bool:
        raise NotImplementedError

    def guarded_eval(self, z: complex) -> complex:
        for p in self.finite_poles():
            if abs(z - p) < EVAL_CLEARANCE:
                raise PoleProximityError(f"evaluation within {EVAL_CLEARANCE} of pole {p}")
        return self.eval(z)


class RationalForm(MeromorphicForm):
    """(num/den)(z) dz with all finite poles simple."""

    def __init__(self, num: Sequence[complex], den: Sequence[complex]):
        self.num = _trim(num)
        self.den = _trim(den)
        if _poly_deg(self.den) < 0:
            raise ValueError("denominator is identically zero")
        if _poly_deg(self.num) < 0:
            self.num = np.zeros(1, dtype=complex)
        self._poles = self._simple_roots(self.den)
        self._dden = npoly.polyder(self.den)

    @staticmethod
    def _simple_roots(den: np.ndarray) -> list[complex]:
        if _poly_deg(den) == 0:
            return []
        roots = npoly.polyroots(den)
        scale = max(1.0, float(np.max(np.abs(roots))))
        for i in range(len(roots)):
            for j in range(i + 1, len(roots)):
                if abs(roots[i] - roots[j]) < 1e-8 * scale:
                    raise HigherOrderPoleError(
                        f"repeated denominator root near {roots[i]}"
                    )
        return [complex(r) for r in roots]

    def eval(self, z):
        return npoly.polyval(z, self.num) / npoly.polyval(z, self.den)

    def finite_poles(self) -> list[complex]:
        return list(self._poles)

    @cached_property
    def _infinity_order(self) -> int:
        """Vanishing order of the form at infinity (negative = pole)."""
        return (_poly_deg(self.den) - _poly_deg(self.num)) - 2

    def has_pole_at(self, p: PolePoint, lattice=None) -> bool:
        if p is INFINITY:
            return self._infinity_order == -1 or self._infinity_order < -1
        return any(abs(p - q) < POLE_MATCH_TOL for q in self._poles)

    def residue_at(self, p: PolePoint) -> complex:
        if p is INFINITY:
            if self._infinity_order < -1:
                raise HigherOrderPoleError(
                    "pole of order >= 2 at infinity (deg num >= deg den - 1)"
                )
            dd = _poly_deg(self.den)
            coeff = self.num[dd - 1] if 0 <= dd - 1 < len(self.num) else 0.0
            return complex(-coeff / self.den[dd])
        for q in self._poles:
            if abs(p - q) < POLE_MATCH_TOL:
                return complex(
                    npoly.polyval(q, self.num) / npoly.polyval(q, self._dden)
                )
        return 0.0 + 0.0j

    def pullback_inverse(self) -> "RationalForm":
        """The form in the chart w = 1/z:  g(z)dz -> -g(1/w)/w^2 dw."""
        dn, dd = _poly_deg(self.num), _poly_deg(self.den)
        revnum = self.num[: dn + 1][::-1]
        revden = self.den[: dd + 1][::-1]
        shift = dd - dn - 2
        if shift >= 0:
            new_num = npoly.polymul(-revnum, [0.0] * shift + [1.0])
            new_den = revden
        else:
            new_num = -revnum
            new_den = npoly.polymul(revden, [0.0] * (-shift) + [1.0])
        return RationalForm(new_num, new_den)

    @classmethod
    def from_residues(cls, pairs: Sequence[tuple[complex, complex]]) -> "RationalForm":
        """Sum of r/(z - p) terms, one per (p, r) pair."""
        den = np.array([1.0 + 0j])
        for p, _ in pairs:
            den = npoly.polymul(den, [-p, 1.0])
        num = np.zeros(1, dtype=complex)
        for i, (p, r) in enumerate(pairs):
            part = np.array([r + 0j])
            for j, (q, _) in enumerate(pairs):
                if j != i:
                    part = npoly.polymul(part, [-q, 1.0])
            num = npoly.polyadd(num, part)
        return cls(num, den)

    def __repr__(self):
        return f"RationalForm(num={self.num.tolist()}, den={self.den.tolist()})"


def _cluster_roots(roots: np.ndarray, tol: float) -> list[tuple[complex, int]]:
    clusters: list[tuple[complex, int]] = []
    for r in roots:
        for i, (c, m) in enumerate(clusters):
            if abs(r - c) < tol:
                clusters[i] = ((c * m + r) / (m + 1), m + 1)
                break
        else:
            clusters.append((complex(r), 1))
    return clusters


class DlogForm(MeromorphicForm):
    """df/f for rational f = num/den; residues are the integer divisor
    multiplicities of f (positive at zeros, negative at poles, and the
    balancing order at infinity)."""

    def __init__(self, num: Sequence[complex], den: Sequence[complex]):
        self.num = _trim(num)
        self.den = _trim(den)
        if _poly_deg(self.num) < 0 or _poly_deg(self.den) < 0:
            raise ValueError("f must be a nonzero rational function")
        self._dnum = npoly.polyder(self.num)
        self._dden = npoly.polyder(self.den)
        self.divisor = self._compute_divisor()

    def _compute_divisor(self) -> list[tuple[PolePoint, int]]:
        entries: list[tuple[PolePoint, int]] = []
        pieces = []
        if _poly_deg(self.num) > 0:
            pieces.append((npoly.polyroots(self.num), +1))
        if _poly_deg(self.den) > 0:
            pieces.append((npoly.polyroots(self.den), -1))
        all_pts = np.concatenate([r for r, _ in pieces]) if pieces else np.array([])
        scale = max(1.0, float(np.max(np.abs(all_pts))) if all_pts.size else 1.0)
        merged: list[tuple[complex, int]] = []
        for roots, sign in pieces:
            for point, mult in _cluster_roots(roots, 1e-7 * scale):
                for i, (q, m) in enumerate(merged):
                    if abs(point - q) < 1e-7 * scale:
                        merged[i] = (q, m + sign * mult)
                        break
                else:
                    merged.append((point, sign * mult))
        entries = [(p, m) for p, m in merged if m != 0]
        inf_mult = _poly_deg(self.den) - _poly_deg(self.num)
        if inf_mult != 0:
            entries.append((INFINITY, inf_mult))
        return entries

    def eval(self, z):
        return (
            npoly.polyval(z, self._dnum) / npoly.polyval(z, self.num)
            - npoly.polyval(z, self._dden) / npoly.polyval(z, self.den)
        )

    def finite_poles(self) -> list[complex]:
        return [p for p, _ in self.divisor if p is not INFINITY]

    def has_pole_at(self, p: PolePoint, lattice=None) -> bool:
        if p is INFINITY:
            return any(q is INFINITY for q, _ in self.divisor)
        return any(
            q is not INFINITY and abs(p - q) < POLE_MATCH_TOL
            for q, _ in self.divisor
        )

    def residue_at(self, p: PolePoint) -> complex:
        for q, m in self.divisor:
            if q is INFINITY:
                if p is INFINITY:
                    return complex(m)
            elif p is not INFINITY and abs(p - q) < POLE_MATCH_TOL:
                return complex(m)
        return 0.0 + 0.0j

    def value(self, z: PolePoint) -> complex:
        """f(z) itself, with the leading-coefficient ratio at infinity."""
        if z is INFINITY:
            dn, dd = _poly_deg(self.num), _poly_deg(self.den)
            if dn > dd:
                raise ZeroDivisionError("f has a pole at infinity")
            if dn < dd:
                return 0.0 + 0.0j
            return complex(self.num[dn] / self.den[dd])
        return complex(
            npoly.polyval(z, self.num) / npoly.polyval(z, self.den)
        )

    def pullback_inverse(self) -> "DlogForm":
        """dlog f in the chart w = 1/z, i.e. dlog of f(1/w)."""
        dn, dd = _poly_deg(self.num), _poly_deg(self.den)
        revnum = self.num[: dn + 1][::-1]
        revden = self.den[: dd + 1][::-1]
        if dd > dn:
            revnum = npoly.polymul(revnum, [0.0] * (dd - dn) + [1.0])
        elif dn > dd:
            revden = npoly.polymul(revden, [0.0] * (dn - dd) + [1.0])
        return DlogForm(revnum, revden)

    def __repr__(self):
        return f"DlogForm(num={self.num.tolist()}, den={self.den.tolist()})"


class EllipticThirdKindForm(MeromorphicForm):
    """(zeta(z-a) - zeta(z-b)) dz on C/(Z + tau*Z): residue +1 at a,
    -1 at b, and the coefficient function is exactly lattice-periodic."""

    def __init__(self, lattice: Lattice, a: complex, b: complex):
        self.lattice = lattice
        self.a = complex(a)
        self.b = complex(b)
        if lattice.same_point(self.a, self.b):
            raise ValueError("a and b coincide modulo the lattice")

    def eval(self, z):
        return self.lattice.zeta(z - self.a) - self.lattice.zeta(z - self.b)

    def finite_poles(self) -> list[complex]:
        return [self.a, self.b]

    def has_pole_at(self, p: PolePoint, lattice=None) -> bool:
        if p is INFINITY:
            return False
        return self.lattice.same_point(p, self.a) or self.lattice.same_point(
            p, self.b
        )

    def residue_at(self, p: PolePoint) -> complex:
        if p is INFINITY:
            return 0.0 + 0.0j
        if self.lattice.same_point(p, self.a):
            return 1.0 + 0.0j
        if self.lattice.same_point(p, self.b):
            return -1.0 + 0.0j
        return 0.0 + 0.0j

    def guarded_eval(self, z: complex) -> complex:
        d = float(
            min(
                self.lattice.reduced_abs(np.asarray(z - self.a)),
                self.lattice.reduced_abs(np.asarray(z - self.b)),
            )
        )
        if d < EVAL_CLEARANCE:
            raise PoleProximityError(
                f"evaluation within {d:.2e} of an elliptic pole"
            )
        return self.eval(z)

    def __repr__(self):
        return f"EllipticThirdKindForm(a={self.a}, b={self.b})"


# ---------------------------------------------------------------------------
# Pole bookkeeping
# ---------------------------------------------------------------------------


def eval_form(form: MeromorphicForm, z: complex) -> complex:
    """Coefficient function value g(z); rejects z within 1e-9 of a pole."""
    return form.guarded_eval(z)


def residue_at(form: MeromorphicForm, p: PolePoint) -> complex:
    return form.residue_at(p)


def pole_set(
    forms: Sequence[MeromorphicForm],
    lattice: Lattice | None = None,
    include_infinity: bool = True,
) -> list[tuple[PolePoint, list[complex]]]:
    """De-duplicated pole list with per-form residues.

    Includes the point at infinity whenever a sphere-chart form has a
    pole there (raising if that pole is not simple).
    """

    def same(a: complex, b: complex) -> bool:
        if lattice is not None:
            return lattice.same_point(a, b)
        return abs(a - b) < POLE_MATCH_TOL

    points: list[PolePoint] = []
    for form in forms:
        for p in form.finite_poles():
            if not any(q is not INFINITY and same(p, q) for q in points):
                points.append(p)
    if include_infinity and any(f.has_pole_at(INFINITY) for f in forms):
        points.append(INFINITY)
    out: list[tuple[PolePoint, list[complex]]] = []
    for p in points:
        res = []
        for form in forms:
            if p is INFINITY:
                res.append(form.residue_at(INFINITY))
            else:
                res.append(form.residue_at(p))
        out.append((p, res))
    return out


def check_disjoint_poles(
    forms: Sequence[MeromorphicForm], lattice: Lattice | None = None
) -> None:
    """Raise unless every pole belongs to exactly one form.  On a torus
    (lattice given) the sphere point at infinity does not exist."""
    for point, residues in pole_set(
        forms, lattice=lattice, include_infinity=lattice is None
    ):
        owners = [i for i, r in enumerate(residues) if abs(r) > 1e-12]
        if len(owners) > 1:
            raise ValueError(
                f"forms {owners} share the pole {point}; "
                "theorem requires pairwise disjoint poles"
            )


def weierstrass_zeta_eval(lattice: Lattice, z: complex) -> complex:
    if float(lattice.reduced_abs(np.asarray(z))) < 1e-13:
        raise ZeroDivisionError("z lies on the lattice")
    return complex(lattice.zeta(z))
