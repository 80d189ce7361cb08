"""Piecewise-smooth paths in the complex plane.

Segments expose a smooth parametrization z(t) on [0, 1] together with
its derivative, which is all the transport integrators need.  Torus
paths are represented in the universal cover: the two cycle loops of a
lattice (1, tau) based at p0 are the straight segments p0 -> p0+1 and
p0 -> p0+tau, and the commutator loop is the boundary rectangle.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

MATCH_RTOL = 1e-12  # relative endpoint-chaining tolerance


class PathError(ValueError):
    pass


def _close(a: complex, b: complex) -> bool:
    scale = max(1.0, abs(a), abs(b))
    return abs(a - b) <= MATCH_RTOL * scale


class PathSegment:
    """Base class; subclasses implement point/velocity on [0, 1]."""

    @property
    def start(self) -> complex:
        return self.point(0.0)

    @property
    def end(self) -> complex:
        return self.point(1.0)

    def point(self, t: float) -> complex:
        raise NotImplementedError

    def velocity(self, t: float) -> complex:
        raise NotImplementedError

    def point_vec(self, t: np.ndarray) -> np.ndarray:
        return np.array([self.point(float(s)) for s in t], dtype=complex)

    def velocity_vec(self, t: np.ndarray) -> np.ndarray:
        return np.array([self.velocity(float(s)) for s in t], dtype=complex)

    def reversed(self) -> "PathSegment":
        raise NotImplementedError

    def min_distance(self, z0: complex) -> float:
        """Distance from z0 to the segment (exact for lines/arcs)."""
        ts = np.linspace(0.0, 1.0, 257)
        return float(min(abs(self.point(float(t)) - z0) for t in ts))


@dataclass(frozen=True)
class LineSegment(PathSegment):
    z0: complex
    z1: complex

    def point(self, t: float) -> complex:
        return self.z0 + t * (self.z1 - self.z0)

    def velocity(self, t: float) -> complex:
        return self.z1 - self.z0

    def point_vec(self, t: np.ndarray) -> np.ndarray:
        return self.z0 + np.asarray(t) * (self.z1 - self.z0)

    def velocity_vec(self, t: np.ndarray) -> np.ndarray:
        return np.full(np.shape(t), self.z1 - self.z0, dtype=complex)

    def reversed(self) -> "LineSegment":
        return LineSegment(self.z1, self.z0)

    def min_distance(self, z0: complex) -> float:
        d = self.z1 - self.z0
        denom = abs(d) ** 2
        if denom == 0.0:
            return abs(z0 - self.z0)
        t = ((z0 - self.z0) * d.conjugate()).real / denom
        t = min(1.0, max(0.0, t))
        return abs(self.point(t) - z0)


@dataclass(frozen=True)
class ArcSegment(PathSegment):
    """Circular arc; angle1 < angle0 traverses clockwise."""

    center: complex
    radius: float
    angle0: float
    angle1: float

    def point(self, t: float) -> complex:
        theta = self.angle0 + t * (self.angle1 - self.angle0)
        return self.center + self.radius * cmath.exp(1j * theta)

    def velocity(self, t: float) -> complex:
        theta = self.angle0 + t * (self.angle1 - self.angle0)
        return self.radius * 1j * (self.angle1 - self.angle0) * cmath.exp(1j * theta)

    def point_vec(self, t: np.ndarray) -> np.ndarray:
        theta = self.angle0 + np.asarray(t) * (self.angle1 - self.angle0)
        return self.center + self.radius * np.exp(1j * theta)

    def velocity_vec(self, t: np.ndarray) -> np.ndarray:
        theta = self.angle0 + np.asarray(t) * (self.angle1 - self.angle0)
        sweep = self.angle1 - self.angle0
        return self.radius * 1j * sweep * np.exp(1j * theta)

    def reversed(self) -> "ArcSegment":
        return ArcSegment(self.center, self.radius, self.angle1, self.angle0)

    def min_distance(self, z0: complex) -> float:
        rel = z0 - self.center
        rho = abs(rel)
        if rho == 0.0:
            return self.radius
        phi = cmath.phase(rel)
        lo, hi = sorted((self.angle0, self.angle1))
        # nearest representative of phi inside [lo, hi] modulo 2*pi
        k_lo = math.ceil((lo - phi) / (2 * math.pi))
        k_hi = math.floor((hi - phi) / (2 * math.pi))
        if k_lo <= k_hi:
            return abs(rho - self.radius)
        cands = [self.point(0.0), self.point(1.0)]
        return min(abs(z0 - c) for c in cands)


class SplineSegment(PathSegment):
    """Smooth curve through sample points (cubic spline interpolation)."""

    def __init__(self, points: Sequence[complex]):
        pts = [complex(p) for p in points]
        if len(pts) < 2:
            raise PathError("spline segment needs at least two points")
        self._points = pts
        ts = np.linspace(0.0, 1.0, len(pts))
        self._spline = CubicSpline(ts, np.asarray(pts, dtype=complex))
        self._deriv = self._spline.derivative()

    def point(self, t: float) -> complex:
        return complex(self._spline(t))

    def velocity(self, t: float) -> complex:
        return complex(self._deriv(t))

    def point_vec(self, t: np.ndarray) -> np.ndarray:
        return np.asarray(self._spline(np.asarray(t)), dtype=complex)

    def velocity_vec(self, t: np.ndarray) -> np.ndarray:
        return np.asarray(self._deriv(np.asarray(t)), dtype=complex)

    def reversed(self) -> "SplineSegment":
        return SplineSegment(self._points[::-1])

    def __repr__(self) -> str:
        return f"SplineSegment({len(self._points)} points)"


@dataclass(frozen=True)
class Path:
    """Ordered chain of segments with matching endpoints."""

    segments: tuple[PathSegment, ...]

    def __post_init__(self):
        if not self.segments:
            raise PathError("path needs at least one segment")
        for a, b in zip(self.segments, self.segments[1:]):
            if not _close(a.end, b.start):
                raise PathError(
                    f"segment endpoints do not chain: {a.end} vs {b.start}"
                )

    @classmethod
    def from_segments(cls, segments: Sequence[PathSegment]) -> "Path":
        return cls(tuple(segments))

    @classmethod
    def line(cls, z0: complex, z1: complex) -> "Path":
        return cls((LineSegment(z0, z1),))

    @classmethod
    def polyline(cls, points: Sequence[complex]) -> "Path":
        segs = [LineSegment(a, b) for a, b in zip(points, points[1:])]
        return cls(tuple(segs))

    @property
    def start(self) -> complex:
        return self.segments[0].start

    @property
    def end(self) -> complex:
        return self.segments[-1].end

    @property
    def is_closed(self) -> bool:
        return _close(self.start, self.end)

    def point(self, t: float) -> complex:
        """Global parametrization: segment k covers [k/m, (k+1)/m]."""
        m = len(self.segments)
        if t >= 1.0:
            return self.segments[-1].point(1.0)
        if t <= 0.0:
            return self.segments[0].point(0.0)
        scaled = t * m
        k = min(int(scaled), m - 1)
        return self.segments[k].point(scaled - k)

    def velocity(self, t: float) -> complex:
        m = len(self.segments)
        t = min(1.0, max(0.0, t))
        scaled = t * m
        k = min(int(scaled), m - 1)
        return self.segments[k].velocity(scaled - k) * m

    def point_vec(self, t: np.ndarray) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        m = len(self.segments)
        scaled = t * m
        idx = np.minimum(scaled.astype(int), m - 1)
        out = np.empty(t.shape, dtype=complex)
        for k, seg in enumerate(self.segments):
            mask = idx == k
            if np.any(mask):
                out[mask] = seg.point_vec(scaled[mask] - k)
        return out

    def velocity_vec(self, t: np.ndarray) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        m = len(self.segments)
        scaled = t * m
        idx = np.minimum(scaled.astype(int), m - 1)
        out = np.empty(t.shape, dtype=complex)
        for k, seg in enumerate(self.segments):
            mask = idx == k
            if np.any(mask):
                out[mask] = seg.velocity_vec(scaled[mask] - k) * m
        return out

    def min_distance(self, z0: complex) -> float:
        return min(seg.min_distance(z0) for seg in self.segments)

    def validate_against_poles(
        self, poles: Sequence[complex], threshold: float
    ) -> None:
        for p in poles:
            d = self.min_distance(p)
            if d < threshold:
                raise PathError(
                    f"path passes within {d:.3e} of pole {p} "
                    f"(threshold {threshold:.3e})"
                )


def compose_paths(p1: Path, p2: Path) -> Path:
    if not _close(p1.end, p2.start):
        raise PathError(f"cannot compose: {p1.end} != {p2.start}")
    return Path(p1.segments + p2.segments)


def compose_many(paths: Sequence[Path]) -> Path:
    result = paths[0]
    for p in paths[1:]:
        result = compose_paths(result, p)
    return result


def reverse_path(p: Path) -> Path:
    return Path(tuple(seg.reversed() for seg in reversed(p.segments)))


def circle_loop(center: complex, radius: float, start_angle: float = 0.0) -> Path:
    """Closed counterclockwise circle, one full turn."""
    if radius <= 0:
        raise PathError("radius must be positive")
    return Path(
        (ArcSegment(center, radius, start_angle, start_angle + 2 * math.pi),)
    )


@dataclass(frozen=True)
class KeyholeSpec:
    """Approach ray from base point P to distance epsilon of the pole Q,
    one counterclockwise epsilon-circle, and the return ray."""

    base: complex
    pole: complex
    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise PathError("epsilon must be positive")
        if self.epsilon >= abs(self.base - self.pole):
            raise PathError(
                f"epsilon {self.epsilon} >= |P-Q| = {abs(self.base - self.pole)}"
            )

    @property
    def approach_angle(self) -> float:
        return cmath.phase(self.base - self.pole)

    @property
    def circle_entry(self) -> complex:
        u = (self.base - self.pole) / abs(self.base - self.pole)
        return self.pole + self.epsilon * u

    def approach_ray(self) -> Path:
        """Straight ray from the base point to the circle entry."""
        return Path.line(self.base, self.circle_entry)

    def full_ray(self) -> Path:
        """The limit ray from the base point all the way to the pole."""
        return Path.line(self.base, self.pole)

    def ray_to(self, epsilon: float) -> Path:
        u = (self.base - self.pole) / abs(self.base - self.pole)
        return Path.line(self.base, self.pole + epsilon * u)


def keyhole_loop(spec: KeyholeSpec) -> Path:
    entry = spec.circle_entry
    theta = spec.approach_angle
    return Path(
        (
            LineSegment(spec.base, entry),
            ArcSegment(spec.pole, spec.epsilon, theta, theta + 2 * math.pi),
            LineSegment(entry, spec.base),
        )
    )


def winding_number(p: Path, z0: complex, min_clearance: float = 1e-9) -> int:
    """Winding of a closed path about z0, i.e. (1/2*pi*i) * contour
    integral of dz/(z - z0) rounded to the nearest integer.

    Computed by continuous argument tracking with adaptive refinement;
    exact for any sampling fine enough that successive increments stay
    below pi/2.
    """
    if not p.is_closed:
        raise PathError("winding number needs a closed path")
    if p.min_distance(z0) < min_clearance:
        raise PathError(f"point {z0} too close to the path")
    total = 0.0
    for seg in p.segments:
        samples = 64
        for _ in range(20):
            ts = np.linspace(0.0, 1.0, samples + 1)
            zs = np.array([seg.point(float(t)) for t in ts]) - z0
            increments = np.angle(zs[1:] / zs[:-1])
            if np.max(np.abs(increments)) < math.pi / 2:
                break
            samples *= 2
        else:
            raise PathError("argument tracking failed to refine")
        total += float(np.sum(increments))
    return round(total / (2 * math.pi))


def angular_order(base: complex, points: Sequence[complex]) -> list[int]:
    """Indices of points sorted counterclockwise by angle seen from base."""
    def key(i: int) -> float:
        return cmath.phase(points[i] - base) % (2 * math.pi)

    return sorted(range(len(points)), key=key)


def torus_alpha(p0: complex) -> Path:
    return Path.line(p0, p0 + 1.0)


def torus_beta(p0: complex, tau: complex) -> Path:
    return Path.line(p0, p0 + tau)


def torus_commutator_rectangle(p0: complex, tau: complex) -> Path:
    """Boundary of the fundamental parallelogram, counterclockwise,
    based at p0: p0 -> p0+1 -> p0+1+tau -> p0+tau -> p0."""
    return Path.polyline([p0, p0 + 1.0, p0 + 1.0 + tau, p0 + tau, p0])
