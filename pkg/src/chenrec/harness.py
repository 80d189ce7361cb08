"""Scene files, check orchestration, and reports.

A scene is a JSON document describing the surface, the forms, the base
point, truncation degree and tolerances.  Complex numbers are [re, im]
pairs (bare numbers are accepted as reals) and polynomials are
coefficient arrays with the constant term first.  ``run_checks``
dispatches to the verification routines; failures of individual checks
are captured in the report and the run continues.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

from . import __version__
from .forms import (
    DlogForm,
    EllipticThirdKindForm,
    Lattice,
    MeromorphicForm,
    RationalForm,
)
from .reciprocity import (
    CheckResult,
    DefectReport,
    SceneError,
    SurfaceScene,
    global_reciprocity,
    residue_linear_check,
    riemann_bilinear_check,
    shuffle_check,
    triple_check,
    validate_scene,
    weil_check,
)

KNOWN_CHECKS = ("residue", "shuffle", "riemann", "weil", "triple", "global")

DEFAULT_TOLERANCES = {
    "residue": 1e-12,
    "shuffle": 1e-8,
    "riemann": 1e-6,
    "weil": 1e-10,
    "triple": 1e-6,
    "global": 1e-6,
}


class SceneFormatError(ValueError):
    pass


def _complex_from(value: Any, where: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(isinstance(x, (int, float)) for x in value)
    ):
        return complex(value[0], value[1])
    raise SceneFormatError(f"{where}: expected a number or [re, im] pair, got {value!r}")


def _poly_from(value: Any, where: str) -> list[complex]:
    if not isinstance(value, list) or not value:
        raise SceneFormatError(f"{where}: expected a nonempty coefficient array")
    return [_complex_from(v, f"{where}[{i}]") for i, v in enumerate(value)]


def _complex_out(z: complex) -> list[float]:
    return [z.real, z.imag]


@dataclass
class HarnessScene:
    """A loaded scene plus its requested checks and tolerances."""

    scene: SurfaceScene
    checks: list[str]
    tolerances: dict[str, float]
    name: str = ""

    def tolerance_for(self, check: str) -> float:
        if check in self.tolerances:
            return self.tolerances[check]
        if "default" in self.tolerances:
            return self.tolerances["default"]
        return DEFAULT_TOLERANCES[check]


def _build_form(
    entry: Any, lattice: Lattice | None, where: str
) -> MeromorphicForm:
    if not isinstance(entry, dict) or "type" not in entry:
        raise SceneFormatError(f"{where}: form entries need a 'type' field")
    kind = entry["type"]
    if kind == "rational":
        return RationalForm(
            _poly_from(entry.get("num"), f"{where}.num"),
            _poly_from(entry.get("den"), f"{where}.den"),
        )
    if kind == "dlog":
        return DlogForm(
            _poly_from(entry.get("num"), f"{where}.num"),
            _poly_from(entry.get("den"), f"{where}.den"),
        )
    if kind == "elliptic3k":
        if lattice is None:
            raise SceneFormatError(
                f"{where}: elliptic3k forms need a genus-1 surface with tau"
            )
        return EllipticThirdKindForm(
            lattice,
            _complex_from(entry.get("a"), f"{where}.a"),
            _complex_from(entry.get("b"), f"{where}.b"),
        )
    raise SceneFormatError(f"{where}: unknown form type {kind!r}")


def scene_from_dict(data: dict, name: str = "") -> HarnessScene:
    if not isinstance(data, dict):
        raise SceneFormatError("scene document must be a JSON object")
    surface = data.get("surface", {"genus": 0})
    genus = surface.get("genus")
    if genus not in (0, 1):
        raise SceneFormatError("surface.genus: must be 0 or 1")
    lattice = None
    if genus == 1:
        if "tau" not in surface:
            raise SceneFormatError("surface.tau: required for genus 1")
        tau = _complex_from(surface["tau"], "surface.tau")
        if tau.imag <= 0:
            raise SceneFormatError("surface.tau: imaginary part must be positive")
        lattice = Lattice(tau)
    if "basepoint" not in data:
        raise SceneFormatError("basepoint: required")
    base = _complex_from(data["basepoint"], "basepoint")
    entries = data.get("forms")
    if not isinstance(entries, list) or not entries:
        raise SceneFormatError("forms: need a nonempty array")
    forms = tuple(
        _build_form(entry, lattice, f"forms[{i}]")
        for i, entry in enumerate(entries)
    )
    truncation = data.get("truncation", 3)
    if not isinstance(truncation, int) or truncation < 1:
        raise SceneFormatError("truncation: must be a positive integer")
    keyhole = data.get("keyhole_epsilon", 1e-2)
    tolerances = dict(data.get("tolerances", {}))
    for key, value in tolerances.items():
        if key != "default" and key not in KNOWN_CHECKS:
            raise SceneFormatError(f"tolerances.{key}: unknown check")
        if not isinstance(value, (int, float)) or value <= 0:
            raise SceneFormatError(f"tolerances.{key}: must be positive")
    checks = list(data.get("checks", []))
    for c in checks:
        if c not in KNOWN_CHECKS:
            raise SceneFormatError(f"checks: unknown check {c!r}")
    scene = SurfaceScene(
        forms=forms,
        base=base,
        genus=genus,
        lattice=lattice,
        truncation=truncation,
        keyhole_epsilon=keyhole,
    )
    return HarnessScene(
        scene=scene, checks=checks, tolerances=tolerances, name=name
    )


def load_scene(path: str) -> HarnessScene:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise SceneFormatError(f"scene file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"scene file is not valid JSON: {exc}")
    return scene_from_dict(data, name=path)


# ---------------------------------------------------------------------------
# checks and reports
# ---------------------------------------------------------------------------


@dataclass
class CheckEntry:
    name: str
    passed: bool
    defect: float | None
    tolerance: float
    runtime: float
    error: str | None = None
    details: dict = field(default_factory=dict)


@dataclass
class Report:
    version: str
    scene: str
    entries: list[CheckEntry]
    runtime: float

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


def _sanitize(value):
    if isinstance(value, complex):
        return _complex_out(value)
    if isinstance(value, dict):
        return {str(k): _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, float) or isinstance(value, (int, str, bool)):
        return value
    return str(value)


def _run_one(hs: HarnessScene, check: str) -> CheckEntry:
    scene = hs.scene
    tol = hs.tolerance_for(check)
    started = time.perf_counter()
    try:
        if check == "residue":
            result = residue_linear_check(scene, tol=tol)
        elif check == "shuffle":
            result = shuffle_check(scene, tol=tol)
        elif check == "riemann":
            result = riemann_bilinear_check(scene, tol=tol)
        elif check == "triple":
            result = triple_check(scene, tol=tol)
        elif check == "global":
            result = global_reciprocity(scene, tol=tol)
        elif check == "weil":
            f, g = scene.forms[:2]
            if not isinstance(f, DlogForm) or not isinstance(g, DlogForm):
                raise SceneError("weil check needs two dlog forms")
            result = weil_check(f, g, tol=tol, cross_validate_base=scene.base)
        else:
            raise SceneError(f"unknown check {check!r}")
    except Exception as exc:  # captured per check, the run continues
        return CheckEntry(
            name=check,
            passed=False,
            defect=None,
            tolerance=tol,
            runtime=time.perf_counter() - started,
            error=f"{type(exc).__name__}: {exc}",
        )
    elapsed = time.perf_counter() - started
    if isinstance(result, DefectReport):
        details = {
            "max_per_degree": result.max_per_degree,
            **result.details,
        }
    else:
        details = dict(result.details)
    return CheckEntry(
        name=check,
        passed=result.passed,
        defect=result.defect,
        tolerance=tol,
        runtime=elapsed,
        details=_sanitize(details),
    )


def run_checks(hs: HarnessScene, checks: Sequence[str] | None = None) -> Report:
    started = time.perf_counter()
    requested = list(checks) if checks is not None else list(hs.checks)
    for c in requested:
        if c not in KNOWN_CHECKS:
            raise SceneFormatError(f"unknown check {c!r}")
    validate_scene(hs.scene)
    entries = [_run_one(hs, c) for c in requested]
    return Report(
        version=__version__,
        scene=hs.name,
        entries=entries,
        runtime=time.perf_counter() - started,
    )


def report_to_dict(report: Report) -> dict:
    return {
        "version": report.version,
        "scene": report.scene,
        "passed": report.passed,
        "runtime": report.runtime,
        "checks": [
            {
                "name": e.name,
                "passed": e.passed,
                "defect": e.defect,
                "tolerance": e.tolerance,
                "runtime": e.runtime,
                "error": e.error,
                "details": e.details,
            }
            for e in report.entries
        ],
    }


def report_from_dict(data: dict) -> Report:
    entries = [
        CheckEntry(
            name=c["name"],
            passed=c["passed"],
            defect=c["defect"],
            tolerance=c["tolerance"],
            runtime=c["runtime"],
            error=c.get("error"),
            details=c.get("details", {}),
        )
        for c in data["checks"]
    ]
    return Report(
        version=data["version"],
        scene=data["scene"],
        entries=entries,
        runtime=data["runtime"],
    )


def emit_report(report: Report, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(report_to_dict(report), indent=2)
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [f"chenrec {report.version}  scene={report.scene or '-'}"]
    for e in report.entries:
        status = "PASS" if e.passed else "FAIL"
        if e.error is not None:
            lines.append(
                f"  {e.name:<8} {status}  error: {e.error}  ({e.runtime:.2f}s)"
            )
        else:
            lines.append(
                f"  {e.name:<8} {status}  defect={e.defect:.3e} "
                f"tol={e.tolerance:.1e}  ({e.runtime:.2f}s)"
            )
    verdict = "all checks passed" if report.passed else "FAILURES present"
    lines.append(f"  -> {verdict} in {report.runtime:.2f}s")
    return "\n".join(lines)
