#!/usr/bin/env python3
"""Regenerate the sample scene files under scenes/."""

import cmath
import json
import os

from chenrec.forms import RationalForm


def c(z):
    z = complex(z)
    return [z.real, z.imag]


def poly(coeffs):
    return [c(v) for v in coeffs]


def rational_from_residues(pairs):
    form = RationalForm.from_residues(pairs)
    return {"type": "rational", "num": poly(form.num), "den": poly(form.den)}


def main():
    out_dir = os.path.join(os.path.dirname(__file__), "..", "scenes")
    os.makedirs(out_dir, exist_ok=True)

    scenes = {}

    # one dlog-type pole pair on the sphere, pole at infinity included
    scenes["sphere_dzz.json"] = {
        "surface": {"genus": 0},
        "basepoint": c(1.5 + 0.2j),
        "truncation": 3,
        "forms": [{"type": "rational", "num": poly([1]), "den": poly([0, 1])}],
        "checks": ["residue", "shuffle", "global"],
        "tolerances": {"global": 1e-6, "shuffle": 1e-8, "residue": 1e-12},
    }

    # two difference-of-dlog forms, poles grouped in angular sectors
    w1 = rational_from_residues(
        [(2 * cmath.exp(0.2j), 1.0), (3 * cmath.exp(0.5j), -1.0)]
    )
    w2 = rational_from_residues(
        [(2 * cmath.exp(1.8j), 1.0), (3 * cmath.exp(2.2j), -1.0)]
    )
    scenes["sphere_bilinear.json"] = {
        "surface": {"genus": 0},
        "basepoint": c(0),
        "truncation": 2,
        "forms": [w1, w2],
        "checks": ["residue", "shuffle", "riemann", "global"],
        "tolerances": {"riemann": 1e-6, "global": 1e-6},
    }

    # three sector-separated difference forms for the triple law
    w3 = rational_from_residues(
        [(2 * cmath.exp(3.6j), 1.0), (3 * cmath.exp(4.0j), -1.0)]
    )
    scenes["sphere_triple.json"] = {
        "surface": {"genus": 0},
        "basepoint": c(0),
        "truncation": 3,
        "forms": [w1, w2, w3],
        "checks": ["residue", "triple", "global"],
        "tolerances": {"triple": 1e-6, "global": 1e-6},
    }

    # the worked Weil pair f = z, g = (z-1)/(z+1)
    scenes["sphere_weil.json"] = {
        "surface": {"genus": 0},
        "basepoint": c(0.4 + 1.1j),
        "truncation": 2,
        "forms": [
            {"type": "dlog", "num": poly([0, 1]), "den": poly([1])},
            {"type": "dlog", "num": poly([-1, 1]), "den": poly([1, 1])},
        ],
        "checks": ["weil"],
        "tolerances": {"weil": 1e-10},
    }

    # torus with two third-kind forms, square lattice
    p0 = 0.1 + 0.1j
    scenes["torus_bilinear.json"] = {
        "surface": {"genus": 1, "tau": c(1j)},
        "basepoint": c(p0),
        "truncation": 3,
        "forms": [
            {
                "type": "elliptic3k",
                "a": c(p0 + 0.55 * cmath.exp(0.30j)),
                "b": c(p0 + 0.75 * cmath.exp(0.55j)),
            },
            {
                "type": "elliptic3k",
                "a": c(p0 + 0.60 * cmath.exp(0.85j)),
                "b": c(p0 + 0.70 * cmath.exp(1.15j)),
            },
        ],
        "checks": ["residue", "riemann", "global"],
        "tolerances": {"riemann": 1e-5, "global": 1e-4},
    }

    # torus triple-form scene on a generic lattice
    tau = 0.3 + 1.1j
    scenes["torus_triple.json"] = {
        "surface": {"genus": 1, "tau": c(tau)},
        "basepoint": c(p0),
        "truncation": 3,
        "forms": [
            {
                "type": "elliptic3k",
                "a": c(p0 + 0.50 * cmath.exp(0.25j)),
                "b": c(p0 + 0.72 * cmath.exp(0.45j)),
            },
            {
                "type": "elliptic3k",
                "a": c(p0 + 0.55 * cmath.exp(0.70j)),
                "b": c(p0 + 0.72 * cmath.exp(0.90j)),
            },
            {
                "type": "elliptic3k",
                "a": c(p0 + 0.52 * cmath.exp(1.10j)),
                "b": c(p0 + 0.70 * cmath.exp(1.25j)),
            },
        ],
        "checks": ["residue", "triple", "global"],
        "tolerances": {"triple": 1e-4, "global": 1e-4},
    }

    for name, data in scenes.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2)
            fh.write("\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
