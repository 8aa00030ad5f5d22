#!/usr/bin/env python3
"""Cones and the Hilbert projective metric, step by step.

Builds two planar cones (the positive orthant and a skewed two-facet cone),
tests membership, and walks through the extremal-multiplier construction of
the projective distance: M stretches one ray over the other, m shrinks it,
and log(M/m) is the distance between the rays. Boundary rays sit infinitely
far from everything else; the contraction ratio tanh(diameter/4) turns a
finite image diameter into a per-horizon contraction factor.
"""

import math

import numpy as np

from coneflow import (
    Cone,
    cone_contains,
    contraction_ratio,
    hilbert_bounds,
    hilbert_distance,
    projective_diameter,
)


def main():
    orthant = Cone.orthant(2)
    skewed = Cone.from_halfspaces([[1.0, 0.0], [1.0, 1.0]])

    print("== membership ==")
    for cone, name in ((orthant, "orthant"), (skewed, "skewed")):
        for v in ([1.0, 1.0], [1.0, 0.0], [1.0, -2.0]):
            inside = cone_contains(cone, v)
            interior = cone_contains(cone, v, strict=True)
            print(f"  {name:<8} v={v!s:<12} inside={inside!s:<5} interior={interior}")

    print("\n== extremal multipliers and distance ==")
    pairs = [([2.0, 1.0], [1.0, 1.0]), ([3.0, 3.0], [1.0, 1.0]), ([1.0, 1.0], [1.0, 0.0])]
    for dx, dy in pairs:
        M, m = hilbert_bounds(orthant, dx, dy)
        d = hilbert_distance(orthant, dx, dy).value
        print(f"  dx={dx!s:<12} dy={dy!s:<12} M={M:<8g} m={m:<8g} d={d:g}")

    print("\n== diameter of a sample bundle ==")
    bundle = [[2.0, 1.0], [1.0, 1.0], [1.0, 2.0]]
    dia = projective_diameter(orthant, bundle)
    print(f"  bundle {bundle} -> diameter {dia:.6f} (log 4 = {math.log(4):.6f})")
    print(f"  contraction ratio tanh(diameter/4) = {contraction_ratio(dia):.6f}")

    print("\n== scaling invariance ==")
    rng = np.random.default_rng(1)
    dx, dy = rng.uniform(0.2, 2.0, size=(2, 2))
    base = hilbert_distance(orthant, dx, dy).value
    scaled = hilbert_distance(orthant, 17.0 * dx, 0.003 * dy).value
    print(f"  d(dx, dy) = {base:.12f}")
    print(f"  d(17 dx, 0.003 dy) = {scaled:.12f}  (rays, not vectors)")


if __name__ == "__main__":
    main()
