#!/usr/bin/env python3
"""A cone field that rotates with the flow: the harmonic oscillator.

No constant cone works for a rotation, but a state-dependent quarter-plane
whose facets turn with the angular coordinate is invariant: both facet
values are exact constants of the prolonged motion. The invariance is
borderline, though - distances between pushed tangent rays never shrink -
so the strictness checker reports NonStrict and the dominant-direction
iteration refuses to converge.
"""

import numpy as np

from coneflow import NonContractive, check_strict_positivity, hilbert_distance, validate_transport, variational_flow
from coneflow.models import ModelName, ModelSpec, make_model, oscillator_cone_at
from coneflow.pffield import pf_vector_at


def main():
    osc = make_model(ModelSpec(ModelName.HARMONIC_OSCILLATOR_ROTATING_CONE))

    print("== transport consistency (rotation by the angle difference) ==")
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(25):
        x1, x2 = rng.normal(size=2) + 2.0, rng.normal(size=2) + 2.0
        worst = max(worst, validate_transport(osc.cone_field, x1, x2))
    print(f"  worst round-trip defect over 25 random pairs: {worst:.2e}")

    print("\n== facet values along a prolonged trajectory ==")
    x0 = np.array([1.2, 0.4])
    dx0 = np.array([0.3, 0.8])
    traj, tangents, _ = variational_flow(osc, x0, dx0, t_span=(0.0, 20.0), h=1e-3)
    k0 = oscillator_cone_at(x0).halfspaces @ dx0
    print(f"  facet values at t=0: {np.round(k0, 6)}")
    for t_probe in (5.0, 10.0, 20.0):
        idx = int(np.argmin(np.abs(traj.times - t_probe)))
        k_t = oscillator_cone_at(traj.states[idx]).halfspaces @ tangents[idx]
        print(f"  facet values at t={t_probe:>4}: {np.round(k_t, 6)}   drift {np.max(np.abs(k_t - k0)):.2e}")

    print("\n== distances between pushed rays never shrink ==")
    seeds = np.array([[0.9, 0.1], [0.2, 0.7]]) @ oscillator_cone_at(x0).generators
    _, tan_a, _ = variational_flow(osc, x0, seeds[0], t_span=(0.0, 20.0), h=1e-3, renormalize=True)
    _, tan_b, _ = variational_flow(osc, x0, seeds[1], t_span=(0.0, 20.0), h=1e-3, renormalize=True)
    for t_probe in (0.0, 7.0, 20.0):
        idx = int(np.argmin(np.abs(traj.times - t_probe)))
        d = hilbert_distance(oscillator_cone_at(traj.states[idx]), tan_a[idx], tan_b[idx]).value
        print(f"  t={t_probe:>4}: pairwise Hilbert distance {d:.10f}")

    print("\n== verdicts ==")
    report = check_strict_positivity(osc, [x0], T=2.0, h=1e-2)
    print(f"  strictness: {report.strict_verdict.value} (pointwise {report.pointwise_verdict.value})")
    try:
        pf_vector_at(osc, x0, window=1.0, tol=1e-6, h=1e-2, max_doublings=3)
        print("  direction field: unexpectedly converged")
    except NonContractive as exc:
        print(f"  direction field: NonContractive ({exc})")


if __name__ == "__main__":
    main()
