#!/usr/bin/env python3
"""Classifying where trajectories end up.

Certified cone contraction pins the shape of every omega-limit set: the tail
of a trajectory is either a tight cluster (fixed point) or a recurrent curve
whose velocity aligns with the dominant direction field (limit cycle). The
driven pendulum shows both regimes as the torque crosses 1; the bistable
network shows the almost-everywhere-convergence picture; and the tangency
diagnostic at its saddle confirms the heteroclinic arcs leave and arrive
along dominant eigendirections.
"""

import numpy as np

from coneflow import ClassifySettings, classify_limit_set, invariant_region_check, saddle_tangency_diagnostic
from coneflow.limitsets import verdict_table
from coneflow.models import ModelName, ModelSpec, make_model

SETTINGS = ClassifySettings(t_max=160.0, h=2e-2, tail_fraction=0.6, profile_points=8)


def main():
    print("== driven pendulum: torque sweep ==")
    reports = []
    for u in (0.5, 0.9, 1.2, 1.5):
        sys_ = make_model(ModelSpec(ModelName.PENDULUM, {"k": 3.0, "u": u}))
        reports.append(classify_limit_set(sys_, None, [0.1, 0.0], SETTINGS))
    print(verdict_table(reports), end="")

    print("\n== bistable network: ten random seeds ==")
    bist = make_model(ModelSpec(ModelName.MONOTONE_BISTABLE))
    rng = np.random.default_rng(3)
    outcomes = {}
    for _ in range(10):
        x0 = rng.uniform(-3.0, 3.0, size=2)
        report = classify_limit_set(bist, None, x0, ClassifySettings(t_max=100.0, h=2e-2, tail_fraction=0.3))
        key = (report.verdict.value, tuple(np.round(report.location, 3)) if report.location is not None else None)
        outcomes[key] = outcomes.get(key, 0) + 1
    for (verdict, location), count in sorted(outcomes.items()):
        print(f"  {count:>2} seeds -> {verdict} at {location}")

    print("\n== saddle tangency at the bistable origin ==")
    diag = saddle_tangency_diagnostic(bist, None, [0.0, 0.0], t_max=60.0, h=1e-2)
    print(f"  eigenvalues {np.round(diag.eigenvalues.real, 4)}")
    print(f"  unstable direction {np.round(diag.unstable_direction, 6)}")
    for arc in diag.arcs:
        print(f"  arc sign {arc.sign:+.0f}: {arc.status}, arrival angle {arc.arrival_angle:.2e} rad")

    print("\n== cone-interior trapping region (large torque) ==")
    pend = make_model(ModelSpec(ModelName.PENDULUM, {"k": 3.0, "u": 5.5}))
    ok, margin = invariant_region_check(pend, None, [(0.0, 2.0 * np.pi), (1.4, 2.2)], samples=150, h=2e-2)
    print(f"  band S x [1.4, 2.2]: invariant+interior={ok}, worst facet value of f = {margin:.4f}")


if __name__ == "__main__":
    main()
