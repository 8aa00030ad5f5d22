"""Positivity certificate tests: facet derivatives, Metzler shortcut, strictness."""

import math
from types import SimpleNamespace

import numpy as np
import pytest

from coneflow.dynsys import ChartTopology, SystemDef, TimeKind
from coneflow.errors import InvalidCone, InvalidInput, WrongConeKind
from coneflow.geometry import Cone, ConeField, cone_contains
from coneflow.integrate import variational_flow
from coneflow.models import ModelName, ModelSpec, make_model
from coneflow.positivity import (
    StrictVerdict,
    Verdict,
    boundary_samples,
    check_pointwise_positivity,
    check_strict_positivity,
    metzler_check,
)


def pendulum(k=3.0, u=0.0):
    return make_model(ModelSpec(ModelName.PENDULUM, {"k": k, "u": u}))


def pendulum_states(n_theta=13, vs=(-1.0, 0.0, 1.0)):
    thetas = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    return [np.array([th, v]) for th in thetas for v in vs]


class TestBoundarySamples:
    def test_pendulum_rays(self):
        sys = pendulum()
        samples = boundary_samples(sys.cone_field, [0.3, 0.0])
        rays = sorted(tuple(np.round(s.dx, 9)) for s in samples)
        s2 = 1.0 / math.sqrt(2.0)
        expect = sorted([(0.0, 1.0), (round(s2, 9), -round(s2, 9))])
        assert np.allclose(rays, expect)

    def test_orthant_2d(self):
        field = ConeField.constant(Cone.orthant(2))
        samples = boundary_samples(field, [0.0, 0.0])
        rays = sorted(tuple(np.round(s.dx, 12)) for s in samples)
        assert rays == [(0.0, 1.0), (1.0, 0.0)]

    def test_orthant_3d_per_facet(self):
        field = ConeField.constant(Cone.orthant(3))
        samples = boundary_samples(field, np.zeros(3), per_facet=5)
        assert len(samples) == 15
        for s in samples:
            vals = np.sort(np.abs(s.dx))
            assert s.dx[s.facet_index] == pytest.approx(0.0, abs=1e-12)
            assert np.all(s.dx >= -1e-12)
            assert np.linalg.norm(s.dx) == pytest.approx(1.0, abs=1e-12)
            assert vals[0] <= 1e-12  # one zero coordinate

    def test_degenerate_cone_rejected(self):
        fake_cone = SimpleNamespace(
            dim=2,
            halfspaces=np.array([[1.0, 0.0]]),
            generators=np.array([[1.0, 0.0]]),
        )
        field = SimpleNamespace(cone_at=lambda x: fake_cone)
        with pytest.raises(InvalidCone):
            boundary_samples(field, [0.0, 0.0])

    def test_per_facet_validates(self):
        with pytest.raises(InvalidInput):
            boundary_samples(ConeField.constant(Cone.orthant(2)), [0.0, 0.0], per_facet=0)


class TestPointwise:
    def test_pendulum_strongly_damped_is_positive(self):
        report = check_pointwise_positivity(pendulum(k=3.0), pendulum_states())
        assert report.verdict is Verdict.POSITIVE
        # worst facet derivative over the grid is k - 1 - cos(theta) at theta=0
        assert report.min_margin == pytest.approx(1.0, abs=1e-9)

    def test_pendulum_margin_formula_per_state(self):
        # facet dtheta + dv = 0 carries derivative k - 1 - cos(theta)
        sys = pendulum(k=2.5)
        for th in np.linspace(0.0, 2.0 * math.pi, 9, endpoint=False):
            report = check_pointwise_positivity(sys, [np.array([th, 0.4])])
            margins = {w.facet_index for w in report.witnesses}
            assert not margins
            assert report.min_margin == pytest.approx(min(2.5 - 1.0 - math.cos(th), 1.0), abs=1e-9)

    def test_pendulum_underdamped_witness(self):
        report = check_pointwise_positivity(pendulum(k=1.5), pendulum_states())
        assert report.verdict is Verdict.NOT_POSITIVE
        assert report.min_margin == pytest.approx(1.5 - 2.0, abs=1e-9)
        best = min(report.witnesses, key=lambda w: w.kdot)
        assert abs(math.remainder(best.x[0], 2.0 * math.pi)) < 0.6  # near theta = 0
        assert best.facet_index == 1  # the dtheta + dv facet

    def test_oscillator_margin_is_zero(self):
        sys = make_model(ModelSpec(ModelName.HARMONIC_OSCILLATOR_ROTATING_CONE))
        rng = np.random.default_rng(8)
        states = [x for x in rng.normal(size=(12, 2)) if np.linalg.norm(x) > 0.4]
        report = check_pointwise_positivity(sys, states)
        assert report.verdict is Verdict.POSITIVE
        assert abs(report.min_margin) <= 1e-6

    def test_discrete_map(self):
        def discrete(A):
            return SystemDef(
                time_kind=TimeKind.DISCRETE,
                dim=2,
                field=lambda x, u, _A=np.asarray(A, float): _A @ x,
                topology=ChartTopology.lines(2),
                cone_field=ConeField.constant(Cone.orthant(2)),
                jacobian=lambda x, u, _A=np.asarray(A, float): _A,
            )

        ok = check_pointwise_positivity(discrete([[0.5, 0.2], [0.1, 0.5]]), [np.zeros(2), np.ones(2)])
        assert ok.verdict is Verdict.POSITIVE
        bad = check_pointwise_positivity(discrete([[0.5, -0.2], [0.1, 0.5]]), [np.zeros(2)])
        assert bad.verdict is Verdict.NOT_POSITIVE


class TestMetzler:
    def test_linear_exchange_network(self):
        sys = make_model(ModelSpec(ModelName.POSITIVE_LINEAR, {"A": [[-1.0, 1.0], [1.0, -1.0]]}))
        report = metzler_check(sys, [np.zeros(2)])
        assert report.verdict is Verdict.POSITIVE
        assert report.min_margin == pytest.approx(1.0)

    def test_pendulum_in_orthant_coordinates(self):
        base = pendulum(k=3.0)
        orthant_pendulum = SystemDef(
            time_kind=base.time_kind,
            dim=2,
            field=base.field,
            topology=base.topology,
            cone_field=ConeField.constant(Cone.orthant(2)),
            jacobian=base.jacobian,
        )
        report = metzler_check(orthant_pendulum, pendulum_states())
        assert report.verdict is Verdict.NOT_POSITIVE
        best = min(report.witnesses, key=lambda w: w.kdot)
        assert best.kdot == pytest.approx(-1.0, abs=1e-9)  # -cos(0)

    def test_bistable_is_cooperative(self):
        sys = make_model(ModelSpec(ModelName.MONOTONE_BISTABLE))
        rng = np.random.default_rng(9)
        report = metzler_check(sys, list(rng.normal(size=(10, 2))))
        assert report.verdict is Verdict.POSITIVE

    def test_wrong_cone_kind(self):
        with pytest.raises(WrongConeKind):
            metzler_check(pendulum(), [np.zeros(2)])

    def test_agrees_with_pointwise_on_orthant_models(self):
        rng = np.random.default_rng(10)
        states = list(rng.normal(size=(8, 2)))
        for spec in (
            ModelSpec(ModelName.MONOTONE_BISTABLE),
            ModelSpec(ModelName.POSITIVE_LINEAR, {"A": [[2.0, 1.0], [1.0, 2.0]]}),
            ModelSpec(ModelName.POSITIVE_LINEAR, {"A": [[1.0, -0.5], [1.0, 1.0]]}),
        ):
            sys = make_model(spec)
            assert (
                metzler_check(sys, states).verdict
                is check_pointwise_positivity(sys, states).verdict
            )


class TestStrict:
    def test_pendulum_k3_is_strict(self):
        states = [np.array([0.0, 0.0]), np.array([2.0, 0.5]), np.array([4.0, -0.5])]
        report = check_strict_positivity(pendulum(k=3.0), states, T=2.0, h=1e-2)
        assert report.strict_verdict is StrictVerdict.STRICT
        assert math.isfinite(report.diameter_estimate)
        assert 0.0 <= report.mu_T < 1.0
        assert report.fitted_lambda is not None and report.fitted_lambda > 0.5

    def test_pendulum_k2_is_not_strict(self):
        states = [np.array([0.0, 0.0]), np.array([2.0, 0.5])]
        report = check_strict_positivity(pendulum(k=2.0), states, T=2.0, h=1e-2)
        assert report.strict_verdict is StrictVerdict.NON_STRICT
        assert report.pointwise_verdict is Verdict.POSITIVE

    def test_oscillator_is_not_strict(self):
        sys = make_model(ModelSpec(ModelName.HARMONIC_OSCILLATOR_ROTATING_CONE))
        report = check_strict_positivity(sys, [np.array([1.5, 0.0])], T=2.0, h=1e-2)
        assert report.strict_verdict is StrictVerdict.NON_STRICT
        assert math.isinf(report.diameter_estimate)
        assert report.mu_T == 1.0

    def test_pointwise_failure_short_circuits(self):
        report = check_strict_positivity(pendulum(k=1.5), pendulum_states(), T=1.0, h=1e-2)
        assert report.strict_verdict is StrictVerdict.NON_STRICT
        assert report.pointwise_verdict is Verdict.NOT_POSITIVE

    def test_hilbert_decay_is_monotone(self):
        states = [np.array([1.0, 0.3])]
        report = check_strict_positivity(pendulum(k=3.0), states, T=2.0, h=1e-2)
        d = report.decay_distances[np.isfinite(report.decay_distances)]
        assert np.all(np.diff(d) <= 1e-9)


class TestConeInvarianceEndToEnd:
    def test_certified_models_keep_interior_seeds_inside(self):
        cases = [
            (pendulum(k=3.0, u=0.4), lambda rng: np.array([rng.uniform(0, 2 * math.pi), rng.uniform(-1, 1)])),
            (make_model(ModelSpec(ModelName.MONOTONE_BISTABLE)), lambda rng: rng.normal(size=2)),
            (
                make_model(ModelSpec(ModelName.HARMONIC_OSCILLATOR_ROTATING_CONE)),
                lambda rng: rng.normal(size=2) + np.array([2.5, 0.0]),
            ),
        ]
        rng = np.random.default_rng(11)
        for sys, draw in cases:
            for _ in range(2):
                x0 = draw(rng)
                cone0 = sys.cone_field.cone_at(x0)
                weights = rng.uniform(0.2, 1.0, size=len(cone0.generators))
                dx0 = weights @ cone0.generators
                traj, tangents, _ = variational_flow(sys, x0, dx0, t_span=(0.0, 20.0), h=1e-2, renormalize=True)
                for idx in range(0, len(traj.times), 400):
                    cone_t = sys.cone_field.cone_at(traj.states[idx])
                    assert cone_contains(cone_t, tangents[idx], tol=1e-7)
