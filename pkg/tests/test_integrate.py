"""Integrator tests against analytic and matrix-exponential oracles."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from coneflow.dynsys import ChartTopology, SystemDef, TimeKind
from coneflow.errors import Diverged, InvalidInput, LeftDomain
from coneflow.geometry import Cone, ConeField
from coneflow.integrate import (
    Trajectory,
    flow,
    fundamental_matrix,
    matrix_variational_flow,
    variational_flow,
)
from coneflow.models import ModelName, ModelSpec, make_model


def pendulum(k=3.0, u=0.0):
    return make_model(ModelSpec(ModelName.PENDULUM, {"k": k, "u": u}))


def oscillator():
    return make_model(ModelSpec(ModelName.HARMONIC_OSCILLATOR_ROTATING_CONE))


def linear_system(A):
    return make_model(ModelSpec(ModelName.POSITIVE_LINEAR, {"A": A}))


def diag_system():
    # generators of the orthant are fine for diag(-1,-2) too
    return SystemDef(
        time_kind=TimeKind.CONTINUOUS,
        dim=2,
        field=lambda x, u: np.array([-x[0], -2.0 * x[1]]),
        topology=ChartTopology.lines(2),
        cone_field=ConeField.constant(Cone.orthant(2)),
        jacobian=lambda x, u: np.diag([-1.0, -2.0]),
        name="diag(-1,-2)",
    )


class TestFlow:
    def test_fixed_point_stays_put(self):
        traj = flow(pendulum(k=3.0), [0.0, 0.0], t_span=(0.0, 10.0), h=1e-2)
        assert np.max(np.abs(traj.states)) < 1e-14

    def test_oscillator_closes_after_one_turn(self):
        traj = flow(oscillator(), [1.0, 0.0], t_span=(0.0, 2.0 * math.pi), h=1e-3)
        assert np.allclose(traj.states[-1], [1.0, 0.0], atol=1e-6)

    def test_diagonal_decay_matches_exponential(self):
        traj = flow(diag_system(), [1.0, 1.0], t_span=(0.0, 1.0), h=1e-3)
        assert np.allclose(traj.states[-1], [math.exp(-1.0), math.exp(-2.0)], atol=1e-8)

    def test_sample_grid(self):
        traj = flow(diag_system(), [1.0, 1.0], t_span=(0.0, 0.0105), h=1e-3)
        # 10 full steps plus the fractional remainder
        assert traj.times[-1] == pytest.approx(0.0105, abs=1e-15)
        assert np.allclose(np.diff(traj.times)[:-1], 1e-3)

    def test_divergence_guard(self):
        blowup = SystemDef(
            time_kind=TimeKind.CONTINUOUS,
            dim=1,
            field=lambda x, u: np.array([x[0] ** 2]),
            topology=ChartTopology.lines(1),
            cone_field=ConeField.constant(Cone.orthant(1)),
        )
        with pytest.raises(Diverged):
            flow(blowup, [5.0], t_span=(0.0, 1.0), h=1e-3)

    def test_left_domain_on_positive_axis(self):
        draining = SystemDef(
            time_kind=TimeKind.CONTINUOUS,
            dim=2,
            field=lambda x, u: np.array([1.0, -1.0]),
            topology=make_model(ModelSpec(ModelName.POLAR_DECOUPLED)).topology,
            cone_field=ConeField.constant(Cone.orthant(2)),
        )
        with pytest.raises(LeftDomain):
            flow(draining, [0.0, 0.05], t_span=(0.0, 1.0), h=1e-3)

    def test_wrap_bookkeeping(self):
        traj = flow(pendulum(k=3.0, u=1.2), [0.0, 0.3], t_span=(0.0, 80.0), h=1e-2)
        theta = traj.states[:, 0]
        assert np.all((theta >= 0.0) & (theta < 2.0 * math.pi))
        assert traj.wrap_counts[-1, 0] >= 2  # winds around the circle
        assert np.all(np.diff(traj.wrap_counts[:, 0]) >= 0)

    def test_time_varying_input_callback(self):
        A = np.array([[-1.0, 0.0], [0.0, -1.0]])
        B = np.eye(2)
        sys = SystemDef(
            time_kind=TimeKind.CONTINUOUS,
            dim=2,
            field=lambda x, u: A @ x + B @ u,
            topology=ChartTopology.lines(2),
            cone_field=ConeField.constant(Cone.orthant(2)),
            jacobian=lambda x, u: A,
            input_jacobian=lambda x, u: B,
            input_dim=2,
        )
        traj = flow(sys, [0.0, 0.0], u=lambda t: [math.sin(t), 0.0], t_span=(0.0, 2.0), h=1e-3)
        # oracle: particular solution of xdot = -x + sin t
        t = 2.0
        expect = 0.5 * (math.sin(t) - math.cos(t) + math.exp(-t))
        assert traj.states[-1, 0] == pytest.approx(expect, abs=1e-8)
        assert traj.states[-1, 1] == 0.0

    def test_bad_span_rejected(self):
        with pytest.raises(InvalidInput):
            flow(diag_system(), [1.0, 1.0], t_span=(1.0, 0.0))


class TestVariationalFlow:
    def test_oscillator_monodromy(self):
        _, tangents, _ = variational_flow(oscillator(), [1.0, 0.0], [1.0, 0.0], t_span=(0.0, 2.0 * math.pi), h=1e-3)
        assert np.allclose(tangents[-1], [1.0, 0.0], atol=1e-6)

    def test_linear_matches_matrix_exponential(self):
        A = np.array([[2.0, 1.0], [1.0, 2.0]])
        dx0 = np.array([0.3, -0.1])
        _, tangents, _ = variational_flow(linear_system(A), [0.5, 0.5], dx0, t_span=(0.0, 0.5), h=1e-3)
        assert np.allclose(tangents[-1], expm(0.5 * A) @ dx0, atol=1e-7)

    def test_zero_tangent_stays_zero(self):
        _, tangents, _ = variational_flow(pendulum(), [0.4, 0.0], [0.0, 0.0], t_span=(0.0, 2.0), h=1e-2)
        assert np.max(np.abs(tangents)) == 0.0

    def test_renormalization_ledger_tracks_growth(self):
        A = np.array([[2.0, 1.0], [1.0, 2.0]])
        sys = linear_system(A)
        dx0 = np.array([1.0, 2.0])
        _, raw, _ = variational_flow(sys, [1.0, 1.0], dx0, t_span=(0.0, 2.0), h=1e-3)
        _, unit, logs = variational_flow(sys, [1.0, 1.0], dx0, t_span=(0.0, 2.0), h=1e-3, renormalize=True)
        growth = np.linalg.norm(raw[-1]) / np.linalg.norm(dx0)
        assert math.exp(logs[-1]) == pytest.approx(growth, rel=1e-9)
        assert np.linalg.norm(unit[-1]) == pytest.approx(1.0, abs=1e-12)

    def test_renormalize_requires_nonzero_seed(self):
        with pytest.raises(InvalidInput):
            variational_flow(pendulum(), [0.1, 0.0], [0.0, 0.0], renormalize=True)

    def test_f_transport_identity(self):
        # tangent seeded with f(x0) reproduces f(x(t)) along the trajectory
        for sys, x0 in [
            (pendulum(k=3.0, u=0.4), [0.3, 0.2]),
            (make_model(ModelSpec(ModelName.MONOTONE_BISTABLE)), [0.5, -0.4]),
        ]:
            fx0 = sys.eval_field(np.asarray(x0, float))
            traj, tangents, _ = variational_flow(sys, x0, fx0, t_span=(0.0, 6.0), h=1e-3)
            for idx in range(0, len(traj.times), 1500):
                expect = sys.eval_field(traj.states[idx])
                assert np.allclose(tangents[idx], expect, atol=1e-6)

    def test_variational_guard(self):
        A = np.array([[40.0, 0.0], [0.0, 40.0]])
        with pytest.raises(Diverged):
            variational_flow(linear_system(A), [1.0, 1.0], [1.0, 0.0], t_span=(0.0, 1.0), h=1e-3)


class TestFundamentalMatrix:
    def test_identity_at_t0(self):
        fm = fundamental_matrix(pendulum(), [0.3, 0.1], t0=1.0, t=1.0)
        assert np.allclose(fm.Psi, np.eye(2))

    def test_diagonal_exponential(self):
        fm = fundamental_matrix(diag_system(), [1.0, 1.0], t0=0.0, t=1.0, h=1e-3)
        assert np.allclose(fm.Psi, np.diag([math.exp(-1.0), math.exp(-2.0)]), atol=1e-8)

    def test_oscillator_rotation(self):
        fm = fundamental_matrix(oscillator(), [1.0, 0.0], t0=0.0, t=math.pi / 2.0, h=1e-3)
        # oracle: Psi(t) = expm(A t) for the constant oscillator Jacobian
        expect = expm(np.array([[0.0, 1.0], [-1.0, 0.0]]) * (math.pi / 2.0))
        assert np.allclose(fm.Psi, expect, atol=1e-9)

    def test_semigroup_property(self):
        sys = pendulum(k=3.0, u=1.2)
        x0 = [0.4, 0.3]
        t1, t2 = 1.0, 2.5
        full = fundamental_matrix(sys, x0, t0=0.0, t=t2, h=1e-3).Psi
        first = fundamental_matrix(sys, x0, t0=0.0, t=t1, h=1e-3).Psi
        traj = flow(sys, x0, t_span=(0.0, t1), h=1e-3)
        x_mid = traj.states[-1]
        second = fundamental_matrix(sys, x_mid, t0=t1, t=t2, h=1e-3).Psi
        assert np.allclose(second @ first, full, atol=1e-6)

    def test_matrix_flow_renormalization_keeps_directions(self):
        sys = pendulum(k=3.0)
        _, mats_raw, _ = matrix_variational_flow(sys, [0.5, 0.0], t_span=(0.0, 3.0), h=1e-2)
        _, mats_unit, logs = matrix_variational_flow(sys, [0.5, 0.0], t_span=(0.0, 3.0), h=1e-2, renormalize=True)
        rebuilt = mats_unit[-1] * math.exp(logs[-1])
        assert np.allclose(rebuilt, mats_raw[-1], rtol=1e-9, atol=1e-12)


class TestOrderAndExport:
    def test_step_halving_ratio_near_sixteen(self):
        # classical fourth order: halving the step divides the error by ~16
        x0 = [1.0, 0.0]
        t_end = 2.0 * math.pi
        exact = np.array([1.0, 0.0])
        errs = []
        for h in (2e-2, 1e-2):
            traj = flow(oscillator(), x0, t_span=(0.0, t_end), h=h)
            errs.append(np.linalg.norm(traj.states[-1] - exact))
        ratio = errs[0] / errs[1]
        assert 12.0 <= ratio <= 20.0

    def test_csv_round_trip(self, tmp_path):
        traj = flow(pendulum(k=3.0, u=1.2), [0.1, 0.2], t_span=(0.0, 0.5), h=1e-2)
        path = tmp_path / "traj.csv"
        traj.to_csv(path)
        data = np.genfromtxt(path, delimiter=",", names=True)
        assert np.allclose(data["x_1"], traj.states[:, 0], atol=1e-16)
        assert np.allclose(data["t"], traj.times, atol=1e-16)

    def test_json_round_trip(self, tmp_path):
        import json

        traj = flow(pendulum(k=3.0), [0.2, 0.0], t_span=(0.0, 0.2), h=1e-2)
        path = tmp_path / "traj.json"
        traj.to_json(path)
        payload = json.loads(path.read_text())
        assert np.allclose(payload["states"], traj.states, atol=1e-16)

    def test_no_nan_invariant(self):
        with pytest.raises(InvalidInput):
            Trajectory(times=[0.0, 1.0], states=[[0.0], [math.nan]], wrap_counts=[[0], [0]])


class TestDiscrete:
    def make_discrete(self, A):
        return SystemDef(
            time_kind=TimeKind.DISCRETE,
            dim=2,
            field=lambda x, u, _A=np.asarray(A, float): _A @ x,
            topology=ChartTopology.lines(2),
            cone_field=ConeField.constant(Cone.orthant(2)),
            jacobian=lambda x, u, _A=np.asarray(A, float): _A,
        )

    def test_map_iteration(self):
        A = [[0.5, 0.1], [0.0, 0.5]]
        sys = self.make_discrete(A)
        traj = flow(sys, [1.0, 1.0], t_span=(0, 3))
        expect = np.linalg.matrix_power(np.asarray(A), 3) @ np.array([1.0, 1.0])
        assert np.allclose(traj.states[-1], expect)

    def test_variational_is_matrix_power(self):
        A = [[0.5, 0.2], [0.1, 0.6]]
        sys = self.make_discrete(A)
        _, tangents, _ = variational_flow(sys, [1.0, 1.0], [1.0, 0.0], t_span=(0, 4))
        expect = np.linalg.matrix_power(np.asarray(A), 4) @ np.array([1.0, 0.0])
        assert np.allclose(tangents[-1], expect)
