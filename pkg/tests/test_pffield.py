"""Dominant-direction field tests against eigenvector and simulation oracles."""

import math

import numpy as np
import pytest

from coneflow.dynsys import ChartTopology, SystemDef, TimeKind
from coneflow.errors import InvalidInput, NeedsDenserGrid, NonContractive
from coneflow.geometry import Cone, ConeField, cone_contains, hilbert_distance
from coneflow.integrate import flow, variational_flow
from coneflow.models import ModelName, ModelSpec, make_model
from coneflow.pffield import PFVector, pf_field_on_grid, pf_residual, pf_vector_at

A_SYM = np.array([[2.0, 1.0], [1.0, 2.0]])


def linear_system(A=A_SYM):
    return make_model(ModelSpec(ModelName.POSITIVE_LINEAR, {"A": np.asarray(A)}))


def pendulum(k=3.0, u=0.0):
    return make_model(ModelSpec(ModelName.PENDULUM, {"k": k, "u": u}))


def perron_eigenvector_oracle(A):
    # independent route: dense eigendecomposition, dominant eigenpair
    vals, vecs = np.linalg.eig(np.asarray(A, float))
    i = int(np.argmax(vals.real))
    v = np.real(vecs[:, i])
    v = v / np.linalg.norm(v)
    return (v if v[0] > 0 else -v), float(vals.real[i])


class TestPFVectorAt:
    def test_linear_system_matches_perron_eigenvector(self):
        sys = linear_system()
        expect, _ = perron_eigenvector_oracle(A_SYM)
        rng = np.random.default_rng(12)
        for _ in range(4):
            x = rng.uniform(0.2, 2.0, size=2)
            pf = pf_vector_at(sys, x, window=2.0, tol=1e-9, h=5e-2)
            assert np.allclose(pf.w, expect, atol=1e-8)
            assert cone_contains(sys.cone_field.cone_at(x), pf.w, strict=True)

    def test_unit_norm_and_interior(self):
        pf = pf_vector_at(linear_system(), [1.0, 1.0], window=1.0, tol=1e-8, h=5e-2)
        assert np.linalg.norm(pf.w) == pytest.approx(1.0, abs=1e-12)
        assert pf.residual_hilbert < 1e-8

    def test_pendulum_attractor_aligns_with_flow(self):
        sys = pendulum(k=3.0, u=1.2)
        tail = flow(sys, [0.0, 0.3], t_span=(0.0, 60.0), h=1e-2).states[-1]
        pf = pf_vector_at(sys, tail, window=3.0, tol=5e-4, h=1e-2)
        fx = sys.eval_field(tail)
        cone = sys.cone_field.cone_at(tail)
        d = hilbert_distance(cone, fx / np.linalg.norm(fx), pf.w).value
        assert d <= 1e-2

    def test_oscillator_is_noncontractive(self):
        sys = make_model(ModelSpec(ModelName.HARMONIC_OSCILLATOR_ROTATING_CONE))
        with pytest.raises(NonContractive):
            pf_vector_at(sys, [1.5, 0.0], window=1.0, tol=1e-6, h=1e-2, max_doublings=3)

    def test_polar_orthant_is_noncontractive(self):
        sys = make_model(ModelSpec(ModelName.POLAR_DECOUPLED))
        with pytest.raises(NonContractive):
            pf_vector_at(sys, [0.3, 1.2], window=1.0, tol=1e-8, h=5e-2, max_doublings=3)

    def test_discrete_rejected(self):
        sys = SystemDef(
            time_kind=TimeKind.DISCRETE,
            dim=2,
            field=lambda x, u: 0.5 * x,
            topology=ChartTopology.lines(2),
            cone_field=ConeField.constant(Cone.orthant(2)),
        )
        with pytest.raises(InvalidInput):
            pf_vector_at(sys, [1.0, 1.0])

    def test_window_monotonicity(self):
        # the gap between windows W and 2W is non-increasing in W
        sys = linear_system()
        x = np.array([0.7, 1.3])
        cone = sys.cone_field.cone_at(x)

        def iterate(W):
            from coneflow.integrate import reversed_system

            z = flow(reversed_system(sys), x, t_span=(0.0, W), h=1e-2).states[-1]
            probe = sys.cone_field.cone_at(z).generators.mean(axis=0)
            _, tangents, _ = variational_flow(sys, z, probe, t_span=(0.0, W), h=1e-2, renormalize=True)
            return tangents[-1]

        gaps = []
        for W in (0.5, 1.0, 2.0, 4.0):
            gaps.append(hilbert_distance(cone, iterate(W), iterate(2 * W)).value)
        assert all(g2 <= g1 + 1e-12 for g1, g2 in zip(gaps, gaps[1:]))

    def test_flow_compatibility(self):
        # pushing w(x) forward lands within Hilbert distance 1e-3 of w(psi_t(x))
        sys = pendulum(k=3.0, u=1.2)
        x0 = flow(sys, [0.0, 0.3], t_span=(0.0, 60.0), h=1e-2).states[-1]
        t_push = 1.5
        pf0 = pf_vector_at(sys, x0, window=4.0, tol=5e-4, h=1e-2)
        traj, tangents, _ = variational_flow(sys, x0, pf0.w, t_span=(0.0, t_push), h=1e-2, renormalize=True)
        x1 = traj.states[-1]
        pf1 = pf_vector_at(sys, x1, window=4.0, tol=5e-4, h=1e-2)
        cone1 = sys.cone_field.cone_at(x1)
        assert hilbert_distance(cone1, tangents[-1], pf1.w).value <= 1e-3


class TestPFFieldOnGrid:
    def test_linear_grid_is_constant(self):
        sys = linear_system()
        fld = pf_field_on_grid(sys, box=[(0.5, 1.5), (0.5, 1.5)], shape=(3, 3), window=2.0, tol=1e-9, h=5e-2)
        assert not fld.errors
        expect, _ = perron_eigenvector_oracle(A_SYM)
        spread = np.max(np.abs(fld.vectors - expect))
        assert spread <= 1e-8

    def test_degenerate_grid_equals_pointwise(self):
        sys = linear_system()
        fld = pf_field_on_grid(sys, box=[(0.8, 1.0), (0.8, 1.0)], shape=(1, 1), window=2.0, tol=1e-9, h=5e-2)
        pf = pf_vector_at(sys, [0.8, 0.8], window=2.0, tol=1e-9, h=5e-2)
        assert fld.points.shape == (1, 2)
        assert np.allclose(fld.vectors[0], pf.w, atol=1e-12)

    def test_pendulum_cylinder_grid_success_rate(self):
        # 21x21 grid over the full cylinder belt: at least 95% of the cells
        # must produce a direction vector (the window ladder is sized so the
        # backward legs stay inside the divergence guard from |v| <= 3)
        sys = pendulum(k=3.0, u=0.0)
        fld = pf_field_on_grid(
            sys,
            box=[(0.0, 2.0 * math.pi), (-3.0, 3.0)],
            shape=(21, 21),
            window=2.5,
            tol=1e-2,  # stopping certificate lags one window behind: the
            h=2e-2,    # returned directions are ~1e-6 from converged here
            max_doublings=2,
        )
        ratio = np.count_nonzero(fld.ok_mask) / len(fld.points)
        assert ratio >= 0.95, f"success ratio {ratio:.3f}, sample errors: {list(fld.errors.items())[:3]}"
        # solved cells are unit interior directions
        for i in np.where(fld.ok_mask)[0][::40]:
            assert np.linalg.norm(fld.vectors[i]) == pytest.approx(1.0, abs=1e-9)
            assert cone_contains(sys.cone_field.cone_at(fld.points[i]), fld.vectors[i], strict=True)

    def test_errors_recorded_not_fatal(self):
        sys = make_model(ModelSpec(ModelName.HARMONIC_OSCILLATOR_ROTATING_CONE))
        fld = pf_field_on_grid(
            sys, box=[(1.0, 2.0), (0.0, 1.0)], shape=(2, 2), window=0.5, tol=1e-8, h=1e-2, max_doublings=1
        )
        assert len(fld.errors) == 4
        assert np.all(~fld.ok_mask)

    def test_csv_export(self, tmp_path):
        sys = linear_system()
        fld = pf_field_on_grid(sys, box=[(0.5, 1.0), (0.5, 1.0)], shape=(2, 2), window=1.0, tol=1e-8, h=5e-2)
        path = tmp_path / "field.csv"
        fld.to_csv(path)
        data = np.genfromtxt(path, delimiter=",", names=True)
        assert len(data) == 4
        assert set(data.dtype.names) == {"x_1", "x_2", "w_1", "w_2", "residual", "window"}


class TestPFResidual:
    def test_linear_field_residual_zero(self):
        sys = linear_system()
        fld = pf_field_on_grid(sys, box=[(0.9, 1.1), (0.9, 1.1)], shape=(3, 3), window=2.0, tol=1e-10, h=5e-2)
        res = pf_residual(sys, None, fld, [1.0, 1.0])
        assert res.pde_residual <= 1e-10
        assert res.lam == pytest.approx(3.0, abs=1e-9)  # dominant eigenvalue

    def test_eigenvector_of_constant_jacobian(self):
        # at any x where w is an eigenvector of a constant Jacobian, the
        # identity reduces to the eigen equation: residual 0, lam = eigenvalue
        A = np.array([[1.0, 0.5], [0.5, 1.0]])
        sys = linear_system(A)
        fld = pf_field_on_grid(sys, box=[(0.4, 0.6), (0.4, 0.6)], shape=(3, 3), window=3.0, tol=1e-10, h=5e-2)
        res = pf_residual(sys, None, fld, [0.5, 0.5])
        assert res.pde_residual <= 1e-9
        assert res.lam == pytest.approx(1.5, abs=1e-8)

    def test_needs_denser_grid_on_edge_node(self):
        sys = linear_system()
        fld = pf_field_on_grid(sys, box=[(0.9, 1.1), (0.9, 1.1)], shape=(3, 3), window=2.0, tol=1e-9, h=5e-2)
        with pytest.raises(NeedsDenserGrid):
            pf_residual(sys, None, fld, [0.9, 0.9])

    def test_spacing_guard(self):
        sys = linear_system()
        fld = pf_field_on_grid(sys, box=[(0.5, 1.5), (0.5, 1.5)], shape=(3, 3), window=2.0, tol=1e-9, h=5e-2)
        with pytest.raises(NeedsDenserGrid):
            pf_residual(sys, None, fld, [1.0, 1.0])

    def test_discrete_least_squares_multiplier(self):
        A = np.array([[0.6, 0.2], [0.2, 0.6]])
        sys = SystemDef(
            time_kind=TimeKind.DISCRETE,
            dim=2,
            field=lambda x, u, _A=A: _A @ x,
            topology=ChartTopology.lines(2),
            cone_field=ConeField.constant(Cone.orthant(2)),
            jacobian=lambda x, u, _A=A: _A,
        )
        # constant field: supply the Perron direction everywhere by hand
        w, lam_true = perron_eigenvector_oracle(A)
        pts = np.array([[0.0, 0.0], [0.05, 0.05]])
        from coneflow.pffield import SampledPFField

        fld = SampledPFField(
            points=pts,
            vectors=np.array([w, w]),
            shape=(2, 1),
            spacing=np.array([0.05, 0.0]),
            windows=np.zeros(2),
            residuals=np.zeros(2),
        )
        res = pf_residual(sys, None, fld, [0.0, 0.0])
        assert res.pde_residual <= 1e-12
        assert res.lam == pytest.approx(1.0 / lam_true, rel=1e-12)
