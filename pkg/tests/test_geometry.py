"""
Tests for the symplectic kernel: pairings, Jacobians, pullbacks, fiber frames,
Hamiltonian flows and fiber point solves.
"""
import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagland.core.errors import ConvergenceError, DimensionError, RankDeficiencyError
from lagland.core.geometry import (
    ChartId,
    Frame,
    PhasePoint,
    SmoothMap,
    complex_to_real,
    cylinder_structure,
    fiber_tangent_frame,
    fiber_walk,
    flow_map_residual,
    focus_focus_structure,
    hamiltonian_flow,
    identity_map,
    jacobian,
    lagrangian_residual,
    linear_map,
    pullback_residual,
    solve_fiber_point,
    standard_structure,
    symplectic_pairing,
)
from lagland.utils.retry import RetryConfig


@st.composite
def vector_pairs(draw, max_n=3):
    n = draw(st.integers(min_value=1, max_value=max_n))
    floats = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
    u = draw(st.lists(floats, min_size=2 * n, max_size=2 * n))
    v = draw(st.lists(floats, min_size=2 * n, max_size=2 * n))
    return n, np.array(u), np.array(v)


# =============================================================================
# Structures and points
# =============================================================================

def test_importing_the_package_enables_double_precision(nodal):
    assert jnp.asarray(1.0).dtype == jnp.float64
    x = jnp.asarray([1.0, 0.0, 0.0, 0.0])
    assert jacobian(nodal.fibration, x).dtype == np.float64


class TestSymplecticPairing:
    """omega(u, v) = u^T J v in each chart convention."""

    def test_dx_dy_is_one(self):
        assert symplectic_pairing(standard_structure(1), [1.0, 0.0], [0.0, 1.0]) == 1.0

    def test_bilinear_expansion_cancels(self):
        S = standard_structure(2)
        u = [1.0, 0.0, 1.0, 0.0]
        v = [0.0, 1.0, 0.0, -1.0]
        assert symplectic_pairing(S, u, v) == 0.0

    @settings(max_examples=100, deadline=None)
    @given(vector_pairs())
    def test_antisymmetry(self, data):
        n, u, v = data
        S = standard_structure(n)
        assert symplectic_pairing(S, u, v) == pytest.approx(-symplectic_pairing(S, v, u), abs=1e-12)
        assert symplectic_pairing(S, u, u) == pytest.approx(0.0, abs=1e-12)

    def test_focus_focus_chart_pairs_x_with_y(self):
        S = focus_focus_structure()
        dx1 = [0.0, 0.0, 1.0, 0.0]
        dy1 = [1.0, 0.0, 0.0, 0.0]
        assert symplectic_pairing(S, dx1, dy1) == 1.0

    def test_wrong_length_raises(self):
        with pytest.raises(DimensionError):
            symplectic_pairing(standard_structure(2), [1.0, 0.0], [0.0, 1.0])


class TestPhasePoint:
    def test_from_complex_interleaves(self):
        p = PhasePoint.from_complex([1 + 2j, 3 - 1j])
        np.testing.assert_array_equal(p.coords, [1.0, 2.0, 3.0, -1.0])
        np.testing.assert_array_equal(p.z, [1 + 2j, 3 - 1j])
        np.testing.assert_array_equal(complex_to_real([1 + 2j, 3 - 1j]), p.coords)

    def test_odd_length_raises(self):
        with pytest.raises(DimensionError):
            PhasePoint(np.zeros(3))

    def test_focus_focus_point_is_four_dimensional(self):
        with pytest.raises(DimensionError):
            PhasePoint(np.zeros(6), ChartId.FOCUS_FOCUS)

    def test_cylinder_displacement_wraps_the_angle(self):
        S = cylinder_structure(2)
        x = np.array([0.0, 0.0, 0.5, 3.0])
        y = np.array([0.0, 0.0, 0.5, -3.0])
        d = S.displacement(x, y)
        assert d[3] == pytest.approx(2 * np.pi - 6.0)
        assert S.distance(x, y) == pytest.approx(2 * np.pi - 6.0)


class TestFrame:
    def test_dependent_vectors_raise(self):
        with pytest.raises(RankDeficiencyError):
            Frame(np.zeros(4), [[1.0, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 0.0]])

    def test_dimension_mismatch_raises(self):
        with pytest.raises(DimensionError):
            Frame(np.zeros(4), [[1.0, 0.0]])


# =============================================================================
# Derivatives
# =============================================================================

class TestJacobian:
    def test_identity(self):
        x = np.array([0.3, -1.2, 2.0, 0.1])
        np.testing.assert_allclose(jacobian(identity_map(4), x), np.eye(4), atol=1e-15)

    def test_hand_differentiated_map(self):
        m = SmoothMap(2, 2, lambda x: jnp.stack([x[..., 0] ** 2, x[..., 0] * x[..., 1]], axis=-1), autodiff=True)
        np.testing.assert_allclose(jacobian(m, [1.0, 1.0]), [[2.0, 0.0], [1.0, 1.0]], atol=1e-14)

    def test_central_differences_for_plain_numpy_maps(self):
        m = SmoothMap(2, 2, lambda x: np.stack([x[..., 0] ** 2, x[..., 0] * x[..., 1]], axis=-1))
        np.testing.assert_allclose(jacobian(m, [1.0, 1.0]), [[2.0, 0.0], [1.0, 1.0]], atol=1e-8)

    def test_nodal_autodiff_matches_richardson(self, nodal):
        x = np.array([1.0, 0.0, 0.0, 0.0])
        exact = jacobian(nodal.fibration, x)
        approx = jacobian(nodal.fibration, x, method="central")
        np.testing.assert_allclose(approx, exact, atol=1e-6)

    def test_autodiff_requested_on_numpy_map_raises(self):
        m = SmoothMap(1, 1, lambda x: np.sin(x))
        with pytest.raises(ValueError):
            jacobian(m, [0.5], method="autodiff")


class TestPullback:
    def test_conjugation_is_anti_symplectic(self, rng):
        S = standard_structure(2)
        conjugation = linear_map(np.diag([1.0, -1.0, 1.0, -1.0]))
        x = rng.uniform(-2, 2, size=(20, 4))
        assert np.max(pullback_residual(S, conjugation, x, -1)) <= 1e-12

    def test_identity_is_symplectic(self):
        assert pullback_residual(standard_structure(3), identity_map(6), np.zeros(6), 1) <= 1e-12

    def test_cstar_action_is_symplectic_in_the_focus_focus_chart(self):
        # (z1, z2) -> (2 z1, z2 / 2)
        action = linear_map(np.diag([2.0, 2.0, 0.5, 0.5]))
        S = focus_focus_structure()
        assert pullback_residual(S, action, [0.3, 0.1, -0.4, 0.9], 1) <= 1e-9

    def test_sign_must_be_unit(self):
        with pytest.raises(ValueError):
            pullback_residual(standard_structure(1), identity_map(2), np.zeros(2), 0)


# =============================================================================
# Fibers
# =============================================================================

class TestFiberFrames:
    def test_kernel_of_a_projection(self):
        f = linear_map([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
        frame = fiber_tangent_frame(f, np.zeros(4))
        np.testing.assert_allclose(frame.vectors[:, :2], 0.0, atol=1e-14)
        assert frame.size == 2

    def test_nodal_node_is_critical(self, nodal):
        with pytest.raises(RankDeficiencyError):
            fiber_tangent_frame(nodal.fibration, np.zeros(4))

    def test_nodal_regular_point(self, nodal):
        x = np.array([1.0, 0.0, 0.0, 0.0])
        frame = fiber_tangent_frame(nodal.fibration, x)
        assert np.max(np.abs(jacobian(nodal.fibration, x) @ frame.vectors.T)) < 1e-10

    def test_toric_fibers_are_lagrangian(self, toric):
        assert lagrangian_residual(toric.structure, toric.fibration, [1.0, 0.0, 1.0, 0.0]) <= 1e-9

    def test_nodal_fibers_are_lagrangian(self, nodal, rng):
        for x in rng.uniform(-1.5, 1.5, size=(25, 4)):
            assert lagrangian_residual(nodal.structure, nodal.fibration, x) <= 1e-6

    def test_symplectic_plane_is_detected(self):
        # fibers of (x1, y1) are the (x2, y2) planes, on which omega is 1
        f = linear_map([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
        assert lagrangian_residual(standard_structure(2), f, np.zeros(4)) == pytest.approx(1.0)


# =============================================================================
# Flows
# =============================================================================

class TestHamiltonianFlow:
    def test_q1_flow_scales_z1_and_z2(self, ff_model):
        x0 = np.array([1.0, 0.0, 1.0, 0.0])
        end = hamiltonian_flow(ff_model.structure, ff_model.fibration.component(0), x0, 1.0, 1000)
        np.testing.assert_allclose(end, [np.exp(-1.0), 0.0, np.e, 0.0], atol=1e-8)

    def test_q2_flow_is_periodic(self, ff_model):
        x0 = np.array([0.4, -0.2, 0.7, 0.3])
        end = hamiltonian_flow(ff_model.structure, ff_model.fibration.component(1), x0, 2 * np.pi, 2000)
        np.testing.assert_allclose(end, x0, atol=1e-8)

    def test_zero_hamiltonian_leaves_points_fixed(self):
        x0 = np.array([0.1, 0.2, 0.3, 0.4])
        zero = linear_map(np.zeros((1, 4)))
        np.testing.assert_array_equal(hamiltonian_flow(standard_structure(2), zero, x0, 1.0, 10), x0)

    def test_flow_is_symplectic(self, ff_model):
        x0 = np.array([0.4, -0.2, 0.7, 0.3])
        assert flow_map_residual(ff_model.structure, ff_model.fibration.component(1), x0, 1.0, 200) <= 1e-8

    def test_phase_points_keep_their_chart(self, ff_model):
        x0 = PhasePoint([1.0, 0.0, 1.0, 0.0], ChartId.FOCUS_FOCUS)
        end = hamiltonian_flow(ff_model.structure, ff_model.fibration.component(1), x0, 0.5, 100)
        assert isinstance(end, PhasePoint)
        assert end.chart_id is ChartId.FOCUS_FOCUS


class TestFiberWalk:
    def test_zero_direction_returns_start(self, nodal):
        x0 = np.array([1.0, 0.0, 0.0, 0.0])
        np.testing.assert_array_equal(fiber_walk(nodal.structure, nodal.fibration, x0, [0.0, 0.0]), x0)

    def test_toric_orbit_closes(self, toric):
        x0 = np.array([1.0, 0.0, 0.5, 0.5])
        end = fiber_walk(toric.structure, toric.fibration, x0, [1.0, 0.0], 2 * np.pi, steps=2000)
        np.testing.assert_allclose(end, x0, atol=1e-8)

    def test_nodal_walk_stays_on_the_fiber(self, nodal):
        x0 = np.array([1.0, 0.0, 0.0, 0.0])
        end = fiber_walk(nodal.structure, nodal.fibration, x0, [0.0, 1.0], 2 * np.pi, steps=2000)
        assert np.max(np.abs(nodal.fibration(end) - nodal.fibration(x0))) <= 1e-8

    def test_coarse_walk_drifts_off_the_fiber(self, nodal):
        x0 = nodal.sections["sigma_1"].map(np.array([0.3, 0.2]))
        with pytest.raises(ConvergenceError, match="drift"):
            fiber_walk(nodal.structure, nodal.fibration, x0, [1.0, 1.0], steps=5)
        end = fiber_walk(nodal.structure, nodal.fibration, x0, [1.0, 1.0], steps=5, checked=False)
        assert np.max(np.abs(nodal.fibration(end) - nodal.fibration(x0))) > 1e-8

    def test_default_steps_pass_the_drift_check(self, nodal):
        x0 = nodal.sections["sigma_1"].map(np.array([0.3, 0.2]))
        end = fiber_walk(nodal.structure, nodal.fibration, x0, [1.0, 1.0])
        assert np.max(np.abs(nodal.fibration(end) - nodal.fibration(x0))) <= 1e-8

    def test_drifting_walk_is_repeated_with_more_steps(self, nodal):
        x0 = nodal.sections["sigma_1"].map(np.array([0.3, 0.2]))
        with pytest.raises(ConvergenceError):
            fiber_walk(nodal.structure, nodal.fibration, x0, [1.0, 1.0], steps=50)
        end = fiber_walk(nodal.structure, nodal.fibration, x0, [1.0, 1.0], steps=50,
                         retry_config=RetryConfig.PERSISTENT)
        assert np.max(np.abs(nodal.fibration(end) - nodal.fibration(x0))) <= 1e-8

    def test_walk_inside_the_critical_set_is_rejected(self, nodal):
        x0 = np.array([1e-10, 0.0, 0.0, 0.0])
        with pytest.raises(RankDeficiencyError):
            fiber_walk(nodal.structure, nodal.fibration, x0, [1.0, 0.0], steps=20)


class TestSolveFiberPoint:
    def test_seed_on_the_fiber_is_returned(self, nodal):
        seed = np.array([1.0, 0.0, 0.0, 0.0])
        np.testing.assert_array_equal(solve_fiber_point(nodal.fibration, nodal.fibration(seed), seed), seed)

    def test_nodal_newton(self, nodal):
        b = np.array([0.5, 0.1])
        x, info = solve_fiber_point(nodal.fibration, b, [1.0, 0.0, 0.0, 0.0], return_info=True)
        assert np.max(np.abs(nodal.fibration(x) - b)) <= 1e-10
        assert not info["near_critical"]
