"""Tests for phases of Lagrangian planes, intersection indices and the phase action of involutions."""
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from lagland.core.errors import FrameError, TransversalityError
from lagland.core.geometry import standard_structure
from lagland.core.models import get_model
from lagland.core.grading import (
    HolomorphicVolume,
    circle_gap,
    grading_census,
    h_field,
    intersection_index,
    involution_phase_shift,
    orient_like,
    oriented_fiber_frame,
    phase_of_plane,
)


def _unit_plane(n: int, U: np.ndarray) -> np.ndarray:
    """Real frame (rows) of the Lagrangian plane spanned by the columns of a unitary matrix."""
    vectors = np.zeros((n, 2 * n))
    vectors[:, 0::2] = U.real.T
    vectors[:, 1::2] = U.imag.T
    return vectors


def _random_unitary(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))[None, :]


@st.composite
def unitary_pairs(draw):
    n = draw(st.integers(min_value=1, max_value=3))
    seeds = draw(st.lists(st.integers(min_value=0, max_value=2 ** 32 - 1), min_size=2, max_size=2))
    return n, _random_unitary(n, seeds[0]), _random_unitary(n, seeds[1])


class TestPhaseOfPlane:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_real_plane_has_phase_zero(self, n):
        plane = phase_of_plane(HolomorphicVolume(n), _unit_plane(n, np.eye(n)))
        assert plane.theta == pytest.approx(0.0, abs=1e-14)
        assert plane.psi == pytest.approx(1.0)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_imaginary_plane_has_phase_half_n(self, n):
        plane = phase_of_plane(HolomorphicVolume(n), _unit_plane(n, 1j * np.eye(n)))
        assert circle_gap(plane.theta, n / 2) <= 1e-12

    def test_rotated_line(self):
        turned = _unit_plane(1, np.array([[np.exp(1j * np.pi / 3)]]))
        assert phase_of_plane(HolomorphicVolume(1), turned).theta == pytest.approx(1 / 3)

    def test_symplectic_plane_is_rejected(self):
        with pytest.raises(FrameError):
            phase_of_plane(HolomorphicVolume(2), [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])


class TestIntersectionIndex:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_real_and_imaginary_planes(self, n):
        volume = HolomorphicVolume(n)
        real = phase_of_plane(volume, _unit_plane(n, np.eye(n)))
        imaginary = phase_of_plane(volume, _unit_plane(n, 1j * np.eye(n))).with_theta(n / 2)
        assert intersection_index(real, imaginary) == pytest.approx(0.0, abs=1e-12)
        assert intersection_index(imaginary, real) == pytest.approx(n, abs=1e-12)

    def test_line_turned_by_a_third_of_pi(self):
        volume = HolomorphicVolume(1)
        line = phase_of_plane(volume, _unit_plane(1, np.eye(1)))
        turned = phase_of_plane(volume, _unit_plane(1, np.array([[np.exp(1j * np.pi / 3)]])))
        assert intersection_index(line, turned.with_theta(line.theta)) == pytest.approx(1 / 3)

    def test_plane_with_itself_is_not_transversal(self):
        plane = phase_of_plane(HolomorphicVolume(2), _unit_plane(2, np.eye(2)))
        with pytest.raises(TransversalityError):
            intersection_index(plane, plane)

    @settings(max_examples=100, deadline=None)
    @given(unitary_pairs())
    def test_indices_in_both_orders_add_up_to_n(self, data):
        n, U1, U2 = data
        volume = HolomorphicVolume(n)
        a = phase_of_plane(volume, _unit_plane(n, U1))
        b = phase_of_plane(volume, _unit_plane(n, U2))
        try:
            total = intersection_index(a, b) + intersection_index(b, a)
        except TransversalityError:
            assume(False)
        assert total == pytest.approx(n, abs=1e-8)


class TestInvolutionPhases:
    def test_conjugation_pulls_omega_back_to_its_conjugate(self, nodal):
        h = h_field(nodal, HolomorphicVolume(2), [1.0, 0.3, -0.2, 0.5])
        assert abs(h - 1.0) <= 1e-12

    def test_harvey_lawson_involution_has_h_minus_one(self, harvey_lawson):
        h = h_field(harvey_lawson, HolomorphicVolume(3), [0.4, 0.1, -0.3, 0.7, 0.2, -0.5])
        assert abs(h + 1.0) <= 1e-12

    def test_conjugation_negates_phases(self, nodal):
        volume = HolomorphicVolume(2)
        U = _random_unitary(2, 11)
        plane = phase_of_plane(volume, _unit_plane(2, U), standard_structure(2))
        pushed = involution_phase_shift(nodal, volume, plane)
        assert circle_gap(pushed, -plane.theta) <= 1e-10


    @pytest.mark.parametrize("name, x", [
        ("toric_reference", [0.9, 0.4, -0.3, 0.7]),
        ("nodal", [0.8, 0.1, -0.5, 0.3]),
        ("generic_singular", [0.8, 0.1, -0.5, 0.3, 0.4, 1.0]),
    ])
    def test_oriented_fiber_phase_moves_to_n_minus_theta_mod_2(self, name, x):
        model = get_model(name)
        volume = HolomorphicVolume(model.n)
        plane = phase_of_plane(volume, oriented_fiber_frame(model, x), model.structure)
        image = oriented_fiber_frame(model, model.involution.map(np.asarray(x)))
        oriented = involution_phase_shift(model, volume, plane, reference=image)
        assert circle_gap(oriented, model.n - plane.theta) <= 1e-9

    def test_odd_dimension_flips_the_pushed_fiber_orientation(self):
        model = get_model("generic_singular")
        volume = HolomorphicVolume(3)
        x = np.array([0.8, 0.1, -0.5, 0.3, 0.4, 1.0])
        plane = phase_of_plane(volume, oriented_fiber_frame(model, x), model.structure)
        raw = involution_phase_shift(model, volume, plane)
        image = oriented_fiber_frame(model, model.involution.map(x))
        oriented = involution_phase_shift(model, volume, plane, reference=image)
        assert circle_gap(raw, -plane.theta) <= 1e-9
        assert circle_gap(oriented, raw) == pytest.approx(1.0, abs=1e-9)

    def test_orient_like_needs_a_spanning_reference(self, nodal):
        frame = oriented_fiber_frame(nodal, [0.8, 0.1, -0.5, 0.3])
        with pytest.raises(FrameError):
            orient_like(frame, np.zeros((2, 4)))
        flipped = orient_like(frame, frame.vectors * np.array([[-1.0], [1.0]]))
        np.testing.assert_array_equal(flipped.vectors[0], -frame.vectors[0])


@pytest.mark.slow
class TestGradingCensus:
    def test_toric_reference(self, toric):
        census = grading_census(toric, rng=np.random.default_rng(5), fibers=3)
        assert census.section_points > 0 and census.fiber_points > 0
        assert census.section_deviation <= 1e-8
        assert census.fiber_deviation <= 1e-6
        assert census.phase_shift_residual <= 1e-6
        assert census.dimension_shift_residual <= 1e-6
