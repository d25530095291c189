"""Tests for the amoeba raster, the discriminant probe and monodromy of period lattices."""
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagland.core.affine import (
    AmoebaSpec,
    Loop,
    MonodromyMatrix,
    amoeba_agreement,
    amoeba_membership,
    amoeba_raster,
    discriminant_probe,
    model_monodromy,
    monodromy,
    write_contour_csv,
    write_pgm,
)
from lagland.core.errors import DimensionError, MonodromyError, RegionError
from lagland.core.semiflat import focus_focus_chart, generic_singular_chart, toric_chart


class TestAmoeba:
    def test_membership(self):
        assert amoeba_membership([0.0, 0.0])
        assert not amoeba_membership([2.0, -2.0])
        np.testing.assert_array_equal(amoeba_membership(np.array([[0.0, 0.0], [2.0, -2.0]])), [True, False])

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-6.0, 6.0), st.floats(-6.0, 6.0))
    def test_symmetric_in_the_two_coordinates(self, x1, x2):
        assert amoeba_membership([x1, x2]) == amoeba_membership([x2, x1])

    def test_three_unbounded_complement_components(self):
        raster = amoeba_raster(AmoebaSpec(resolution=(128, 128)))
        assert raster.unbounded_components == 3
        assert len(raster.contour) == 3

    def test_agrees_with_sampling_the_curve(self):
        mismatches, compared = amoeba_agreement(AmoebaSpec(resolution=(128, 128)))
        assert mismatches == 0
        assert compared > 0

    def test_invalid_grid(self):
        with pytest.raises(ValueError):
            AmoebaSpec(bounds=((1.0, -1.0), (-4.0, 4.0)))
        with pytest.raises(ValueError):
            AmoebaSpec(resolution=(1, 64))

    def test_pgm_layout(self, tmp_path):
        mask = np.array([[True, False, False], [False, False, True]])
        lines = write_pgm(tmp_path / "mask.pgm", mask).read_text().splitlines()
        assert lines[:3] == ["P2", "3 2", "255"]
        # the top row of the image is the last row of the mask
        assert lines[3] == "255 255 0"
        assert lines[4] == "0 255 255"

    def test_contour_csv(self, tmp_path):
        path = write_contour_csv(tmp_path / "contour.csv", [np.array([[0.0, 1.0], [2.0, 3.0]])])
        assert path.read_text().splitlines() == ["arc,x1,x2", "0,0,1", "0,2,3"]


class TestDiscriminantProbe:
    def test_nodal_critical_points_map_to_the_node(self, nodal, rng):
        probe = discriminant_probe(nodal, rng, resolution=20)
        assert probe.all_critical
        assert probe.max_distance == 0.0

    def test_toric_critical_values_lie_on_the_axes(self, toric, rng):
        probe = discriminant_probe(toric, rng, resolution=50)
        assert probe.all_critical
        assert probe.max_distance == 0.0


class TestLoop:
    def test_validation(self):
        with pytest.raises(ValueError):
            Loop(radius=0.0)
        with pytest.raises(ValueError):
            Loop(orientation=2)

    def test_closed_and_reversible(self):
        loop = Loop(center=(0.1, 0.2), radius=0.3, fixed=(0.5,))
        points = loop.points(16)
        assert points.shape == (17, 3)
        np.testing.assert_allclose(points[0], points[-1], atol=1e-15)
        assert loop.reversed().orientation == -1


class TestMonodromyMatrix:
    def test_rejects_non_invertible_matrices(self):
        with pytest.raises(MonodromyError):
            MonodromyMatrix(((2, 0), (0, 1)), ("a", "b"), Loop(), 0.0)

    def test_rejects_missing_labels(self):
        with pytest.raises(DimensionError):
            MonodromyMatrix(((1, 0), (0, 1)), ("a",), Loop(), 0.0)

    def test_unipotent(self):
        assert MonodromyMatrix(((1, 0), (1, 1)), ("a", "b"), Loop(), 0.0).is_unipotent()
        assert not MonodromyMatrix(((0, 1), (1, 0)), ("a", "b"), Loop(), 0.0).is_unipotent()

    def test_json_records_the_convention(self):
        M = MonodromyMatrix(((1, 0), (1, 1)), ("lambda_1", "lambda_2"), Loop(), 0.0)
        payload = json.loads(M.to_json())
        assert payload["matrix"] == [[1, 0], [1, 1]]
        assert payload["basis"] == ["lambda_1", "lambda_2"]
        assert "convention" in payload


class TestChartMonodromy:
    def test_loop_around_the_node(self):
        M = monodromy(focus_focus_chart(), Loop(radius=0.5))
        np.testing.assert_array_equal(M.matrix, [[1, 0], [1, 1]])
        assert M.residual <= 1e-3

    def test_reversed_loop_gives_the_inverse(self):
        M = monodromy(focus_focus_chart(), Loop(radius=0.5).reversed())
        np.testing.assert_array_equal(M.matrix, [[1, 0], [-1, 1]])

    def test_loop_missing_the_node_is_trivial(self):
        M = monodromy(focus_focus_chart(), Loop(center=(0.5, 0.0), radius=0.2))
        np.testing.assert_array_equal(M.matrix, np.eye(2, dtype=int))

    def test_toric_chart_has_no_monodromy(self):
        M = monodromy(toric_chart(), Loop(center=(1.0, 1.0), radius=0.5))
        np.testing.assert_array_equal(M.matrix, np.eye(2, dtype=int))

    def test_generic_singular_chart(self):
        M = monodromy(generic_singular_chart(), Loop(radius=0.5, fixed=(0.5,)))
        np.testing.assert_array_equal(M.matrix, [[1, 0, 0], [1, 1, 0], [0, 0, 1]])

    def test_loop_through_the_node_raises(self):
        with pytest.raises(RegionError):
            monodromy(focus_focus_chart(), Loop(center=(0.5, 0.0), radius=0.5))

    def test_missing_fixed_coordinates(self):
        with pytest.raises(DimensionError):
            monodromy(generic_singular_chart(), Loop(radius=0.5))


@pytest.mark.slow
class TestModelMonodromy:
    def test_nodal_lattice_monodromy_is_a_nontrivial_shear(self, nodal):
        M = model_monodromy(nodal, "sigma_1", Loop(radius=0.5))
        assert M.determinant == 1
        assert M.is_unipotent()
        assert not np.array_equal(M.matrix, np.eye(2, dtype=int))
