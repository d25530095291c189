"""Tests for the cloud-based involution checks, fixed-locus census and per-fiber fixed points."""
import numpy as np
import pytest

from lagland.core.geometry import linear_map
from lagland.core.models import get_model
from lagland.core.suites import CENSUS_SAMPLES
from lagland.core.symmetry import (
    cluster_points,
    fiber_fixed_count,
    fixed_locus_census,
    link_pairs,
    project_to_fixed,
    sample_cloud,
    verify_commutation,
    verify_fiber_preserving,
    verify_involution,
    verify_pullback,
)

CONJUGATION = linear_map(np.diag([1.0, -1.0, 1.0, -1.0]), name="conjugation")
SWAP = linear_map(np.block([[np.zeros((2, 2)), np.eye(2)], [np.eye(2), np.zeros((2, 2))]]), name="swap")


def _rotation(theta: float):
    c, s = np.cos(theta), np.sin(theta)
    return linear_map(np.kron(np.eye(2), [[c, -s], [s, c]]), name=f"rotation({theta})")


class TestSampleCloud:
    def test_same_seed_same_points(self, nodal):
        first = sample_cloud(nodal, 200, seed=7)
        second = sample_cloud(nodal, 200, seed=7)
        np.testing.assert_array_equal(first.points, second.points)
        assert len(first) == 200

    def test_points_avoid_the_node(self, nodal):
        cloud = sample_cloud(nodal, 500, seed=1)
        assert np.all(nodal.fibration.in_domain(cloud.points))
        assert np.all(np.linalg.norm(nodal.fibration(cloud.points), axis=1) > 1e-3)


class TestNodalConjugation:
    @pytest.fixture(scope="class")
    def cloud(self, nodal):
        return sample_cloud(nodal, 1000, seed=3)

    def test_preserves_fibers(self, nodal, cloud):
        assert verify_fiber_preserving(nodal, nodal.involution.map, cloud) <= 1e-12

    def test_is_an_involution(self, nodal, cloud):
        assert verify_involution(nodal.involution.map, cloud) == 0.0
        assert verify_involution(nodal.involution.map, cloud, nodal.structure) == 0.0

    def test_is_anti_symplectic(self, nodal, cloud):
        assert verify_pullback(nodal, nodal.involution.map, cloud, -1) <= 1e-12

    def test_swapping_factors_does_not_preserve_fibers(self, nodal, cloud):
        # mu changes sign under z1 <-> z2
        assert verify_fiber_preserving(nodal, SWAP, cloud) > 0.1
        assert verify_pullback(nodal, SWAP, cloud, -1) > 0.1

    def test_commutes_with_rotation_up_to_inversion(self, nodal, cloud):
        theta = 0.7
        residual = verify_commutation(CONJUGATION, _rotation(theta), cloud, t_inverse=_rotation(-theta))
        assert residual <= 1e-12

    def test_commutation_by_newton_inversion(self, nodal, cloud):
        assert verify_commutation(CONJUGATION, _rotation(0.4), cloud) <= 1e-9


class TestProjection:
    def test_one_step_is_exact_for_conjugation(self, nodal, rng):
        x = rng.uniform(-2, 2, size=(100, 4))
        projected, fixed = project_to_fixed(nodal, CONJUGATION, x, 1e-12)
        assert fixed.all()
        np.testing.assert_array_equal(projected[:, [1, 3]], 0.0)
        np.testing.assert_array_equal(projected[:, [0, 2]], x[:, [0, 2]])


class TestClustering:
    def test_single_linkage(self):
        points = np.array([[0.0, 0.0], [0.1, 0.0], [0.2, 0.0], [5.0, 5.0]])
        clusters = sorted(sorted(c.tolist()) for c in cluster_points(points, 0.15))
        assert clusters == [[0, 1, 2], [3]]

    def test_empty(self):
        assert cluster_points(np.empty((0, 2)), 1.0) == []


class TestFiberFixedPoints:
    def test_toric_fiber_has_four_real_points(self, toric):
        assert fiber_fixed_count(toric, [0.5, 0.8]) == 4


@pytest.mark.slow
class TestNodalCensus:
    def test_three_components_two_of_them_sections(self, nodal):
        census = fixed_locus_census(nodal, n_samples=4000, seed=0)
        assert census.component_count == 3
        assert census.section_count == 2

    def test_regular_fiber_has_four_fixed_points(self, nodal):
        assert fiber_fixed_count(nodal, [0.3, 0.2]) == 4


class TestLinkPairs:
    def test_chain_links_consecutive_points(self):
        points = np.stack([np.arange(6.0), np.zeros(6)], axis=-1)
        pairs = link_pairs(points, 1.5)
        np.testing.assert_array_equal(pairs, [[0, 1], [1, 2], [2, 3], [3, 4], [4, 5]])

    def test_far_groups_stay_apart(self):
        points = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 0.0], [5.1, 0.0]])
        np.testing.assert_array_equal(link_pairs(points, 1.0), [[0, 1], [2, 3]])

    def test_neighbor_cap_bounds_the_graph(self, rng):
        points = rng.uniform(0, 1, (400, 3))
        pairs = link_pairs(points, 10.0, neighbors=4)
        assert np.all(pairs[:, 0] < pairs[:, 1])
        assert len(pairs) <= 4 * len(points)
        assert len(np.unique(pairs, axis=0)) == len(pairs)

    def test_single_point_has_no_links(self):
        assert link_pairs(np.zeros((1, 2)), 1.0).shape == (0, 2)


@pytest.mark.slow
class TestCensusCounts:
    @pytest.mark.parametrize("name, components, sections", [
        ("positive_proper", 5, 4),
        ("toric_reference", 1, 0),
    ])
    def test_component_and_section_counts(self, name, components, sections):
        census = fixed_locus_census(get_model(name), n_samples=CENSUS_SAMPLES, seed=0)
        assert census.component_count == components
        assert census.section_count == sections

    def test_negative_amoeba_separates_the_marked_points(self):
        model = get_model("negative_amoeba")
        census = fixed_locus_census(model, n_samples=CENSUS_SAMPLES, seed=0)
        assert census.component_count == 5
        seeds = np.asarray(model.metadata["census_seeds"])
        points = np.zeros((len(seeds), model.ambient_dim))
        points[:, 0::2] = seeds
        labels = census.locate(points, model.structure)
        assert np.all(labels >= 0)
        assert len(set(labels.tolist())) == len(seeds)
