"""Tests for the model catalog: evaluation, involutions, group actions, glue maps and the thin-leg map."""
import numpy as np
import pytest

from lagland.core.errors import ConfigError, DomainError, RegionError
from lagland.core.geometry import PhasePoint
from lagland.core.models import (
    GroupElement,
    GroupKind,
    ModelName,
    catalog,
    evaluate,
    get_model,
    glue_map,
    group_action,
    involution,
    is_regular,
    psi_region,
    reduced_gt,
    reduced_gt_one_sided_dt,
    seam_probe,
    thin_leg_exact_flow,
    thin_leg_flow,
    thin_leg_phi,
)
from lagland.utils.settings import ModelSettings

SQRT2 = np.sqrt(2.0)


def _base_points(model, rng, m):
    lo, hi = np.asarray(model.sections[next(iter(model.sections))].base_box).T
    b = rng.uniform(lo, hi, size=(4 * m, model.n))
    return b


class TestCatalog:
    def test_names_and_dimensions(self):
        models = {m.name: m for m in catalog()}
        assert set(models) == {name.value for name in ModelName}
        assert models[ModelName.NODAL].ambient_dim == 4
        assert models[ModelName.POSITIVE_PROPER].base_dim == 3
        assert models[ModelName.GENERIC_SINGULAR].ambient_dim == 6

    def test_unknown_model_is_a_config_error(self):
        with pytest.raises(ConfigError):
            get_model("tetrahedron")

    def test_unknown_thin_leg_variant_is_a_config_error(self):
        with pytest.raises(ConfigError):
            get_model("negative_thin", ModelSettings(THIN_LEG_VARIANT="two_leg"))

    def test_models_are_cached(self):
        assert get_model("nodal") is get_model(ModelName.NODAL)

    @pytest.mark.parametrize("name", ["nodal", "ff_nonproper", "toric_reference", "harvey_lawson", "positive_proper"])
    def test_sections_are_right_inverses(self, name, rng):
        model = get_model(name)
        for section in model.sections.values():
            b = _base_points(model, rng, 100)
            b = b[section.base_domain(b)][:100]
            assert np.max(np.abs(model.fibration(section.map(b)) - b)) <= 1e-8, section.name


class TestEvaluate:
    def test_nodal_at_the_node(self, nodal):
        np.testing.assert_allclose(evaluate(nodal, np.zeros(4)), [0.0, 0.0], atol=1e-15)

    def test_positive_proper_at_the_origin(self):
        np.testing.assert_allclose(evaluate(get_model("positive_proper"), np.zeros(6)), [0.0, 0.0, 0.0], atol=1e-15)

    def test_negative_amoeba_on_the_seam(self):
        value = evaluate(get_model("negative_amoeba"), [1.0, 0.0, 1.0, 0.0, 0.0, 0.0])
        np.testing.assert_allclose(value, [0.0, -0.5 * np.log(2.0), np.log((SQRT2 - 1.0) / SQRT2)], atol=1e-12)

    def test_outside_the_domain_raises(self, nodal):
        # z1 z2 + 1 = 0
        with pytest.raises(DomainError):
            evaluate(nodal, [1.0, 0.0, -1.0, 0.0])


class TestInvolutions:
    def test_nodal_conjugation(self, nodal):
        image = involution(nodal, PhasePoint.from_complex([1 + 1j, 2]))
        np.testing.assert_array_equal(image.z, [1 - 1j, 2])

    def test_harvey_lawson_involution(self, harvey_lawson):
        image = involution(harvey_lawson, PhasePoint.from_complex([1, 1j, 1]))
        np.testing.assert_array_equal(image.z, [-1, -1j, 1])

    def test_ff_involution_exchanges_the_sections(self, ff_model, rng):
        sigma_1, sigma_2 = ff_model.sections["Sigma_1"].map, ff_model.sections["Sigma_2"].map
        b = rng.uniform(-0.7, 0.7, size=(50, 2))
        np.testing.assert_allclose(involution(ff_model, sigma_1(b)), sigma_2(b), atol=1e-15)
        np.testing.assert_allclose(involution(ff_model, sigma_2(b)), sigma_1(b), atol=1e-15)


class TestGroupActions:
    def test_cstar_action_on_the_ff_model(self, ff_model):
        g = GroupElement(GroupKind.CSTAR, tau=2.0)
        image = group_action(ff_model, g, [1.0, 0.0, 1.0, 0.0])
        np.testing.assert_allclose(image, [2.0, 0.0, 0.5, 0.0])
        np.testing.assert_allclose(ff_model.fibration(image), [1.0, 0.0], atol=1e-15)

    def test_unit_tau_is_the_identity(self, ff_model):
        x = np.array([0.3, -0.4, 0.1, 0.8])
        np.testing.assert_allclose(group_action(ff_model, GroupElement(GroupKind.CSTAR), x), x)

    def test_wrong_group_is_rejected(self, nodal):
        with pytest.raises(ValueError):
            group_action(nodal, GroupElement(GroupKind.CSTAR, tau=2.0), [1.0, 0.0, 0.0, 0.0])

    def test_group_element_validation(self):
        with pytest.raises(ValueError):
            GroupElement(GroupKind.CSTAR, tau=0.0)
        with pytest.raises(ValueError):
            GroupElement(GroupKind.R_TIMES_T2, angles=(0.1,))
        assert GroupElement(GroupKind.R_TIMES_T2, angles=(1.25, -0.5)).angles == (0.25, 0.5)

    def test_harvey_lawson_torus_action_preserves_fibers(self, harvey_lawson):
        x = np.array([1.0, 0.0, 1.0, 0.0, 1.0, 0.0])
        image = group_action(harvey_lawson, GroupElement(GroupKind.R_TIMES_T2, angles=(0.25, 0.0)), x)
        np.testing.assert_allclose(harvey_lawson.fibration(image), harvey_lawson.fibration(x), atol=1e-8)


class TestRegularity:
    def test_node_is_singular(self, nodal):
        regular, report = is_regular(nodal, np.zeros(4))
        assert not regular
        assert report.rank == 0

    def test_generic_nodal_point_is_regular(self, nodal):
        regular, report = is_regular(nodal, [1.0, 0.0, 1.0, 0.0])
        assert regular and report.rank == 2

    def test_harvey_lawson_critical_axis(self, harvey_lawson):
        regular, _ = is_regular(harvey_lawson, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        assert not regular


class TestGlueMap:
    def test_region_one_example(self):
        p = psi_region(1, 0.5, [0.1, 0.0])
        image = glue_map(1, p)
        np.testing.assert_allclose(image, [0.5, 0.0, 0.2, 0.0], atol=1e-12)
        np.testing.assert_allclose(get_model("ff_nonproper").fibration(image), [0.1, 0.0], atol=1e-12)

    def test_base_outside_the_disk_raises(self):
        with pytest.raises(RegionError):
            glue_map(1, [1.5, 0.0, 0.3, 0.0])

    def test_region_must_be_one_or_two(self):
        with pytest.raises(ValueError):
            psi_region(3, 0.5, [0.1, 0.0])


class TestReducedMap:
    def test_example_value(self):
        np.testing.assert_allclose(reduced_gt(0.0, 4.0, 1.0), [0.0, 0.0], atol=1e-15)

    def test_log_of_zero_raises(self):
        with pytest.raises(DomainError):
            reduced_gt(0.0, 1.0, 1.0)

    def test_kink_at_zero(self):
        derivatives = reduced_gt_one_sided_dt(4.0, 1.0)
        assert derivatives[1][1] == pytest.approx(-0.25, abs=1e-6)
        assert derivatives[-1][1] == pytest.approx(0.25, abs=1e-6)

    def test_depends_on_moduli_only(self, rng):
        for _ in range(20):
            t = rng.uniform(-2, 2)
            u1, u2 = rng.normal(size=2) + 1j * rng.normal(size=2)
            np.testing.assert_allclose(reduced_gt(t, np.conj(u1), np.conj(u2)), reduced_gt(t, u1, u2), atol=1e-14)


class TestThinLeg:
    def test_outside_the_cutoff_phi_is_psi(self):
        u = np.array([1.0, 0.0, 1.0, 0.0])
        np.testing.assert_allclose(thin_leg_phi(u), [0.0, 0.0, (2.0 - SQRT2) / SQRT2, 0.0], atol=1e-15)

    def test_inside_the_cutoff_phi_is_the_rotated_map(self):
        np.testing.assert_allclose(thin_leg_phi([0.1, 0.0, 0.0, 0.0]), [0.0, 0.0, -0.9, 0.0], atol=1e-6)

    def test_commutes_with_conjugation(self, rng):
        u = rng.uniform(-0.6, 0.6, size=(20, 4))
        conj = np.array([1.0, -1.0, 1.0, -1.0])
        np.testing.assert_allclose(thin_leg_phi(u * conj), thin_leg_phi(u) * conj, atol=1e-8)

    def test_flow_matches_closed_form(self, rng):
        u = rng.uniform(-0.45, 0.45, size=(20, 4))
        np.testing.assert_allclose(thin_leg_flow(u, steps=1000), thin_leg_exact_flow(u), atol=1e-7)


class TestThreeLegThin:
    @staticmethod
    def _far_formula(u):
        a1, b1, a2, b2 = u
        return np.array([a1 - a2, b1 - b2, a1 + a2, b1 + b2]) / SQRT2

    @pytest.mark.parametrize("u", [[0.0, 0.0, -4.1, 0.0], [0.0, 0.0, 4.1, 0.0], [0.0, 0.0, 0.0, 4.1],
                                   [0.0, 0.0, 0.0, -4.1], [0.0, 0.0, -8.0, 0.0], [0.3, 0.2, -4.05, 0.1]])
    def test_far_region_is_the_rotated_affine_map(self, u):
        np.testing.assert_allclose(thin_leg_phi(u, "three_leg"), self._far_formula(u), atol=1e-8)

    def test_second_pinch_is_a_shift(self):
        u = [0.1, 0.0, SQRT2, 0.0]
        np.testing.assert_allclose(thin_leg_phi(u, "three_leg"), [-0.9, 0.0, 0.0, 0.0], atol=1e-6)

    def test_origin_leg_matches_the_one_leg_map(self):
        u = [0.1, 0.0, 0.0, 0.0]
        np.testing.assert_allclose(thin_leg_phi(u, "three_leg"), thin_leg_phi(u, "one_leg"), atol=1e-10)

    def test_between_the_regions_phi_is_psi(self):
        u = np.array([1.0, 0.0, 1.0, 0.0])
        np.testing.assert_allclose(thin_leg_phi(u, "three_leg"), thin_leg_phi(u, "one_leg"), atol=1e-15)

    def test_far_region_too_close_to_the_pinch(self):
        with pytest.raises(ConfigError):
            get_model("negative_thin", ModelSettings(THIN_LEG_VARIANT="three_leg", THIN_LEG_M=9.0))


class TestSeamProbe:
    def test_branches_agree_on_the_seam(self, rng):
        probe = seam_probe(get_model("negative_amoeba"), rng, m=50)
        assert probe.continuity <= 1e-10
        assert probe.wall_residual <= 1e-10

    def test_smooth_models_have_no_seam(self, nodal, rng):
        with pytest.raises(ValueError):
            seam_probe(nodal, rng)
