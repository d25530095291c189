"""
Verification suites. Each suite expands into tasks (suite, model) that return
report records; tasks draw their randomness from a seed derived from the run
seed and the task name, so the report does not depend on scheduling.
"""
import logging
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from lagland.core.affine import (
    AmoebaSpec,
    Loop,
    amoeba_agreement,
    amoeba_raster,
    discriminant_probe,
    model_monodromy,
    monodromy,
    write_contour_csv,
    write_pgm,
)
from lagland.core.errors import ConfigError, LaglandError, RankDeficiencyError, SeamError
from lagland.core.geometry import (
    Frame,
    cotangent_structure,
    focus_focus_structure,
    hamiltonian_flow,
    lagrangian_residual,
    linear_map,
    pullback_residual,
    standard_structure,
)
from lagland.core.grading import HolomorphicVolume, grading_census, h_field, intersection_index, phase_of_plane
from lagland.core.models import (
    FibrationModel,
    GroupElement,
    GroupKind,
    ModelName,
    get_model,
    reduced_gt_one_sided_dt,
    seam_probe,
)
from lagland.core.models.focus_focus import glue_smooth_map, psi_region
from lagland.core.models.negative import thin_leg_exact_flow, thin_leg_flow
from lagland.core.report import (
    Provenance,
    Record,
    Status,
    bound_record,
    equal_record,
    error_record,
)
from lagland.core.semiflat import (
    ChartName,
    OneForm,
    Potential,
    build_theta,
    chart,
    circle_distance,
    conjugated_involution,
    from_coefficients,
    involution_from_theta,
    lattice_probe,
    minus_id,
    section_translation_ff_map,
    section_twist,
    theta_uniqueness_residual,
    translate,
)
from lagland.core.symmetry import (
    SampleCloud,
    fiber_fixed_count,
    fixed_locus_census,
    flow_translation,
    half_lattice_points,
    sample_cloud,
    verify_commutation,
    verify_fiber_preserving,
    verify_involution,
    verify_pullback,
)
from lagland.utils.settings import ModelSettings

logger = logging.getLogger(__name__)

STRUCTURAL_TOL = 1e-12
FIBER_EXACT_TOL = 1e-10
INVOLUTION_FLOW_TOL = 1e-8
CENSUS_SAMPLES = 200_000


class Suite(StrEnum):
    LAGRANGIAN = "lagrangian"
    INVOLUTION = "involution"
    CENSUS = "census"
    MONODROMY = "monodromy"
    AMOEBA = "amoeba"
    GRADING = "grading"
    SEMIFLAT = "semiflat"
    FLOW = "flow"
    ALL = "all"


# (components, sections, provenance, mismatch is a finding)
EXPECTED_CENSUS = {
    ModelName.NODAL: (3, 2, Provenance.PAPER, False),
    ModelName.POSITIVE_PROPER: (5, 4, Provenance.PAPER, False),
    ModelName.NEGATIVE_AMOEBA: (5, 2, Provenance.PAPER, False),
    ModelName.GENERIC_SINGULAR: (7, 6, Provenance.PAPER, True),
    ModelName.TORIC_REFERENCE: (1, 0, Provenance.TRIVIAL, False),
}
CONJUGATION_MODELS = (ModelName.NODAL, ModelName.TORIC_REFERENCE, ModelName.POSITIVE_PROPER,
                      ModelName.GENERIC_SINGULAR)
# phi^* Omega = h conj(Omega) with constant h
EXPECTED_H = {**{name: 1.0 for name in CONJUGATION_MODELS},
              ModelName.HARVEY_LAWSON: -1.0, ModelName.FF_NONPROPER: -1.0}


@dataclass(frozen=True)
class SuiteContext:
    """Run parameters shared by all tasks."""
    samples: int = 1000
    seed: int = 42
    tol: float = 1e-6
    structural_tol: float = STRUCTURAL_TOL
    region: Optional[tuple[tuple[float, float], ...]] = None
    out: Optional[Path] = None
    model_settings: ModelSettings = field(default_factory=ModelSettings)

    def rng(self, name: str) -> np.random.Generator:
        return np.random.default_rng(self.task_seed(name))

    def task_seed(self, name: str) -> int:
        return int(np.random.SeedSequence([self.seed, zlib.crc32(name.encode())]).generate_state(1)[0])

    def potential(self) -> Potential:
        coefficients = self.model_settings.semiflat_h_coefficients
        return Potential.from_coefficients(coefficients, 2) if coefficients else Potential(2)

    def region_for(self, model: FibrationModel):
        if self.region is None or len(self.region) != model.ambient_dim:
            return None
        return self.region


class Checks:
    """Collects records, turning a failed computation into a fail record."""

    def __init__(self):
        self.records: list[Record] = []

    def run(self, name: str, claim: str, provenance: Provenance, compute: Callable[[], list[Record] | Record]):
        try:
            result = compute()
        except (LaglandError, ValueError, np.linalg.LinAlgError) as e:
            logger.warning(f"{name} failed: {e}")
            self.records.append(error_record(name, claim, e, provenance))
            return
        self.records.extend(result if isinstance(result, list) else [result])


def _tolerances(symmetry, ctx: SuiteContext) -> tuple[float, float, float]:
    """Bounds for (f o phi = f, phi^* omega = -omega, phi^2 = id)."""
    if symmetry.exact:
        return FIBER_EXACT_TOL, ctx.structural_tol, ctx.structural_tol
    return ctx.tol, ctx.tol, INVOLUTION_FLOW_TOL


# -- lagrangian ------------------------------------------------------------------

def _lagrangian_residuals(model: FibrationModel, points: np.ndarray) -> tuple[float, int]:
    worst, critical = 0.0, 0
    for x in points:
        try:
            try:
                residual = lagrangian_residual(model.structure, model.fibration, x)
            except SeamError:
                side = 1 if model.fibration.seam_value(x)[0] >= 0 else -1
                residual = lagrangian_residual(model.structure, model.fibration, x, side=side)
        except RankDeficiencyError:
            critical += 1
            continue
        worst = max(worst, residual)
    return worst, critical


def lagrangian_suite(model: FibrationModel, ctx: SuiteContext) -> list[Record]:
    checks = Checks()
    prefix = f"lagrangian.{model.name}"
    seed = ctx.task_seed(prefix)

    def residual():
        cloud = sample_cloud(model, ctx.samples, seed, ctx.region_for(model))
        worst, critical = _lagrangian_residuals(model, cloud.points)
        return bound_record(f"{prefix}.residual", "omega vanishes on the tangent spaces of the fibers", worst,
                            ctx.tol, Provenance.PAPER,
                            {"samples": len(cloud), "seed": seed, "critical": critical})

    def discriminant():
        probe = discriminant_probe(model, ctx.rng(f"{prefix}.discriminant"), resolution=100)
        return [
            bound_record(f"{prefix}.discriminant.images", "critical values lie on the discriminant descriptor",
                         probe.max_distance, ctx.tol, Provenance.DERIVED,
                         {"critical_samples": len(probe.critical_images)}),
            equal_record(f"{prefix}.discriminant.rank", "sampled critical points fail the rank test",
                         probe.all_critical, True, Provenance.DERIVED),
        ]

    checks.run(f"{prefix}.residual", "fibers are Lagrangian", Provenance.PAPER, residual)
    checks.run(f"{prefix}.discriminant", "discriminant descriptor", Provenance.DERIVED, discriminant)
    return checks.records


# -- involution ------------------------------------------------------------------

def involution_suite(model: FibrationModel, ctx: SuiteContext) -> list[Record]:
    checks = Checks()
    prefix = f"involution.{model.name}"
    seed = ctx.task_seed(prefix)
    cloud = sample_cloud(model, ctx.samples, seed, ctx.region_for(model))
    details = {"samples": len(cloud), "seed": seed}

    for name, symmetry in model.symmetries.items():
        fiber_tol, pullback_tol, square_tol = _tolerances(symmetry, ctx)
        base = f"{prefix}.{name}"
        m = symmetry.map
        checks.run(f"{base}.fiber_preserving", "f o phi = f", Provenance.PAPER, lambda m=m: bound_record(
            f"{base}.fiber_preserving", "f o phi = f", verify_fiber_preserving(model, m, cloud), fiber_tol,
            Provenance.PAPER, details))
        checks.run(f"{base}.anti_symplectic", "phi^* omega = -omega", Provenance.PAPER, lambda m=m: bound_record(
            f"{base}.anti_symplectic", "phi^* omega = -omega", verify_pullback(model, m, cloud, -1), pullback_tol,
            Provenance.PAPER, details))
        checks.run(f"{base}.involutive", "phi o phi = id", Provenance.PAPER, lambda m=m: bound_record(
            f"{base}.involutive", "phi o phi = id", verify_involution(m, cloud, model.structure), square_tol,
            Provenance.PAPER, details))

    # negative controls: both maps must be rejected
    partial = linear_map(np.diag([1.0, -1.0] + [1.0] * (model.ambient_dim - 2)), name="conjugate_first")
    checks.run(f"{prefix}.control.partial_conjugation", "conjugating one coordinate is not anti-symplectic",
               Provenance.DERIVED, lambda: _control_record(
                   f"{prefix}.control.partial_conjugation", "conjugating one coordinate is not anti-symplectic",
                   verify_pullback(model, partial, cloud, -1), ctx.structural_tol))
    identity = linear_map(np.eye(model.ambient_dim), name="identity")
    checks.run(f"{prefix}.control.symplectic", "a symplectic map fails the anti-symplectic test", Provenance.TRIVIAL,
               lambda: _control_record(f"{prefix}.control.symplectic",
                                       "a symplectic map fails the anti-symplectic test",
                                       verify_pullback(model, identity, cloud, -1), ctx.structural_tol))

    if model.piecewise:
        checks.run(f"{prefix}.seam", "branches agree on the seam and map it to the wall", Provenance.PAPER,
                   lambda: _seam_records(model, ctx, prefix))
    if model.action is not None:
        checks.run(f"{prefix}.group_action", "the group acts fiberwise", Provenance.PAPER,
                   lambda: _group_action_record(model, ctx, prefix))
    if model.name == ModelName.FF_NONPROPER:
        checks.run(f"{prefix}.commutation", "phi o t^-1 = t o phi", Provenance.PAPER,
                   lambda: _ff_commutation_records(model, cloud, ctx, prefix))
    if model.name == ModelName.NODAL:
        checks.run(f"{prefix}.commutation", "phi o t^-1 = t o phi", Provenance.PAPER,
                   lambda: _flow_commutation_record(model, cloud, ctx, prefix))
    return checks.records


def _control_record(name: str, claim: str, value: float, tol: float) -> Record:
    status = Status.PASS if value > 1e3 * tol else Status.FAIL
    return Record(name=name, claim=claim, status=status, value=value, expected=f"> {1e3 * tol:.1e}",
                  provenance=Provenance.DERIVED)


def _seam_records(model: FibrationModel, ctx: SuiteContext, prefix: str) -> list[Record]:
    probe = seam_probe(model, ctx.rng(f"{prefix}.seam"), 200)
    return [
        bound_record(f"{prefix}.seam.continuity", "both branch formulas agree on mu = 0", probe.continuity,
                     ctx.tol, Provenance.PAPER, {"samples": probe.samples}),
        bound_record(f"{prefix}.seam.wall", "the seam maps into b1 = 0", probe.wall_residual, FIBER_EXACT_TOL,
                     Provenance.TRIVIAL, {"samples": probe.samples}),
    ]


def _group_action_record(model: FibrationModel, ctx: SuiteContext, prefix: str) -> Record:
    rng = ctx.rng(f"{prefix}.group_action")
    cloud = sample_cloud(model, 16, ctx.task_seed(f"{prefix}.group_action.cloud"), ctx.region_for(model))
    if model.group_kind is GroupKind.R_TIMES_T2:
        g = GroupElement(model.group_kind, s=float(rng.uniform(-0.5, 0.5)), angles=tuple(rng.uniform(0, 1, 2)))
    else:
        tau = complex(np.exp(rng.uniform(-0.5, 0.5) + 1j * rng.uniform(-np.pi, np.pi)))
        angles = (float(rng.uniform(0, 1)),) if model.group_kind is GroupKind.CSTAR_TIMES_S1 else ()
        g = GroupElement(model.group_kind, tau=tau, angles=angles)
    moved = np.atleast_2d(model.action(g, cloud.points))
    residual = float(np.max(np.abs(model.fibration(moved) - model.fibration(cloud.points))))
    tol = FIBER_EXACT_TOL if model.name == ModelName.FF_NONPROPER else ctx.tol
    return bound_record(f"{prefix}.group_action", "f o g = f for the fiberwise group action", residual, tol,
                        Provenance.PAPER, {"samples": len(cloud), "group": str(model.group_kind)})


def _head(cloud: SampleCloud, m: int) -> SampleCloud:
    return SampleCloud(cloud.points[:m], cloud.seed, cloud.region, cloud.model)


def _ff_commutation_records(model: FibrationModel, cloud: SampleCloud, ctx: SuiteContext,
                            prefix: str) -> list[Record]:
    rng = ctx.rng(f"{prefix}.commutation")
    sigma_prime = OneForm.constant(rng.choice([-1.0, 1.0], 2) * rng.uniform(0.2, 0.5, 2), "sigma_prime")
    t = section_translation_ff_map(sigma_prime)
    t_inverse = section_translation_ff_map(sigma_prime, inverse=True)
    iota = model.involution.map
    composite = lambda x: t(iota(x))  # noqa: E731
    return [
        bound_record(f"{prefix}.commutation", "phi o t^-1 = t o phi for a constant section translation",
                     verify_commutation(iota, t, cloud, t_inverse), 1e-9, Provenance.PAPER),
        bound_record(f"{prefix}.commutation.newton", "commutation with t^-1 from Newton inversion",
                     verify_commutation(iota, t, _head(cloud, 50)), 1e-9, Provenance.DERIVED),
        bound_record(f"{prefix}.translated_involution", "t o phi is again an involution",
                     verify_involution(composite, cloud), INVOLUTION_FLOW_TOL, Provenance.PAPER),
        _control_record(f"{prefix}.control.translation", "a translation alone is not an involution",
                        verify_involution(t, cloud), INVOLUTION_FLOW_TOL),
    ]


def _flow_commutation_record(model: FibrationModel, cloud: SampleCloud, ctx: SuiteContext, prefix: str) -> Record:
    xi = ctx.rng(f"{prefix}.commutation").uniform(-0.3, 0.3, model.n)
    t = flow_translation(model, xi)
    t_inverse = flow_translation(model, xi, inverse=True)
    residual = verify_commutation(model.involution.map, t, _head(cloud, 20), t_inverse, model.structure)
    return bound_record(f"{prefix}.commutation", "phi o t^-1 = t o phi for the time-one flow of <xi, f>",
                        residual, ctx.tol, Provenance.PAPER, {"samples": 20, "xi": xi.tolist()})


# -- census ----------------------------------------------------------------------

def census_suite(model: FibrationModel, ctx: SuiteContext) -> list[Record]:
    checks = Checks()
    prefix = f"census.{model.name}"
    if model.name in EXPECTED_CENSUS:
        checks.run(f"{prefix}.components", "connected components of the fixed locus", Provenance.PAPER,
                   lambda: _census_records(model, ctx, prefix))
    checks.run(f"{prefix}.fiber_count", "fixed points per smooth fiber", Provenance.PAPER,
               lambda: _fiber_count_record(model, ctx, prefix))
    return checks.records


def _census_records(model: FibrationModel, ctx: SuiteContext, prefix: str) -> list[Record]:
    components, sections, provenance, finding = EXPECTED_CENSUS[model.name]
    seed = ctx.task_seed(prefix)
    samples = max(ctx.samples, CENSUS_SAMPLES)
    census = fixed_locus_census(model, region=ctx.region_for(model), n_samples=samples, seed=seed)
    details = {"samples": samples, "seed": seed, "fixed_samples": len(census.fixed_points),
               "eps_link": census.eps_link,
               "multiplicities": [c.multiplicity for c in census.components]}
    records = [
        equal_record(f"{prefix}.components", "number of connected components of the fixed locus",
                     census.component_count, components, provenance, details, finding=finding),
        equal_record(f"{prefix}.sections", "number of components that are sections", census.section_count,
                     sections, provenance, details, finding=finding),
    ]
    doubled = fixed_locus_census(model, region=ctx.region_for(model), n_samples=2 * samples, seed=seed + 1)
    records.append(equal_record(f"{prefix}.stability", "component count is stable under doubling the samples",
                                doubled.component_count, census.component_count, Provenance.DERIVED,
                                {"samples": 2 * samples, "eps_link": doubled.eps_link}))
    seeds = model.metadata.get("census_seeds")
    if seeds:
        points = np.zeros((len(seeds), model.ambient_dim))
        points[:, 0::2] = np.asarray(seeds)
        labels = census.locate(points, model.structure)
        distinct = len(set(labels.tolist())) == len(seeds) and bool(np.all(labels >= 0))
        records.append(equal_record(f"{prefix}.seed_components", "the marked real points lie in distinct components",
                                    distinct, True, Provenance.PAPER, {"labels": labels.tolist()}))
    return records


def _fiber_count_record(model: FibrationModel, ctx: SuiteContext, prefix: str) -> Record:
    rng = ctx.rng(f"{prefix}.fiber_count")
    expected = model.fixed_points_per_fiber
    radius = 2 * np.pi if model.proper else 1.5
    counts = [fiber_fixed_count(model, b, seed=int(rng.integers(2 ** 31)), radius=radius, seeds=32)
              for b in model.sample_base(rng, 10)]
    value = counts[0] if len(set(counts)) == 1 else counts
    return equal_record(f"{prefix}.fiber_count", "an involution fixes 2^n points on each smooth proper fiber",
                        value, expected, Provenance.PAPER, {"fibers": len(counts)})


# -- monodromy -------------------------------------------------------------------

def monodromy_suite(ctx: SuiteContext) -> list[Record]:
    checks = Checks()
    potential = ctx.potential()
    ff = chart(ChartName.FOCUS_FOCUS, potential)
    around = Loop((0.0, 0.0), 0.5, 1)

    def nodal_chart():
        M = monodromy(ff, around)
        return [
            equal_record("monodromy.focus_focus.matrix", "lambda_1 -> lambda_1 + lambda_2, lambda_2 -> lambda_2",
                         [list(r) for r in M.entries], [[1, 0], [1, 1]], Provenance.DERIVED,
                         {"rounding_residual": M.residual, "steps": M.steps}),
            equal_record("monodromy.focus_focus.unipotent", "the monodromy is unipotent", M.is_unipotent(), True,
                         Provenance.PAPER),
        ]

    def reversed_loop():
        M = monodromy(ff, around.reversed())
        return equal_record("monodromy.focus_focus.reversed", "the reversed loop gives the inverse matrix",
                            [list(r) for r in M.entries], [[1, 0], [-1, 1]], Provenance.TRIVIAL)

    def trivial_loop():
        M = monodromy(ff, Loop((0.6, 0.0), 0.2, 1))
        return equal_record("monodromy.focus_focus.trivial", "a loop not enclosing the node has trivial monodromy",
                            [list(r) for r in M.entries], [[1, 0], [0, 1]], Provenance.TRIVIAL)

    def generic():
        M = monodromy(chart(ChartName.GENERIC_SINGULAR), Loop((0.0, 0.0), 0.5, 1, fixed=(0.5,)))
        return equal_record("monodromy.generic_singular.matrix", "the annulus period is invariant",
                            [list(r) for r in M.entries], [[1, 0, 0], [1, 1, 0], [0, 0, 1]], Provenance.DERIVED)

    checks.run("monodromy.focus_focus", "focus-focus monodromy", Provenance.DERIVED, nodal_chart)
    checks.run("monodromy.focus_focus.reversed", "reversed loop", Provenance.TRIVIAL, reversed_loop)
    checks.run("monodromy.focus_focus.trivial", "non-enclosing loop", Provenance.TRIVIAL, trivial_loop)
    checks.run("monodromy.generic_singular.matrix", "generic-singular monodromy", Provenance.DERIVED, generic)
    return checks.records


def model_monodromy_suite(model: FibrationModel, ctx: SuiteContext) -> list[Record]:
    checks = Checks()
    name = f"monodromy.{model.name}.lattice"

    def compute():
        M = model_monodromy(model, "sigma_1", Loop((0.0, 0.0), 0.5, 1))
        matrix = M.matrix
        conjugate = bool(M.determinant == 1 and np.trace(matrix) == 2 and np.any(matrix != np.eye(2, dtype=int)))
        return equal_record(name, "transported periods of the nodal model give a non-trivial unipotent matrix",
                            conjugate, True, Provenance.PAPER,
                            {"matrix": [list(r) for r in M.entries], "rounding_residual": M.residual})

    checks.run(name, "nodal lattice monodromy", Provenance.PAPER, compute)
    return checks.records


# -- amoeba ----------------------------------------------------------------------

def amoeba_suite(ctx: SuiteContext) -> list[Record]:
    checks = Checks()
    spec = AmoebaSpec(resolution=(256, 256))

    def raster():
        result = amoeba_raster(spec)
        mismatches, compared = amoeba_agreement(spec, result)
        records = [
            equal_record("amoeba.unbounded_components", "the complement has three unbounded components",
                         result.unbounded_components, 3, Provenance.PAPER,
                         {"resolution": list(spec.resolution), "complement_components": result.complement_components}),
            equal_record("amoeba.oracle_agreement", "triangle membership agrees with sampling the curve",
                         mismatches, 0, Provenance.DERIVED, {"cells_compared": compared}),
        ]
        if ctx.out is not None:
            stem = ctx.out.with_suffix("")
            write_pgm(stem.with_name(stem.name + "_amoeba.pgm"), result.mask)
            write_contour_csv(stem.with_name(stem.name + "_amoeba_contour.csv"), result.contour)
        return records

    def kink():
        derivatives = reduced_gt_one_sided_dt(4.0, 1.0)
        right, left = float(derivatives[1][1]), float(derivatives[-1][1])
        return [
            bound_record("amoeba.reduced_map.right_derivative", "d/dt of the second component from the right is -1/4",
                         abs(right + 0.25), 1e-6, Provenance.DERIVED),
            bound_record("amoeba.reduced_map.left_derivative", "d/dt of the second component from the left is 1/4",
                         abs(left - 0.25), 1e-6, Provenance.DERIVED),
        ]

    checks.run("amoeba.raster", "amoeba rasterization", Provenance.PAPER, raster)
    checks.run("amoeba.reduced_map", "the reduced map is not smooth across t = 0", Provenance.DERIVED, kink)
    return checks.records


# -- grading ---------------------------------------------------------------------

def _unit_plane(n: int, U: np.ndarray) -> np.ndarray:
    """Real frame (rows) of the plane spanned by the columns of a unitary matrix."""
    vectors = np.zeros((n, 2 * n))
    vectors[:, 0::2] = U.real.T
    vectors[:, 1::2] = U.imag.T
    return vectors


def _random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))[None, :]


def grading_basics(ctx: SuiteContext) -> list[Record]:
    checks = Checks()
    rng = ctx.rng("grading.basics")

    def examples():
        records = []
        for n in (1, 2, 3):
            S = standard_structure(n)
            volume = HolomorphicVolume(n)
            real = phase_of_plane(volume, Frame(np.zeros(2 * n), _unit_plane(n, np.eye(n))), S)
            imaginary = phase_of_plane(volume, Frame(np.zeros(2 * n), _unit_plane(n, 1j * np.eye(n))), S)
            records.append(bound_record(f"grading.phase.real.n{n}", "R^n has phase 0",
                                        float(min(real.theta, 2 - real.theta)), 1e-12, Provenance.TRIVIAL))
            records.append(bound_record(f"grading.phase.imaginary.n{n}", "(iR)^n has phase n/2 mod 2",
                                        abs(imaginary.theta - (n / 2) % 2), 1e-12, Provenance.TRIVIAL))
            records.append(bound_record(f"grading.index.real_imaginary.n{n}",
                                        "index of (R^n, 0) and ((iR)^n, n/2) is 0",
                                        abs(intersection_index(real.with_theta(0.0), imaginary.with_theta(n / 2))),
                                        1e-9, Provenance.PAPER))
        S1 = standard_structure(1)
        line = phase_of_plane(HolomorphicVolume(1), Frame(np.zeros(2), [[1.0, 0.0]]), S1)
        turned = phase_of_plane(HolomorphicVolume(1), Frame(np.zeros(2), [[np.cos(np.pi / 3), np.sin(np.pi / 3)]]),
                                S1)
        records.append(bound_record("grading.index.rotated_line", "rotating a line by pi/3 gives index 1/3",
                                    abs(intersection_index(line, turned.with_theta(line.theta)) - 1.0 / 3.0), 1e-9,
                                    Provenance.DERIVED))
        return records

    def duality():
        worst = 0.0
        for _ in range(50):
            n = int(rng.integers(1, 4))
            S = standard_structure(n)
            volume = HolomorphicVolume(n)
            p1 = phase_of_plane(volume, Frame(np.zeros(2 * n), _unit_plane(n, _random_unitary(rng, n))), S)
            p2 = phase_of_plane(volume, Frame(np.zeros(2 * n), _unit_plane(n, _random_unitary(rng, n))), S)
            worst = max(worst, abs(intersection_index(p1, p2) + intersection_index(p2, p1) - n))
        return bound_record("grading.index.duality", "index(L1, L2) + index(L2, L1) = n", worst, 1e-9,
                            Provenance.DERIVED, {"pairs": 50})

    checks.run("grading.phase", "phase and index examples", Provenance.TRIVIAL, examples)
    checks.run("grading.index.duality", "index duality", Provenance.DERIVED, duality)
    return checks.records


def grading_suite(model: FibrationModel, ctx: SuiteContext) -> list[Record]:
    checks = Checks()
    prefix = f"grading.{model.name}"
    volume = HolomorphicVolume(model.n)
    rng = ctx.rng(prefix)

    def h_records():
        cloud = sample_cloud(model, 100, ctx.task_seed(f"{prefix}.h"), ctx.region_for(model))
        phi = model.involution.map
        tol = 1e-9 if model.involution.exact else ctx.tol
        values = np.array([h_field(model, volume, x, rng=rng, tol=tol) for x in cloud.points])
        mirrored = np.array([h_field(model, volume, phi(x), rng=rng, tol=tol) for x in cloud.points])
        records = [bound_record(f"{prefix}.h.inverse", "h o phi = 1/h", float(np.max(np.abs(mirrored * values - 1.0))),
                                tol, Provenance.PAPER, {"samples": len(cloud)})]
        if model.name in EXPECTED_H:
            expected = EXPECTED_H[model.name]
            records.append(bound_record(f"{prefix}.h.value", f"h is the constant {expected:+.0f}",
                                        float(np.max(np.abs(values - expected))), tol, Provenance.DERIVED))
        return records

    def census():
        result = grading_census(model, volume, rng)
        n = model.n
        return [
            bound_record(f"{prefix}.sections", "section phases are integers", result.section_deviation, ctx.tol,
                         Provenance.PAPER, {"planes": result.section_points}),
            bound_record(f"{prefix}.fibers", f"fiber phases at fixed points are {n}/2 mod 1",
                         result.fiber_deviation, ctx.tol, Provenance.PAPER, {"planes": result.fiber_points}),
            bound_record(f"{prefix}.phase_shift", "the involution maps theta to arg(h)/pi - theta",
                         result.phase_shift_residual, ctx.tol, Provenance.DERIVED),
            bound_record(f"{prefix}.dimension_shift", "the involution maps theta to n - theta mod 2",
                         result.dimension_shift_residual, ctx.tol, Provenance.PAPER),
            equal_record(f"{prefix}.fiber_phase_constant", "theta is constant along the fibers",
                         not result.nonconstant, True, Provenance.DERIVED, {"spread": result.fiber_spread},
                         finding=True),
        ]

    checks.run(f"{prefix}.h", "phi^* Omega = h conj(Omega)", Provenance.PAPER, h_records)
    if model.name in CONJUGATION_MODELS:
        checks.run(f"{prefix}.census", "grading census", Provenance.PAPER, census)
    return checks.records


# -- semiflat --------------------------------------------------------------------

def semiflat_suite(ctx: SuiteContext) -> list[Record]:
    checks = Checks()
    rng = ctx.rng("semiflat")
    ff = chart(ChartName.FOCUS_FOCUS, ctx.potential())
    pairs = min(ctx.samples, 1000)

    def algebra():
        radius = np.sqrt(rng.uniform(0.01, 0.9, pairs))
        angle = rng.uniform(-np.pi, np.pi, pairs)
        b = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)
        p = from_coefficients(ff, b, rng.uniform(0, 1, (pairs, 2)))
        eta_values = rng.uniform(-3, 3, (pairs, 2))
        eta = OneForm(lambda _b, v=eta_values: v, "eta")
        neg_eta = OneForm(lambda _b, v=eta_values: -v, "-eta")
        left = translate(ff, eta, minus_id(ff, p))
        right = minus_id(ff, translate(ff, neg_eta, p))
        twice = translate(ff, eta, minus_id(ff, left))
        return [
            bound_record("semiflat.translation_reflection", "T_eta o (-id) = (-id) o T_-eta",
                         circle_distance(left.reduced, right.reduced), 1e-9, Provenance.PAPER, {"pairs": pairs}),
            bound_record("semiflat.translated_reflection_involutive", "(T_eta o (-id))^2 = id",
                         circle_distance(twice.reduced, p.reduced), 1e-9, Provenance.PAPER, {"pairs": pairs}),
        ]

    def half_lattice():
        b = np.array([0.3, 0.2])
        count = len(half_lattice_points(ff, b, minus_id))
        return equal_record("semiflat.half_lattice", "-id fixes 2^n points of each fiber", count, 4,
                            Provenance.TRIVIAL)

    def sections():
        b = np.array([0.4, -0.3])
        s1 = OneForm.constant([0.2, 0.1], "s1")
        s2 = OneForm.constant([-0.3, 0.7], "s2")
        start = from_coefficients(ff, b, np.linalg.solve(ff.periods(b).T, s1(b)))
        moved = section_twist(ff, s1, s2)(start)
        target = from_coefficients(ff, b, np.linalg.solve(ff.periods(b).T, s2(b)))
        fixed = conjugated_involution(ff, s2)(target)
        return [
            bound_record("semiflat.section_twist", "the twist maps one section onto the other",
                         circle_distance(moved.reduced, target.reduced), 1e-10, Provenance.DERIVED),
            bound_record("semiflat.conjugated_involution", "the conjugated involution fixes its section",
                         circle_distance(fixed.reduced, target.reduced), 1e-10, Provenance.DERIVED),
        ]

    def glue():
        potential = ctx.potential()
        ff_model = get_model(ModelName.FF_NONPROPER)
        records = []
        for region, tau in ((1, 0.5 * np.exp(0.3j)), (2, 1.5 * np.exp(-0.7j))):
            b = np.array([0.2, 0.1])
            p = psi_region(region, tau, b, potential)
            g = glue_smooth_map(region, potential)
            records.append(bound_record(
                f"semiflat.glue.region{region}.symplectic", "the glue map is symplectic",
                pullback_residual(cotangent_structure(2), g, p, 1, target=focus_focus_structure()), 1e-10,
                Provenance.PAPER))
            records.append(bound_record(
                f"semiflat.glue.region{region}.fiber", "the glue map covers the identity of the base",
                float(np.max(np.abs(ff_model.fibration(g(p)) - b))), FIBER_EXACT_TOL, Provenance.PAPER))
        return records

    checks.run("semiflat.algebra", "translation and reflection algebra", Provenance.PAPER, algebra)
    checks.run("semiflat.half_lattice", "half-lattice fixed points", Provenance.TRIVIAL, half_lattice)
    checks.run("semiflat.sections", "section twists", Provenance.DERIVED, sections)
    checks.run("semiflat.glue", "glue maps", Provenance.PAPER, glue)
    return checks.records


def theta_suite(model: FibrationModel, ctx: SuiteContext) -> list[Record]:
    """Theta o (-id) o Theta^-1 against the closed-form involution on the nodal model."""
    checks = Checks()
    prefix = f"semiflat.{model.name}.theta"
    rng = ctx.rng(prefix)
    section = "sigma_1"

    def reconstruction():
        worst, points = 0.0, 0
        for b in model.sample_base(rng, 5, margin=0.3):
            periods = lattice_probe(model, section, b)
            xis = rng.uniform(0, 1, (20, model.n)) @ periods
            for x in np.atleast_2d(build_theta(model, section, b, xis)):
                rebuilt = involution_from_theta(model, section, x, periods)
                worst = max(worst, float(model.structure.distance(rebuilt, model.involution.map(x))))
                points += 1
        return bound_record(prefix + ".involution", "the involution rebuilt from Theta matches the closed form",
                            worst, 1e-5, Provenance.PAPER, {"points": points, "section": section})

    def uniqueness():
        b = model.sample_base(rng, 1, margin=0.3)[0]
        Q = rng.standard_normal((model.n, model.n))
        residual = theta_uniqueness_residual(model, section, b, rng.uniform(-1, 1, model.n), 0.5 * (Q + Q.T))
        return bound_record(prefix + ".uniqueness", "Theta does not depend on the Hamiltonian realizing it",
                            residual, ctx.tol, Provenance.PAPER)

    checks.run(prefix + ".involution", "Theta reconstruction", Provenance.PAPER, reconstruction)
    checks.run(prefix + ".uniqueness", "Theta uniqueness", Provenance.PAPER, uniqueness)
    return checks.records


# -- flow ------------------------------------------------------------------------

def flow_suite(ctx: SuiteContext) -> list[Record]:
    checks = Checks()
    rng = ctx.rng("flow")
    model = get_model(ModelName.FF_NONPROPER)
    S = model.structure
    x0 = rng.uniform(-1, 1, (8, 4))

    def closed_forms():
        worst, drift = 0.0, 0.0
        for t in (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0):
            for index, multiplier in ((0, lambda t: (np.exp(-t), np.exp(t))),
                                      (1, lambda t: (np.exp(1j * t), np.exp(1j * t)))):
                H = model.fibration.component(index)
                end = hamiltonian_flow(S, H, x0, t)
                m1, m2 = multiplier(t)
                z1 = m1 * (x0[:, 0] + 1j * x0[:, 1])
                z2 = m2 * (x0[:, 2] + 1j * x0[:, 3])
                exact = np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)
                worst = max(worst, float(np.max(np.abs(end - exact))))
                drift = max(drift, float(np.max(np.abs(H(end) - H(x0)))))
        return [
            bound_record("flow.focus_focus.closed_form", "integrated flows of q1, q2 match their closed forms",
                         worst, 1e-8, Provenance.DERIVED),
            bound_record("flow.focus_focus.energy", "the integrator conserves quadratic Hamiltonians", drift, 1e-10,
                         Provenance.DERIVED),
        ]

    def thin_leg():
        settings = ctx.model_settings
        epsilon = settings.THIN_LEG_EPSILON
        u = rng.standard_normal((16, 4))
        u *= np.sqrt(rng.uniform(0.0, 2.5 * epsilon, 16) / np.sum(u ** 2, axis=1))[:, None]
        residual = float(np.max(np.abs(thin_leg_flow(u, "one_leg", epsilon, settings.THIN_LEG_M, steps=1000)
                                       - thin_leg_exact_flow(u, epsilon))))
        return bound_record("flow.thin_leg.closed_form", "the cut-off rotation flow matches its closed form",
                            residual, 1e-8, Provenance.DERIVED, {"epsilon": epsilon})

    checks.run("flow.focus_focus", "focus-focus flows", Provenance.DERIVED, closed_forms)
    checks.run("flow.thin_leg", "thin-leg flow", Provenance.DERIVED, thin_leg)
    return checks.records


# -- scheduling ------------------------------------------------------------------

Task = tuple[str, Callable[[], list[Record]]]

_MODEL_SUITES = {
    Suite.LAGRANGIAN: lagrangian_suite,
    Suite.INVOLUTION: involution_suite,
    Suite.CENSUS: census_suite,
    Suite.GRADING: grading_suite,
}
_GLOBAL_SUITES = {
    Suite.MONODROMY: monodromy_suite,
    Suite.AMOEBA: amoeba_suite,
    Suite.GRADING: grading_basics,
    Suite.SEMIFLAT: semiflat_suite,
    Suite.FLOW: flow_suite,
}


def resolve_suites(names: str | list[str]) -> list[Suite]:
    """
    Raises:
        ConfigError: unknown suite name.
    """
    names = names.split(",") if isinstance(names, str) else names
    try:
        suites = [Suite(name.strip()) for name in names if name.strip()]
    except ValueError as e:
        raise ConfigError(f"unknown suite in {names}; choose from {', '.join(s.value for s in Suite)}") from e
    if Suite.ALL in suites or not suites:
        return [s for s in Suite if s is not Suite.ALL]
    return suites


def resolve_models(name: str, settings: ModelSettings) -> list[FibrationModel]:
    if name == "all":
        return [get_model(m, settings) for m in ModelName]
    return [get_model(m.strip(), settings) for m in name.split(",")]


def plan(suites: list[Suite], models: list[FibrationModel], ctx: SuiteContext) -> list[Task]:
    """Expand suites into named tasks in a canonical order."""
    tasks: list[Task] = []
    for suite in suites:
        if suite in _GLOBAL_SUITES:
            tasks.append((suite.value, lambda s=suite: _GLOBAL_SUITES[s](ctx)))
        if suite in _MODEL_SUITES:
            for model in models:
                tasks.append((f"{suite.value}.{model.name}", lambda s=suite, m=model: _MODEL_SUITES[s](m, ctx)))
        if suite is Suite.MONODROMY:
            tasks += [(f"monodromy.{m.name}", lambda m=m: model_monodromy_suite(m, ctx))
                      for m in models if m.name == ModelName.NODAL]
        if suite is Suite.SEMIFLAT:
            tasks += [(f"semiflat.{m.name}", lambda m=m: theta_suite(m, ctx))
                      for m in models if m.name == ModelName.NODAL]
    return tasks


def execute(tasks: list[Task], jobs: int = 1) -> tuple[list[Record], dict[str, float]]:
    """Run tasks on a thread pool; records come back sorted by name."""

    def timed(task: Task) -> tuple[str, list[Record], float]:
        name, compute = task
        start = time.perf_counter()
        logger.info(f"running {name}")
        try:
            records = compute()
        except (LaglandError, ValueError, np.linalg.LinAlgError) as e:
            logger.error(f"task {name} failed: {e}")
            records = [error_record(name, "task completed", e)]
        return name, records, time.perf_counter() - start

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(timed, tasks))
    records = sorted((r for _, rs, _ in results for r in rs), key=lambda r: r.name)
    timings = {name: elapsed for name, _, elapsed in results}
    return records, timings
