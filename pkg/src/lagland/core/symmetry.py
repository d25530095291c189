"""
Sampling-based checks of fiber-preserving (anti-)symplectic involutions: residuals
over point clouds, fixed-locus component census and per-fiber fixed point counts.

All sampling is drawn from a numpy Generator seeded by the caller, so results do
not depend on how the work is later split across workers.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.cluster.hierarchy import DisjointSet
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from lagland.core.errors import CensusError, ConvergenceError, CoverageError, DomainError, SeamError
from lagland.core.geometry import (
    SmoothMap,
    coords_of,
    fiber_walk,
    invert_map,
    jacobian,
    pullback_residual,
    solve_fiber_point,
)
from lagland.core.models.interfaces import Box, FibrationModel
from lagland.core.semiflat import SemiflatChart, circle_distance, from_coefficients
from lagland.utils.retry import RetryConfig

logger = logging.getLogger(__name__)

MIN_FIXED_SAMPLES = 10
PROJECTION_ITERATIONS = 8
SEGMENT_CHECKS = 16
LINK_FACTOR = 4.0
LINK_NEIGHBORS = 12
SEAM_CLEARANCE = 1e-4
REGULAR_CLEARANCE = 1e-3

PointMap = SmoothMap | Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class SampleCloud:
    """
    Seeded sample of domain points of a model.

    Attributes:
        points: (m, 2n) array; every row passes the model's domain predicate.
        seed: the RNG seed the points were drawn with.
        region: the sampling box.
        model: name of the model the cloud was drawn for.
    """
    points: np.ndarray
    seed: int
    region: Box
    model: str = ""

    def __len__(self) -> int:
        return len(self.points)


def _apply(map_: PointMap, x: np.ndarray) -> np.ndarray:
    return np.atleast_2d(np.asarray(map_(x), dtype=float))


def sample_cloud(model: FibrationModel, n: int, seed: int, region: Optional[Box] = None,
                 regular: bool = True) -> SampleCloud:
    """
    Rejection-sample n domain points of the model's phase-space box.

    With ``regular`` set, points whose image lies within 1e-3 of Delta are
    rejected, and for piecewise models so are points within 1e-4 of the seam.
    """
    rng = np.random.default_rng(seed)
    region = region or model.region
    lo, hi = np.asarray(region, dtype=float).T
    kept = np.empty((0, model.ambient_dim))
    draws = 0
    while len(kept) < n:
        x = rng.uniform(lo, hi, size=(2 * n, model.ambient_dim))
        draws += len(x)
        x = x[model.fibration.in_domain(x)]
        if regular and len(x):
            if model.piecewise:
                x = x[np.abs(model.fibration.seam_value(x)) > SEAM_CLEARANCE]
            x = x[model.discriminant.distance(model.fibration(x)) > REGULAR_CLEARANCE]
        kept = np.concatenate([kept, x])
        if draws > 200 * n and len(kept) < n:
            raise DomainError(f"sampling box of {model.name} has almost no admissible points")
    logger.debug(f"sampled {n} points of {model.name} in {draws} draws")
    return SampleCloud(kept[:n], seed, tuple(map(tuple, np.column_stack([lo, hi]).tolist())), str(model.name))


def verify_fiber_preserving(model: FibrationModel, map_: PointMap, cloud: SampleCloud) -> float:
    """
    max |f(map(x)) - f(x)| over the cloud.

    Raises:
        DomainError: the map sends a cloud point outside the domain of f.
    """
    x = cloud.points
    return float(np.max(np.abs(model.fibration(_apply(map_, x)) - model.fibration(x))))


def verify_involution(map_: PointMap, cloud: SampleCloud, structure=None) -> float:
    """max |map(map(x)) - x| over the cloud (angle coordinates compared modulo their period)."""
    x = cloud.points
    twice = _apply(map_, _apply(map_, x))
    if structure is None:
        return float(np.max(np.linalg.norm(twice - x, axis=-1)))
    return float(np.max(structure.distance(x, twice)))


def verify_pullback(model: FibrationModel, map_: SmoothMap, cloud: SampleCloud, sign: int) -> float:
    """max |(Dm)^T J (Dm) - sign J| over the cloud; sign = -1 tests anti-symplecticity."""
    return float(np.max(pullback_residual(model.structure, map_, cloud.points, sign)))


def verify_commutation(phi: PointMap, t: SmoothMap, cloud: SampleCloud,
                       t_inverse: Optional[PointMap] = None, structure=None) -> float:
    """
    max |phi(t^-1(x)) - t(phi(x))| over the cloud. The inverse is taken in
    closed form when given, otherwise by Newton from x.

    Raises:
        ConvergenceError: Newton inversion of t failed.
    """
    x = cloud.points
    inverse = _apply(t_inverse, x) if t_inverse is not None else np.atleast_2d(invert_map(t, x, x))
    left = _apply(phi, inverse)
    right = _apply(t, _apply(phi, x))
    if structure is None:
        return float(np.max(np.linalg.norm(left - right, axis=-1)))
    return float(np.max(structure.distance(left, right)))


def flow_translation(model: FibrationModel, xi, inverse: bool = False, steps: Optional[int] = None) -> SmoothMap:
    """
    Translation by the constant 1-form xi: the time-one flow of <xi, f>,
    as a (finite-difference) self-map of the model's phase space.
    """
    xi = np.asarray(xi, dtype=float) * (-1.0 if inverse else 1.0)
    S, f = model.structure, model.fibration

    def evaluator(x):
        end = fiber_walk(S, f, np.atleast_2d(x), xi, 1.0, steps=steps, retry_config=RetryConfig.DEFAULT)
        return np.atleast_2d(end)

    return SmoothMap(model.ambient_dim, model.ambient_dim, evaluator, f.domain, name="flow_translation")


# -- fixed-locus census ----------------------------------------------------------

def project_to_fixed(model: FibrationModel, map_: PointMap, x: np.ndarray, eps_fix: float,
                     iterations: int = PROJECTION_ITERATIONS) -> tuple[np.ndarray, np.ndarray]:
    """
    Move points towards the fixed set by x <- x + 1/2 (map(x) - x) (midpoint along
    the chart displacement). One step is exact for linear involutions.

    Returns:
        (points, mask of points with |map(x) - x| <= eps_fix)
    """
    S = model.structure
    x = np.atleast_2d(np.asarray(x, dtype=float)).copy()
    gap = np.full(len(x), np.inf)
    for _ in range(iterations):
        image = _apply(map_, x)
        step = S.displacement(x, image)
        gap = np.linalg.norm(step, axis=-1)
        if np.all(gap <= eps_fix):
            break
        x = x + 0.5 * np.where((gap > eps_fix)[:, None], step, 0.0)
    gap = S.distance(x, _apply(map_, x))
    return x, gap <= eps_fix


def _wall_signs(model: FibrationModel, x: np.ndarray) -> np.ndarray:
    if model.walls is None:
        return np.ones((len(x), 1))
    return np.sign(np.asarray(model.walls(x), dtype=float))


def _admissible_links(model: FibrationModel, points: np.ndarray, pairs: np.ndarray,
                      chunk: int = 20000) -> np.ndarray:
    """Pairs whose segment keeps every wall function at one sign and stays in the domain."""
    if len(pairs) == 0 or model.walls is None:
        return pairs
    S = model.structure
    signs = _wall_signs(model, points)
    pairs = pairs[np.all(signs[pairs[:, 0]] == signs[pairs[:, 1]], axis=1)]
    steps = np.linspace(0.0, 1.0, SEGMENT_CHECKS + 2)[1:-1]
    keep = []
    for start in range(0, len(pairs), chunk):
        block = pairs[start:start + chunk]
        a = points[block[:, 0]]
        d = S.displacement(a, points[block[:, 1]])
        segment = (a[:, None, :] + steps[None, :, None] * d[:, None, :]).reshape(-1, points.shape[1])
        inside = model.fibration.in_domain(segment).reshape(len(block), -1)
        along = _wall_signs(model, segment).reshape(len(block), len(steps), -1)
        same = np.all(along == signs[block[:, 0]][:, None, :], axis=(1, 2)) & np.all(inside, axis=1)
        keep.append(block[same])
    return np.concatenate(keep) if keep else pairs[:0]


def link_pairs(points: np.ndarray, radius: float, neighbors: int = LINK_NEIGHBORS) -> np.ndarray:
    """
    Pairs (i, j), i < j, linking each point to its nearest neighbors closer than
    ``radius``. The graph keeps the components of the full radius graph for
    dense samples while its size stays linear in the number of points.
    """
    tree = cKDTree(points)
    k = min(neighbors + 1, len(points))
    _, index = tree.query(points, k=k, distance_upper_bound=radius)
    index = np.atleast_2d(index.reshape(len(points), -1))
    rows = np.repeat(np.arange(len(points)), index.shape[1])
    cols = index.ravel()
    found = (cols < len(points)) & (cols != rows)
    pairs = np.sort(np.stack([rows[found], cols[found]], axis=-1), axis=1)
    return np.unique(pairs, axis=0) if len(pairs) else pairs.reshape(0, 2)


def default_link_radius(points: np.ndarray, dimension: int) -> float:
    """LINK_FACTOR times the sampling spacing estimate extent / m^(1/d)."""
    extent = float(np.max(np.ptp(points, axis=0)))
    return LINK_FACTOR * extent / len(points) ** (1.0 / dimension)


def cluster_points(points: np.ndarray, radius: float) -> list[np.ndarray]:
    """Single-linkage clusters at the given radius; returns index arrays."""
    if len(points) == 0:
        return []
    clusters = DisjointSet(range(len(points)))
    for i, j in cKDTree(points).query_pairs(radius, output_type="ndarray"):
        clusters.merge(int(i), int(j))
    return [np.fromiter(subset, dtype=int) for subset in clusters.subsets()]


@dataclass(frozen=True, eq=False)
class CensusComponent:
    """
    One connected component of the sampled fixed locus.

    Attributes:
        label: component index, ordered by decreasing sample count.
        representative: the sample closest to the component's mean.
        sample_count: fixed samples in the component.
        section_flag: every probed fiber meets the component in exactly one cluster.
        fiber_counts: clusters met by each probed fiber.
        multiplicity: the most frequent fiber count (1 for sections).
    """
    label: int
    representative: np.ndarray
    sample_count: int
    section_flag: bool
    fiber_counts: tuple[int, ...]
    multiplicity: int


@dataclass(frozen=True, eq=False)
class CensusResult:
    """Components of the sampled fixed locus together with the sampling parameters."""
    components: list[CensusComponent]
    fixed_points: np.ndarray
    labels: np.ndarray
    seed: int
    n_samples: int
    eps_fix: float
    eps_link: float
    metadata: dict = field(default_factory=dict)

    @property
    def component_count(self) -> int:
        return len(self.components)

    @property
    def section_count(self) -> int:
        return sum(c.section_flag for c in self.components)

    def locate(self, points, structure=None) -> np.ndarray:
        """
        Component label of the fixed sample nearest to each point; -1 when the
        nearest sample is farther than eps_link.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        embed = structure.embed if structure is not None else (lambda x: x)
        distance, index = cKDTree(embed(self.fixed_points)).query(embed(points))
        return np.where(distance <= self.eps_link, self.labels[index], -1)


def _fiber_counts(model: FibrationModel, points: np.ndarray, images: np.ndarray, members: np.ndarray,
                  eps_link: float, rng: np.random.Generator, probes: int, fiber_radius: float) -> tuple[int, ...]:
    clearance = model.discriminant.distance(images[members]) > 2 * fiber_radius
    if model.piecewise:
        clearance &= np.abs(images[members, 0]) > 2 * fiber_radius
    candidates = members[clearance]
    if len(candidates) == 0:
        candidates = members
    chosen = rng.choice(candidates, size=min(probes, len(candidates)), replace=False)
    embedded = model.structure.embed(points[members])
    counts = []
    for probe in chosen:
        near = np.linalg.norm(images[members] - images[probe], axis=-1) <= fiber_radius
        counts.append(len(cluster_points(embedded[near], eps_link)))
    return tuple(counts)


def fixed_locus_census(model: FibrationModel, map_: Optional[PointMap] = None, region: Optional[Box] = None,
                       n_samples: int = 2000, eps_fix: float = 1e-9, eps_link: Optional[float] = None,
                       seed: int = 0, probes: int = 12, fiber_radius: float = 0.3) -> CensusResult:
    """
    Count connected components of the fixed locus of an involution in a box.

    Box samples are projected onto the fixed set, linked to their nearest
    neighbors closer than eps_link (see link_pairs) along segments that cross
    no domain wall, and grouped into connected components. A component is
    flagged as a section when every probed fiber meets it in a single cluster.

    Raises:
        CensusError: fewer than 10 samples reached the fixed set.
    """
    map_ = map_ or model.involution.map
    rng = np.random.default_rng(seed)
    region = region or model.region
    lo, hi = np.asarray(region, dtype=float).T
    raw = rng.uniform(lo, hi, size=(n_samples, model.ambient_dim))
    raw = raw[model.fibration.in_domain(raw)]
    points, fixed = project_to_fixed(model, map_, raw, eps_fix)
    points = points[fixed]
    points = points[model.fibration.in_domain(points)]
    if model.walls is not None and len(points):
        points = points[np.all(np.abs(model.walls(points)) > 1e-9, axis=1)]
    if len(points) < MIN_FIXED_SAMPLES:
        raise CensusError(f"only {len(points)} of {n_samples} samples reached the fixed set of {model.name}")

    embedded = model.structure.embed(points)
    eps_link = eps_link or default_link_radius(embedded, model.n)
    pairs = link_pairs(embedded, eps_link)
    links = _admissible_links(model, points, pairs)
    logger.debug(f"census on {model.name}: {len(points)} fixed samples, {len(links)}/{len(pairs)} links")
    graph = coo_matrix((np.ones(len(links)), (links[:, 0], links[:, 1])), shape=(len(points),) * 2)
    _, raw_labels = connected_components(graph, directed=False)

    sizes = np.bincount(raw_labels)
    order = np.argsort(-sizes, kind="stable")
    relabel = np.empty_like(order)
    relabel[order] = np.arange(len(order))
    labels = relabel[raw_labels]

    images = model.fibration(points)
    components = []
    for label in range(len(order)):
        members = np.flatnonzero(labels == label)
        centre = points[members].mean(axis=0)
        representative = points[members[np.argmin(np.linalg.norm(points[members] - centre, axis=1))]]
        counts = _fiber_counts(model, points, images, members, eps_link, rng, probes, fiber_radius)
        multiplicity = int(np.bincount(counts).argmax())
        components.append(CensusComponent(label, representative, len(members), all(c == 1 for c in counts),
                                          counts, multiplicity))
    result = CensusResult(components, points, labels, seed, n_samples, eps_fix, eps_link, {"model": str(model.name)})
    logger.info(f"census on {model.name}: {result.component_count} components, {result.section_count} sections")
    return result


# -- fixed points on one fiber ---------------------------------------------------

def _jacobian_near_seam(m: SmoothMap, x: np.ndarray) -> np.ndarray:
    try:
        return jacobian(m, x)
    except SeamError:
        return jacobian(m, x, side=1 if m.seam_value(x)[0] >= 0 else -1)


def _fixed_point_newton(model: FibrationModel, map_: SmoothMap, b: np.ndarray, x: np.ndarray,
                        tol: float, max_iter: int) -> np.ndarray:
    """Gauss-Newton on (f(x) - b, map(x) - x) = 0."""
    S, f = model.structure, model.fibration
    eye = np.eye(model.ambient_dim)
    for _ in range(max_iter):
        residual = np.concatenate([f(x) - b, S.displacement(x, map_(x))])
        if np.max(np.abs(residual)) <= tol:
            return x
        J = np.vstack([_jacobian_near_seam(f, x), _jacobian_near_seam(map_, x) - eye])
        x = x - np.linalg.lstsq(J, residual, rcond=None)[0]
        if not f.in_domain(x)[0]:
            raise ConvergenceError("fixed point iteration left the domain")
    raise ConvergenceError("fixed point iteration did not converge")


def _fiber_seeds(model: FibrationModel, map_: SmoothMap, b: np.ndarray, rng: np.random.Generator,
                 seeds: int, radius: float) -> np.ndarray:
    if model.exploration == "fixed_set":
        lo, hi = np.asarray(model.region, dtype=float).T
        raw = rng.uniform(lo, hi, size=(40 * seeds, model.ambient_dim))
        raw = raw[model.fibration.in_domain(raw)]
        points, fixed = project_to_fixed(model, map_, raw, 1e-9)
        points = points[fixed]
        points = points[model.fibration.in_domain(points)]
        if model.piecewise:
            points = points[np.abs(model.fibration.seam_value(points)) > SEAM_CLEARANCE]
        nearest = np.argsort(np.linalg.norm(model.fibration(points) - b, axis=1))
        return points[nearest[:seeds]]

    x0 = _fiber_anchor(model, b, rng)
    xis = rng.uniform(-radius, radius, size=(seeds, model.n))
    return np.atleast_2d(fiber_walk(model.structure, model.fibration, np.repeat(x0[None], seeds, axis=0), xis,
                                    1.0, steps=max(50, int(20 * radius)), checked=False))


def _fiber_anchor(model: FibrationModel, b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    for section in model.sections.values():
        if section.base_domain(b[None])[0]:
            try:
                return section.map(b)
            except (DomainError, ConvergenceError):
                continue
    lo, hi = np.asarray(model.region, dtype=float).T
    return coords_of(solve_fiber_point(model.fibration, b, rng.uniform(lo, hi)))


def fiber_fixed_points(model: FibrationModel, b, map_: Optional[SmoothMap] = None, *, seeds: int = 64,
                       seed: int = 0, radius: float = 2 * np.pi, tol: float = 1e-11, cluster_tol: float = 1e-6,
                       min_coverage: float = 0.5, max_iter: int = 40) -> np.ndarray:
    """
    Fixed points of an involution on the fiber over b.

    Seeds are spread over the fiber by fiber walks from a point of the fiber (or,
    for models explored on the fixed set, drawn from the fixed set near the
    fiber), pushed to fixed points by Gauss-Newton and clustered.

    Raises:
        CoverageError: fewer than ``min_coverage`` of the seeds converged.
    """
    map_ = map_ or model.involution.map
    b = np.asarray(b, dtype=float)
    rng = np.random.default_rng(seed)
    starts = _fiber_seeds(model, map_, b, rng, seeds, radius)
    found = []
    for x in starts:
        try:
            found.append(_fixed_point_newton(model, map_, b, x, tol, max_iter))
        except (ConvergenceError, DomainError, np.linalg.LinAlgError):
            continue
    coverage = len(found) / max(1, len(starts))
    clusters = cluster_points(model.structure.embed(np.array(found)), cluster_tol) if found else []
    points = np.array([found[c[0]] for c in clusters]) if clusters else np.empty((0, model.ambient_dim))
    logger.debug(f"fiber over {b}: {len(found)}/{len(starts)} seeds converged to {len(points)} fixed points")
    if coverage < min_coverage:
        raise CoverageError(f"only {coverage:.0%} of fiber seeds over {b} converged", coverage, len(points))
    return points


def fiber_fixed_count(model: FibrationModel, b, map_: Optional[SmoothMap] = None, **kwargs) -> int:
    """Number of fixed points of the involution on the fiber over b; 2^n for proper models."""
    return len(fiber_fixed_points(model, b, map_, **kwargs))


def half_lattice_points(chart: SemiflatChart, b, involution: Callable, denominator: int = 4,
                        tol: float = 1e-9) -> list[np.ndarray]:
    """
    Fixed points of a semiflat involution among the points with coefficients in
    (1/denominator) Z^n / Z^n; minus_id fixes exactly the 2^n half-lattice points.
    """
    grid = np.arange(denominator) / denominator
    coefficients = np.stack(np.meshgrid(*([grid] * chart.n), indexing="ij"), axis=-1).reshape(-1, chart.n)
    fixed = []
    for c in coefficients:
        p = from_coefficients(chart, b, c)
        if circle_distance(involution(chart, p).reduced, p.reduced) <= tol:
            fixed.append(p.reduced)
    return fixed
