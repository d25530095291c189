"""
Base-side computations: the amoeba of v1 + v2 + 1 = 0, discriminant probes and
the monodromy of period lattices around the discriminant.

Monodromy convention: with P0 the initial period matrix (rows lambda_i) and P1
the rows transported once around the loop, the matrix M has as its j-th column
the coefficients of the transported lambda_j in the initial basis, M = (P1 P0^-1)^T.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from lagland.core.errors import ConvergenceError, DimensionError, MonodromyError, RegionError, SeamError
from lagland.core.geometry import jacobian, numerics
from lagland.core.semiflat import SemiflatChart, lattice_continue, lattice_probe
from lagland.utils.retry import RetryConfig, retrying

if TYPE_CHECKING:
    from lagland.core.models.interfaces import FibrationModel

logger = logging.getLogger(__name__)

MONODROMY_STEPS = 720
MODEL_MONODROMY_STEPS = 48
ROUNDING_THRESHOLD = 1e-3
_LOG_CLIP = 700.0


# -- amoeba ----------------------------------------------------------------------

def amoeba_slack(x) -> np.ndarray:
    """
    How far (r1, r2) = exp(x) is from satisfying the triangle inequalities
    r1 <= r2 + 1, r2 <= r1 + 1, 1 <= r1 + r2; zero exactly on the amoeba.
    """
    x = np.clip(np.asarray(x, dtype=float), -_LOG_CLIP, _LOG_CLIP)
    r1, r2 = np.exp(x[..., 0]), np.exp(x[..., 1])
    return np.maximum.reduce([r1 - r2 - 1.0, r2 - r1 - 1.0, 1.0 - (r1 + r2), np.zeros_like(r1)])


def amoeba_membership(x, tol: float = 0.0):
    """Whether x = (log|v1|, log|v2|) for some v1 + v2 + 1 = 0."""
    inside = amoeba_slack(x) <= tol
    return bool(inside) if np.ndim(inside) == 0 else inside


@dataclass(frozen=True)
class AmoebaSpec:
    """Rasterization grid: bounds per axis and the number of cells per axis."""
    bounds: tuple[tuple[float, float], tuple[float, float]] = ((-4.0, 4.0), (-4.0, 4.0))
    resolution: tuple[int, int] = (256, 256)

    def __post_init__(self):
        bounds = np.asarray(self.bounds, dtype=float)
        if bounds.shape != (2, 2) or not np.all(np.isfinite(bounds)) or np.any(bounds[:, 1] <= bounds[:, 0]):
            raise ValueError(f"invalid amoeba grid bounds {self.bounds}")
        if len(self.resolution) != 2 or min(self.resolution) < 2:
            raise ValueError("amoeba grid needs at least 2 cells per axis")

    @property
    def cell_size(self) -> np.ndarray:
        bounds = np.asarray(self.bounds, dtype=float)
        return (bounds[:, 1] - bounds[:, 0]) / np.asarray(self.resolution)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell centers along x1 and x2."""
        (a0, a1), (c0, c1) = self.bounds
        dx, dy = self.cell_size
        return a0 + dx * (np.arange(self.resolution[0]) + 0.5), c0 + dy * (np.arange(self.resolution[1]) + 0.5)

    def grid(self) -> np.ndarray:
        """Cell centers as an array (n2, n1, 2): rows follow x2, columns follow x1."""
        x1, x2 = self.centers()
        X1, X2 = np.meshgrid(x1, x2, indexing="xy")
        return np.stack([X1, X2], axis=-1)


@dataclass(frozen=True, eq=False)
class AmoebaRaster:
    spec: AmoebaSpec
    mask: np.ndarray
    contour: list[np.ndarray]
    unbounded_components: int
    complement_components: int


def amoeba_boundary(spec: AmoebaSpec, points_per_arc: int = 2000) -> list[np.ndarray]:
    """
    The three boundary arcs t -> (log|t|, log|1 + t|) for real t in (-inf, -1),
    (-1, 0) and (0, inf), clipped to the grid bounds.
    """
    span = float(np.max(np.abs(spec.bounds))) + 1.0
    s = np.linspace(-span, span, points_per_arc)
    arcs = [
        -1.0 - np.exp(s),                    # (-inf, -1)
        -1.0 / (1.0 + np.exp(-s)),           # (-1, 0)
        np.exp(s),                           # (0, inf)
    ]
    (a0, a1), (c0, c1) = spec.bounds
    out = []
    for t in arcs:
        curve = np.stack([np.log(np.abs(t)), np.log(np.abs(1.0 + t))], axis=-1)
        inside = (curve[:, 0] >= a0) & (curve[:, 0] <= a1) & (curve[:, 1] >= c0) & (curve[:, 1] <= c1)
        if inside.any():
            out.append(curve[inside])
    return out


def amoeba_raster(spec: AmoebaSpec) -> AmoebaRaster:
    """Membership per cell, the boundary contour and the number of unbounded complement components."""
    mask = amoeba_membership(spec.grid())
    labels, count = ndimage.label(~mask)
    border = np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])
    unbounded = len(set(border[border > 0].tolist()))
    logger.debug(f"amoeba raster {spec.resolution}: {count} complement components, {unbounded} unbounded")
    return AmoebaRaster(spec, mask, amoeba_boundary(spec), unbounded, count)


def amoeba_sampling_oracle(spec: AmoebaSpec, n_phi: int = 4096) -> np.ndarray:
    """
    Membership from sampling the curve: for each column r1 = e^{x1}, the values
    log|1 + r1 e^{i phi}| over a dense set of phi (refined towards phi = pi) give
    the range of log|v2| over v2 = -1 - v1 with |v1| = r1.
    """
    x1, x2 = spec.centers()
    uniform = np.linspace(-np.pi, np.pi, n_phi, endpoint=False)
    near_pi = np.pi - np.geomspace(1e-9, 0.5, n_phi // 4)
    phi = np.concatenate([uniform, near_pi, -near_pi])
    r1 = np.exp(x1)[:, None]
    values = 0.5 * np.log(np.abs(1.0 + r1 * np.exp(1j * phi[None, :])) ** 2 + 1e-300)
    low, high = values.min(axis=1), values.max(axis=1)
    return (x2[:, None] >= low[None, :]) & (x2[:, None] <= high[None, :])


def amoeba_agreement(spec: AmoebaSpec, raster: Optional[AmoebaRaster] = None) -> tuple[int, int]:
    """
    Mismatches between the triangle characterization and the sampling oracle on
    cells whose center is farther than one cell diagonal from the boundary.

    Returns:
        (mismatches, cells compared)
    """
    raster = raster or amoeba_raster(spec)
    oracle = amoeba_sampling_oracle(spec)
    boundary = np.concatenate(amoeba_boundary(spec, points_per_arc=20000))
    diagonal = float(np.linalg.norm(spec.cell_size))
    distance, _ = cKDTree(boundary).query(spec.grid().reshape(-1, 2))
    far = (distance > diagonal).reshape(raster.mask.shape)
    mismatches = int(np.sum((raster.mask != oracle) & far))
    return mismatches, int(far.sum())


def write_pgm(path: str | Path, mask: np.ndarray) -> Path:
    """Plain PGM (P2): amoeba cells black (0), complement white (255), top row = largest x2."""
    path = Path(path)
    image = np.where(np.flipud(mask), 0, 255)
    lines = ["P2", f"{image.shape[1]} {image.shape[0]}", "255"]
    lines += [" ".join(str(v) for v in row) for row in image]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_contour_csv(path: str | Path, arcs: Sequence[np.ndarray]) -> Path:
    path = Path(path)
    rows = ["arc,x1,x2"]
    for index, arc in enumerate(arcs):
        rows += [f"{index},{x:.12g},{y:.12g}" for x, y in arc]
    path.write_text("\n".join(rows) + "\n")
    return path


# -- discriminant ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscriminantProbe:
    """
    Descriptor samples of Delta and the images of sampled critical points.

    Attributes:
        points: samples of the descriptor set.
        critical_images: f(x) for sampled critical points x.
        max_distance: largest descriptor distance of a critical image.
        all_critical: whether every sampled critical point failed the rank test.
    """
    points: np.ndarray
    critical_images: np.ndarray
    max_distance: float
    all_critical: bool


def discriminant_probe(model: "FibrationModel", rng: np.random.Generator, resolution: int = 200,
                       base_region: Optional[Sequence[tuple[float, float]]] = None,
                       rank_tol: Optional[float] = None) -> DiscriminantProbe:
    """
    Evaluate the analytic descriptor of Delta and cross-check it: points of Crit f
    must fail the rank test and map into the descriptor set.
    """
    rank_tol = numerics().rank_tol if rank_tol is None else rank_tol
    descriptor = model.discriminant
    points = descriptor.points(rng, resolution)
    critical = descriptor.critical_sampler(rng, resolution)
    critical = critical[model.fibration.in_domain(critical)]
    images = model.fibration(critical)
    if base_region is not None:
        lo, hi = np.asarray(base_region, dtype=float).T
        points = points[np.all((points >= lo) & (points <= hi), axis=1)]
        keep = np.all((images >= lo) & (images <= hi), axis=1)
        critical, images = critical[keep], images[keep]

    def rank_deficient(x) -> bool:
        try:
            D = jacobian(model.fibration, x)
        except SeamError:
            return all(rank_deficient_side(x, side) for side in (1, -1))
        singular = np.linalg.svd(D, compute_uv=False)
        return bool(singular[-1] <= rank_tol * max(1.0, singular[0]))

    def rank_deficient_side(x, side) -> bool:
        singular = np.linalg.svd(jacobian(model.fibration, x, side=side), compute_uv=False)
        return bool(singular[-1] <= rank_tol * max(1.0, singular[0]))

    all_critical = all(rank_deficient(x) for x in critical)
    max_distance = float(np.max(descriptor.distance(images))) if len(images) else 0.0
    logger.info(f"discriminant probe on {model.name}: {len(images)} critical images, max distance {max_distance:.2e}")
    return DiscriminantProbe(points, images, max_distance, all_critical)


# -- monodromy -------------------------------------------------------------------

@dataclass(frozen=True)
class Loop:
    """
    A circle in the (b1, b2) plane of the base; ``fixed`` holds the remaining
    base coordinates, constant along the loop.
    """
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.5
    orientation: int = 1
    fixed: tuple[float, ...] = ()

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("loop radius must be positive")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 (counterclockwise) or -1")

    def points(self, steps: int) -> np.ndarray:
        angle = self.orientation * np.linspace(0.0, 2 * np.pi, steps + 1)
        circle = np.stack([self.center[0] + self.radius * np.cos(angle),
                           self.center[1] + self.radius * np.sin(angle)], axis=-1)
        if self.fixed:
            circle = np.column_stack([circle, np.broadcast_to(self.fixed, (steps + 1, len(self.fixed)))])
        return circle

    def reversed(self) -> "Loop":
        return Loop(self.center, self.radius, -self.orientation, self.fixed)


@dataclass(frozen=True)
class MonodromyMatrix:
    """Integer monodromy with the period labels of its basis and the loop it was computed on."""
    entries: tuple[tuple[int, ...], ...]
    basis: tuple[str, ...]
    loop: Loop
    residual: float
    steps: int = MONODROMY_STEPS
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        M = self.matrix
        if M.shape[0] != M.shape[1] or M.shape[0] != len(self.basis):
            raise DimensionError("monodromy matrix must be square with one label per basis vector")
        if round(abs(np.linalg.det(M))) != 1:
            raise MonodromyError(f"monodromy matrix {self.entries} is not in GL(n, Z)")

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=int)

    @property
    def determinant(self) -> int:
        return int(round(np.linalg.det(self.matrix)))

    def is_unipotent(self) -> bool:
        N = self.matrix - np.eye(len(self.basis), dtype=int)
        return not np.any(np.linalg.matrix_power(N, len(self.basis)))

    def to_dict(self) -> dict:
        return {
            "basis": list(self.basis),
            "convention": "columns are transported periods in the initial basis",
            "loop": {
                "center": list(self.loop.center),
                "radius": self.loop.radius,
                "orientation": self.loop.orientation,
                "fixed": list(self.loop.fixed),
            },
            "matrix": [list(row) for row in self.entries],
            "rounding_residual": self.residual,
            "steps": self.steps,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _round_monodromy(P0: np.ndarray, P1: np.ndarray) -> tuple[np.ndarray, float]:
    M = (P1 @ np.linalg.inv(P0)).T
    rounded = np.rint(M)
    residual = float(np.max(np.abs(M - rounded)))
    if residual > ROUNDING_THRESHOLD:
        raise MonodromyError(f"transported periods are not an integral change of basis (residual {residual:.2e})")
    return rounded.astype(int), residual


def _check_loop(chart: SemiflatChart, path: np.ndarray) -> None:
    if not np.all(chart.base_domain(path)):
        raise RegionError(f"loop leaves the domain of chart {chart.name}")
    if chart.singular_point is not None:
        gap = np.min(np.linalg.norm(path[:, :2] - np.asarray(chart.singular_point), axis=1))
        if gap <= 1e-9:
            raise RegionError(f"loop meets the discriminant of chart {chart.name}")


def monodromy(chart: SemiflatChart, loop: Loop, steps: int = MONODROMY_STEPS,
              retry_config: RetryConfig = RetryConfig.DEFAULT) -> MonodromyMatrix:
    """
    Transport the closed-form periods of a chart around a loop, continuing Arg b
    continuously, and express the result in the initial basis.

    Raises:
        RegionError: the loop meets Delta or leaves the chart domain.
        MonodromyError: the change of basis is not integral after all retries.
    """
    if len(loop.fixed) != chart.n - 2:
        raise DimensionError(f"chart {chart.name} needs {chart.n - 2} fixed coordinates on the loop")
    multiplier = retry_config.settings.step_multiplier
    for attempt in retrying(retry_config, MonodromyError):
        with attempt:
            count = steps * multiplier ** (attempt.retry_state.attempt_number - 1)
            path = loop.points(count)
            _check_loop(chart, path)
            center = np.asarray(chart.singular_point or (0.0, 0.0))
            relative = path[:, :2] - center
            arg = np.unwrap(np.arctan2(relative[:, 1], relative[:, 0]))
            P = chart.periods(path, arg_hint=arg)
            jumps = np.max(np.abs(np.diff(P, axis=0)))
            logger.debug(f"monodromy on {chart.name}: {count} steps, largest period jump {jumps:.2e}")
            entries, residual = _round_monodromy(P[0], P[-1])
    return MonodromyMatrix(tuple(map(tuple, entries.tolist())), chart.period_names, loop, residual, count)


def model_monodromy(model: "FibrationModel", section: str, loop: Loop, steps: int = MODEL_MONODROMY_STEPS,
                    retry_config: RetryConfig = RetryConfig.DEFAULT) -> MonodromyMatrix:
    """
    Monodromy of a model's period lattice: probe the lattice at the loop's start
    and carry it around with Newton continuation of the periods.

    Raises:
        RegionError: the loop passes within 1e-3 of Delta.
        MonodromyError: the transported basis is not integral after all retries.
    """
    multiplier = retry_config.settings.step_multiplier
    for attempt in retrying(retry_config, MonodromyError):
        with attempt:
            count = steps * multiplier ** (attempt.retry_state.attempt_number - 1)
            path = loop.points(count)
            if np.min(model.discriminant.distance(path)) <= 1e-3:
                raise RegionError(f"loop meets the discriminant of {model.name}")
            basis = lattice_probe(model, section, path[0])
            try:
                transported = lattice_continue(model, section, path, basis)
            except ConvergenceError as e:
                raise MonodromyError(f"lattice continuation failed: {e}") from e
            entries, residual = _round_monodromy(basis, transported[-1])
    names = tuple(f"lambda_{i + 1}" for i in range(model.n))
    return MonodromyMatrix(tuple(map(tuple, entries.tolist())), names, loop, residual, count,
                           metadata={"model": str(model.name), "section": section})
