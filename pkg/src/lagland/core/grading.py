"""
Phases of Lagrangian planes under a holomorphic volume form, the intersection
index of graded planes and the action of an anti-holomorphic involution on
phases. Phases are real numbers theta with Omega(frame) = psi e^{i pi theta}
vol(frame), kept modulo 2; no integer lift is chosen.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from lagland.core.errors import ConvergenceError, FrameError, RankDeficiencyError, TransversalityError
from lagland.core.geometry import (
    Frame,
    SmoothMap,
    SymplecticStructure,
    coords_of,
    fiber_tangent_frame,
    fiber_walk,
    jacobian,
    standard_structure,
)
from lagland.core.models.interfaces import FibrationModel
from lagland.core.symmetry import fiber_fixed_points

logger = logging.getLogger(__name__)

LAGRANGIAN_TOL = 1e-8
EIGENVALUE_GUARD = 1e-8
H_FRAME_TOL = 1e-9
CONSTANT_PHASE_TOL = 1e-6


def circle_gap(a, b, period: float = 2.0) -> np.ndarray:
    """Distance between a and b on R / period Z."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % period
    return np.minimum(d, period - d)


@dataclass(frozen=True)
class HolomorphicVolume:
    """
    Omega = c(x) dz_1 ^ ... ^ dz_n in the complex coordinates of a chart
    (consecutive real pairs). The catalog uses c = 1.
    """
    n: int
    coefficient: Optional[Callable[[np.ndarray], complex]] = None

    def value(self, x, vectors: np.ndarray, structure: Optional[SymplecticStructure] = None) -> complex:
        """Omega_x(v_1, ..., v_n) for real tangent vectors given as rows."""
        structure = structure or standard_structure(self.n)
        Z = structure.complexify(np.atleast_2d(vectors)).T
        if Z.shape != (self.n, self.n):
            raise FrameError(f"Omega takes {self.n} vectors in C^{self.n}")
        c = 1.0 if self.coefficient is None else complex(self.coefficient(coords_of(x)))
        return complex(c * np.linalg.det(Z))


@dataclass(frozen=True, eq=False)
class GradedPlane:
    """An oriented orthonormal Lagrangian frame with its phase theta (mod 2) and amplitude psi > 0."""
    frame: Frame
    theta: float
    psi: float
    structure: SymplecticStructure = field(default_factory=lambda: standard_structure(1))

    def with_theta(self, theta: float) -> "GradedPlane":
        return GradedPlane(self.frame, float(theta), self.psi, self.structure)

    @property
    def unitary(self) -> np.ndarray:
        """The frame as an n x n complex matrix with the vectors as columns."""
        return self.structure.complexify(self.frame.vectors).T


def orthonormalize(vectors: np.ndarray) -> np.ndarray:
    """Gram-Schmidt (QR) of the rows, keeping the orientation of the span."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    Q, R = np.linalg.qr(vectors.T)
    Q = Q * np.sign(np.diag(R))[None, :]
    return Q.T


def phase_of_plane(volume: HolomorphicVolume, frame: Frame | np.ndarray,
                   structure: Optional[SymplecticStructure] = None, tol: float = LAGRANGIAN_TOL) -> GradedPlane:
    """
    psi and theta mod 2 of Omega on an oriented Lagrangian plane.

    Raises:
        FrameError: the frame is not Lagrangian or Omega vanishes on it.
    """
    structure = structure or standard_structure(volume.n)
    if not isinstance(frame, Frame):
        frame = Frame(np.zeros(structure.dim), frame)
    vectors = orthonormalize(frame.vectors)
    gram = vectors @ structure.pairing_matrix @ vectors.T
    if np.max(np.abs(gram)) > tol:
        raise FrameError(f"frame is not Lagrangian (|omega| = {np.max(np.abs(gram)):.2e})")
    value = volume.value(frame.base, vectors, structure)
    psi = abs(value)
    if psi <= 1e-14:
        raise FrameError("Omega vanishes on the plane")
    theta = float(np.angle(value) / np.pi % 2.0)
    return GradedPlane(Frame(frame.base, vectors), theta, psi, structure)


def intersection_index(plane1: GradedPlane, plane2: GradedPlane, guard: float = EIGENVALUE_GUARD) -> float:
    """
    alpha - theta2 + theta1 with alpha the sum of the eigenphases in (0, 1) of
    W = (U2 U2^T)(U1 U1^T)^-1.

    Raises:
        TransversalityError: an eigenvalue of W is within ``guard`` of 1.
    """
    U1, U2 = plane1.unitary, plane2.unitary
    W = (U2 @ U2.T) @ np.linalg.inv(U1 @ U1.T)
    eigenvalues = np.linalg.eigvals(W)
    if np.any(np.abs(eigenvalues - 1.0) <= guard):
        raise TransversalityError("planes share a direction: W has eigenvalue 1")
    alphas = np.angle(eigenvalues) / (2 * np.pi) % 1.0
    return float(np.sum(alphas) - plane2.theta + plane1.theta)


def h_field(model: FibrationModel, volume: HolomorphicVolume, x, map_: Optional[SmoothMap] = None,
            rng: Optional[np.random.Generator] = None, frames: int = 2, tol: float = H_FRAME_TOL) -> complex:
    """
    h(x) with phi^* Omega = h conj(Omega), from (phi^* Omega)(V) / conj(Omega(V))
    on several random real frames V.

    Raises:
        FrameError: the ratio depends on the frame.
    """
    map_ = map_ or model.involution.map
    rng = rng or np.random.default_rng(0)
    x = coords_of(x)
    S = model.structure
    D = jacobian(map_, x)
    image = map_(x)
    ratios = []
    for _ in range(frames):
        V = rng.standard_normal((model.n, model.ambient_dim))
        pulled = volume.value(image, V @ D.T, S)
        ratios.append(pulled / np.conj(volume.value(x, V, S)))
    ratios = np.asarray(ratios)
    spread = float(np.max(np.abs(ratios - ratios[0])))
    if spread > tol * max(1.0, abs(ratios[0])):
        raise FrameError(f"phi^* Omega / conj(Omega) depends on the frame (spread {spread:.2e})")
    return complex(ratios[0])


def oriented_fiber_frame(model: FibrationModel, x) -> Frame:
    """
    Fiber tangent frame oriented like the Hamiltonian vector fields of f_1, ..., f_n.

    Raises:
        RankDeficiencyError: x is a critical point of f.
    """
    frame = fiber_tangent_frame(model.fibration, x)
    fields = model.structure.vector_field(jacobian(model.fibration, frame.base))
    return orient_like(frame, fields)


def orient_like(frame: Frame, reference: np.ndarray) -> Frame:
    """The frame with its first vector flipped when it disagrees in orientation with the reference vectors."""
    sign = np.linalg.det(frame.vectors @ np.atleast_2d(reference).T)
    if abs(sign) <= 1e-12:
        raise FrameError("reference vectors do not span the plane of the frame")
    if sign > 0:
        return frame
    vectors = frame.vectors.copy()
    vectors[0] *= -1.0
    return Frame(frame.base, vectors)


def involution_phase_shift(model: FibrationModel, volume: HolomorphicVolume, plane: GradedPlane,
                           map_: Optional[SmoothMap] = None, reference: Optional[Frame] = None) -> float:
    """
    theta of the pushed-forward frame D phi . V at phi(base), mod 2.

    With a reference frame of the image plane, the pushed frame is first
    oriented like the reference.
    """
    map_ = map_ or model.involution.map
    D = jacobian(map_, plane.frame.base)
    pushed = Frame(map_(plane.frame.base), plane.frame.vectors @ D.T)
    if reference is not None:
        pushed = orient_like(pushed, reference.vectors)
    return phase_of_plane(volume, pushed, model.structure).theta


@dataclass(frozen=True)
class GradingCensus:
    """
    Phases sampled on sections and fibers of a conjugation model.

    Attributes:
        section_deviation: max distance of theta_sigma from Z.
        fiber_deviation: max distance of theta_y from n/2 + Z at fixed points of the involution.
        fiber_spread: largest variation of theta along a sampled fiber (mod 2).
        nonconstant: whether theta varies along some fiber (the fiber is not special Lagrangian).
        phase_shift_residual: max distance of theta(D phi V) from arg(h)/pi - theta(V) mod 2.
        dimension_shift_residual: max distance of theta(D phi V) from n - theta(V) mod 2, both
            frames oriented like the Hamiltonian vector fields of f.
    """
    model: str
    section_points: int
    fiber_points: int
    section_deviation: float
    fiber_deviation: float
    fiber_spread: float
    nonconstant: bool
    phase_shift_residual: float
    dimension_shift_residual: float


def _section_planes(model: FibrationModel, volume: HolomorphicVolume, base: np.ndarray) -> list[GradedPlane]:
    planes = []
    for section in model.sections.values():
        if not section.real:
            continue
        for b in base[section.base_domain(base)]:
            D = jacobian(section.map, b)
            planes.append(phase_of_plane(volume, Frame(section.map(b), D.T), model.structure))
    return planes


def _fiber_planes(model: FibrationModel, volume: HolomorphicVolume, points: np.ndarray) -> list[GradedPlane]:
    return [phase_of_plane(volume, oriented_fiber_frame(model, x), model.structure) for x in points]


def grading_census(model: FibrationModel, volume: Optional[HolomorphicVolume] = None,
                   rng: Optional[np.random.Generator] = None, fibers: int = 4, walk_points: int = 6) -> GradingCensus:
    """
    Sample phases on real sections, at fixed points on fibers and along fibers.

    Section phases are expected in Z and fiber phases at fixed points in
    n/2 + Z; variation along a fiber is reported, not treated as an error.
    """
    volume = volume or HolomorphicVolume(model.n)
    rng = rng or np.random.default_rng(0)
    n = model.n
    base = model.sample_base(rng, fibers)

    sections = _section_planes(model, volume, base)
    section_deviation = max((float(circle_gap(p.theta, 0.0, 1.0)) for p in sections), default=0.0)

    fixed_planes, spreads, shift, dimension_shift = [], [], [], []
    for b in base:
        try:
            fixed = fiber_fixed_points(model, b, seeds=24, seed=int(rng.integers(2 ** 31)))
        except (ConvergenceError, RankDeficiencyError) as e:
            logger.warning(f"grading census skipped fiber over {b}: {e}")
            continue
        planes = _fiber_planes(model, volume, fixed)
        fixed_planes += planes
        if len(fixed) == 0:
            continue
        walked = fiber_walk(model.structure, model.fibration, np.repeat(fixed[:1], walk_points, axis=0),
                            rng.uniform(-1.0, 1.0, size=(walk_points, n)), 1.0, steps=100, checked=False)
        along = _fiber_planes(model, volume, np.atleast_2d(walked)) + planes[:1]
        thetas = np.array([p.theta for p in along])
        spreads.append(float(np.max(circle_gap(thetas, thetas[-1]))))
        for plane in along:
            pushed = involution_phase_shift(model, volume, plane)
            h = h_field(model, volume, plane.frame.base, rng=rng)
            shift.append(float(circle_gap(pushed, np.angle(h) / np.pi - plane.theta)))
            image = oriented_fiber_frame(model, model.involution.map(plane.frame.base))
            oriented = involution_phase_shift(model, volume, plane, reference=image)
            dimension_shift.append(float(circle_gap(oriented, n - plane.theta)))

    fiber_deviation = max((float(circle_gap(p.theta, n / 2, 1.0)) for p in fixed_planes), default=0.0)
    spread = max(spreads, default=0.0)
    census = GradingCensus(
        model=str(model.name),
        section_points=len(sections),
        fiber_points=len(fixed_planes),
        section_deviation=section_deviation,
        fiber_deviation=fiber_deviation,
        fiber_spread=spread,
        nonconstant=spread > CONSTANT_PHASE_TOL,
        phase_shift_residual=max(shift, default=0.0),
        dimension_shift_residual=max(dimension_shift, default=0.0),
    )
    logger.info(f"grading census on {model.name}: {census}")
    return census
