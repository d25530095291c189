from dataclasses import dataclass, field
from enum import StrEnum
from typing import Callable, Optional, Sequence

import numpy as np

from lagland.core.geometry import SmoothMap, SymplecticStructure, coords_of, hamiltonian_flow

Box = tuple[tuple[float, float], ...]


class SymmetryKind(StrEnum):
    SYMPLECTIC = "symplectic"
    ANTI_SYMPLECTIC = "anti_symplectic"


class GroupKind(StrEnum):
    CSTAR = "cstar"
    CSTAR_TIMES_S1 = "cstar_times_s1"
    R_TIMES_T2 = "r_times_t2"


class DiscriminantKind(StrEnum):
    POINT = "point"
    GRAPH = "graph"
    AMOEBA = "amoeba"


@dataclass(frozen=True)
class GroupElement:
    """
    Element of the group acting on a model.

    Attributes:
        kind: which group.
        tau: the C* parameter (CSTAR, CSTAR_TIMES_S1).
        s: the real parameter (R_TIMES_T2).
        angles: circle parameters in turns, reduced to [0, 1).
    """
    kind: GroupKind
    tau: complex = 1.0
    s: float = 0.0
    angles: tuple[float, ...] = ()

    def __post_init__(self):
        if self.tau == 0:
            raise ValueError("tau must be non-zero")
        object.__setattr__(self, "kind", GroupKind(self.kind))
        object.__setattr__(self, "tau", complex(self.tau))
        object.__setattr__(self, "angles", tuple(float(a) % 1.0 for a in self.angles))
        expected = {GroupKind.CSTAR: 0, GroupKind.CSTAR_TIMES_S1: 1, GroupKind.R_TIMES_T2: 2}[self.kind]
        if len(self.angles) not in (0, expected):
            raise ValueError(f"{self.kind} takes {expected} angle parameters")
        if len(self.angles) == 0 and expected:
            object.__setattr__(self, "angles", (0.0,) * expected)


@dataclass(frozen=True, eq=False)
class Section:
    """A map sigma: B -> X with f o sigma = id on ``base_domain``."""
    name: str
    map: SmoothMap
    base_domain: Callable[[np.ndarray], np.ndarray]
    base_box: Box
    # whether the image lies in the fixed locus of the default involution
    real: bool = True


@dataclass(frozen=True, eq=False)
class Symmetry:
    name: str
    map: SmoothMap
    kind: SymmetryKind
    # closed form (structural tolerances) or flow-built (numeric tolerances)
    exact: bool = True


@dataclass(frozen=True, eq=False)
class Discriminant:
    """
    Descriptor of the discriminant locus in the base.

    Attributes:
        kind: point, graph or amoeba.
        distance: distance (or a proxy vanishing exactly on the locus) from base points.
        critical_sampler: ``(rng, m) -> (m, 2n)`` points of Crit f.
        points: ``(rng, m) -> (m, n)`` samples of the locus itself.
    """
    kind: DiscriminantKind
    distance: Callable[[np.ndarray], np.ndarray]
    critical_sampler: Callable[[np.random.Generator, int], np.ndarray]
    points: Callable[[np.random.Generator, int], np.ndarray]

    def contains(self, b, tol: float = 1e-6) -> np.ndarray:
        return self.distance(np.atleast_2d(b)) <= tol


@dataclass(frozen=True)
class RankReport:
    """Singular values of Df at a point and the resulting rank decision."""
    singular_values: tuple[float, ...]
    rank: int
    margin: float
    regular: bool


@dataclass(frozen=True, eq=False)
class FibrationModel:
    """
    An explicit Lagrangian fibration f: X -> B with its symmetries.

    Attributes:
        name: catalog name.
        n: base dimension; X has real dimension 2n.
        structure: symplectic chart of X.
        fibration: f, possibly piecewise (seam and branch evaluators on the SmoothMap).
        sections: named sections.
        symmetries: named symmetries; ``involution_name`` picks the default involution.
        discriminant: descriptor of Delta.
        proper: whether f is proper; non-proper fibers meet the fixed locus in 2^(n-1) points.
        region: phase-space sampling box.
        base_box: base box used to draw generic fibers.
        walls: signed functions on the real locus whose zero set is removed from X.
        group_kind: the group acting fiberwise, if any.
        action: ``(GroupElement, x) -> x`` closed form or flow-built action.
        exploration: "fiber_walk" or "fixed_set" seeding of per-fiber fixed point counts.
        metadata: extra parameters (cutoff radius, seam data).
    """
    name: str
    n: int
    structure: SymplecticStructure
    fibration: SmoothMap
    sections: dict[str, Section]
    symmetries: dict[str, Symmetry]
    involution_name: str
    discriminant: Discriminant
    proper: bool
    region: Box
    base_box: Box
    walls: Optional[Callable[[np.ndarray], np.ndarray]] = None
    group_kind: Optional[GroupKind] = None
    action: Optional[Callable[[GroupElement, np.ndarray], np.ndarray]] = None
    exploration: str = "fiber_walk"
    metadata: dict = field(default_factory=dict)

    @property
    def ambient_dim(self) -> int:
        return 2 * self.n

    @property
    def base_dim(self) -> int:
        return self.n

    @property
    def involution(self) -> Symmetry:
        return self.symmetries[self.involution_name]

    @property
    def piecewise(self) -> bool:
        return self.fibration.seam is not None

    @property
    def fixed_points_per_fiber(self) -> int:
        return 2 ** self.n if self.proper else 2 ** (self.n - 1)

    def sample_base(self, rng: np.random.Generator, m: int, margin: float = 0.1) -> np.ndarray:
        """Generic base points of ``base_box`` at distance > margin from Delta (and from the wall b1 = 0)."""
        lo, hi = np.asarray(self.base_box, dtype=float).T
        kept = np.empty((0, self.n))
        while len(kept) < m:
            b = rng.uniform(lo, hi, size=(4 * m, self.n))
            generic = self.discriminant.distance(b) > margin
            if self.piecewise:
                generic &= np.abs(b[:, 0]) > margin
            kept = np.concatenate([kept, b[generic]])
        return kept[:m]

    def sample_region(self, rng: np.random.Generator, m: int) -> np.ndarray:
        lo, hi = np.asarray(self.region, dtype=float).T
        return rng.uniform(lo, hi, size=(m, self.ambient_dim))


def flow_action(structure: SymplecticStructure, fibration: SmoothMap,
                times: Sequence[tuple[int, float]], x, steps_per_unit: int = 200) -> np.ndarray:
    """Compose the flows of the components of f for the given (index, time) pairs."""
    x = coords_of(x)
    for index, t in times:
        if t != 0.0:
            steps = max(1, int(np.ceil(steps_per_unit * abs(t))))
            x = hamiltonian_flow(structure, fibration.component(index), x, t, steps)
    return x
