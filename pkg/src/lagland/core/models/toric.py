"""Reference toric model f = (|z1|^2/2, |z2|^2/2) with period lattice 2 pi Z^2."""
import jax.numpy as jnp
import numpy as np

from lagland.core.geometry import SmoothMap, linear_map, standard_structure
from lagland.core.models.catalog import ModelName
from lagland.core.models.interfaces import (
    Discriminant,
    DiscriminantKind,
    FibrationModel,
    Section,
    Symmetry,
    SymmetryKind,
)


def _moment(x):
    return 0.5 * jnp.stack([x[..., 0] ** 2 + x[..., 1] ** 2, x[..., 2] ** 2 + x[..., 3] ** 2], axis=-1)


def _positive_real_section(b):
    zero = jnp.zeros_like(b[..., 0])
    return jnp.stack([jnp.sqrt(2.0 * b[..., 0]), zero, jnp.sqrt(2.0 * b[..., 1]), zero], axis=-1)


def toric_reference() -> FibrationModel:
    box = ((0.2, 1.5), (0.2, 1.5))
    positive = lambda b: np.all(b > 0, axis=-1)  # noqa: E731
    section = SmoothMap(2, 4, _positive_real_section, positive, autodiff=True, name="positive_real")

    def critical_sampler(rng: np.random.Generator, m: int) -> np.ndarray:
        x = rng.uniform(-1.5, 1.5, size=(m, 4))
        axis = rng.integers(0, 2, m)
        x[np.arange(m), 2 * axis] = 0.0
        x[np.arange(m), 2 * axis + 1] = 0.0
        return x

    def points(rng: np.random.Generator, m: int) -> np.ndarray:
        b = rng.uniform(0.0, 1.5, size=(m, 2))
        b[np.arange(m), rng.integers(0, 2, m)] = 0.0
        return b

    discriminant = Discriminant(
        DiscriminantKind.GRAPH,
        distance=lambda b: np.min(np.abs(np.atleast_2d(b)), axis=-1),
        critical_sampler=critical_sampler,
        points=points,
    )
    conjugation = linear_map(np.diag([1.0, -1.0, 1.0, -1.0]), name="conjugation")
    return FibrationModel(
        name=ModelName.TORIC_REFERENCE,
        n=2,
        structure=standard_structure(2),
        fibration=SmoothMap(4, 2, _moment, autodiff=True, name="toric"),
        sections={"positive_real": Section("positive_real", section, positive, box)},
        symmetries={"conjugation": Symmetry("conjugation", conjugation, SymmetryKind.ANTI_SYMPLECTIC)},
        involution_name="conjugation",
        discriminant=discriminant,
        proper=True,
        region=((-1.5, 1.5),) * 4,
        base_box=box,
    )
