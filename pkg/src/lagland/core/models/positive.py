"""
Positive-vertex models on C^3: the proper model
f = (log|1 + z1 z2 z3|, |z1|^2 - |z2|^2, |z1|^2 - |z3|^2) with complex
conjugation, and the Harvey-Lawson fibration
F = (Im z1 z2 z3, |z1|^2 - |z2|^2, |z1|^2 - |z3|^2) with (-conj z1, conj z2, conj z3).

Both have Crit = union of {z_i = z_j = 0} and the same trivalent discriminant
{b1 = 0, b2 = b3 >= 0} u {b1 = b2 = 0, b3 <= 0} u {b1 = b3 = 0, b2 <= 0}.
"""
import itertools

import jax.numpy as jnp
import numpy as np

from lagland.core.geometry import SmoothMap, linear_map, standard_structure
from lagland.core.models.catalog import ModelName
from lagland.core.models.interfaces import (
    Discriminant,
    DiscriminantKind,
    FibrationModel,
    GroupElement,
    GroupKind,
    Section,
    Symmetry,
    SymmetryKind,
    flow_action,
)

CUBIC_NEWTON_ITER = 40

_RAYS = np.array([
    [0.0, 1.0, 1.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, -1.0],
]) / np.array([[np.sqrt(2.0)], [1.0], [1.0]])


def _abs2(x, k):
    return x[..., 2 * k] ** 2 + x[..., 2 * k + 1] ** 2


def _triple_product(x):
    """Real and imaginary parts of z1 z2 z3."""
    x1, y1, x2, y2, x3, y3 = (x[..., k] for k in range(6))
    re12 = x1 * x2 - y1 * y2
    im12 = x1 * y2 + y1 * x2
    return re12 * x3 - im12 * y3, re12 * y3 + im12 * x3


def _moment_map(x):
    return _abs2(x, 0) - _abs2(x, 1), _abs2(x, 0) - _abs2(x, 2)


def trivalent_distance(b) -> np.ndarray:
    """Euclidean distance from base points to the trivalent graph."""
    b = np.atleast_2d(np.asarray(b, dtype=float))
    distances = []
    for ray in _RAYS:
        t = np.maximum(b @ ray, 0.0)
        distances.append(np.linalg.norm(b - t[:, None] * ray, axis=-1))
    return np.min(distances, axis=0)


def _trivalent_discriminant() -> Discriminant:
    def critical_sampler(rng: np.random.Generator, m: int) -> np.ndarray:
        x = np.zeros((m, 6))
        free = rng.integers(0, 3, m)
        x[np.arange(m), 2 * free] = rng.normal(size=m)
        x[np.arange(m), 2 * free + 1] = rng.normal(size=m)
        return x

    def points(rng: np.random.Generator, m: int) -> np.ndarray:
        leg = rng.integers(0, 3, m)
        return rng.uniform(0.0, 2.0, m)[:, None] * _RAYS[leg] * np.where(leg == 0, np.sqrt(2.0), 1.0)[:, None]

    return Discriminant(DiscriminantKind.GRAPH, trivalent_distance, critical_sampler, points)


def solve_modulus(b2, b3, P2):
    """
    The root a > max(0, b2, b3) of a (a - b2) (a - b3) = P2. The cubic is convex
    and increasing there, so Newton from the right converges monotonically.
    """
    a = jnp.maximum(jnp.maximum(b2, b3), 0.0) + P2 ** (1.0 / 3.0)
    for _ in range(CUBIC_NEWTON_ITER):
        g = a * (a - b2) * (a - b3) - P2
        dg = (a - b2) * (a - b3) + a * (a - b3) + a * (a - b2)
        a = a - g / dg
    return a


def _sign_sections(signs: tuple[int, int, int], product_of):
    """A section with real coordinates (s1 sqrt(a), s2 sqrt(a - b2), s3 sqrt(a - b3)) in the given slots."""
    s1, s2, s3 = signs

    def sigma(b):
        P = product_of(b)
        a = solve_modulus(b[..., 1], b[..., 2], P ** 2)
        return jnp.sqrt(a), jnp.sqrt(a - b[..., 1]), jnp.sqrt(a - b[..., 2]), (s1, s2, s3)

    return sigma


def _name(signs) -> str:
    return "sigma_" + "".join("p" if s > 0 else "m" for s in signs)


def _r_times_t2_action(structure, f):
    def action(g: GroupElement, x) -> np.ndarray:
        times = ((0, g.s), (1, np.pi * g.angles[0]), (2, np.pi * g.angles[1]))
        return flow_action(structure, f, times, x)
    return action


def positive_proper(margin: float = 1e-12) -> FibrationModel:
    """
    The fixed locus of conjugation is R^3 - {x1 x2 x3 = -1}: the central
    component and four sections where x1 x2 x3 < -1, one per sign pattern with
    product -1.
    """
    def evaluator(x):
        re, im = _triple_product(x)
        m2, m3 = _moment_map(x)
        return jnp.stack([0.5 * jnp.log((1.0 + re) ** 2 + im ** 2), m2, m3], axis=-1)

    def domain(x):
        re, im = _triple_product(x)
        return np.hypot(1.0 + re, im) > margin

    f = SmoothMap(6, 3, evaluator, domain, autodiff=True, name="positive_proper")
    box = ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))
    everywhere = lambda b: np.all(np.isfinite(b), axis=-1)  # noqa: E731
    sections = {}
    for signs in itertools.product((1, -1), repeat=3):
        if np.prod(signs) > 0:
            continue
        solve = _sign_sections(signs, lambda b: 1.0 + jnp.exp(b[..., 0]))

        def sigma(b, solve=solve):
            r1, r2, r3, (s1, s2, s3) = solve(b)
            zero = jnp.zeros_like(r1)
            return jnp.stack([s1 * r1, zero, s2 * r2, zero, s3 * r3, zero], axis=-1)

        name = _name(signs)
        sections[name] = Section(name, SmoothMap(3, 6, sigma, autodiff=True, name=name), everywhere, box)

    structure = standard_structure(3)
    conjugation = linear_map(np.diag(np.tile([1.0, -1.0], 3)), name="conjugation")
    return FibrationModel(
        name=ModelName.POSITIVE_PROPER,
        n=3,
        structure=structure,
        fibration=f,
        sections=sections,
        symmetries={"conjugation": Symmetry("conjugation", conjugation, SymmetryKind.ANTI_SYMPLECTIC)},
        involution_name="conjugation",
        discriminant=_trivalent_discriminant(),
        proper=True,
        region=((-2.5, 2.5),) * 6,
        base_box=box,
        walls=lambda x: (x[:, 0] * x[:, 2] * x[:, 4] + 1.0)[:, None],
        group_kind=GroupKind.R_TIMES_T2,
        action=_r_times_t2_action(structure, f),
    )


def harvey_lawson() -> FibrationModel:
    """
    The fixed locus of (-conj z1, conj z2, conj z3) is iR x R x R; over b1 != 0
    it meets each fiber in four points, one per sign pattern with product sign(b1).
    """
    def evaluator(x):
        _, im = _triple_product(x)
        m2, m3 = _moment_map(x)
        return jnp.stack([im, m2, m3], axis=-1)

    F = SmoothMap(6, 3, evaluator, autodiff=True, name="harvey_lawson")
    box = ((0.2, 1.5), (-1.0, 1.0), (-1.0, 1.0))
    positive = lambda b: b[:, 0] > 0  # noqa: E731
    sections = {}
    for signs in itertools.product((1, -1), repeat=3):
        if np.prod(signs) < 0:
            continue
        solve = _sign_sections(signs, lambda b: b[..., 0])

        def sigma(b, solve=solve):
            r1, r2, r3, (s1, s2, s3) = solve(b)
            zero = jnp.zeros_like(r1)
            return jnp.stack([zero, s1 * r1, s2 * r2, zero, s3 * r3, zero], axis=-1)

        name = _name(signs)
        sections[name] = Section(name, SmoothMap(3, 6, sigma, autodiff=True, name=name), positive, box)

    structure = standard_structure(3)
    involution = linear_map(np.diag([-1.0, 1.0, 1.0, -1.0, 1.0, -1.0]), name="hl_involution")
    return FibrationModel(
        name=ModelName.HARVEY_LAWSON,
        n=3,
        structure=structure,
        fibration=F,
        sections=sections,
        symmetries={"hl_involution": Symmetry("hl_involution", involution, SymmetryKind.ANTI_SYMPLECTIC)},
        involution_name="hl_involution",
        discriminant=_trivalent_discriminant(),
        proper=False,
        region=((-2.0, 2.0),) * 6,
        base_box=box,
        group_kind=GroupKind.R_TIMES_T2,
        action=_r_times_t2_action(structure, F),
    )
