"""
Focus-focus local model, its nodal example and the generic-singular model.

The non-proper model q(z1, z2) = z1 conj(z2) lives in the focus-focus chart
(y1, y2, x1, x2) with z1 = y1 + i y2, z2 = x1 + i x2. The nodal example
f = ((|z1|^2 - |z2|^2)/2, log|z1 z2 + 1|) and the generic-singular model (the
nodal model crossed with an annulus (r, theta)) use the standard chart.
"""
import logging
from typing import Optional

import jax.numpy as jnp
import numpy as np

from lagland.core.errors import RegionError
from lagland.core.geometry import (
    SmoothMap,
    coords_of,
    cylinder_structure,
    focus_focus_structure,
    linear_map,
    standard_structure,
)
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
from lagland.core.semiflat import Potential

logger = logging.getLogger(__name__)

FF_BASE_RADIUS = 1.0


# -- the non-proper focus-focus model ----------------------------------------

def _q(x):
    return jnp.stack([x[..., 0] * x[..., 2] + x[..., 1] * x[..., 3],
                      x[..., 1] * x[..., 2] - x[..., 0] * x[..., 3]], axis=-1)


def _ff_domain(x: np.ndarray) -> np.ndarray:
    return np.all(np.isfinite(x), axis=-1)


def _ff_sigma_1(b):
    one = jnp.ones_like(b[..., 0])
    return jnp.stack([one, jnp.zeros_like(one), b[..., 0], -b[..., 1]], axis=-1)


def _ff_sigma_2(b):
    one = jnp.ones_like(b[..., 0])
    return jnp.stack([b[..., 0], b[..., 1], one, jnp.zeros_like(one)], axis=-1)


def _unit_disk(b: np.ndarray) -> np.ndarray:
    return b[:, 0] ** 2 + b[:, 1] ** 2 < FF_BASE_RADIUS ** 2


def _ff_action(g: GroupElement, x) -> np.ndarray:
    """(tau z1, conj(tau)^-1 z2)."""
    arr = coords_of(x)
    batch = np.atleast_2d(arr)
    z1 = g.tau * (batch[:, 0] + 1j * batch[:, 1])
    z2 = (batch[:, 2] + 1j * batch[:, 3]) / np.conj(g.tau)
    out = np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)
    return out[0] if arr.ndim == 1 else out


def _point_discriminant(n_ambient: int, n_base: int) -> Discriminant:
    return Discriminant(
        DiscriminantKind.POINT,
        distance=lambda b: np.linalg.norm(np.atleast_2d(b)[:, :2], axis=-1),
        critical_sampler=lambda rng, m: np.zeros((m, n_ambient)),
        points=lambda rng, m: np.zeros((m, n_base)),
    )


def ff_nonproper() -> FibrationModel:
    """q = z1 conj(z2) with the involution (z1, z2) -> (conj z2, conj z1) exchanging Sigma_1 and Sigma_2."""
    q = SmoothMap(4, 2, _q, _ff_domain, autodiff=True, name="q")
    # (y1, y2, x1, x2) -> (x1, -x2, y1, -y2)
    swap = np.array([
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 0.0],
    ])
    box = ((-0.7, 0.7), (-0.7, 0.7))
    sections = {
        "Sigma_1": Section("Sigma_1", SmoothMap(2, 4, _ff_sigma_1, autodiff=True, name="Sigma_1"), _unit_disk, box,
                           real=False),
        "Sigma_2": Section("Sigma_2", SmoothMap(2, 4, _ff_sigma_2, autodiff=True, name="Sigma_2"), _unit_disk, box,
                           real=False),
    }
    symmetries = {"iota": Symmetry("iota", linear_map(swap, name="iota"), SymmetryKind.ANTI_SYMPLECTIC)}
    return FibrationModel(
        name=ModelName.FF_NONPROPER,
        n=2,
        structure=focus_focus_structure(),
        fibration=q,
        sections=sections,
        symmetries=symmetries,
        involution_name="iota",
        discriminant=_point_discriminant(4, 2),
        proper=False,
        region=((-2.0, 2.0),) * 4,
        base_box=box,
        group_kind=GroupKind.CSTAR,
        action=_ff_action,
    )


def psi_region(region: int, tau, b, potential: Optional[Potential] = None) -> np.ndarray:
    """
    The semiflat point psi_j(tau, b) = (b, (-log|tau|, Arg tau) + [j = 1] dH(b))
    in the cotangent chart (b1, b2, alpha1, alpha2).
    """
    if region not in (1, 2):
        raise ValueError("region must be 1 or 2")
    tau = np.atleast_1d(np.asarray(tau, dtype=complex))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    alpha = np.stack([-np.log(np.abs(tau)), np.angle(tau)], axis=-1)
    if region == 1 and potential is not None:
        alpha = alpha + np.asarray(potential.gradient(b))
    out = np.concatenate([np.broadcast_to(b, alpha.shape), alpha], axis=-1)
    return out[0] if len(out) == 1 else out


def _glue_parameters(region: int, p, potential: Potential):
    """Log-modulus and argument of tau for the lattice representative landing in V_region."""
    b1, b2, a1, a2 = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    grad = potential.gradient(p[..., :2])
    shift = grad if region == 1 else jnp.zeros_like(grad)
    log_mod = -(a1 - shift[..., 0])
    arg = a2 - shift[..., 1]
    # alpha + lambda_1 multiplies tau by beta = b exp(-dH1 + i dH2)
    log_beta = 0.5 * jnp.log(b1 ** 2 + b2 ** 2) - grad[..., 0]
    arg_beta = jnp.arctan2(b2, b1) + grad[..., 1]
    v = log_mod / (-log_beta)
    k = jnp.floor(v) + 1.0 if region == 1 else jnp.floor(v)
    return log_mod + k * log_beta, arg + k * arg_beta


def glue_smooth_map(region: int, potential: Optional[Potential] = None) -> SmoothMap:
    """g|U'_j = phi_j o psi_j^-1 from the cotangent chart into the focus-focus chart."""
    if region not in (1, 2):
        raise ValueError("region must be 1 or 2")
    potential = potential or Potential(2)

    def evaluator(p):
        log_mod, arg = _glue_parameters(region, p, potential)
        tau = jnp.exp(log_mod + 1j * arg)
        b = p[..., 0] + 1j * p[..., 1]
        if region == 1:
            z1, z2 = tau, jnp.conj(b) / jnp.conj(tau)
        else:
            z1, z2 = tau * b, 1.0 / jnp.conj(tau)
        return jnp.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)

    def domain(p):
        r2 = p[:, 0] ** 2 + p[:, 1] ** 2
        return (r2 > 0) & (r2 < FF_BASE_RADIUS ** 2)

    return SmoothMap(4, 4, evaluator, domain, autodiff=True, name=f"glue_{region}")


def glue_map(region: int, p, potential: Optional[Potential] = None) -> np.ndarray:
    """
    Glue a semiflat point of U'_region into the focus-focus model.

    V_1 = {|b| < |tau| < 1} and V_2 = {1 < |tau| < 1/|b|}; the inequalities are strict.

    Raises:
        RegionError: the point has no lattice representative strictly inside V_region.
    """
    potential = potential or Potential(2)
    g = glue_smooth_map(region, potential)
    arr = coords_of(p)
    batch = np.atleast_2d(arr)
    if not np.all(g.in_domain(batch)):
        raise RegionError("glue map needs 0 < |b| < 1")
    log_mod, _ = _glue_parameters(region, jnp.asarray(batch), potential)
    log_mod = np.asarray(log_mod)
    log_b = 0.5 * np.log(batch[:, 0] ** 2 + batch[:, 1] ** 2)
    lower, upper = (log_b, 0.0) if region == 1 else (0.0, -log_b)
    inside = (log_mod > lower) & (log_mod < upper)
    if not np.all(inside):
        raise RegionError(f"semiflat point {batch[~inside][0]} is not in U'_{region}")
    return g(arr)


# -- nodal example -------------------------------------------------------------

def _nodal_f(x):
    x1, y1, x2, y2 = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    mu = 0.5 * (x1 ** 2 + y1 ** 2 - x2 ** 2 - y2 ** 2)
    wr = x1 * x2 - y1 * y2 + 1.0
    wi = x1 * y2 + y1 * x2
    return jnp.stack([mu, 0.5 * jnp.log(wr ** 2 + wi ** 2)], axis=-1)


def _nodal_domain(margin: float):
    def domain(x: np.ndarray) -> np.ndarray:
        wr = x[:, 0] * x[:, 2] - x[:, 1] * x[:, 3] + 1.0
        wi = x[:, 0] * x[:, 3] + x[:, 1] * x[:, 2]
        return np.hypot(wr, wi) > margin
    return domain


def _nodal_real_section(sign: float):
    """The real fixed point with x1 x2 = -(1 + e^{b2}) and sign(x1) = sign."""
    def sigma(b):
        P = 1.0 + jnp.exp(b[..., 1])
        x1 = sign * jnp.sqrt(b[..., 0] + jnp.sqrt(b[..., 0] ** 2 + P ** 2))
        zero = jnp.zeros_like(x1)
        return jnp.stack([x1, zero, -P / x1, zero], axis=-1)
    return sigma


def _nodal_walls(x: np.ndarray) -> np.ndarray:
    return (x[:, 0] * x[:, 2] + 1.0)[:, None]


def _conjugation(n: int, name: str = "conjugation") -> SmoothMap:
    return linear_map(np.diag(np.tile([1.0, -1.0], n)), name=name)


def nodal(margin: float = 1e-12) -> FibrationModel:
    """X = C^2 - {z1 z2 + 1 = 0} with one node over b = 0 and the conjugation involution."""
    f = SmoothMap(4, 2, _nodal_f, _nodal_domain(margin), autodiff=True, name="nodal")
    box = ((-1.0, 1.0), (-1.0, 1.0))
    everywhere = lambda b: np.all(np.isfinite(b), axis=-1)  # noqa: E731
    sections = {
        name: Section(name, SmoothMap(2, 4, _nodal_real_section(sign), autodiff=True, name=name), everywhere, box)
        for name, sign in (("sigma_1", 1.0), ("sigma_2", -1.0))
    }
    return FibrationModel(
        name=ModelName.NODAL,
        n=2,
        structure=standard_structure(2),
        fibration=f,
        sections=sections,
        symmetries={"conjugation": Symmetry("conjugation", _conjugation(2), SymmetryKind.ANTI_SYMPLECTIC)},
        involution_name="conjugation",
        discriminant=_point_discriminant(4, 2),
        proper=True,
        region=((-3.0, 3.0),) * 4,
        base_box=box,
        walls=_nodal_walls,
    )


# -- generic-singular model ----------------------------------------------------

def _generic_f(x):
    return jnp.concatenate([_nodal_f(x[..., :4]), x[..., 4:5]], axis=-1)


def _generic_section(sign: float, theta: float):
    nodal_sigma = _nodal_real_section(sign)

    def sigma(b):
        point = nodal_sigma(b[..., :2])
        return jnp.concatenate([point, b[..., 2:3], jnp.full_like(b[..., 2:3], theta)], axis=-1)
    return sigma


def generic_singular(margin: float = 1e-12) -> FibrationModel:
    """
    The nodal model times an annulus (r, theta), 0 < r < 1, with omega += dr ^ dtheta,
    f = (nodal f, r) and the involution (conj, r, -theta).
    """
    nodal_domain = _nodal_domain(margin)

    def domain(x):
        return nodal_domain(x[:, :4]) & (x[:, 4] > 0) & (x[:, 4] < 1)

    f = SmoothMap(6, 3, _generic_f, domain, autodiff=True, name="generic_singular")
    box = ((-1.0, 1.0), (-1.0, 1.0), (0.2, 0.8))
    interval = lambda b: (b[:, 2] > 0) & (b[:, 2] < 1)  # noqa: E731
    sections = {}
    for index, sign in ((1, 1.0), (2, -1.0)):
        for label, theta in (("0", 0.0), ("pi", np.pi)):
            name = f"sigma_{index}_theta_{label}"
            sections[name] = Section(name, SmoothMap(3, 6, _generic_section(sign, theta), autodiff=True, name=name),
                                     interval, box)
    structure = cylinder_structure(3)

    def action(g: GroupElement, x) -> np.ndarray:
        times = ((1, -np.log(abs(g.tau))), (0, float(np.angle(g.tau))), (2, 2 * np.pi * g.angles[0]))
        return flow_action(structure, f, times, x)

    def walls(x):
        return np.concatenate([_nodal_walls(x[:, :4]), x[:, 4:5], 1.0 - x[:, 4:5]], axis=-1)

    discriminant = Discriminant(
        DiscriminantKind.GRAPH,
        distance=lambda b: np.linalg.norm(np.atleast_2d(b)[:, :2], axis=-1),
        critical_sampler=lambda rng, m: np.column_stack([
            np.zeros((m, 4)), rng.uniform(0.05, 0.95, m), rng.uniform(-np.pi, np.pi, m)]),
        points=lambda rng, m: np.column_stack([np.zeros((m, 2)), rng.uniform(0.05, 0.95, m)]),
    )
    return FibrationModel(
        name=ModelName.GENERIC_SINGULAR,
        n=3,
        structure=structure,
        fibration=f,
        sections=sections,
        symmetries={"conjugation": Symmetry("conjugation", _conjugation(3), SymmetryKind.ANTI_SYMPLECTIC)},
        involution_name="conjugation",
        discriminant=discriminant,
        proper=True,
        region=((-3.0, 3.0),) * 4 + ((0.02, 0.98), (-np.pi, np.pi)),
        base_box=box,
        walls=walls,
        group_kind=GroupKind.CSTAR_TIMES_S1,
        action=action,
        metadata={"third_period": "dr", "expected_components": 7, "expected_sections": 6},
    )
