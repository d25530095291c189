"""
Negative-vertex models: f = (mu, Log o Phi o pi) on C^3 with the S^1 moment map
mu = (|z1|^2 - |z2|^2)/2, pi = (gamma(z1, z2), z3) and a symplectomorphism Phi of
C^2 commuting with conjugation.

gamma is z1 z2/|z1| where mu >= 0 and z1 z2/|z2| where mu < 0, extended by 0 at
z1 = z2 = 0; f is piecewise smooth with seam {mu = 0} and wall {b1 = 0}.

* ``negative_amoeba``: Phi = Psi, Psi(v) = ((v1 - v2), (v1 + v2 - sqrt 2))/sqrt 2.
  The discriminant is {0} x Log{v1 + v2 + 1 = 0}.
* ``negative_thin``: Phi = Psi o Phi_H with H a cut-off rotation generator near 0
  (one leg) or a sum of cut-off generators pinching all three legs.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import jax.numpy as jnp
import numpy as np

from lagland.core.affine import amoeba_slack
from lagland.core.errors import ConfigError, ConvergenceError, DomainError
from lagland.core.geometry import SmoothMap, hamiltonian_flow, jacobian, linear_map, standard_structure
from lagland.core.models.catalog import ModelName, ThinLegVariant
from lagland.core.models.interfaces import (
    Discriminant,
    DiscriminantKind,
    FibrationModel,
    Section,
    Symmetry,
    SymmetryKind,
)

logger = logging.getLogger(__name__)

SQRT2 = float(np.sqrt(2.0))
PINCH_CENTER = (0.0, SQRT2)
# the unit-time far flow moves u2 by 1/sqrt 2 < FAR_RAMP_STOP, so |u2|^2 >= M never reaches the ramp
FAR_RAMP_START = 1.5
FAR_RAMP_STOP = 1.0
THIN_FLOW_STEPS = 200
CONTINUATION_STEPS = 8
CENSUS_SEEDS = ((0.0, 0.0, 2.0), (0.0, 0.0, -1.0), (-1.0, -1.0, 0.5), (1.0, 1.0, 0.5), (0.0, 0.0, 0.5))
_REAL_SLOTS = [0, 2, 4]


# -- gamma and the affine map Psi ----------------------------------------------

def gamma_parts(x, side: Optional[int] = None):
    """
    Real and imaginary parts of gamma(z1, z2). ``side`` forces the mu >= 0 (+1)
    or mu < 0 (-1) formula everywhere; by default the side follows the sign of mu.
    """
    x1, y1, x2, y2 = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    re = x1 * x2 - y1 * y2
    im = x1 * y2 + y1 * x2
    r2_1 = x1 ** 2 + y1 ** 2
    r2_2 = x2 ** 2 + y2 ** 2

    def divide(r2):
        positive = r2 > 0
        inverse = jnp.where(positive, 1.0 / jnp.sqrt(jnp.where(positive, r2, 1.0)), 0.0)
        return re * inverse, im * inverse

    if side is not None:
        return divide(r2_1 if side > 0 else r2_2)
    plus, minus = divide(r2_1), divide(r2_2)
    upper = 0.5 * (r2_1 - r2_2) >= 0
    return jnp.where(upper, plus[0], minus[0]), jnp.where(upper, plus[1], minus[1])


def moment(x):
    return 0.5 * (x[..., 0] ** 2 + x[..., 1] ** 2 - x[..., 2] ** 2 - x[..., 3] ** 2)


def psi_affine(v):
    """Psi(v1, v2) = (v1 - v2, v1 + v2 - sqrt 2)/sqrt 2 on real coordinates (..., 4)."""
    a1, b1, a2, b2 = v[..., 0], v[..., 1], v[..., 2], v[..., 3]
    return jnp.stack([(a1 - a2) / SQRT2, (b1 - b2) / SQRT2, (a1 + a2 - SQRT2) / SQRT2, (b1 + b2) / SQRT2], axis=-1)


def _log_moduli(v):
    return 0.5 * jnp.log(v[..., 0] ** 2 + v[..., 1] ** 2), 0.5 * jnp.log(v[..., 2] ** 2 + v[..., 3] ** 2)


def _pi(x, side: Optional[int]):
    g_re, g_im = gamma_parts(x, side)
    return jnp.stack([g_re, g_im, x[..., 4], x[..., 5]], axis=-1)


# -- thin-leg symplectomorphism --------------------------------------------------

def smoothstep_cutoff(t, start: float, stop: float):
    """1 for t <= start, 0 for t >= stop, a quintic smoothstep in between (C^2)."""
    s = jnp.clip((t - start) / (stop - start), 0.0, 1.0)
    return 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)


def far_ramp(epsilon: float, M: float) -> tuple[float, float]:
    """
    Squared radii (start, stop) of the ramp of the far translation in |u2|:
    off below sqrt(M) - 1.5, full strength from sqrt(M) - 1.

    Raises:
        ConfigError: the ramp would overlap the pinch around (0, sqrt 2).
    """
    root = float(np.sqrt(M))
    start, stop = root - FAR_RAMP_START, root - FAR_RAMP_STOP
    pinch_reach = PINCH_CENTER[1] + float(np.sqrt(2 * epsilon))
    if start <= pinch_reach:
        raise ConfigError(f"three-leg far region M={M} must satisfy sqrt(M) - {FAR_RAMP_START} > {pinch_reach:.4f}")
    return start ** 2, stop ** 2


def _rotation_generator(u, center=(0.0, 0.0)):
    """Im((u1 - c1) conj(u2 - c2)) for a real center c."""
    a1, b1 = u[..., 0] - center[0], u[..., 1]
    a2, b2 = u[..., 2] - center[1], u[..., 3]
    return b1 * a2 - a1 * b2


def thin_leg_hamiltonian(variant: ThinLegVariant | str = ThinLegVariant.DEFAULT, epsilon: float = 0.25,
                         M: float = 16.0) -> SmoothMap:
    """
    H = k(|u|^2) (pi/4) Im(u1 conj u2); the three-leg variant adds a cut-off
    rotation by -pi/4 about (0, sqrt 2) and, for |u2|^2 >= M, the generator of the
    real translation by (1, 1)/sqrt 2, ramped in over far_ramp(epsilon, M).
    The supports are disjoint.
    """
    variant = ThinLegVariant(variant)

    def evaluator(u):
        r2 = u[..., 0] ** 2 + u[..., 1] ** 2 + u[..., 2] ** 2 + u[..., 3] ** 2
        H = smoothstep_cutoff(r2, epsilon, 2 * epsilon) * (np.pi / 4) * _rotation_generator(u)
        if variant is ThinLegVariant.THREE_LEG:
            shifted = u[..., 0] ** 2 + u[..., 1] ** 2 + (u[..., 2] - PINCH_CENTER[1]) ** 2 + u[..., 3] ** 2
            H = H - smoothstep_cutoff(shifted, epsilon, 2 * epsilon) * (np.pi / 4) * _rotation_generator(u, PINCH_CENTER)
            far = 1.0 - smoothstep_cutoff(u[..., 2] ** 2 + u[..., 3] ** 2, *far_ramp(epsilon, M))
            H = H - far * (u[..., 1] + u[..., 3]) / SQRT2
        return H[..., None]

    return SmoothMap(4, 1, evaluator, autodiff=True, name=f"thin_leg_{variant}")


def _active(u: np.ndarray, variant: ThinLegVariant, epsilon: float, M: float) -> np.ndarray:
    r2 = np.sum(u ** 2, axis=-1)
    active = r2 < 2 * epsilon
    if variant is ThinLegVariant.THREE_LEG:
        shifted = u[:, 0] ** 2 + u[:, 1] ** 2 + (u[:, 2] - PINCH_CENTER[1]) ** 2 + u[:, 3] ** 2
        active |= shifted < 2 * epsilon
        active |= u[:, 2] ** 2 + u[:, 3] ** 2 > far_ramp(epsilon, M)[0]
    return active


def thin_leg_flow(u, variant: ThinLegVariant | str = ThinLegVariant.DEFAULT, epsilon: float = 0.25,
                  M: float = 16.0, steps: int = THIN_FLOW_STEPS) -> np.ndarray:
    """Phi_H: the time-one flow of the thin-leg Hamiltonian; the identity outside its support."""
    variant = ThinLegVariant(variant)
    arr = np.asarray(u, dtype=float)
    batch = np.atleast_2d(arr).copy()
    active = _active(batch, variant, epsilon, M)
    if np.any(active):
        H = thin_leg_hamiltonian(variant, epsilon, M)
        batch[active] = hamiltonian_flow(standard_structure(2), H, batch[active], 1.0, steps)
    return batch[0] if arr.ndim == 1 else batch


def thin_leg_phi(u, variant: ThinLegVariant | str = ThinLegVariant.DEFAULT, epsilon: float = 0.25,
                 M: float = 16.0) -> np.ndarray:
    """
    Phi = Psi o Phi_H on C^2 (real coordinates (Re u1, Im u1, Re u2, Im u2)).

    Equals Psi for |u|^2 >= 2 epsilon, (-u2, u1 - 1) for |u|^2 <= epsilon and, for
    the three-leg variant, (u1 - 1, u2 - sqrt 2) near (0, sqrt 2) and
    (u1 - u2, u1 + u2)/sqrt 2 for |u2|^2 >= M (far enough that the flow stays there).
    """
    return np.asarray(psi_affine(thin_leg_flow(u, variant, epsilon, M)))


def thin_leg_exact_flow(u, epsilon: float = 0.25) -> np.ndarray:
    """
    Closed form of the one-leg Phi_H: rho = |u|^2 and Im(u1 conj u2) are conserved,
    so the flow is e^{2 i k'(rho) H0(u)} R(k(rho) pi/4) u with H0 = (pi/4) Im(u1 conj u2)
    and R(t)(u1, u2) = (u1 cos t - u2 sin t, u1 sin t + u2 cos t).
    """
    arr = np.asarray(u, dtype=float)
    batch = np.atleast_2d(arr)
    rho = np.sum(batch ** 2, axis=-1)
    s = np.clip((rho - epsilon) / epsilon, 0.0, 1.0)
    k = np.asarray(smoothstep_cutoff(rho, epsilon, 2 * epsilon))
    dk = -30.0 * s ** 2 * (1.0 - s) ** 2 / epsilon
    H0 = (np.pi / 4) * np.asarray(_rotation_generator(batch))
    t = k * np.pi / 4
    u1 = batch[:, 0] + 1j * batch[:, 1]
    u2 = batch[:, 2] + 1j * batch[:, 3]
    phase = np.exp(2j * dk * H0)
    w1 = phase * (u1 * np.cos(t) - u2 * np.sin(t))
    w2 = phase * (u1 * np.sin(t) + u2 * np.cos(t))
    out = np.stack([w1.real, w1.imag, w2.real, w2.imag], axis=-1)
    return out[0] if arr.ndim == 1 else out


# -- reduced map G_t -------------------------------------------------------------

def reduced_gt(t: float, u1: complex, u2: complex) -> np.ndarray:
    """
    G_t(u1, u2) = (log|u2|, log|u1/sqrt(|t| + sqrt(t^2 + |u1|^2)) - 1|).

    Raises:
        DomainError: u2 = 0 or the second modulus vanishes.
    """
    u1 = complex(u1)
    u2 = complex(u2)
    rho = np.sqrt(abs(t) + np.sqrt(t ** 2 + abs(u1) ** 2))
    if u2 == 0 or rho == 0:
        raise DomainError("reduced map needs u2 != 0 and u1 != 0")
    inner = abs(u1 / rho - 1.0)
    if inner == 0:
        raise DomainError(f"log of zero in the reduced map at t={t}, u1={u1}")
    return np.array([np.log(abs(u2)), np.log(inner)])


def reduced_gt_one_sided_dt(u1: complex, u2: complex, t: float = 0.0, h: float = 1e-5) -> dict[int, np.ndarray]:
    """Second-order one-sided t-derivatives of G_t from the right (+1) and from the left (-1)."""
    values = {}
    for side in (1, -1):
        g0, g1, g2 = (reduced_gt(t + side * k * h, u1, u2) for k in range(3))
        values[side] = side * (-3.0 * g0 + 4.0 * g1 - g2) / (2.0 * h)
    return values


# -- the fibrations --------------------------------------------------------------

def _amoeba_branch(side: Optional[int]):
    def evaluator(x):
        first, second = _log_moduli(psi_affine(_pi(x, side)))
        return jnp.stack([moment(x), first, second], axis=-1)
    return evaluator


def _thin_branch(side: Optional[int], variant: ThinLegVariant, epsilon: float, M: float, margin: float):
    def evaluator(x):
        x = np.asarray(x, dtype=float)
        v = thin_leg_phi(np.asarray(_pi(x, side)), variant, epsilon, M)
        moduli = np.stack([np.hypot(v[:, 0], v[:, 1]), np.hypot(v[:, 2], v[:, 3])], axis=-1)
        logs = np.where(moduli > margin, np.log(np.where(moduli > 0, moduli, 1.0)), np.nan)
        return np.column_stack([np.asarray(moment(x)), logs])
    return evaluator


def _amoeba_domain(margin: float):
    def domain(x):
        v = np.asarray(psi_affine(_pi(x, None)))
        return (np.hypot(v[:, 0], v[:, 1]) > margin) & (np.hypot(v[:, 2], v[:, 3]) > margin)
    return domain


def _seam(x):
    return np.asarray(moment(x))


def real_slice_continuation(f: SmoothMap, seed, b, steps: int = CONTINUATION_STEPS, tol: float = 1e-12,
                            max_iter: int = 30) -> np.ndarray:
    """
    Trace the real fixed points of f over b from ``seed`` by Newton continuation on
    (x1, x2, x3). Targets with b1 >= 0 use the mu >= 0 branch and the others the
    mu < 0 branch, so each Newton solve stays smooth.

    Raises:
        ConvergenceError: a continuation step did not converge.
    """
    seed = np.asarray(seed, dtype=float)
    b = np.atleast_2d(np.asarray(b, dtype=float))
    out = np.empty((len(b), 6))

    def embed(r):
        x = np.zeros((len(r), 6))
        x[:, _REAL_SLOTS] = r
        return x

    for side in (1, -1):
        mask = b[:, 0] >= 0 if side > 0 else b[:, 0] < 0
        if not mask.any():
            continue
        targets = b[mask]
        r = np.repeat(seed[None], len(targets), axis=0)
        start = f.evaluate_branch(embed(r[:1]), side)[0]
        for k in range(1, steps + 1):
            goal = start + (k / steps) * (targets - start)
            for _ in range(max_iter):
                x = embed(r)
                residual = f.evaluate_branch(x, side) - goal
                if np.max(np.abs(residual)) <= tol:
                    break
                J = jacobian(f, x, side=side)[:, :, _REAL_SLOTS]
                r = r - np.linalg.solve(J, residual[..., None])[..., 0]
            else:
                raise ConvergenceError(f"real-slice continuation stalled at step {k}/{steps} (side {side})")
        out[mask] = embed(r)
    return out


def _sections(f: SmoothMap, box) -> dict[str, Section]:
    everywhere = lambda b: np.all(np.isfinite(b), axis=-1)  # noqa: E731
    sections = {}
    for name, seed in (("S3", CENSUS_SEEDS[2]), ("S4", CENSUS_SEEDS[3])):
        sigma = SmoothMap(3, 6, lambda b, seed=seed: real_slice_continuation(f, seed, b), name=name)
        sections[name] = Section(name, sigma, everywhere, box)
    return sections


def _amoeba_discriminant(margin: float) -> Discriminant:
    def distance(b):
        b = np.atleast_2d(b)
        return np.hypot(b[:, 0], amoeba_slack(b[:, 1:3]))

    def critical_sampler(rng: np.random.Generator, m: int) -> np.ndarray:
        x = np.zeros((m, 6))
        x[:, 4:] = 1.5 * rng.standard_normal((m, 2))
        return x

    def points(rng: np.random.Generator, m: int) -> np.ndarray:
        z3 = critical_sampler(rng, 4 * m)
        z3 = z3[_amoeba_domain(margin)(z3)][:m]
        v = np.asarray(psi_affine(_pi(z3, None)))
        return np.column_stack([np.zeros(len(v)), np.asarray(_log_moduli(v)).T])

    return Discriminant(DiscriminantKind.AMOEBA, distance, critical_sampler, points)


def _walls(phi):
    def walls(x):
        v = phi(np.asarray(_pi(x, None)))
        return np.stack([v[:, 0], v[:, 2]], axis=-1)
    return walls


def _conjugation() -> Symmetry:
    return Symmetry("conjugation", linear_map(np.diag(np.tile([1.0, -1.0], 3)), name="conjugation"),
                    SymmetryKind.ANTI_SYMPLECTIC)


_BASE_BOX = ((-1.0, 1.0), (-1.5, 1.0), (-1.5, 1.0))
_REGION = ((-3.0, 3.0),) * 6


def negative_amoeba(margin: float = 1e-12) -> FibrationModel:
    """The piecewise-smooth negative fibration with Phi = Psi; the real locus minus the walls has five components."""
    f = SmoothMap(6, 3, _amoeba_branch(None), _amoeba_domain(margin), autodiff=True, seam=_seam,
                  branches=(_amoeba_branch(1), _amoeba_branch(-1)), name="negative_amoeba")
    return FibrationModel(
        name=ModelName.NEGATIVE_AMOEBA,
        n=3,
        structure=standard_structure(3),
        fibration=f,
        sections=_sections(f, _BASE_BOX),
        symmetries={"conjugation": _conjugation()},
        involution_name="conjugation",
        discriminant=_amoeba_discriminant(margin),
        proper=True,
        region=_REGION,
        base_box=_BASE_BOX,
        walls=_walls(lambda u: np.asarray(psi_affine(u))),
        metadata={"census_seeds": CENSUS_SEEDS, "expected_components": 5, "expected_sections": 2},
    )


def negative_thin(variant: ThinLegVariant | str = ThinLegVariant.DEFAULT, epsilon: float = 0.25, M: float = 16.0,
                  margin: float = 1e-12) -> FibrationModel:
    """
    The negative fibration with Phi = Psi o Phi_H. f goes through numerical flows,
    so it is differentiated by central differences and per-fiber fixed points are
    seeded on the fixed set rather than by fiber walks.
    """
    variant = ThinLegVariant(variant)
    if variant is ThinLegVariant.THREE_LEG:
        far_ramp(epsilon, M)
    f = SmoothMap(6, 3, _thin_branch(None, variant, epsilon, M, margin), autodiff=False, seam=_seam,
                  branches=(_thin_branch(1, variant, epsilon, M, margin), _thin_branch(-1, variant, epsilon, M, margin)),
                  name="negative_thin")
    return FibrationModel(
        name=ModelName.NEGATIVE_THIN,
        n=3,
        structure=standard_structure(3),
        fibration=f,
        sections=_sections(f, _BASE_BOX),
        symmetries={"conjugation": _conjugation()},
        involution_name="conjugation",
        discriminant=_amoeba_discriminant(margin),
        proper=True,
        region=_REGION,
        base_box=_BASE_BOX,
        walls=_walls(lambda u: thin_leg_phi(u, variant, epsilon, M)),
        exploration="fixed_set",
        metadata={
            "census_seeds": CENSUS_SEEDS,
            "variant": str(variant),
            "epsilon": epsilon,
            "M": M,
            "pinch_radius": float(np.sqrt(2 * epsilon)),
        },
    )


# -- seam probe ------------------------------------------------------------------

@dataclass(frozen=True)
class SeamProbe:
    """Branch continuity on the seam mu = 0 and the wall residual max |b1| over f(seam)."""
    samples: int
    continuity: float
    wall_residual: float


def sample_seam(model: FibrationModel, rng: np.random.Generator, m: int) -> np.ndarray:
    """Domain points with |z1| = |z2|."""
    lo, hi = np.asarray(model.region, dtype=float).T
    kept = np.empty((0, model.ambient_dim))
    while len(kept) < m:
        x = rng.uniform(lo, hi, size=(2 * m, model.ambient_dim))
        modulus = np.hypot(x[:, 0], x[:, 1])
        phase = rng.uniform(-np.pi, np.pi, 2 * m)
        x[:, 2], x[:, 3] = modulus * np.cos(phase), modulus * np.sin(phase)
        kept = np.concatenate([kept, x[model.fibration.in_domain(x)]])
    return kept[:m]


def seam_probe(model: FibrationModel, rng: np.random.Generator, m: int = 200) -> SeamProbe:
    """
    Evaluate both branch formulas on seam samples.

    Raises:
        ValueError: the model is smooth (no seam).
    """
    if not model.piecewise:
        raise ValueError(f"{model.name} has no seam")
    x = sample_seam(model, rng, m)
    plus = model.fibration.evaluate_branch(x, 1)
    minus = model.fibration.evaluate_branch(x, -1)
    probe = SeamProbe(len(x), float(np.max(np.abs(plus - minus))), float(np.max(np.abs(model.fibration(x)[:, 0]))))
    logger.debug(f"seam probe on {model.name}: {probe}")
    return probe
