"""
Action-angle machinery: period lattices in T*B, quotient charts, fiberwise
translations, the map Theta(b, xi) built from Hamiltonian flows, and the
canonical involutions they induce.

Fiber points of a chart are stored by their coefficients in the period basis,
so the translation algebra is exact on reduced coefficients. Comparisons of
reduced coefficients use the circle distance on [0, 1).
"""
import logging
from dataclasses import dataclass
from enum import StrEnum
from typing import TYPE_CHECKING, Callable, Optional, Sequence

import jax.numpy as jnp
import numpy as np

from lagland.core.errors import ClosednessError, ConvergenceError, DimensionError, DomainError, RankDeficiencyError
from lagland.core.geometry import SmoothMap, coords_of, fiber_walk, hamiltonian_flow, jacobian, numerics
from lagland.utils.retry import RetryConfig

if TYPE_CHECKING:
    from lagland.core.models.interfaces import FibrationModel, Section

logger = logging.getLogger(__name__)

CIRCLE_TOL = 1e-12
CLOSEDNESS_TOL = 1e-6
THETA_STEPS_PER_UNIT = 200


class ChartName(StrEnum):
    FOCUS_FOCUS = "focus_focus"
    GENERIC_SINGULAR = "generic_singular"
    TORIC = "toric"
    UNIT = "unit"
    DEFAULT = FOCUS_FOCUS


@dataclass(frozen=True)
class Potential:
    """
    Quadratic potential H(b) = constant + linear . b + 1/2 b^T quadratic b on the base.
    The zero potential is the default.
    """
    n: int
    constant: float = 0.0
    linear: tuple[float, ...] = ()
    quadratic: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        linear = tuple(self.linear) or (0.0,) * self.n
        quadratic = tuple(tuple(row) for row in self.quadratic) or tuple((0.0,) * self.n for _ in range(self.n))
        if len(linear) != self.n or np.shape(quadratic) != (self.n, self.n):
            raise DimensionError(f"potential coefficients do not match base dimension {self.n}")
        if not np.allclose(quadratic, np.transpose(quadratic)):
            raise ValueError("quadratic part of the potential must be symmetric")
        object.__setattr__(self, "linear", linear)
        object.__setattr__(self, "quadratic", quadratic)

    @classmethod
    def from_coefficients(cls, coefficients: Sequence[float], n: int) -> "Potential":
        """
        Build from monomial coefficients: the constant, then b_i, then b_i b_j for
        i <= j (for n=2: c00, c10, c01, c20, c11, c02). Missing trailing
        coefficients are zero.
        """
        monomials = [(i, j) for i in range(n) for j in range(i, n)]
        size = 1 + n + len(monomials)
        if len(coefficients) > size:
            raise DimensionError(f"at most {size} coefficients for a quadratic potential in {n} variables")
        c = np.zeros(size)
        c[: len(coefficients)] = coefficients
        quadratic = np.zeros((n, n))
        for (i, j), value in zip(monomials, c[1 + n:]):
            if i == j:
                quadratic[i, i] = 2.0 * value
            else:
                quadratic[i, j] = quadratic[j, i] = value
        return cls(n, float(c[0]), tuple(c[1:1 + n]), tuple(map(tuple, quadratic)))

    @property
    def is_zero(self) -> bool:
        return self.constant == 0 and not np.any(self.linear) and not np.any(self.quadratic)

    def value(self, b):
        Q = jnp.asarray(self.quadratic)
        return self.constant + b @ jnp.asarray(self.linear) + 0.5 * jnp.einsum("...i,ij,...j->...", b, Q, b)

    def gradient(self, b):
        return jnp.asarray(self.linear) + b @ jnp.asarray(self.quadratic)


@dataclass(frozen=True, eq=False)
class OneForm:
    """A covector-valued function on the base, evaluated on arrays (..., n)."""
    fn: Callable
    name: str = ""

    def __call__(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        return np.asarray(self.fn(b), dtype=float)

    @classmethod
    def constant(cls, values: Sequence[float], name: str = "") -> "OneForm":
        values = jnp.asarray(values, dtype=float)
        return cls(lambda b: jnp.broadcast_to(values, jnp.shape(b)), name or "constant")

    @classmethod
    def exact(cls, potential: Potential, name: str = "dH") -> "OneForm":
        return cls(potential.gradient, name)

    @classmethod
    def zero(cls, n: int) -> "OneForm":
        return cls.constant(np.zeros(n), "zero")

    def __add__(self, other: "OneForm") -> "OneForm":
        return OneForm(lambda b: self.fn(b) + other.fn(b), f"{self.name}+{other.name}")

    def __neg__(self) -> "OneForm":
        return OneForm(lambda b: -self.fn(b), f"-{self.name}")

    def __sub__(self, other: "OneForm") -> "OneForm":
        return self + (-other)

    def scale(self, factor: float) -> "OneForm":
        return OneForm(lambda b: factor * self.fn(b), f"{factor}*{self.name}")


@dataclass(frozen=True, eq=False)
class SemiflatChart:
    """
    T*B / Lambda over a base domain.

    ``period_fn(b, arg_hint)`` returns the period matrix with rows lambda_i(b);
    charts with an angular period use ``arg_hint`` to pick the branch of Arg b
    closest to the hint.
    """
    name: str
    n: int
    base_domain: Callable[[np.ndarray], np.ndarray]
    potential: Potential
    period_fn: Callable[[np.ndarray, Optional[np.ndarray]], np.ndarray]
    period_names: tuple[str, ...]
    # the point Delta of the base the angular period winds around
    singular_point: Optional[tuple[float, ...]] = None

    def periods(self, b, arg_hint=None) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        single = b.ndim == 1
        batch = np.atleast_2d(b)
        if batch.shape[-1] != self.n:
            raise DimensionError(f"chart {self.name} has a {self.n}-dimensional base")
        if not np.all(self.base_domain(batch)):
            raise DomainError(f"base point outside the domain of chart {self.name}")
        hint = None if arg_hint is None else np.broadcast_to(np.asarray(arg_hint, dtype=float), (len(batch),))
        P = np.asarray(self.period_fn(batch, hint), dtype=float)
        return P[0] if single else P

    def period_form(self, index: int) -> OneForm:
        return OneForm(lambda b: self.periods(b)[..., index, :], self.period_names[index])

    def dH(self, b) -> np.ndarray:
        return np.asarray(self.potential.gradient(np.asarray(b, dtype=float)))


def _continuous_arg(b: np.ndarray, arg_hint: Optional[np.ndarray]) -> np.ndarray:
    arg = np.arctan2(b[:, 1], b[:, 0])
    if arg_hint is not None:
        arg = arg + 2 * np.pi * np.round((arg_hint - arg) / (2 * np.pi))
    return arg


def focus_focus_chart(potential: Optional[Potential] = None) -> SemiflatChart:
    """
    Periods of the nodal semiflat model over the punctured unit disk:
    lambda_1 = -log|b| db_1 + Arg b db_2 + dH, lambda_2 = 2 pi db_2.
    """
    potential = potential or Potential(2)

    def periods(b, arg_hint=None):
        grad = np.asarray(potential.gradient(b))
        lam1 = np.stack([-0.5 * np.log(b[:, 0] ** 2 + b[:, 1] ** 2), _continuous_arg(b, arg_hint)], axis=-1) + grad
        lam2 = np.broadcast_to(np.array([0.0, 2 * np.pi]), lam1.shape)
        return np.stack([lam1, lam2], axis=1)

    def domain(b):
        r2 = b[:, 0] ** 2 + b[:, 1] ** 2
        return (r2 > 0) & (r2 < 1)

    return SemiflatChart(ChartName.FOCUS_FOCUS, 2, domain, potential, periods, ("lambda_1", "lambda_2"), (0.0, 0.0))


def generic_singular_chart(potential: Optional[Potential] = None) -> SemiflatChart:
    """The nodal periods on D x (0, 1) with a third period dr."""
    potential = potential or Potential(3)

    def periods(b, arg_hint=None):
        grad = np.asarray(potential.gradient(b))
        zero = np.zeros(len(b))
        lam1 = np.stack([-0.5 * np.log(b[:, 0] ** 2 + b[:, 1] ** 2), _continuous_arg(b, arg_hint), zero], axis=-1)
        lam2 = np.broadcast_to(np.array([0.0, 2 * np.pi, 0.0]), lam1.shape)
        lam3 = np.broadcast_to(np.array([0.0, 0.0, 1.0]), lam1.shape)
        return np.stack([lam1 + grad, lam2, lam3], axis=1)

    def domain(b):
        r2 = b[:, 0] ** 2 + b[:, 1] ** 2
        return (r2 > 0) & (r2 < 1) & (b[:, 2] > 0) & (b[:, 2] < 1)

    return SemiflatChart(ChartName.GENERIC_SINGULAR, 3, domain, potential, periods,
                         ("lambda_1", "lambda_2", "lambda_3"), (0.0, 0.0))


def toric_chart(n: int = 2) -> SemiflatChart:
    def periods(b, arg_hint=None):
        return np.broadcast_to(2 * np.pi * np.eye(n), (len(b), n, n)).copy()

    return SemiflatChart(ChartName.TORIC, n, lambda b: np.all(b > 0, axis=-1), Potential(n), periods,
                         tuple(f"lambda_{i + 1}" for i in range(n)))


def unit_chart(n: int = 2) -> SemiflatChart:
    def periods(b, arg_hint=None):
        return np.broadcast_to(np.eye(n), (len(b), n, n)).copy()

    return SemiflatChart(ChartName.UNIT, n, lambda b: np.all(np.isfinite(b), axis=-1), Potential(n), periods,
                         tuple(f"e_{i + 1}" for i in range(n)))


def chart(name: ChartName | str = ChartName.DEFAULT, potential: Optional[Potential] = None,
          n: int = 2) -> SemiflatChart:
    """Built-in chart by name; ``potential`` applies to the nodal-type charts."""
    name = ChartName(name)
    if name is ChartName.FOCUS_FOCUS:
        return focus_focus_chart(potential)
    if name is ChartName.GENERIC_SINGULAR:
        return generic_singular_chart(potential)
    if name is ChartName.TORIC:
        return toric_chart(n)
    return unit_chart(n)


@dataclass(frozen=True, eq=False)
class FiberPoint:
    """A point of T*B/Lambda: base point, a covector representative and its reduced coefficients."""
    b: np.ndarray
    alpha: np.ndarray
    reduced: np.ndarray


def fractional(c) -> np.ndarray:
    """Fractional parts in [0, 1), with values within CIRCLE_TOL of 1 snapped to 0."""
    c = np.asarray(c, dtype=float)
    c = c - np.floor(c)
    return np.where(c >= 1.0 - CIRCLE_TOL, 0.0, c)


def circle_distance(c1, c2) -> float:
    """Largest coordinatewise distance on R/Z."""
    d = np.abs(np.asarray(c1, dtype=float) - np.asarray(c2, dtype=float)) % 1.0
    return float(np.max(np.minimum(d, 1.0 - d))) if np.size(d) else 0.0


def coefficients(chart: SemiflatChart, b, alpha) -> np.ndarray:
    """Real coefficients c with alpha = sum_i c_i lambda_i(b)."""
    P = chart.periods(b)
    if np.any(np.linalg.cond(P) > 1e12):
        raise RankDeficiencyError(f"period matrix of {chart.name} is singular at {b}", np.linalg.svd(P, compute_uv=False))
    return np.linalg.solve(np.swapaxes(P, -1, -2), np.asarray(alpha, dtype=float)[..., None])[..., 0]


def reduce(chart: SemiflatChart, b, alpha) -> np.ndarray:
    """
    Coefficients of alpha in the period basis at b, reduced to [0, 1)^n.

    Raises:
        RankDeficiencyError: the period matrix at b is singular.
    """
    return fractional(coefficients(chart, b, alpha))


def fiber_point(chart: SemiflatChart, b, alpha) -> FiberPoint:
    b = np.asarray(b, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    return FiberPoint(b, alpha, reduce(chart, b, alpha))


def from_coefficients(chart: SemiflatChart, b, c) -> FiberPoint:
    b = np.asarray(b, dtype=float)
    c = fractional(c)
    return FiberPoint(b, np.einsum("...ji,...j->...i", chart.periods(b), c), c)


def minus_id(chart: SemiflatChart, p: FiberPoint) -> FiberPoint:
    """(b, alpha) -> (b, -alpha)."""
    return from_coefficients(chart, p.b, -p.reduced)


def translate(chart: SemiflatChart, eta: OneForm, p: FiberPoint) -> FiberPoint:
    """T_eta(b, alpha) = (b, alpha + eta(b))."""
    return from_coefficients(chart, p.b, p.reduced + coefficients(chart, p.b, eta(p.b)))


def iota_H(chart: SemiflatChart, p: FiberPoint) -> FiberPoint:
    """(b, alpha) -> (b, dH(b) - alpha); fixes the section 1/2 dH."""
    return from_coefficients(chart, p.b, coefficients(chart, p.b, chart.dH(p.b)) - p.reduced)


def closedness_residual(form: OneForm | Callable, b, h: float = 1e-5) -> float:
    """max |d eta| at b from central differences of the covector components."""
    b = np.asarray(b, dtype=float)
    n = b.size
    shifts = h * np.eye(n)
    values = np.asarray(form(np.concatenate([b + shifts, b - shifts])), dtype=float)
    D = ((values[:n] - values[n:]) / (2 * h)).T
    return float(np.max(np.abs(D - D.T)))


def _require_closed(form: OneForm, b, tol: float) -> None:
    for point in np.atleast_2d(b):
        residual = closedness_residual(form, point)
        if residual > tol:
            raise ClosednessError(f"{form.name or 'one-form'} is not closed at {point} (curl {residual:.2e})")


def section_translation(chart: SemiflatChart, sigma_prime: OneForm, p: FiberPoint,
                        tol: float = CLOSEDNESS_TOL) -> FiberPoint:
    """
    Fiberwise translation by the closed 1-form sigma_prime; maps the zero
    section to the graph of sigma_prime.

    Raises:
        ClosednessError: sigma_prime has a non-zero curl at p.b.
    """
    _require_closed(sigma_prime, p.b, tol)
    return translate(chart, sigma_prime, p)


def section_twist(chart: SemiflatChart, s1: OneForm, s2: OneForm) -> Callable[[FiberPoint], FiberPoint]:
    """The fiber-preserving translation taking the section s1 to s2."""
    difference = s2 - s1
    return lambda p: section_translation(chart, difference, p)


def conjugated_involution(chart: SemiflatChart, s: OneForm) -> Callable[[FiberPoint], FiberPoint]:
    """t^-1 o iota_H o t with t = T_{dH/2 - s}: the involution alpha -> 2 s(b) - alpha fixing s."""
    t = OneForm.exact(chart.potential).scale(0.5) - s

    def involution(p: FiberPoint) -> FiberPoint:
        moved = translate(chart, t, p)
        return translate(chart, -t, iota_H(chart, moved))

    return involution


def _ff_q(x):
    return x[..., 0] * x[..., 2] + x[..., 1] * x[..., 3], x[..., 1] * x[..., 2] - x[..., 0] * x[..., 3]


def section_translation_ff(sigma_prime: OneForm, x, *, inverse: bool = False,
                           tol: float = CLOSEDNESS_TOL) -> np.ndarray:
    """
    The translation by sigma_prime on the focus-focus local model:
    (z1, z2) -> (tau(b) z1, conj(tau(b))^-1 z2) with tau = exp(-s1 + i s2) and
    b = z1 conj(z2). Points use the focus-focus chart.
    """
    arr = coords_of(x)
    batch = np.atleast_2d(arr)
    b = np.stack(_ff_q(batch), axis=-1)
    _require_closed(sigma_prime, b[:1], tol)
    s = np.atleast_2d(sigma_prime(b))
    tau = np.exp(-s[:, 0] + 1j * s[:, 1])
    if inverse:
        tau = 1.0 / tau
    z1 = tau * (batch[:, 0] + 1j * batch[:, 1])
    z2 = (batch[:, 2] + 1j * batch[:, 3]) / np.conj(tau)
    out = np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)
    return out[0] if arr.ndim == 1 else out


def section_translation_ff_map(sigma_prime: OneForm, inverse: bool = False) -> SmoothMap:
    """``section_translation_ff`` as a differentiable self-map of the focus-focus chart."""
    sign = -1.0 if inverse else 1.0

    def evaluator(x):
        b = jnp.stack(_ff_q(x), axis=-1)
        s = sigma_prime.fn(b)
        log_mod, arg = sign * -s[..., 0], sign * s[..., 1]
        tau = jnp.exp(log_mod + 1j * arg)
        z1 = tau * (x[..., 0] + 1j * x[..., 1])
        z2 = (x[..., 2] + 1j * x[..., 3]) / jnp.conj(tau)
        return jnp.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)

    return SmoothMap(4, 4, evaluator, autodiff=True, name="ff_translation")


def _resolve_section(model: "FibrationModel", section) -> "Section":
    return model.sections[section] if isinstance(section, str) else section


def _default_steps(xis: np.ndarray) -> int:
    # steps grow like length^1.5 to keep the midpoint drift bounded
    length = float(np.max(np.abs(xis), initial=0.0))
    return max(1, int(np.ceil(THETA_STEPS_PER_UNIT * length * np.sqrt(max(1.0, length)))))


def _walk(model: "FibrationModel", starts: np.ndarray, xis: np.ndarray, steps: Optional[int],
          checked: bool = True) -> np.ndarray:
    if not np.any(xis):
        return starts.copy()
    retry_config = RetryConfig.STRICT if steps else RetryConfig.DEFAULT
    return fiber_walk(model.structure, model.fibration, starts, xis, 1.0,
                      steps=steps or _default_steps(xis), checked=checked, retry_config=retry_config)


def corrected_hamiltonian(f: SmoothMap, b, xi, quadratic) -> SmoothMap:
    """H = xi . f + 1/2 (f - b)^T Q (f - b); its flow agrees with that of xi . f on f^-1(b)."""
    b = jnp.asarray(b, dtype=float)
    xi = jnp.asarray(xi, dtype=float)
    Q = jnp.asarray(quadratic, dtype=float)
    evaluate = f.evaluator if f.autodiff else f

    def evaluator(x):
        values = evaluate(x)
        shifted = values - b
        return (values @ xi + 0.5 * jnp.einsum("...i,ij,...j->...", shifted, Q, shifted))[..., None]

    return SmoothMap(f.dim_in, 1, evaluator, f.domain, f.autodiff, name="corrected_hamiltonian")


def build_theta(model: "FibrationModel", section, b, xi, *, correction=None,
                steps: Optional[int] = None) -> np.ndarray:
    """
    Theta~(b, xi): the time-one flow of H = <xi, f> applied to sigma(b).

    Args:
        model: the fibration.
        section: section name or Section.
        b: base point.
        xi: covector, or a batch (m, n) of covectors.
        correction: optional symmetric matrix Q adding 1/2 (f - b)^T Q (f - b) to H;
            the result must not depend on it.
        steps: integrator steps (default 200 per unit of |xi|).

    Raises:
        ConvergenceError: the walk drifted off the fiber by more than the drift tolerance.
        RankDeficiencyError: the walk came close to the critical set.
    """
    sigma = _resolve_section(model, section)
    b = np.asarray(b, dtype=float)
    x0 = sigma.map(b)
    xi = np.asarray(xi, dtype=float)
    xis = np.atleast_2d(xi)
    if correction is None:
        ends = _walk(model, np.repeat(x0[None], len(xis), axis=0), xis, steps)
    else:
        ends = np.stack([
            hamiltonian_flow(model.structure, corrected_hamiltonian(model.fibration, b, row, correction),
                             x0, 1.0, steps or _default_steps(row))
            for row in xis
        ])
        drift = float(np.max(np.abs(model.fibration(ends) - model.fibration(x0))))
        if drift > numerics().drift_tol:
            raise ConvergenceError(f"corrected flow drift {drift:.2e} exceeds {numerics().drift_tol:.0e}")
    return ends[0] if xi.ndim == 1 else ends


def theta_uniqueness_residual(model: "FibrationModel", section, b, xi, correction) -> float:
    """Distance between Theta~(b, xi) realized by <xi, f> and by a corrected Hamiltonian."""
    plain = build_theta(model, section, b, xi)
    corrected = build_theta(model, section, b, xi, correction=correction)
    return float(np.max(model.structure.distance(plain, corrected)))


def _refine_covectors(model: "FibrationModel", starts: np.ndarray, targets: np.ndarray, xis: np.ndarray,
                      tol: float, max_iter: int = 15) -> tuple[np.ndarray, np.ndarray]:
    """
    Newton on xi -> Theta~(b, xi) = target. The derivative in xi is the frame of
    Hamiltonian vector fields of the components of f at the current endpoint.
    """
    S = model.structure
    xis = xis.copy()
    errors = np.full(len(xis), np.inf)
    for iteration in range(max_iter):
        ends = _walk(model, starts, xis, None)
        residual = S.displacement(ends, targets)
        errors = np.linalg.norm(residual, axis=-1)
        logger.debug(f"covector refinement {iteration}: max error {errors.max():.2e}")
        if np.all(errors <= tol):
            break
        fields = S.vector_field(jacobian(model.fibration, ends))
        normal = np.einsum("mik,mjk->mij", fields, fields)
        step = np.linalg.solve(normal, np.einsum("mik,mk->mi", fields, residual)[..., None])[..., 0]
        xis = xis + np.where((errors <= tol)[:, None], 0.0, step)
    return xis, errors


def _successive_minima(vectors: np.ndarray, n: int) -> np.ndarray:
    basis: list[np.ndarray] = []
    for v in vectors[np.argsort(np.linalg.norm(vectors, axis=1), kind="stable")]:
        candidate = np.array(basis + [v])
        if np.linalg.matrix_rank(candidate, tol=1e-6) > len(basis):
            basis.append(v)
        if len(basis) == n:
            break
    return np.array(basis)


def _sign_normalize(basis: np.ndarray) -> np.ndarray:
    out = basis.copy()
    for row in out:
        leading = row[np.abs(row) > 1e-9]
        if leading.size and leading[0] < 0:
            row *= -1.0
    return out


def lattice_probe(model: "FibrationModel", section, b, *, radius: float = 8.0, grid: Optional[int] = None,
                  probe_radius: float = 0.75, tol: float = 1e-7, coarse_steps: int = 240) -> np.ndarray:
    """
    Period lattice Lambda_b = {xi : Theta~(b, xi) = sigma(b)} as an n x n matrix
    whose rows are a basis.

    Covector seeds on a grid in [-radius, radius]^n are flowed coarsely; seeds
    returning close to sigma(b) are refined by Newton, the refined periods are
    closed under differences and the successive minima form the basis.

    Raises:
        ConvergenceError: fewer than n independent periods were found.
    """
    sigma = _resolve_section(model, section)
    n = model.n
    b = np.asarray(b, dtype=float)
    x0 = sigma.map(b)
    grid = grid or (17 if n <= 2 else 9)
    axis = np.linspace(-radius, radius, grid)
    seeds = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    seeds = seeds[np.linalg.norm(seeds, axis=1) > 1e-9]
    starts = np.repeat(x0[None], len(seeds), axis=0)

    ends = _walk(model, starts, seeds, coarse_steps, checked=False)
    distance = model.structure.distance(ends, x0)
    order = np.argsort(distance)
    candidates = order[distance[order] < probe_radius][: 8 * n]
    if len(candidates) < n:
        raise ConvergenceError(f"lattice probe: only {len(candidates)} seeds return near the section")
    logger.debug(f"lattice probe at b={b}: refining {len(candidates)} seeds")

    refined, errors = _refine_covectors(model, starts[candidates], starts[candidates], seeds[candidates], tol)
    periods = refined[errors <= tol * 10]
    periods = periods[np.linalg.norm(periods, axis=1) > 1e-3]
    if len(periods) == 0:
        raise ConvergenceError("lattice probe: no seed converged to a period")
    differences = (periods[:, None, :] - periods[None, :, :]).reshape(-1, n)
    pool = np.concatenate([periods, differences])
    pool = pool[np.linalg.norm(pool, axis=1) > 1e-3]
    basis = _successive_minima(pool, n)
    if len(basis) < n:
        raise ConvergenceError(f"lattice probe found {len(basis)} independent periods, needs {n}")
    return _sign_normalize(basis)


def lattice_continue(model: "FibrationModel", section, path, basis, tol: float = 1e-7) -> np.ndarray:
    """
    Transport a lattice basis along a path of base points by Newton continuation.

    Returns:
        (k, n, n) bases, one per path point.

    Raises:
        ConvergenceError: a basis vector was lost along the path.
    """
    sigma = _resolve_section(model, section)
    path = np.atleast_2d(np.asarray(path, dtype=float))
    current = np.asarray(basis, dtype=float).copy()
    n = current.shape[0]
    out = np.empty((len(path), n, n))
    for k, b in enumerate(path):
        x0 = sigma.map(b)
        starts = np.repeat(x0[None], n, axis=0)
        current, errors = _refine_covectors(model, starts, starts, current, tol)
        if np.any(errors > 10 * tol):
            raise ConvergenceError(f"lattice continuation lost a period at path point {k} (error {errors.max():.2e})")
        out[k] = current
    return out


def theta_inverse(model: "FibrationModel", section, x, periods=None, tol: float = 1e-9) -> np.ndarray:
    """
    Covector xi (reduced modulo the lattice) with Theta~(f(x), xi) = x, by Newton
    seeded on the quarter-lattice points of the period matrix.
    """
    sigma = _resolve_section(model, section)
    x = coords_of(x)
    b = model.fibration(x)
    P = lattice_probe(model, sigma, b) if periods is None else np.asarray(periods, dtype=float)
    n = model.n
    quarter = np.linspace(0.0, 0.75, 4)
    grid = np.stack(np.meshgrid(*([quarter] * n), indexing="ij"), axis=-1).reshape(-1, n)
    seeds = grid @ P
    x0 = sigma.map(b)
    starts = np.repeat(x0[None], len(seeds), axis=0)
    ends = _walk(model, starts, seeds, 60, checked=False)
    best = int(np.argmin(model.structure.distance(ends, x)))
    xi, errors = _refine_covectors(model, starts[:1], x[None], seeds[best:best + 1], tol)
    if errors[0] > 10 * tol:
        raise ConvergenceError(f"Theta inversion stopped at distance {errors[0]:.2e}")
    c = fractional(np.linalg.solve(P.T, xi[0]))
    return c @ P


def involution_from_theta(model: "FibrationModel", section, x, periods=None) -> np.ndarray:
    """Theta o (-id) o Theta^-1 at x: the involution fixing the section, built from flows."""
    x = coords_of(x)
    b = model.fibration(x)
    P = lattice_probe(model, section, b) if periods is None else periods
    xi = theta_inverse(model, section, x, P)
    return build_theta(model, section, b, -xi)
