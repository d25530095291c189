"""
Numeric kernel: symplectic pairings, differentiation, symplectic integration
and fiber exploration.

Points are stored as real vectors of length 2n. Every chart fixes which real
pairs form the complex coordinates, the matrix ``J`` of the pairing
``omega(u, v) = u^T J v`` and the sign linking a Hamiltonian to its vector
field. Maps are written against arrays of shape ``(..., dim)`` so they can be
evaluated on single points and on batches alike; maps written with
``jax.numpy`` are differentiated in forward mode, everything else by central
differences.
"""
import logging
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property
from typing import Callable, Optional, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from lagland.core.errors import (
    ConvergenceError,
    DimensionError,
    DomainError,
    RankDeficiencyError,
    SeamError,
)
from lagland.utils.retry import RetryConfig, retrying
from lagland.utils.settings import NumericSettings

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps
# rank checks per fiber walk, spread evenly over the trajectory
RANK_CHECKS = 20


@dataclass(frozen=True)
class NumericTolerances:
    """
    Tolerances and step counts shared by the solvers. Functions take them as
    defaults when no explicit value is passed; ``configure_numerics`` replaces
    them for the whole process.
    """
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    steps_per_unit_time: int = 1000
    rank_tol: float = 1e-8
    fiber_tol: float = 1e-10
    drift_tol: float = 1e-8

    @classmethod
    def from_settings(cls, settings: NumericSettings) -> "NumericTolerances":
        return cls(
            newton_tol=settings.NEWTON_TOL,
            newton_max_iter=settings.NEWTON_MAX_ITER,
            steps_per_unit_time=settings.STEPS_PER_UNIT_TIME,
            rank_tol=settings.RANK_TOL,
            fiber_tol=settings.FIBER_TOL,
            drift_tol=settings.DRIFT_TOL,
        )


_tolerances = NumericTolerances()


def numerics() -> NumericTolerances:
    return _tolerances


def configure_numerics(tolerances: NumericTolerances) -> None:
    """Set the process-wide solver defaults; call before worker threads start."""
    global _tolerances
    _tolerances = tolerances
    logger.debug(f"numeric tolerances: {tolerances}")


# triple-jump coefficients turning the midpoint rule into a fourth order method
_TRIPLE_JUMP = (
    1.0 / (2.0 - 2.0 ** (1.0 / 3.0)),
    -(2.0 ** (1.0 / 3.0)) / (2.0 - 2.0 ** (1.0 / 3.0)),
    1.0 / (2.0 - 2.0 ** (1.0 / 3.0)),
)


class ChartId(StrEnum):
    STANDARD = "standard"
    FOCUS_FOCUS = "focus_focus"
    COTANGENT = "cotangent"
    CYLINDER = "cylinder"


@dataclass(frozen=True, eq=False)
class SymplecticStructure:
    """
    Constant symplectic form on R^{2n} together with its chart conventions.

    Attributes:
        n: half the real dimension.
        pairing_matrix: antisymmetric, nondegenerate J with omega(u, v) = u^T J v.
        flow_sign: Hamiltonian vector fields are ``flow_sign * J^{-1} grad H``.
            +1 means i_X omega = -dH, -1 means i_X omega = +dH.
        chart_id: name of the coordinate convention.
        angle_periods: per coordinate, the period of an angle coordinate or 0.
    """
    n: int
    pairing_matrix: np.ndarray
    flow_sign: int
    chart_id: ChartId
    angle_periods: tuple[float, ...] = ()

    def __post_init__(self):
        J = np.asarray(self.pairing_matrix, dtype=float)
        if J.shape != (2 * self.n, 2 * self.n):
            raise DimensionError(f"pairing matrix must be {2 * self.n}x{2 * self.n}, got {J.shape}")
        if not np.allclose(J, -J.T, atol=0.0):
            raise ValueError("pairing matrix is not antisymmetric")
        if abs(np.linalg.det(J)) < 1e-12:
            raise ValueError("pairing matrix is degenerate")
        if self.flow_sign not in (1, -1):
            raise ValueError("flow_sign must be +1 or -1")
        object.__setattr__(self, "pairing_matrix", J)
        periods = tuple(self.angle_periods) or (0.0,) * (2 * self.n)
        if len(periods) != 2 * self.n:
            raise DimensionError("angle_periods must list one entry per coordinate")
        object.__setattr__(self, "angle_periods", periods)

    @property
    def dim(self) -> int:
        return 2 * self.n

    @cached_property
    def inverse_pairing(self) -> np.ndarray:
        return np.linalg.inv(self.pairing_matrix)

    @cached_property
    def angle_mask(self) -> np.ndarray:
        return np.asarray(self.angle_periods) > 0

    def vector_field(self, grad: np.ndarray) -> np.ndarray:
        """Hamiltonian vector field(s) from gradient(s) of shape (..., 2n)."""
        return self.flow_sign * grad @ self.inverse_pairing.T

    def vector_field_derivative(self, hess: np.ndarray) -> np.ndarray:
        return self.flow_sign * np.einsum("ij,...jk->...ik", self.inverse_pairing, hess)

    def displacement(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """y - x with angle coordinates wrapped to (-period/2, period/2]."""
        d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        if not self.angle_mask.any():
            return d
        periods = np.where(self.angle_mask, np.asarray(self.angle_periods), 1.0)
        wrapped = d - periods * np.round(d / periods)
        return np.where(self.angle_mask, wrapped, d)

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self.displacement(x, y), axis=-1)

    def embed(self, x: np.ndarray) -> np.ndarray:
        """
        Euclidean embedding for clustering: angle coordinates are replaced by
        points on a circle of the same circumference.
        """
        x = np.asarray(x, dtype=float)
        if not self.angle_mask.any():
            return x
        columns = []
        for k, period in enumerate(self.angle_periods):
            if period > 0:
                radius = period / (2 * np.pi)
                phase = 2 * np.pi * x[..., k] / period
                columns += [radius * np.cos(phase), radius * np.sin(phase)]
            else:
                columns.append(x[..., k])
        return np.stack(columns, axis=-1)

    def complexify(self, v: np.ndarray) -> np.ndarray:
        """Complex coordinates of (tangent) vectors: consecutive real pairs."""
        v = np.asarray(v, dtype=float)
        return v[..., 0::2] + 1j * v[..., 1::2]


def _block_standard(n: int) -> np.ndarray:
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _block_split(n: int) -> np.ndarray:
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def standard_structure(n: int) -> SymplecticStructure:
    """C^n with coordinates (Re z1, Im z1, ...), omega = sum dx^dy, i_X omega = -dH."""
    return SymplecticStructure(n, _block_standard(n), 1, ChartId.STANDARD)


def focus_focus_structure() -> SymplecticStructure:
    """
    C^2 with z1 = y1 + i y2, z2 = x1 + i x2, coordinates (y1, y2, x1, x2),
    omega = dx1^dy1 + dx2^dy2 and i_X omega = +dH, so that the flow of
    q1 = x1 y1 + x2 y2 is (e^{-t} z1, e^t z2).
    """
    return SymplecticStructure(2, _block_split(2), -1, ChartId.FOCUS_FOCUS)


def cotangent_structure(n: int) -> SymplecticStructure:
    """T*B with coordinates (b, alpha), omega = sum dalpha^db and i_X omega = +dH."""
    return SymplecticStructure(n, _block_split(n), -1, ChartId.COTANGENT)


def cylinder_structure(n: int) -> SymplecticStructure:
    """C^{n-1} x (interval x S^1): the last pair is (r, theta) with theta 2pi-periodic."""
    periods = (0.0,) * (2 * n - 1) + (2 * np.pi,)
    return SymplecticStructure(n, _block_standard(n), 1, ChartId.CYLINDER, periods)


def structure_for(chart_id: ChartId | str, n: int) -> SymplecticStructure:
    chart_id = ChartId(chart_id)
    if chart_id is ChartId.STANDARD:
        return standard_structure(n)
    if chart_id is ChartId.FOCUS_FOCUS:
        if n != 2:
            raise DimensionError("the focus-focus chart is four dimensional")
        return focus_focus_structure()
    if chart_id is ChartId.COTANGENT:
        return cotangent_structure(n)
    return cylinder_structure(n)


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """A point of R^{2n} labelled with the chart whose conventions it uses."""
    coords: np.ndarray
    chart_id: ChartId = ChartId.STANDARD

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 1 or coords.size % 2:
            raise DimensionError(f"phase point needs an even-length vector, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise DomainError("phase point has non-finite coordinates")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "chart_id", ChartId(self.chart_id))
        if self.chart_id is ChartId.FOCUS_FOCUS and coords.size != 4:
            raise DimensionError("focus-focus points have four coordinates")

    @property
    def n(self) -> int:
        return self.coords.size // 2

    @property
    def structure(self) -> SymplecticStructure:
        return structure_for(self.chart_id, self.n)

    @property
    def z(self) -> np.ndarray:
        return self.coords[0::2] + 1j * self.coords[1::2]

    @classmethod
    def from_complex(cls, z: Sequence[complex], chart_id: ChartId = ChartId.STANDARD) -> "PhasePoint":
        z = np.asarray(z, dtype=complex)
        coords = np.empty(2 * z.size)
        coords[0::2] = z.real
        coords[1::2] = z.imag
        return cls(coords, chart_id)

    def __repr__(self) -> str:
        return f"PhasePoint({np.array2string(self.coords, precision=6)}, chart={self.chart_id})"


def coords_of(x) -> np.ndarray:
    """Coordinates of a PhasePoint or array-like."""
    if isinstance(x, PhasePoint):
        return x.coords
    return np.asarray(x, dtype=float)


def _like(template, coords: np.ndarray):
    if isinstance(template, PhasePoint):
        return PhasePoint(coords, template.chart_id)
    return coords


def complex_to_real(z) -> np.ndarray:
    """Interleave real and imaginary parts: (..., n) complex -> (..., 2n) real."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


@dataclass(frozen=True, eq=False)
class Frame:
    """Ordered tangent vectors (rows of ``vectors``) at ``base``."""
    base: np.ndarray
    vectors: np.ndarray
    tol: float = 1e-10

    def __post_init__(self):
        vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        base = coords_of(self.base)
        if vectors.shape[1] != base.size:
            raise DimensionError("frame vectors and base point have different dimensions")
        singular = np.linalg.svd(vectors, compute_uv=False)
        if singular[-1] <= self.tol:
            raise RankDeficiencyError("frame vectors are linearly dependent", singular)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "base", base)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True, eq=False)
class SmoothMap:
    """
    A map R^{dim_in} -> R^{dim_out} with a domain predicate.

    ``evaluator`` takes arrays of shape (..., dim_in). When ``autodiff`` is set
    the evaluator is written with jax.numpy and differentiated in forward mode.
    Piecewise maps give ``seam`` (a real function whose zero set is the seam)
    and ``branches``: the smooth evaluators used where seam >= 0 and seam < 0.
    """
    dim_in: int
    dim_out: int
    evaluator: Callable
    domain: Optional[Callable] = None
    autodiff: bool = False
    seam: Optional[Callable] = None
    branches: Optional[tuple[Callable, Callable]] = None
    name: str = ""
    extras: dict = field(default_factory=dict)

    @cached_property
    def _compiled(self) -> Callable:
        return jax.jit(self.evaluator) if self.autodiff else self.evaluator

    @cached_property
    def _jacobian_fn(self) -> Callable:
        return jax.jit(jax.vmap(jax.jacfwd(self.evaluator)))

    @cached_property
    def _hessian_fn(self) -> Callable:
        return jax.jit(jax.vmap(jax.jacfwd(jax.jacfwd(self.evaluator))))

    @cached_property
    def _branch_jacobian_fns(self) -> dict[int, Callable]:
        if self.branches is None:
            return {}
        return {
            1: jax.jit(jax.vmap(jax.jacfwd(self.branches[0]))),
            -1: jax.jit(jax.vmap(jax.jacfwd(self.branches[1]))),
        }

    def in_domain(self, x) -> np.ndarray:
        x = np.atleast_2d(coords_of(x))
        if self.domain is None:
            return np.all(np.isfinite(x), axis=-1)
        return np.asarray(self.domain(x), dtype=bool) & np.all(np.isfinite(x), axis=-1)

    def check_domain(self, x) -> None:
        inside = self.in_domain(x)
        if not np.all(inside):
            bad = np.atleast_2d(coords_of(x))[~inside][0]
            raise DomainError(f"{self.name or 'map'} evaluated outside its domain at {bad}")

    def _finish(self, values, single: bool) -> np.ndarray:
        values = np.asarray(values, dtype=float).reshape(-1, self.dim_out)
        if not np.all(np.isfinite(values)):
            raise DomainError(f"{self.name or 'map'} produced non-finite values")
        return values[0] if single else values

    def __call__(self, x) -> np.ndarray:
        arr = coords_of(x)
        single = arr.ndim == 1
        batch = np.atleast_2d(arr)
        if batch.shape[-1] != self.dim_in:
            raise DimensionError(f"{self.name or 'map'} expects {self.dim_in} inputs, got {batch.shape[-1]}")
        self.check_domain(batch)
        return self._finish(self._compiled(batch), single)

    def evaluate_branch(self, x, side: int) -> np.ndarray:
        if self.branches is None:
            return self(x)
        arr = coords_of(x)
        single = arr.ndim == 1
        batch = np.atleast_2d(arr)
        self.check_domain(batch)
        branch = self.branches[0] if side > 0 else self.branches[1]
        return self._finish(branch(batch), single)

    def seam_value(self, x) -> np.ndarray:
        if self.seam is None:
            return np.ones(np.atleast_2d(coords_of(x)).shape[0])
        return np.asarray(self.seam(np.atleast_2d(coords_of(x))), dtype=float)

    def hessian(self, x) -> Optional[np.ndarray]:
        """Second derivatives (m, dim_out, dim_in, dim_in), or None without autodiff."""
        if not self.autodiff:
            return None
        batch = np.atleast_2d(coords_of(x))
        return np.asarray(self._hessian_fn(batch))

    def component(self, index: int) -> "SmoothMap":
        """The scalar map x -> self(x)[index]."""
        evaluator = self.evaluator

        def scalar(x):
            return evaluator(x)[..., index:index + 1]

        return SmoothMap(self.dim_in, 1, scalar, self.domain, self.autodiff, name=f"{self.name}[{index}]")

    def compose(self, inner: "SmoothMap", name: str = "") -> "SmoothMap":
        """self o inner."""
        if inner.dim_out != self.dim_in:
            raise DimensionError("cannot compose maps with mismatched dimensions")
        outer = self
        autodiff = outer.autodiff and inner.autodiff

        def evaluator(x):
            return outer.evaluator(inner.evaluator(x))

        def domain(x):
            inside = inner.in_domain(x)
            result = np.zeros(len(x), dtype=bool)
            if inside.any():
                result[inside] = outer.in_domain(np.atleast_2d(inner(x[inside])))
            return result

        if not autodiff:
            def evaluator(x):  # noqa: F811
                return outer(inner(x))

        return SmoothMap(inner.dim_in, outer.dim_out, evaluator, domain, autodiff,
                         name=name or f"{outer.name}o{inner.name}")


def identity_map(dim: int) -> SmoothMap:
    return SmoothMap(dim, dim, lambda x: x, autodiff=True, name="identity")


def linear_map(matrix, offset=None, name: str = "") -> SmoothMap:
    A = jnp.asarray(matrix, dtype=float)
    c = jnp.zeros(A.shape[0]) if offset is None else jnp.asarray(offset, dtype=float)
    return SmoothMap(A.shape[1], A.shape[0], lambda x: x @ A.T + c, autodiff=True, name=name or "linear")


def symplectic_pairing(S: SymplecticStructure, u, v) -> float | np.ndarray:
    """omega(u, v) = u^T J v; batched over leading axes."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[-1] != S.dim or v.shape[-1] != S.dim:
        raise DimensionError(f"pairing needs vectors of length {S.dim}")
    value = np.einsum("...i,ij,...j->...", u, S.pairing_matrix, v)
    return float(value) if np.ndim(value) == 0 else value


def _central_differences(evaluate: Callable, x: np.ndarray, dim_out: int, richardson: bool) -> np.ndarray:
    m, d = x.shape
    step = EPS ** (1.0 / 3.0) * np.maximum(1.0, np.abs(x))
    eye = np.eye(d)

    def differentiate(h):
        shift = h[:, :, None] * eye[None]
        plus = (x[:, None, :] + shift).reshape(-1, d)
        minus = (x[:, None, :] - shift).reshape(-1, d)
        values = np.asarray(evaluate(np.concatenate([plus, minus])), dtype=float).reshape(2, m, d, dim_out)
        return ((values[0] - values[1]) / (2.0 * h[:, :, None])).transpose(0, 2, 1)

    coarse = differentiate(step)
    if not richardson:
        return coarse
    fine = differentiate(step / 2.0)
    return (4.0 * fine - coarse) / 3.0


def _straddles_seam(m: SmoothMap, x: np.ndarray) -> np.ndarray:
    if m.seam is None:
        return np.zeros(len(x), dtype=bool)
    d = x.shape[1]
    step = EPS ** (1.0 / 3.0) * np.maximum(1.0, np.abs(x))
    shift = step[:, :, None] * np.eye(d)[None]
    stencil = np.concatenate([(x[:, None, :] + shift), (x[:, None, :] - shift), x[:, None, :]], axis=1)
    sides = np.sign(m.seam(stencil.reshape(-1, d))).reshape(len(x), -1)
    sides[sides == 0] = 1
    return np.any(sides != sides[:, -1:], axis=1)


def jacobian(m: SmoothMap, x, *, side: Optional[int] = None, method: str = "auto",
             richardson: bool = True) -> np.ndarray:
    """
    Jacobian of ``m`` at ``x`` (dim_out x dim_in, or batched).

    Forward-mode automatic differentiation is used for maps written with
    jax.numpy; otherwise central differences with step eps^(1/3) max(1, |x|),
    Richardson-extrapolated over two step sizes.

    Args:
        m: the map.
        x: point or batch of points.
        side: for piecewise maps, +1/-1 selects the branch on that side of the seam.
        method: "auto", "autodiff" or "central".
        richardson: extrapolate central differences over two steps.

    Raises:
        SeamError: the stencil straddles the seam and no side was chosen.
        DomainError: evaluation outside the domain.
    """
    arr = coords_of(x)
    single = arr.ndim == 1
    batch = np.atleast_2d(arr)
    m.check_domain(batch)
    if side is None and np.any(_straddles_seam(m, batch)):
        raise SeamError(f"{m.name or 'map'}: difference stencil straddles the seam; pass side=+1 or -1")

    use_autodiff = m.autodiff if method == "auto" else method == "autodiff"
    if use_autodiff and not m.autodiff:
        raise ValueError(f"{m.name or 'map'} is not written for automatic differentiation")

    if side is not None and m.branches is not None:
        if use_autodiff:
            result = np.asarray(m._branch_jacobian_fns[1 if side > 0 else -1](batch))
        else:
            branch = m.branches[0] if side > 0 else m.branches[1]
            result = _central_differences(branch, batch, m.dim_out, richardson)
    elif use_autodiff:
        result = np.asarray(m._jacobian_fn(batch))
    else:
        result = _central_differences(m._compiled, batch, m.dim_out, richardson)

    if not np.all(np.isfinite(result)):
        raise DomainError(f"{m.name or 'map'}: non-finite derivative")
    return result[0] if single else result


def pullback_residual(S: SymplecticStructure, m: SmoothMap, x, sign: int,
                      target: Optional[SymplecticStructure] = None, side: Optional[int] = None):
    """
    max |(Dm)^T J_target (Dm) - sign J_S|: zero for symplectic maps (sign=+1)
    and anti-symplectic maps (sign=-1).
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    target = target or S
    D = jacobian(m, x, side=side)
    pulled = np.einsum("...ki,kl,...lj->...ij", D, target.pairing_matrix, D)
    residual = np.max(np.abs(pulled - sign * S.pairing_matrix), axis=(-2, -1))
    return float(residual) if np.ndim(residual) == 0 else residual


def fiber_tangent_frame(f: SmoothMap, x, tol: Optional[float] = None, side: Optional[int] = None) -> Frame:
    """
    Orthonormal basis of ker Df at a regular point.

    Raises:
        RankDeficiencyError: the smallest singular value is below tol.
    """
    tol = numerics().rank_tol if tol is None else tol
    D = jacobian(f, coords_of(x), side=side)
    _, singular, vt = np.linalg.svd(D)
    if singular[-1] <= tol * max(1.0, singular[0]):
        raise RankDeficiencyError(f"{f.name or 'map'} drops rank at {coords_of(x)}", singular)
    return Frame(coords_of(x), vt[f.dim_out:])


def lagrangian_residual(S: SymplecticStructure, f: SmoothMap, x, tol: Optional[float] = None,
                        side: Optional[int] = None) -> float:
    """max |omega(v_i, v_j)| over the fiber tangent frame."""
    frame = fiber_tangent_frame(f, x, tol, side=side)
    gram = frame.vectors @ S.pairing_matrix @ frame.vectors.T
    return float(np.max(np.abs(gram)))


Field = Callable[[np.ndarray], tuple[np.ndarray, Optional[np.ndarray]]]


def scalar_field(H: SmoothMap) -> Field:
    """Gradient (and Hessian when available) of a Hamiltonian H: R^{2n} -> R."""
    if H.dim_out != 1:
        raise DimensionError("a Hamiltonian has one output")

    def gradient_and_hessian(x):
        grad = jacobian(H, x)[:, 0, :]
        hess = H.hessian(x)
        return grad, None if hess is None else hess[:, 0]

    return gradient_and_hessian


def fiber_field(f: SmoothMap, direction) -> Field:
    """Derivatives of H = sum_i direction_i f_i; direction may vary per point."""
    direction = np.asarray(direction, dtype=float)

    def gradient_and_hessian(x):
        xi = np.broadcast_to(direction, (len(x), f.dim_out))
        grad = np.einsum("mi,mid->md", xi, jacobian(f, x))
        hess = f.hessian(x)
        return grad, None if hess is None else np.einsum("mi,mijk->mjk", xi, hess)

    return gradient_and_hessian


def _midpoint_step(S: SymplecticStructure, gradient_and_hessian: Field, x: np.ndarray, h: float,
                   tol: float, max_iter: int) -> np.ndarray:
    grad, _ = gradient_and_hessian(x)
    y = x + h * S.vector_field(grad)
    eye = np.eye(S.dim)
    for iteration in range(max_iter):
        mid = 0.5 * (x + y)
        grad, hess = gradient_and_hessian(mid)
        vector = S.vector_field(grad)
        residual = y - x - h * vector
        error = np.max(np.abs(residual))
        if error <= tol:
            return y
        if not np.isfinite(error) or error > 1e8:
            raise ConvergenceError(f"implicit midpoint Newton diverged (residual {error:.3e})")
        if hess is None:
            # fixed point iteration, contracting for h * Lip(X) < 2
            y = x + h * vector
        else:
            jac = eye - 0.5 * h * S.vector_field_derivative(hess)
            y = y - np.linalg.solve(jac, residual[..., None])[..., 0]
    raise ConvergenceError(f"implicit midpoint Newton did not reach {tol:.1e} in {max_iter} iterations")


def integrate(S: SymplecticStructure, gradient_and_hessian: Field, x0, t: float, steps: Optional[int] = None,
              *, order: int = 4, tol: Optional[float] = None, max_iter: Optional[int] = None) -> np.ndarray:
    """
    Fixed-step implicit-midpoint integration of a Hamiltonian vector field.

    ``order=2`` is the plain midpoint rule; ``order=4`` composes three midpoint
    substeps (triple jump), which keeps the method symplectic and symmetric.
    """
    x = np.atleast_2d(coords_of(x0)).astype(float)
    tolerances = numerics()
    tol = tolerances.newton_tol if tol is None else tol
    max_iter = tolerances.newton_max_iter if max_iter is None else max_iter
    if steps is None:
        steps = max(1, int(np.ceil(tolerances.steps_per_unit_time * abs(t))))
    if t == 0.0:
        return x.copy()
    h = t / steps
    weights = _TRIPLE_JUMP if order == 4 else (1.0,)
    for _ in range(steps):
        for weight in weights:
            x = _midpoint_step(S, gradient_and_hessian, x, weight * h, tol, max_iter)
    return x


def hamiltonian_flow(S: SymplecticStructure, H: SmoothMap, x0, t: float, steps: Optional[int] = None,
                     **kwargs):
    """
    Time-t map of the Hamiltonian flow of H starting at x0 (single point or batch).

    The chart's flow sign fixes the convention; in the focus-focus chart the flow
    of q1 is (e^{-t} z1, e^t z2) and the flow of q2 is (e^{it} z1, e^{it} z2).

    Raises:
        ConvergenceError: inner Newton solve failed.
        DomainError: the trajectory left the domain of H.
    """
    single = coords_of(x0).ndim == 1
    result = integrate(S, scalar_field(H), x0, t, steps, **kwargs)
    return _like(x0, result[0]) if single else result


def _checked_walk(S: SymplecticStructure, f: SmoothMap, field_: Field, start: np.ndarray, t: float, steps: int,
                  rank_tol: float, drift_tol: float, **kwargs) -> np.ndarray:
    end = start
    for chunk in np.diff(np.linspace(0, steps, min(steps, RANK_CHECKS) + 1).round().astype(int)):
        end = integrate(S, field_, end, t * chunk / steps, int(chunk), **kwargs)
        singular = np.linalg.svd(jacobian(f, end), compute_uv=False)
        critical = singular[..., -1] <= rank_tol * np.maximum(1.0, singular[..., 0])
        if np.any(critical):
            raise RankDeficiencyError(f"fiber walk came within rank tolerance {rank_tol:.0e} of the critical set",
                                      singular)
    drift = float(np.max(np.abs(f(end) - f(start))))
    if drift > drift_tol:
        raise ConvergenceError(f"fiber walk drift {drift:.2e} exceeds {drift_tol:.0e} after {steps} steps")
    logger.debug(f"fiber walk over {steps} steps, drift {drift:.2e}")
    return end


def fiber_walk(S: SymplecticStructure, f: SmoothMap, x0, direction, t: float = 1.0,
               steps: Optional[int] = None, rank_tol: Optional[float] = None, drift_tol: Optional[float] = None,
               checked: bool = True, retry_config: RetryConfig = RetryConfig.STRICT, **kwargs):
    """
    Move inside the fiber through x0 along the flow of H = sum_i direction_i f_i.

    ``direction`` is a covector, or one covector per point when x0 is a batch.
    The relative rank of Df is monitored at RANK_CHECKS points of the trajectory
    and the drift |f(end) - f(start)| is bounded by ``drift_tol``. ``checked=False``
    skips both; only for seed walks whose endpoints are refined afterwards.
    A walk that drifts (or whose midpoint solve fails) is repeated with the step
    count multiplied under ``retry_config``.

    Raises:
        RankDeficiencyError: the trajectory came (numerically) close to the critical set.
        ConvergenceError: the drift exceeds ``drift_tol`` on every attempt.
    """
    tolerances = numerics()
    rank_tol = tolerances.rank_tol if rank_tol is None else rank_tol
    drift_tol = tolerances.drift_tol if drift_tol is None else drift_tol
    arr = coords_of(x0)
    single = arr.ndim == 1
    start = np.atleast_2d(arr)
    direction = np.asarray(direction, dtype=float)
    if not np.any(direction):
        return _like(x0, arr.copy())
    steps = steps if steps is not None else max(1, int(np.ceil(
        tolerances.steps_per_unit_time * abs(t) * max(1.0, float(np.max(np.abs(direction)))))))
    field_ = fiber_field(f, direction)
    if not checked:
        end = integrate(S, field_, start, t, steps, **kwargs)
        return _like(x0, end[0]) if single else end

    multiplier = retry_config.settings.step_multiplier
    for attempt in retrying(retry_config, ConvergenceError):
        with attempt:
            scaled = steps * multiplier ** (attempt.retry_state.attempt_number - 1)
            end = _checked_walk(S, f, field_, start, t, scaled, rank_tol, drift_tol, **kwargs)
    return _like(x0, end[0]) if single else end


def solve_fiber_point(f: SmoothMap, b, seed, *, tol: Optional[float] = None, max_iter: Optional[int] = None,
                      retry_config: RetryConfig = RetryConfig.DEFAULT, return_info: bool = False):
    """
    Gauss-Newton for f(x) = b started at ``seed``; each step is the minimum-norm
    (fiber-transverse) correction. Reseeds with a deterministic perturbation when
    an attempt fails.

    Returns:
        The point, or (point, info) with iterations, residual, the smallest
        singular value of Df and a ``near_critical`` flag when ``return_info``.

    Raises:
        ConvergenceError: no attempt converged.
    """
    tol = numerics().fiber_tol if tol is None else tol
    max_iter = numerics().newton_max_iter if max_iter is None else max_iter
    target = np.asarray(b, dtype=float)
    start = coords_of(seed).astype(float)
    jitter = retry_config.settings.jitter

    for attempt in retrying(retry_config, ConvergenceError):
        with attempt:
            number = attempt.retry_state.attempt_number
            x = start.copy()
            if number > 1:
                rng = np.random.default_rng(number)
                x = x + jitter * number * np.maximum(1.0, np.abs(x)) * rng.standard_normal(x.shape)
            x, iterations, residual = _gauss_newton(f, target, x, tol, max_iter)

    singular = np.linalg.svd(jacobian(f, x), compute_uv=False)
    near_critical = bool(singular[-1] <= 1e-6 * max(1.0, singular[0]))
    if near_critical:
        logger.warning(f"fiber point {x} is close to the critical set (sigma_min={singular[-1]:.2e})")
    point = _like(seed, x)
    if return_info:
        return point, {
            "iterations": iterations,
            "residual": residual,
            "min_singular_value": float(singular[-1]),
            "near_critical": near_critical,
        }
    return point


def _gauss_newton(f: SmoothMap, b: np.ndarray, x: np.ndarray, tol: float, max_iter: int):
    residual_vec = f(x) - b
    residual = float(np.max(np.abs(residual_vec)))
    for iteration in range(max_iter):
        if residual <= tol:
            return x, iteration, residual
        step = np.linalg.pinv(jacobian(f, x)) @ residual_vec
        scale = 1.0
        for _ in range(30):
            trial = x - scale * step
            if f.in_domain(trial)[0]:
                trial_vec = f(trial) - b
                trial_residual = float(np.max(np.abs(trial_vec)))
                if trial_residual < residual or trial_residual <= tol:
                    break
            scale *= 0.5
        else:
            raise ConvergenceError(f"Gauss-Newton line search failed at residual {residual:.3e}")
        x, residual_vec, residual = trial, trial_vec, trial_residual
        logger.debug(f"Gauss-Newton iteration {iteration}: residual {residual:.3e}")
    if residual <= tol:
        return x, max_iter, residual
    raise ConvergenceError(f"Gauss-Newton stopped at residual {residual:.3e} after {max_iter} iterations")


def flow_map_residual(S: SymplecticStructure, H: SmoothMap, x, t: float, steps: Optional[int] = None,
                      delta: float = 1e-5) -> float:
    """
    Symplecticity defect of the time-t flow at x, with the flow Jacobian taken
    from central differences of flows of perturbed initial conditions.
    """
    x = coords_of(x)
    d = x.size
    shifts = delta * np.eye(d)
    starts = np.concatenate([x + shifts, x - shifts])
    ends = integrate(S, scalar_field(H), starts, t, steps)
    D = ((ends[:d] - ends[d:]) / (2 * delta)).T
    return float(np.max(np.abs(D.T @ S.pairing_matrix @ D - S.pairing_matrix)))


def invert_map(m: SmoothMap, y, guess, tol: Optional[float] = None, max_iter: Optional[int] = None) -> np.ndarray:
    """Newton solve of m(x) = y for a self-map, batched over points."""
    tol = numerics().newton_tol if tol is None else tol
    max_iter = numerics().newton_max_iter if max_iter is None else max_iter
    y = np.atleast_2d(coords_of(y))
    x = np.atleast_2d(coords_of(guess)).astype(float).copy()
    for _ in range(max_iter):
        residual = m(x) - y
        if np.max(np.abs(residual)) <= tol:
            return x if np.ndim(coords_of(guess)) > 1 else x[0]
        x = x - np.linalg.solve(jacobian(m, x), residual[..., None])[..., 0]
    raise ConvergenceError("map inversion did not converge")
