"""
Catalog of explicit Lagrangian fibrations with their sections, group actions
and anti-symplectic involutions.
"""
import logging
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from lagland.core.errors import ConfigError, SeamError
from lagland.core.geometry import PhasePoint, coords_of, jacobian, numerics
from lagland.core.models.catalog import ModelName, ThinLegVariant
from lagland.core.models.focus_focus import ff_nonproper, generic_singular, glue_map, glue_smooth_map, nodal, psi_region
from lagland.core.models.interfaces import (
    Discriminant,
    DiscriminantKind,
    FibrationModel,
    GroupElement,
    GroupKind,
    RankReport,
    Section,
    Symmetry,
    SymmetryKind,
)
from lagland.core.models.negative import (
    negative_amoeba,
    negative_thin,
    reduced_gt,
    reduced_gt_one_sided_dt,
    seam_probe,
    thin_leg_exact_flow,
    thin_leg_flow,
    thin_leg_phi,
)
from lagland.core.models.positive import harvey_lawson, positive_proper
from lagland.core.models.toric import toric_reference
from lagland.utils.settings import ModelSettings

logger = logging.getLogger(__name__)

__all__ = [
    "Discriminant",
    "DiscriminantKind",
    "FibrationModel",
    "GroupElement",
    "GroupKind",
    "ModelName",
    "RankReport",
    "Section",
    "Symmetry",
    "SymmetryKind",
    "ThinLegVariant",
    "catalog",
    "evaluate",
    "get_model",
    "glue_map",
    "glue_smooth_map",
    "group_action",
    "involution",
    "is_regular",
    "psi_region",
    "reduced_gt",
    "reduced_gt_one_sided_dt",
    "seam_probe",
    "thin_leg_exact_flow",
    "thin_leg_flow",
    "thin_leg_phi",
]


def _builders(margin: float, variant: str, epsilon: float, M: float) -> dict[ModelName, Callable[[], FibrationModel]]:
    return {
        ModelName.FF_NONPROPER: ff_nonproper,
        ModelName.NODAL: lambda: nodal(margin),
        ModelName.GENERIC_SINGULAR: lambda: generic_singular(margin),
        ModelName.POSITIVE_PROPER: lambda: positive_proper(margin),
        ModelName.HARVEY_LAWSON: harvey_lawson,
        ModelName.NEGATIVE_AMOEBA: lambda: negative_amoeba(margin),
        ModelName.NEGATIVE_THIN: lambda: negative_thin(variant, epsilon, M, margin),
        ModelName.TORIC_REFERENCE: toric_reference,
    }


@lru_cache(maxsize=None)
def _build(name: ModelName, margin: float, variant: str, epsilon: float, M: float) -> FibrationModel:
    logger.debug(f"building model {name}")
    return _builders(margin, variant, epsilon, M)[name]()


def _parameters(settings: Optional[ModelSettings]) -> tuple[float, str, float, float]:
    settings = settings or ModelSettings()
    try:
        variant = ThinLegVariant(settings.THIN_LEG_VARIANT)
    except ValueError as e:
        raise ConfigError(f"unknown thin-leg variant {settings.THIN_LEG_VARIANT!r}") from e
    return settings.DOMAIN_MARGIN, str(variant), settings.THIN_LEG_EPSILON, settings.THIN_LEG_M


def get_model(name: ModelName | str, settings: Optional[ModelSettings] = None) -> FibrationModel:
    """
    Look up a catalog model by name. Models are immutable and cached per parameter set.

    Raises:
        ConfigError: unknown model name or thin-leg variant.
    """
    try:
        name = ModelName(name)
    except ValueError as e:
        raise ConfigError(f"unknown model {name!r}; choose from {', '.join(m.value for m in ModelName)}") from e
    return _build(name, *_parameters(settings))


def catalog(settings: Optional[ModelSettings] = None) -> list[FibrationModel]:
    """All catalog models in a fixed order."""
    return [get_model(name, settings) for name in ModelName]


def _wrap(template, coords: np.ndarray):
    if isinstance(template, PhasePoint):
        return PhasePoint(coords, template.chart_id)
    return coords


def evaluate(model: FibrationModel, x) -> np.ndarray:
    """f(x), with the branch chosen by the sign of mu for piecewise models."""
    return model.fibration(x)


def involution(model: FibrationModel, x, name: Optional[str] = None):
    """Apply the model's (default or named) anti-symplectic involution."""
    symmetry = model.symmetries[name or model.involution_name]
    return _wrap(x, symmetry.map(coords_of(x)))


def group_action(model: FibrationModel, g: GroupElement, x):
    """
    Act by a group element on x.

    Raises:
        ValueError: the model carries no action of the element's group.
    """
    if model.action is None or model.group_kind is not g.kind:
        raise ValueError(f"{model.name} has no {g.kind} action")
    model.fibration.check_domain(coords_of(x))
    return _wrap(x, model.action(g, coords_of(x)))


def _rank_report(D: np.ndarray, n: int, tol: float) -> RankReport:
    singular = np.linalg.svd(D, compute_uv=False)
    margin = float(singular[-1] / max(1.0, singular[0]))
    rank = int(np.sum(singular > tol * max(1.0, singular[0])))
    return RankReport(tuple(float(s) for s in singular), rank, margin, rank == n)


def is_regular(model: FibrationModel, x, tol: Optional[float] = None) -> tuple[bool, RankReport]:
    """
    Whether Df has full rank n at x, with a singular-value margin above tol.

    Raises:
        SeamError: x lies on the seam of a piecewise model; the error carries the
            rank reports of both one-sided Jacobians.
    """
    tol = numerics().rank_tol if tol is None else tol
    point = coords_of(x)
    try:
        D = jacobian(model.fibration, point)
    except SeamError:
        one_sided = {side: _rank_report(jacobian(model.fibration, point, side=side), model.n, tol) for side in (1, -1)}
        raise SeamError(f"{model.name}: {point} is on the seam", one_sided) from None
    report = _rank_report(D, model.n, tol)
    return report.regular, report
