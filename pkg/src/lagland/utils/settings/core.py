from pydantic import field_validator

from lagland.utils.settings.base import ABCBaseSettings


class NumericSettings(ABCBaseSettings):
    """Tolerances and step counts of the numeric kernel."""

    NEWTON_TOL: float = 1e-12
    NEWTON_MAX_ITER: int = 50
    STEPS_PER_UNIT_TIME: int = 1000
    RANK_TOL: float = 1e-8
    FIBER_TOL: float = 1e-10
    DRIFT_TOL: float = 1e-8
    STRUCTURAL_TOL: float = 1e-12

    @field_validator("NEWTON_TOL", "RANK_TOL", "FIBER_TOL", "DRIFT_TOL", "STRUCTURAL_TOL")
    @classmethod
    def _positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("tolerances must be positive")
        return value

    @field_validator("NEWTON_MAX_ITER", "STEPS_PER_UNIT_TIME")
    @classmethod
    def _at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError("iteration and step counts must be at least 1")
        return value


class ModelSettings(ABCBaseSettings):
    """Parameters of the catalog models and semiflat charts."""

    THIN_LEG_EPSILON: float = 0.25
    THIN_LEG_M: float = 16.0
    THIN_LEG_VARIANT: str = "one_leg"
    DOMAIN_MARGIN: float = 1e-12
    # polynomial coefficients of H on the base, "c00,c10,c01,c20,c11,c02"
    SEMIFLAT_H: str = ""

    def model_post_init(self, __context):
        """
        Normalize the thin-leg variant name.

        Args:
            __context: Pydantic validation context (unused but required by Pydantic's
                      model lifecycle hooks)
        """
        self.THIN_LEG_VARIANT = self.THIN_LEG_VARIANT.strip().lower().replace("-", "_")

    @property
    def semiflat_h_coefficients(self) -> tuple[float, ...]:
        if not self.SEMIFLAT_H.strip():
            return ()
        return tuple(float(token) for token in self.SEMIFLAT_H.split(","))


class RunSettings(ABCBaseSettings):
    """Defaults for a CLI run; the --config file and flags override these."""

    LAGLAND_JOBS: int = 1
    LAGLAND_SEED: int = 42
    LAGLAND_SAMPLES: int = 1000
    LAGLAND_MODEL: str = "nodal"
    LAGLAND_SUITE: str = "all"
    LAGLAND_TOL: float = 1e-6
    LAGLAND_REGION: str = ""
    LAGLAND_OUT: str = ""
    LAGLAND_FORMAT: str = "table"


if __name__ == "__main__":
    print(NumericSettings().model_dump_json(indent=2))
    print(ModelSettings().model_dump_json(indent=2))
    print(RunSettings().model_dump_json(indent=2))
