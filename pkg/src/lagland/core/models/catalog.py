from enum import StrEnum


class ModelName(StrEnum):
    FF_NONPROPER = "ff_nonproper"
    NODAL = "nodal"
    GENERIC_SINGULAR = "generic_singular"
    POSITIVE_PROPER = "positive_proper"
    HARVEY_LAWSON = "harvey_lawson"
    NEGATIVE_AMOEBA = "negative_amoeba"
    NEGATIVE_THIN = "negative_thin"
    TORIC_REFERENCE = "toric_reference"
    DEFAULT = NODAL


class ThinLegVariant(StrEnum):
    ONE_LEG = "one_leg"
    THREE_LEG = "three_leg"
    DEFAULT = ONE_LEG
